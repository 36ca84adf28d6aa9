#include "sift/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>

#include <json.hpp>

#include "sift/csv.hpp"
#include "sift/error.hpp"
#include "sift/provider.hpp"
#include "sift/text.hpp"
#include "sift/vecmath.hpp"

namespace sift {

std::string_view to_string(ReadState s) noexcept
{
    return s == ReadState::Read ? "Read" : "Unread";
}

std::string_view to_string(Decision d) noexcept
{
    switch (d) {
    case Decision::Undecided: return "Undecided";
    case Decision::Included: return "Included";
    case Decision::Excluded: return "Excluded";
    }
    return "Undecided";
}

std::string ArticleRecord::embedding_text() const
{
    return title + "\n" + abstract;
}

Corpus::Corpus(std::vector<ArticleRecord> articles, std::string research_question)
    : articles_(std::move(articles))
    , question_(std::move(research_question))
{
    index_.reserve(articles_.size());
    for (std::size_t i = 0; i < articles_.size(); ++i) {
        if (!index_.emplace(articles_[i].id, i).second) {
            throw Error(ErrorCode::DuplicateId, articles_[i].id);
        }
    }
}

std::optional<std::size_t> Corpus::index_of(std::string_view id) const
{
    const auto it = index_.find(std::string(id));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

const ArticleRecord& Corpus::find(std::string_view id) const
{
    const auto idx = index_of(id);
    if (!idx) {
        throw Error(ErrorCode::UnknownArticle, std::string(id));
    }
    return articles_[*idx];
}

ArticleRecord& Corpus::find(std::string_view id)
{
    const auto idx = index_of(id);
    if (!idx) {
        throw Error(ErrorCode::UnknownArticle, std::string(id));
    }
    return articles_[*idx];
}

bool Corpus::embedded() const noexcept
{
    if (question_embedding_.empty()) {
        return false;
    }
    return std::all_of(articles_.begin(), articles_.end(), [&](const ArticleRecord& a) {
        return a.embedding.size() == question_embedding_.size();
    });
}

Corpus ingest(const std::vector<SourceRecord>& source, std::string research_question)
{
    if (source.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "");
    }
    std::vector<ArticleRecord> articles;
    articles.reserve(source.size());
    std::set<std::string> seen;
    for (std::size_t i = 0; i < source.size(); ++i) {
        const auto& rec = source[i];
        const std::size_t row = rec.row != 0 ? rec.row : i + 1;
        const auto where = [&](std::string_view field) {
            return "row " + std::to_string(row) + ": " + std::string(field);
        };
        ArticleRecord a;
        a.id = text::trim(rec.id);
        a.title = text::trim(rec.title);
        a.abstract = text::trim(rec.abstract);
        a.metadata = rec.metadata;
        if (a.id.empty()) {
            throw Error(ErrorCode::MissingField, where("id"));
        }
        if (a.title.empty()) {
            throw Error(ErrorCode::MissingField, where("title"));
        }
        if (!seen.insert(a.id).second) {
            throw Error(ErrorCode::DuplicateId, a.id);
        }
        a.abstract_missing = a.abstract.empty();
        articles.push_back(std::move(a));
    }
    return Corpus(std::move(articles), std::move(research_question));
}

std::vector<SourceRecord> read_csv_records(std::string_view document)
{
    const auto rows = csv::parse(document);
    if (rows.empty()) {
        return {};
    }
    std::vector<std::string> header;
    for (const auto& h : rows.front()) {
        header.push_back(text::to_lower(text::trim(h)));
    }
    const auto column = [&](std::string_view name) -> std::optional<std::size_t> {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = column("id");
    const auto title_col = column("title");
    const auto abstract_col = column("abstract");
    for (const auto& [name, col] : {std::pair{"id", id_col}, {"title", title_col}, {"abstract", abstract_col}}) {
        if (!col) {
            throw Error(ErrorCode::MissingField, std::string("header: ") + name);
        }
    }

    std::vector<SourceRecord> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const bool blank = std::all_of(row.begin(), row.end(), [](const std::string& f) { return f.empty(); });
        if (blank) {
            continue;
        }
        SourceRecord rec;
        rec.row = r + 1;
        const auto cell = [&](std::size_t c) -> std::string { return c < row.size() ? row[c] : std::string(); };
        if (*id_col >= row.size()) {
            throw Error(ErrorCode::MissingField, "row " + std::to_string(rec.row) + ": id");
        }
        if (*title_col >= row.size()) {
            throw Error(ErrorCode::MissingField, "row " + std::to_string(rec.row) + ": title");
        }
        if (*abstract_col >= row.size()) {
            throw Error(ErrorCode::MissingField, "row " + std::to_string(rec.row) + ": abstract");
        }
        rec.id = cell(*id_col);
        rec.title = cell(*title_col);
        rec.abstract = cell(*abstract_col);
        for (std::size_t c = 0; c < header.size() && c < row.size(); ++c) {
            if (c == *id_col || c == *title_col || c == *abstract_col || header[c].empty()) {
                continue;
            }
            if (!row[c].empty()) {
                rec.metadata[header[c]] = row[c];
            }
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<SourceRecord> read_jsonl_records(std::string_view document)
{
    std::vector<SourceRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= document.size()) {
        const std::size_t nl = document.find('\n', pos);
        const auto line = text::trim(document.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        ++line_no;
        pos = nl == std::string_view::npos ? document.size() + 1 : nl + 1;
        if (line.empty()) {
            continue;
        }
        const auto obj = nlohmann::json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) {
            throw Error(ErrorCode::MalformedUpload, "line " + std::to_string(line_no) + ": not a JSON object");
        }
        SourceRecord rec;
        rec.row = line_no;
        for (const char* field : {"id", "title", "abstract"}) {
            const auto it = obj.find(field);
            if (it == obj.end() || !(it->is_string() || it->is_number())) {
                throw Error(ErrorCode::MissingField, "row " + std::to_string(line_no) + ": " + field);
            }
        }
        const auto as_text = [](const nlohmann::json& v) {
            return v.is_string() ? v.get<std::string>() : v.dump();
        };
        rec.id = as_text(obj["id"]);
        rec.title = as_text(obj["title"]);
        rec.abstract = as_text(obj["abstract"]);
        for (const auto& [key, value] : obj.items()) {
            if (key == "id" || key == "title" || key == "abstract" || value.is_null()) {
                continue;
            }
            rec.metadata[key] = as_text(value);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<SourceRecord> read_records(std::string_view document)
{
    const auto first = document.find_first_not_of(" \t\r\n");
    if (first != std::string_view::npos && document[first] == '{') {
        return read_jsonl_records(document);
    }
    return read_csv_records(document);
}

void embed_corpus(Corpus& corpus, Provider& provider, std::size_t batch_size)
{
    if (corpus.empty()) {
        throw Error(ErrorCode::EmptyCorpus, "");
    }
    batch_size = std::max<std::size_t>(batch_size, 1);

    std::vector<std::string> texts;
    texts.reserve(corpus.size() + 1);
    texts.push_back(corpus.research_question());
    for (const auto& a : corpus.articles()) {
        texts.push_back(a.embedding_text());
    }

    // Batches go out concurrently; results land by position, so the
    // outcome is independent of completion order.
    std::vector<std::future<std::vector<Embedding>>> pending;
    for (std::size_t start = 0; start < texts.size(); start += batch_size) {
        const std::size_t end = std::min(texts.size(), start + batch_size);
        pending.push_back(std::async(std::launch::async, [&provider, &texts, start, end] {
            return provider.embed(std::span<const std::string>(texts.data() + start, end - start));
        }));
    }
    std::vector<Embedding> results;
    results.reserve(texts.size());
    for (auto& f : pending) {
        auto batch = f.get();
        for (auto& e : batch) {
            results.push_back(std::move(e));
        }
    }
    if (results.size() != texts.size()) {
        throw Error(ErrorCode::DimensionMismatch, "provider returned " + std::to_string(results.size())
                                                      + " vectors for " + std::to_string(texts.size()) + " texts");
    }
    const std::size_t dim = results.front().values.size();
    for (auto& r : results) {
        if (r.values.size() != dim || dim == 0) {
            throw Error(ErrorCode::DimensionMismatch, "expected dimension " + std::to_string(dim));
        }
        if (std::abs(vec::norm(r.values) - 1.0) > 1e-12 && !vec::normalize(r.values)) {
            r.values = canonical_unit_vector(dim);
            r.degenerate = true;
        }
    }

    corpus.set_question_embedding(std::move(results.front().values));
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        auto& a = corpus.at(i);
        a.embedding = std::move(results[i + 1].values);
        a.embedding_degenerate = results[i + 1].degenerate;
        a.relevance.reset();
    }
    score_relevance(corpus);
}

void score_relevance(Corpus& corpus)
{
    if (!corpus.embedded()) {
        throw Error(ErrorCode::EmbeddingsMissing, "");
    }
    const auto& q = corpus.question_embedding();
    for (auto& a : corpus.articles()) {
        a.relevance = std::clamp(vec::dot(q, a.embedding), -1.0, 1.0);
    }
}

}  // namespace sift
