#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace sift {

class Provider;

using ArticleId = std::string;

enum class ReadState { Unread, Read };
enum class Decision { Undecided, Included, Excluded };

[[nodiscard]] std::string_view to_string(ReadState s) noexcept;
[[nodiscard]] std::string_view to_string(Decision d) noexcept;

/// One title+abstract record. Screening fields are written only by the
/// agent that owns the article.
struct ArticleRecord {
    ArticleId id;
    std::string title;
    std::string abstract;
    std::map<std::string, std::string> metadata;
    bool abstract_missing = false;

    std::vector<double> embedding;
    bool embedding_degenerate = false;
    std::optional<double> relevance;

    ReadState read_state = ReadState::Unread;
    Decision decision = Decision::Undecided;
    std::string exclusion_reason;
    std::string summary_phrase;
    std::optional<int> reader;

    /// Text handed to the embedder: title, newline, abstract.
    [[nodiscard]] std::string embedding_text() const;
};

/// Raw ingestion input; `row` is the 1-based source line for diagnostics.
struct SourceRecord {
    std::string id;
    std::string title;
    std::string abstract;
    std::map<std::string, std::string> metadata;
    std::size_t row = 0;
};

class Corpus {
public:
    Corpus() = default;
    Corpus(std::vector<ArticleRecord> articles, std::string research_question);

    [[nodiscard]] const std::vector<ArticleRecord>& articles() const noexcept { return articles_; }
    [[nodiscard]] std::vector<ArticleRecord>& articles() noexcept { return articles_; }
    [[nodiscard]] std::size_t size() const noexcept { return articles_.size(); }
    [[nodiscard]] bool empty() const noexcept { return articles_.empty(); }

    [[nodiscard]] const ArticleRecord& at(std::size_t index) const { return articles_.at(index); }
    [[nodiscard]] ArticleRecord& at(std::size_t index) { return articles_.at(index); }

    /// Position of `id` in ingestion order.
    [[nodiscard]] std::optional<std::size_t> index_of(std::string_view id) const;

    /// Throws Error(UnknownArticle).
    [[nodiscard]] const ArticleRecord& find(std::string_view id) const;
    [[nodiscard]] ArticleRecord& find(std::string_view id);

    [[nodiscard]] const std::string& research_question() const noexcept { return question_; }
    void set_research_question(std::string q) { question_ = std::move(q); }

    [[nodiscard]] const std::vector<double>& question_embedding() const noexcept { return question_embedding_; }
    void set_question_embedding(std::vector<double> e) { question_embedding_ = std::move(e); }

    [[nodiscard]] bool embedded() const noexcept;
    [[nodiscard]] std::size_t dimension() const noexcept { return question_embedding_.size(); }

private:
    std::vector<ArticleRecord> articles_;
    std::unordered_map<std::string, std::size_t> index_;
    std::string question_;
    std::vector<double> question_embedding_;
};

/// Builds a corpus in source order. Throws EmptyCorpus, DuplicateId(id) or
/// MissingField("row N: field"). Embeddings and relevance stay unset.
[[nodiscard]] Corpus ingest(const std::vector<SourceRecord>& source, std::string research_question);

/// Parses a CSV document whose header names at least id, title and
/// abstract; other columns (year, ...) become metadata.
[[nodiscard]] std::vector<SourceRecord> read_csv_records(std::string_view document);

/// Parses line-delimited JSON objects with the same fields.
[[nodiscard]] std::vector<SourceRecord> read_jsonl_records(std::string_view document);

/// Picks the reader by content: a first non-blank character of '{' means
/// line-delimited JSON, anything else CSV.
[[nodiscard]] std::vector<SourceRecord> read_records(std::string_view document);

/// Embeds the research question and every article through `provider`, in
/// batches of `batch_size`, writing results back in article order. Throws
/// DimensionMismatch when the provider returns vectors of differing size.
void embed_corpus(Corpus& corpus, Provider& provider, std::size_t batch_size = 64);

/// relevance_i = <question, embedding_i>, clamped to [-1, 1]. Throws
/// EmbeddingsMissing.
void score_relevance(Corpus& corpus);

}  // namespace sift
