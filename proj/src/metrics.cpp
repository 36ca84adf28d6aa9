#include "sift/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include "sift/csv.hpp"
#include "sift/error.hpp"
#include "sift/session.hpp"
#include "sift/text.hpp"

namespace sift {

ScreeningResult screening_metrics(const std::set<ArticleId>& predicted, const std::set<ArticleId>& gold)
{
    if (gold.empty()) {
        throw Error(ErrorCode::EmptyGold, "");
    }
    ScreeningResult r;
    r.predicted = predicted;
    r.gold = gold;
    for (const auto& id : predicted) {
        r.true_positives += gold.count(id);
    }
    const auto tp = static_cast<double>(r.true_positives);
    r.precision = predicted.empty() ? 0.0 : tp / static_cast<double>(predicted.size());
    r.recall = tp / static_cast<double>(gold.size());
    r.f1 = r.precision + r.recall > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

std::set<ArticleId> included_ids(const Corpus& corpus)
{
    std::set<ArticleId> out;
    for (const auto& a : corpus.articles()) {
        if (a.decision == Decision::Included) {
            out.insert(a.id);
        }
    }
    return out;
}

std::set<ArticleId> system_included_ids(const Corpus& corpus, std::span<const AgentState> agents)
{
    std::set<ArticleId> forced;
    for (const auto& a : agents) {
        for (const auto& t : a.trajectory) {
            if (t.forced) {
                forced.insert(t.article);
            }
        }
    }
    std::set<ArticleId> out;
    for (const auto& id : included_ids(corpus)) {
        if (forced.count(id) == 0) {
            out.insert(id);
        }
    }
    return out;
}

std::string export_corpus_csv(const Corpus& corpus, std::span<const int> clusters, std::span<const int> owner)
{
    std::string out(k_export_header);
    out += "\n";
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        const auto& a = corpus.at(i);
        out += csv::format_row({
            a.id,
            a.title,
            i < clusters.size() ? std::to_string(clusters[i]) : std::string(),
            i < owner.size() ? std::to_string(owner[i]) : std::string(),
            std::string(to_string(a.read_state)),
            std::string(to_string(a.decision)),
            a.exclusion_reason,
            a.summary_phrase,
        });
    }
    return out;
}

std::set<ArticleId> read_gold(std::string_view document)
{
    std::set<ArticleId> out;
    const auto rows = csv::parse(document);
    if (rows.empty()) {
        return out;
    }
    const auto& header = rows.front();
    std::optional<std::size_t> id_col;
    std::optional<std::size_t> flag_col;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const auto h = text::to_lower(text::trim(header[c]));
        if (h == "id") {
            id_col = c;
        } else if (h == "included" || h == "include" || h == "label") {
            flag_col = c;
        }
    }
    const std::size_t first = id_col ? 1 : 0;
    const std::size_t col = id_col.value_or(0);
    for (std::size_t r = first; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (col >= row.size()) {
            continue;
        }
        const auto id = text::trim(row[col]);
        if (id.empty()) {
            continue;
        }
        if (flag_col) {
            const auto v = *flag_col < row.size() ? text::to_lower(text::trim(row[*flag_col])) : std::string();
            if (v != "1" && v != "true" && v != "yes" && v != "included") {
                continue;
            }
        }
        out.insert(id);
    }
    return out;
}

std::size_t ComparisonTable::multi_recall_not_worse() const
{
    return static_cast<std::size_t>(std::count_if(
        rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.multi.recall >= r.single.recall; }));
}

namespace {

std::string fixed(double v, int digits = 4)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

std::string ComparisonTable::to_csv() const
{
    std::string out =
        "seed,k,multi_precision,multi_recall,multi_f1,single_precision,single_recall,single_f1\n";
    for (const auto& r : rows) {
        out += csv::format_row({std::to_string(r.seed), std::to_string(r.k), fixed(r.multi.precision),
                                fixed(r.multi.recall), fixed(r.multi.f1), fixed(r.single.precision),
                                fixed(r.single.recall), fixed(r.single.f1)});
    }
    return out;
}

std::string ComparisonTable::summary() const
{
    if (rows.empty()) {
        return "no runs\n";
    }
    double mp = 0, mr = 0, mf = 0, sp = 0, sr = 0, sf = 0, k = 0;
    for (const auto& r : rows) {
        mp += r.multi.precision;
        mr += r.multi.recall;
        mf += r.multi.f1;
        sp += r.single.precision;
        sr += r.single.recall;
        sf += r.single.f1;
        k += r.k;
    }
    const auto n = static_cast<double>(rows.size());
    std::string out;
    out += "seeds: " + std::to_string(rows.size()) + ", mean k: " + fixed(k / n, 2) + "\n";
    out += "multi-agent   P " + fixed(mp / n) + "  R " + fixed(mr / n) + "  F1 " + fixed(mf / n) + "\n";
    out += "single-agent  P " + fixed(sp / n) + "  R " + fixed(sr / n) + "  F1 " + fixed(sf / n) + "\n";
    out += "multi recall >= single recall in " + std::to_string(multi_recall_not_worse()) + "/"
        + std::to_string(rows.size()) + " seeds\n";
    return out;
}

ComparisonTable compare_partitioning(const std::vector<SourceRecord>& records, const SessionConfig& base,
                                     const std::set<ArticleId>& gold, std::span<const std::uint64_t> seeds,
                                     int total_budget, std::shared_ptr<Provider> provider)
{
    const auto run = [&](std::uint64_t seed, std::optional<int> k) {
        SessionConfig cfg = base;
        cfg.seed = seed;
        cfg.k = k;
        cfg.total_budget = total_budget;
        Session s("compare", cfg, provider);
        s.upload_records(records);
        s.build_map();
        s.start();
        s.run_until_quiesced();
        return std::pair{s.clusters().k, screening_metrics(included_ids(s.corpus()), gold)};
    };
    ComparisonTable table;
    for (const auto seed : seeds) {
        ComparisonRow row;
        row.seed = seed;
        auto [k, multi] = run(seed, base.k);
        row.k = k;
        row.multi = std::move(multi);
        row.single = run(seed, 1).second;
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace sift
