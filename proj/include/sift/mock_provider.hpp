#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sift/provider.hpp"

namespace sift {

/// Keyword-driven stand-in for a language model. Pure and deterministic:
/// the same request always yields the same text, on every platform.
///
/// Retrieve: selects every candidate whose content tokens overlap the
///   reference text (question, detailed focus, inclusion criteria) in at
///   least `overlap_threshold` of the candidate's own tokens; otherwise
///   "skip".
/// Read: related_to_query by the same rule, additionally gated by the
///   criteria keyword rules below; the summary is the title plus the first
///   two abstract sentences.
/// Synthesize: merges the new summary with the stored summary of highest
///   cosine similarity above `merge_threshold`; in final mode integrates
///   everything it is given.
/// Reflect: "focus on X" narrows the criteria to X, "exclude X" excludes
///   it, a sentence about summaries becomes the summarization update, and
///   "set <field> to: <value>" echoes an instruct edit.
///
/// Criteria keyword rules: each "only <phrase>" requires, and each
/// "exclude <phrase>" forbids, the first non-generic content token of the
/// phrase.
struct MockPolicy {
    double overlap_threshold = 0.12;
    double merge_threshold = 0.3;
    std::size_t dimension = 256;
};

namespace mock {

/// |tokens(candidate) ∩ tokens(reference)| / |tokens(candidate)| over
/// content-token sets; 0 when the candidate has no content tokens.
[[nodiscard]] double token_overlap(std::string_view candidate, std::string_view reference);

struct CriteriaRules {
    std::set<std::string> required;
    std::set<std::string> excluded;
};

[[nodiscard]] CriteriaRules criteria_rules(std::string_view criteria);

/// Signed feature hashing of content-token counts, L2-normalised.
[[nodiscard]] Embedding hash_embed(std::string_view text, std::size_t dimension);

/// Drops <citation>..</citation> tags, keeping surrounding text.
[[nodiscard]] std::string strip_citations(std::string_view text);

}  // namespace mock

class MockProvider final : public Provider {
public:
    explicit MockProvider(MockPolicy policy = {});

    std::string complete(const CompletionRequest& request) override;
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    [[nodiscard]] std::string name() const override { return "mock"; }

    [[nodiscard]] const MockPolicy& policy() const noexcept { return policy_; }

private:
    [[nodiscard]] std::string retrieve(const CompletionRequest& request) const;
    [[nodiscard]] std::string read(const CompletionRequest& request) const;
    [[nodiscard]] std::string synthesize(const CompletionRequest& request) const;
    [[nodiscard]] std::string reflect(const CompletionRequest& request) const;

    MockPolicy policy_;
};

}  // namespace sift
