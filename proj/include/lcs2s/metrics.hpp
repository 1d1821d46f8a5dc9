#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lcs2s {

using Tokens = std::vector<std::string>;

/// Removes "</s>" and "<pad>" tokens.
Tokens strip_special(const Tokens& tokens);

struct BleuBreakdown {
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
  double score = 0.0;
  std::size_t candidate_length = 0;
  std::size_t reference_length = 0;
};

/// Corpus BLEU-4, single reference, no smoothing: clipped n-gram counts are
/// pooled over the corpus, any zero precision gives 0.
BleuBreakdown bleu4_breakdown(std::span<const Tokens> candidates, std::span<const Tokens> references);
double bleu4(std::span<const Tokens> candidates, std::span<const Tokens> references);

/// Mean over pairs of the ROUGE-N F1 (n = 1 or 2).
double rouge_n(int n, std::span<const Tokens> candidates, std::span<const Tokens> references);

/// Mean over pairs of the LCS-based F1.
double rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

struct BucketRow {
  std::size_t lower = 0;  // reference lengths in [lower, upper)
  std::size_t upper = 0;
  std::size_t pairs = 0;
  double bleu4 = 0.0;
  double rouge2_f1 = 0.0;
};

/// Groups pairs by floor(reference length / width); empty buckets are omitted.
std::vector<BucketRow> length_bucketed_eval(std::span<const Tokens> candidates,
                                            std::span<const Tokens> references, std::size_t bucket_width = 10);

struct EvalReport {
  double bleu4 = 0.0;
  double rouge1_f1 = 0.0;
  double rouge2_f1 = 0.0;
  double rougeL_f1 = 0.0;
  std::size_t pairs = 0;
  std::vector<BucketRow> buckets;

  std::string to_text() const;
  std::string to_json() const;
};

/// Strips special tokens, then computes every metric and the length buckets.
EvalReport evaluate(std::span<const Tokens> candidates, std::span<const Tokens> references,
                    std::size_t bucket_width = 10);

}  // namespace lcs2s
