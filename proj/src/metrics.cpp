#include "lcs2s/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "lcs2s/errors.hpp"

namespace lcs2s {

namespace {

using NgramCounts = std::map<Tokens, std::size_t>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                    tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

std::size_t clipped_overlap(const NgramCounts& cand, const NgramCounts& ref) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    const auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

std::size_t total(const NgramCounts& counts) {
  std::size_t n = 0;
  for (const auto& [gram, count] : counts) n += count;
  return n;
}

void check_aligned(const char* metric, std::span<const Tokens> candidates, std::span<const Tokens> references) {
  if (candidates.size() != references.size()) {
    throw ContractError(std::string(metric) + ": " + std::to_string(candidates.size()) + " candidates vs " +
                        std::to_string(references.size()) + " references");
  }
  if (references.empty()) throw ContractError(std::string(metric) + ": no pairs");
}

double f1(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

}  // namespace

Tokens strip_special(const Tokens& tokens) {
  Tokens out;
  for (const auto& t : tokens) {
    if (t != "</s>" && t != "<pad>") out.push_back(t);
  }
  return out;
}

BleuBreakdown bleu4_breakdown(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  check_aligned("bleu4", candidates, references);
  std::array<std::size_t, 4> matches{};
  std::array<std::size_t, 4> totals{};
  BleuBreakdown out;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    out.candidate_length += candidates[i].size();
    out.reference_length += references[i].size();
    for (std::size_t n = 1; n <= 4; ++n) {
      const NgramCounts cand = count_ngrams(candidates[i], n);
      matches[n - 1] += clipped_overlap(cand, count_ngrams(references[i], n));
      totals[n - 1] += total(cand);
    }
  }
  double log_sum = 0.0;
  bool zero = false;
  for (std::size_t n = 0; n < 4; ++n) {
    out.precisions[n] = totals[n] > 0 ? static_cast<double>(matches[n]) / static_cast<double>(totals[n]) : 0.0;
    if (out.precisions[n] == 0.0) zero = true;
    else log_sum += std::log(out.precisions[n]);
  }
  const auto c = static_cast<double>(out.candidate_length);
  const auto r = static_cast<double>(out.reference_length);
  out.brevity_penalty = c >= r ? 1.0 : (c > 0.0 ? std::exp(1.0 - r / c) : 0.0);
  out.score = zero ? 0.0 : out.brevity_penalty * std::exp(log_sum / 4.0);
  return out;
}

double bleu4(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  return bleu4_breakdown(candidates, references).score;
}

double rouge_n(int n, std::span<const Tokens> candidates, std::span<const Tokens> references) {
  check_aligned("rouge_n", candidates, references);
  if (n != 1 && n != 2) throw ContractError("rouge_n: n must be 1 or 2");
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const NgramCounts cand = count_ngrams(candidates[i], static_cast<std::size_t>(n));
    const NgramCounts ref = count_ngrams(references[i], static_cast<std::size_t>(n));
    const std::size_t cand_total = total(cand);
    const std::size_t ref_total = total(ref);
    if (cand_total == 0 || ref_total == 0) {
      // Too short to hold any n-gram: only an exact match scores.
      sum += (cand_total == ref_total && candidates[i] == references[i]) ? 1.0 : 0.0;
      continue;
    }
    const auto overlap = static_cast<double>(clipped_overlap(cand, ref));
    sum += f1(overlap / static_cast<double>(cand_total), overlap / static_cast<double>(ref_total));
  }
  return sum / static_cast<double>(candidates.size());
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(std::span<const Tokens> candidates, std::span<const Tokens> references) {
  check_aligned("rouge_l", candidates, references);
  double sum = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Tokens& cand = candidates[i];
    const Tokens& ref = references[i];
    if (cand.empty() || ref.empty()) {
      sum += cand.empty() && ref.empty() ? 1.0 : 0.0;
      continue;
    }
    const auto lcs = static_cast<double>(lcs_length(cand, ref));
    sum += f1(lcs / static_cast<double>(cand.size()), lcs / static_cast<double>(ref.size()));
  }
  return sum / static_cast<double>(candidates.size());
}

std::vector<BucketRow> length_bucketed_eval(std::span<const Tokens> candidates,
                                            std::span<const Tokens> references, std::size_t bucket_width) {
  check_aligned("length_bucketed_eval", candidates, references);
  if (bucket_width < 1) throw ContractError("length_bucketed_eval: bucket width must be >= 1");
  std::map<std::size_t, std::pair<std::vector<Tokens>, std::vector<Tokens>>> groups;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& g = groups[references[i].size() / bucket_width];
    g.first.push_back(candidates[i]);
    g.second.push_back(references[i]);
  }
  std::vector<BucketRow> rows;
  for (const auto& [bucket, pairs] : groups) {
    BucketRow row;
    row.lower = bucket * bucket_width;
    row.upper = row.lower + bucket_width;
    row.pairs = pairs.first.size();
    row.bleu4 = bleu4(pairs.first, pairs.second);
    row.rouge2_f1 = rouge_n(2, pairs.first, pairs.second);
    rows.push_back(row);
  }
  return rows;
}

EvalReport evaluate(std::span<const Tokens> candidates, std::span<const Tokens> references,
                    std::size_t bucket_width) {
  check_aligned("evaluate", candidates, references);
  std::vector<Tokens> cands;
  std::vector<Tokens> refs;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cands.push_back(strip_special(candidates[i]));
    refs.push_back(strip_special(references[i]));
  }
  EvalReport report;
  report.pairs = cands.size();
  report.bleu4 = bleu4(cands, refs);
  report.rouge1_f1 = rouge_n(1, cands, refs);
  report.rouge2_f1 = rouge_n(2, cands, refs);
  report.rougeL_f1 = rouge_l(cands, refs);
  report.buckets = length_bucketed_eval(cands, refs, bucket_width);
  return report;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char buf[128];
  out << "pairs " << pairs << '\n';
  std::snprintf(buf, sizeof buf, "bleu4 %.6f\nrouge1_f1 %.6f\nrouge2_f1 %.6f\nrougeL_f1 %.6f\n", bleu4,
                rouge1_f1, rouge2_f1, rougeL_f1);
  out << buf;
  for (const BucketRow& row : buckets) {
    std::snprintf(buf, sizeof buf, "bucket [%zu,%zu) pairs %zu bleu4 %.6f rouge2_f1 %.6f\n", row.lower,
                  row.upper, row.pairs, row.bleu4, row.rouge2_f1);
    out << buf;
  }
  return out.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["pairs"] = pairs;
  j["bleu4"] = bleu4;
  j["rouge1_f1"] = rouge1_f1;
  j["rouge2_f1"] = rouge2_f1;
  j["rougeL_f1"] = rougeL_f1;
  j["buckets"] = nlohmann::ordered_json::array();
  for (const BucketRow& row : buckets) {
    j["buckets"].push_back({{"lower", row.lower},
                            {"upper", row.upper},
                            {"pairs", row.pairs},
                            {"bleu4", row.bleu4},
                            {"rouge2_f1", row.rouge2_f1}});
  }
  return j.dump(2);
}

}  // namespace lcs2s
