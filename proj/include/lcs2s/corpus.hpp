#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcs2s/example.hpp"
#include "lcs2s/metrics.hpp"

namespace lcs2s {

/// A corpus record before vocabulary lookup.
struct RawExample {
  Tokens fact;
  Tokens rationale;
  std::string charge;

  friend bool operator==(const RawExample&, const RawExample&) = default;
};

enum class Side { source, target };

inline constexpr std::size_t kDefaultSourceVocab = 100000;
inline constexpr std::size_t kDefaultTargetVocab = 50000;
inline constexpr std::size_t kDefaultTopCharges = 50;

/// Token <-> id bijection. Ids 0..3 are <pad>, <unk>, <sos>, </s>; the rest
/// follow descending frequency with ties broken lexicographically.
class Vocabulary {
 public:
  Vocabulary();

  static Vocabulary build(std::span<const Tokens> sequences, std::size_t max_size);
  static Vocabulary load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const { return tokens_.size(); }
  /// <unk> for anything not in the table.
  int id(const std::string& token) const;
  const std::string& token(int id) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }

  std::vector<int> encode(const Tokens& tokens) const;
  Tokens decode(std::span<const int> ids) const;

 private:
  explicit Vocabulary(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

Vocabulary build_vocab(std::span<const RawExample> examples, Side side, std::size_t max_size);

/// Charge labels: the most frequent `top_k` (ties lexicographic) plus a final
/// "others" bucket that absorbs every other label.
class ChargeSet {
 public:
  static constexpr const char* kOthers = "others";

  ChargeSet();
  static ChargeSet build(std::span<const RawExample> examples, std::size_t top_k = kDefaultTopCharges);
  static ChargeSet load(const std::string& path);
  void save(const std::string& path) const;

  std::size_t size() const { return names_.size(); }
  int id(const std::string& name) const;
  const std::string& name(int id) const;
  int others() const { return static_cast<int>(names_.size()) - 1; }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

 private:
  explicit ChargeSet(std::vector<std::string> names);

  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// ---- JSON Lines corpus ------------------------------------------------------

/// Parses one object per line with fields fact, rationale (string arrays) and
/// charge (string). Errors carry the path and line number.
std::vector<RawExample> read_jsonl(const std::string& path);
void write_jsonl(const std::string& path, std::span<const RawExample> examples);

/// Source cut to 256 tokens, target to 49 tokens plus the stop token.
Example encode_example(const RawExample& raw, const Vocabulary& source, const Vocabulary& target,
                       const ChargeSet& charges);

std::vector<Example> load_jsonl(const std::string& path, const Vocabulary& source, const Vocabulary& target,
                                const ChargeSet& charges);

// ---- synthetic confusable-charge corpus ------------------------------------

/// Two charges whose facts are rendered from one shared template; only the
/// rationale's discriminator token tells them apart.
struct ConfusablePair {
  std::string fact_template;       // space-separated tokens, {slot} references
  std::string rationale_template;  // may also use {disc} and {count}
  std::string event_clause;        // repeated by {events} in the fact
  std::array<std::string, 2> charges;
  std::array<std::string, 2> discriminators;
};

struct SynthSpec {
  std::vector<ConfusablePair> pairs;
  std::map<std::string, std::vector<std::string>> slots;  // value pools
  std::size_t train_size = 2000;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  std::uint64_t seed = 13;
  // When set, {events} repeats the event clause 1-3 times and {count} renders
  // the matching count word; otherwise one clause and no count word.
  bool latent_count = false;

  static SynthSpec defaults();
  static SynthSpec from_json(const std::string& text);
  std::string to_json() const;

  /// Throws DataError on a template that names an undefined slot.
  void validate() const;

  /// (own discriminator, rival discriminator) for a charge in some pair.
  std::optional<std::pair<std::string, std::string>> discriminators_for(const std::string& charge) const;
};

inline constexpr std::array<const char*, 3> kCountWords = {"once", "twice", "several_times"};

/// Slot values for one example, keyed by slot name, plus the event count.
struct SlotDraw {
  std::map<std::string, std::string> values;
  int events = 1;
};

RawExample render_example(const SynthSpec& spec, std::size_t pair, int member, const SlotDraw& draw);

struct SynthCorpus {
  std::vector<RawExample> train;
  std::vector<RawExample> dev;
  std::vector<RawExample> test;
};

/// Seeded generation; every (pair, slot values, event count) tuple is used at
/// most once across all splits.
SynthCorpus synth_generate(const SynthSpec& spec);

// ---- baselines --------------------------------------------------------------

/// Okapi BM25 over fact descriptions, IDF = ln((N - df + 0.5)/(df + 0.5) + 1).
class Bm25Index {
 public:
  Bm25Index(std::span<const Tokens> documents, double k1 = 1.2, double b = 0.75);

  std::size_t size() const { return lengths_.size(); }
  double idf(const std::string& term) const;
  double score(const Tokens& query, std::size_t doc) const;
  /// Highest score, ties to the lowest index.
  std::size_t best(const Tokens& query) const;

 private:
  double k1_;
  double b_;
  double avgdl_ = 0.0;
  std::vector<std::size_t> lengths_;
  std::vector<std::unordered_map<std::string, std::size_t>> term_freqs_;
  std::unordered_map<std::string, std::size_t> doc_freq_;
};

/// Rationale of the pool example whose fact best matches the query. With a
/// charge filter only that charge's examples form the pool.
const Tokens& bm25_retrieve(const Tokens& query_fact, std::span<const RawExample> pool,
                            const std::optional<std::string>& charge_filter = std::nullopt,
                            double k1 = 1.2, double b = 0.75);

/// bm25_retrieve over many queries with the per-charge indexes built once.
class Bm25Retriever {
 public:
  explicit Bm25Retriever(std::span<const RawExample> pool, double k1 = 1.2, double b = 0.75);
  const RawExample& retrieve(const Tokens& query_fact, const std::optional<std::string>& charge_filter) const;

 private:
  std::span<const RawExample> pool_;
  double k1_;
  double b_;
  std::vector<std::size_t> all_;
  std::map<std::string, std::vector<std::size_t>> by_charge_;
  std::optional<Bm25Index> full_index_;
  std::map<std::string, Bm25Index> charge_index_;
};

/// Uniform seeded choice from the (optionally charge-filtered) pool.
const Tokens& rand_baseline(std::span<const RawExample> pool, const std::optional<std::string>& charge_filter,
                            std::mt19937_64& rng);

}  // namespace lcs2s
