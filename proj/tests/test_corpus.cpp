#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lcs2s/corpus.hpp"
#include "lcs2s/errors.hpp"

using namespace lcs2s;
namespace fs = std::filesystem;

namespace {

Tokens toks(const std::string& text) {
  Tokens out;
  std::istringstream in(text);
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lcs2s_corpus_tests";
  fs::create_directories(dir);
  return dir / name;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

RawExample raw(const std::string& fact, const std::string& rationale, const std::string& charge) {
  return {toks(fact), toks(rationale), charge};
}

}  // namespace

// ---- vocabulary -------------------------------------------------------------

TEST(Vocabulary, ReservedIdsThenFrequency) {
  const std::vector<Tokens> seqs{toks("a a b")};
  const Vocabulary v = Vocabulary::build(seqs, 5);
  ASSERT_EQ(v.size(), 5u);
  EXPECT_EQ(v.token(0), "<pad>");
  EXPECT_EQ(v.token(1), "<unk>");
  EXPECT_EQ(v.token(2), "<sos>");
  EXPECT_EQ(v.token(3), "</s>");
  EXPECT_EQ(v.id("a"), 4);
  EXPECT_EQ(v.id("b"), kUnkId);
}

TEST(Vocabulary, TiesBreakLexicographically) {
  const std::vector<Tokens> seqs{toks("zeta alpha mid mid")};
  const Vocabulary v = Vocabulary::build(seqs, 10);
  EXPECT_EQ(v.token(4), "mid");
  EXPECT_EQ(v.token(5), "alpha");
  EXPECT_EQ(v.token(6), "zeta");
}

TEST(Vocabulary, EncodeDecodeRoundTrip) {
  const std::vector<Tokens> seqs{toks("the court holds that the defendant")};
  const Vocabulary v = Vocabulary::build(seqs, 100);
  const Tokens sentence = toks("the defendant holds that");
  EXPECT_EQ(v.decode(v.encode(sentence)), sentence);
  EXPECT_EQ(v.decode(v.encode(toks("the stranger"))), toks("the <unk>"));
  EXPECT_THROW(v.token(99), VocabError);
}

TEST(Vocabulary, SaveLoadAndBadHeader) {
  const std::vector<Tokens> seqs{toks("x y y z z z")};
  const Vocabulary v = Vocabulary::build(seqs, 100);
  const std::string path = scratch("v.vocab").string();
  v.save(path);
  const Vocabulary back = Vocabulary::load(path);
  ASSERT_EQ(back.size(), v.size());
  for (int i = 0; i < static_cast<int>(v.size()); ++i) EXPECT_EQ(back.token(i), v.token(i));

  const fs::path bad = scratch("bad.vocab");
  write_file(bad, "<unk>\n<pad>\n<sos>\n</s>\nx\n");
  EXPECT_THROW(Vocabulary::load(bad.string()), DataError);
  EXPECT_THROW(Vocabulary::build(seqs, 3), ContractError);
}

TEST(Vocabulary, BuildBySide) {
  const std::vector<RawExample> ex{raw("fact words", "rationale words", "theft")};
  const Vocabulary src = build_vocab(ex, Side::source, 100);
  const Vocabulary tgt = build_vocab(ex, Side::target, 100);
  EXPECT_TRUE(src.contains("fact"));
  EXPECT_FALSE(src.contains("rationale"));
  EXPECT_TRUE(tgt.contains("rationale"));
  EXPECT_THROW(build_vocab(std::vector<RawExample>{}, Side::source, 100), ContractError);
}

// ---- charges ----------------------------------------------------------------

TEST(ChargeSet, TopKPlusOthers) {
  const std::vector<RawExample> ex{raw("f", "r", "theft"), raw("f", "r", "theft"), raw("f", "r", "fraud"),
                                   raw("f", "r", "arson"), raw("f", "r", "robbery")};
  const ChargeSet c = ChargeSet::build(ex, 2);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.name(0), "theft");
  EXPECT_EQ(c.name(1), "arson");
  EXPECT_EQ(c.name(2), "others");
  EXPECT_EQ(c.id("robbery"), c.others());
  EXPECT_EQ(c.id("others"), c.others());
  EXPECT_THROW(c.name(3), VocabError);

  const std::string path = scratch("charges.txt").string();
  c.save(path);
  const ChargeSet back = ChargeSet::load(path);
  EXPECT_EQ(back.size(), 3u);
  EXPECT_EQ(back.id("arson"), 1);

  const fs::path bad = scratch("bad_charges.txt");
  write_file(bad, "theft\nfraud\n");
  EXPECT_THROW(ChargeSet::load(bad.string()), std::exception);
}

// ---- JSON Lines -------------------------------------------------------------

TEST(Jsonl, RoundTrip) {
  const std::vector<RawExample> ex{raw("a b c", "x y", "theft"), raw("d", "z", "fraud")};
  const std::string path = scratch("rt.jsonl").string();
  write_jsonl(path, ex);
  EXPECT_EQ(read_jsonl(path), ex);
}

TEST(Jsonl, EncodingTruncatesAndMapsUnknowns) {
  Tokens long_fact;
  for (int i = 0; i < 300; ++i) long_fact.push_back(i % 2 == 0 ? "w" : "v");
  Tokens long_rationale(80, "r");
  const std::vector<RawExample> ex{{long_fact, long_rationale, "theft"}};
  const Vocabulary src = build_vocab(ex, Side::source, 100);
  const Vocabulary tgt = build_vocab(ex, Side::target, 100);
  const ChargeSet charges = ChargeSet::build(ex, 5);

  const Example e = encode_example(ex[0], src, tgt, charges);
  EXPECT_EQ(e.fact.size(), 256u);
  EXPECT_EQ(e.rationale.size(), 50u);
  EXPECT_EQ(e.rationale.back(), kStopId);

  const Example unknown = encode_example(raw("w unseen", "r", "arson"), src, tgt, charges);
  EXPECT_EQ(unknown.fact[1], kUnkId);
  EXPECT_EQ(unknown.charge, charges.others());
  EXPECT_EQ(unknown.rationale, (std::vector<int>{tgt.id("r"), kStopId}));
}

TEST(Jsonl, ErrorsNameTheLine) {
  const fs::path path = scratch("bad.jsonl");
  const std::string good = R"({"fact":["a"],"rationale":["b"],"charge":"theft"})";
  auto expect_error_at = [&](const std::string& second_line, const std::string& needle) {
    write_file(path, good + "\n" + second_line + "\n");
    try {
      read_jsonl(path.string());
      FAIL() << "expected DataError for " << second_line;
    } catch (const DataError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find(":2"), std::string::npos) << msg;
      EXPECT_NE(msg.find(needle), std::string::npos) << msg;
    }
  };
  expect_error_at("{not json", "malformed");
  expect_error_at(R"({"fact":["a"],"charge":"theft"})", "rationale");
  expect_error_at(R"({"fact":[],"rationale":["b"],"charge":"theft"})", "fact");
  EXPECT_THROW(read_jsonl(scratch("missing.jsonl").string() + ".none"), DataError);
}

// ---- synthetic corpus -------------------------------------------------------

TEST(Synth, SeededGenerationIsDeterministic) {
  SynthSpec spec = SynthSpec::defaults();
  spec.train_size = 50;
  spec.dev_size = 10;
  spec.test_size = 10;
  const SynthCorpus a = synth_generate(spec);
  const SynthCorpus b = synth_generate(spec);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);
  spec.seed += 1;
  EXPECT_NE(synth_generate(spec).train, a.train);
}

TEST(Synth, ConfusableMembersDifferOnlyInChargeAndDiscriminator) {
  const SynthSpec spec = SynthSpec::defaults();
  SlotDraw draw;
  for (const auto& [name, pool] : spec.slots) draw.values[name] = pool.front();
  for (std::size_t p = 0; p < spec.pairs.size(); ++p) {
    const RawExample a = render_example(spec, p, 0, draw);
    const RawExample b = render_example(spec, p, 1, draw);
    EXPECT_EQ(a.fact, b.fact);
    EXPECT_NE(a.charge, b.charge);
    ASSERT_EQ(a.rationale.size(), b.rationale.size());
    int differing = 0;
    for (std::size_t i = 0; i < a.rationale.size(); ++i) {
      if (a.rationale[i] != b.rationale[i]) {
        ++differing;
        EXPECT_EQ(a.rationale[i], spec.pairs[p].discriminators[0]);
        EXPECT_EQ(b.rationale[i], spec.pairs[p].discriminators[1]);
      }
    }
    EXPECT_EQ(differing, 1);
  }
}

TEST(Synth, SplitsAreDisjointAndFactsCarryNoChargeSignal) {
  SynthSpec spec = SynthSpec::defaults();
  spec.train_size = 400;
  spec.dev_size = 50;
  spec.test_size = 50;
  const SynthCorpus c = synth_generate(spec);
  EXPECT_EQ(c.train.size(), 400u);
  std::set<Tokens> train_facts;
  for (const auto& ex : c.train) train_facts.insert(ex.fact);
  EXPECT_EQ(train_facts.size(), c.train.size());
  for (const auto* split : {&c.dev, &c.test}) {
    for (const auto& ex : *split) EXPECT_EQ(train_facts.count(ex.fact), 0u);
  }

  // Each tuple renders one fact shared by both charges of its pair, so the
  // charge can only be read off the rationale's discriminator.
  for (const auto& ex : c.test) {
    const auto disc = spec.discriminators_for(ex.charge);
    ASSERT_TRUE(disc.has_value());
    EXPECT_NE(std::find(ex.rationale.begin(), ex.rationale.end(), disc->first), ex.rationale.end());
    EXPECT_EQ(std::find(ex.rationale.begin(), ex.rationale.end(), disc->second), ex.rationale.end());
  }
}

TEST(Synth, ChargeIsBalancedWithinPairs) {
  SynthSpec spec = SynthSpec::defaults();
  spec.train_size = 2000;
  spec.dev_size = 1;
  spec.test_size = 1;
  const SynthCorpus c = synth_generate(spec);
  std::map<std::string, int> counts;
  for (const auto& ex : c.train) counts[ex.charge]++;
  for (const auto& pair : spec.pairs) {
    const double a = counts[pair.charges[0]];
    const double b = counts[pair.charges[1]];
    EXPECT_NEAR(a / (a + b), 0.5, 0.06) << pair.charges[0];
  }
}

TEST(Synth, LatentCountWordsMatchEventRepeats) {
  SynthSpec spec = SynthSpec::defaults();
  spec.latent_count = true;
  spec.train_size = 300;
  spec.dev_size = 1;
  spec.test_size = 1;
  const SynthCorpus c = synth_generate(spec);
  std::set<std::string> seen;
  for (const auto& ex : c.train) {
    std::size_t p = 0;
    while (spec.pairs[p].charges[0] != ex.charge && spec.pairs[p].charges[1] != ex.charge) ++p;
    const Tokens clause = toks(spec.pairs[p].event_clause);
    int repeats = 0;
    for (std::size_t i = 0; i + clause.size() <= ex.fact.size(); ++i) {
      if (std::equal(clause.begin(), clause.end(), ex.fact.begin() + static_cast<std::ptrdiff_t>(i))) ++repeats;
    }
    ASSERT_GE(repeats, 1);
    ASSERT_LE(repeats, 3);
    const std::string word = kCountWords[static_cast<std::size_t>(repeats - 1)];
    EXPECT_NE(std::find(ex.rationale.begin(), ex.rationale.end(), word), ex.rationale.end());
    seen.insert(word);
  }
  EXPECT_EQ(seen.size(), 3u);
}

TEST(Synth, SpecErrors) {
  SynthSpec spec = SynthSpec::defaults();
  spec.pairs[0].fact_template += " {nowhere}";
  EXPECT_THROW(spec.validate(), DataError);
  SynthSpec small = SynthSpec::defaults();
  small.dev_size = 0;
  EXPECT_THROW(synth_generate(small), ContractError);
  EXPECT_THROW(SynthSpec::from_json("{\"pairs\": 3"), DataError);
}

TEST(Synth, JsonRoundTrip) {
  SynthSpec spec = SynthSpec::defaults();
  spec.seed = 99;
  spec.latent_count = true;
  const SynthSpec back = SynthSpec::from_json(spec.to_json());
  EXPECT_EQ(back.seed, 99u);
  EXPECT_TRUE(back.latent_count);
  EXPECT_EQ(back.pairs.size(), spec.pairs.size());
  EXPECT_EQ(back.slots, spec.slots);
  EXPECT_EQ(back.to_json(), spec.to_json());
}

// ---- BM25 -------------------------------------------------------------------

TEST(Bm25, IdfFormula) {
  const std::vector<Tokens> docs{toks("a b"), toks("a c"), toks("d e")};
  const Bm25Index index(docs);
  // df(a) = 2, N = 3: ln((3 - 2 + 0.5) / (2 + 0.5) + 1) = ln 1.6.
  EXPECT_NEAR(index.idf("a"), std::log(1.6), 1e-12);
  EXPECT_NEAR(index.idf("d"), std::log(2.5 / 1.5 + 1.0), 1e-12);
  EXPECT_NEAR(index.idf("zz"), std::log(3.5 / 0.5 + 1.0), 1e-12);
}

TEST(Bm25, SingleTermScoreByHand) {
  const std::vector<Tokens> docs{toks("x y"), toks("z w")};
  const Bm25Index index(docs);
  // N = 2, df = 1: idf = ln 2; tf = 1 and |d| = avgdl so the tf factor is 1.
  EXPECT_NEAR(index.score(toks("x"), 0), std::log(2.0), 1e-12);
  EXPECT_EQ(index.score(toks("x"), 1), 0.0);
}

TEST(Bm25, NoOverlapFallsBackToFirstDocument) {
  const std::vector<Tokens> docs{toks("a b"), toks("c d")};
  EXPECT_EQ(Bm25Index(docs).best(toks("q r")), 0u);
}

TEST(Bm25, TermFrequencyIsMonotone) {
  const std::vector<Tokens> docs{toks("k x x x"), toks("k k x x"), toks("k k k x"), toks("y y y y")};
  const Bm25Index index(docs);
  EXPECT_LT(index.score(toks("k"), 0), index.score(toks("k"), 1));
  EXPECT_LT(index.score(toks("k"), 1), index.score(toks("k"), 2));
  EXPECT_EQ(index.best(toks("k")), 2u);
  EXPECT_THROW(Bm25Index(std::vector<Tokens>{}), ContractError);
}

TEST(Bm25, ChargeFilterRestrictsPool) {
  const std::vector<RawExample> pool{raw("knife street night", "theft rationale", "theft"),
                                     raw("knife street day", "robbery rationale", "robbery"),
                                     raw("phone shop", "fraud rationale", "fraud")};
  EXPECT_EQ(bm25_retrieve(toks("knife street night"), pool), toks("theft rationale"));
  EXPECT_EQ(bm25_retrieve(toks("knife street night"), pool, std::string("robbery")), toks("robbery rationale"));
  EXPECT_THROW(bm25_retrieve(toks("knife"), pool, std::string("arson")), ContractError);

  const Bm25Retriever retriever(pool);
  EXPECT_EQ(retriever.retrieve(toks("phone shop"), std::nullopt).charge, "fraud");
  EXPECT_EQ(retriever.retrieve(toks("phone shop"), std::string("theft")).charge, "theft");
}

// ---- random baseline --------------------------------------------------------

TEST(RandBaseline, PoolOfOne) {
  const std::vector<RawExample> pool{raw("f", "only one", "theft")};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(rand_baseline(pool, std::nullopt, rng), toks("only one"));
}

TEST(RandBaseline, SeededAndUniform) {
  const std::vector<RawExample> pool{raw("f", "r0", "a"), raw("f", "r1", "a"), raw("f", "r2", "b"),
                                     raw("f", "r3", "b")};
  std::mt19937_64 a(11);
  std::mt19937_64 b(11);
  std::map<std::string, int> counts;
  for (int i = 0; i < 10000; ++i) {
    const Tokens& pick = rand_baseline(pool, std::nullopt, a);
    EXPECT_EQ(pick, rand_baseline(pool, std::nullopt, b));
    counts[pick.front()]++;
  }
  for (const auto& [name, n] : counts) {
    EXPECT_GE(n / 10000.0, 0.22) << name;
    EXPECT_LE(n / 10000.0, 0.28) << name;
  }
  std::mt19937_64 c(5);
  for (int i = 0; i < 50; ++i) {
    const std::string r = rand_baseline(pool, std::string("b"), c).front();
    EXPECT_TRUE(r == "r2" || r == "r3");
  }
  EXPECT_THROW(rand_baseline(pool, std::string("zz"), c), ContractError);
}
