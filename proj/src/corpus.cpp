#include "lcs2s/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lcs2s/errors.hpp"

namespace lcs2s {

using nlohmann::json;

// ---- Vocabulary -------------------------------------------------------------

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> reserved = {"<pad>", "<unk>", "<sos>", "</s>"};
  return reserved;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace

Vocabulary::Vocabulary() : Vocabulary(reserved_tokens()) {}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw DataError("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
  }
}

Vocabulary Vocabulary::build(std::span<const Tokens> sequences, std::size_t max_size) {
  if (max_size < reserved_tokens().size()) {
    throw ContractError("vocabulary: max size " + std::to_string(max_size) + " cannot hold the reserved tokens");
  }
  std::unordered_map<std::string, std::size_t> freq;
  for (const Tokens& seq : sequences) {
    for (const auto& tok : seq) ++freq[tok];
  }
  for (const auto& r : reserved_tokens()) freq.erase(r);
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> tokens = reserved_tokens();
  for (const auto& [tok, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(tok);
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  const auto& reserved = reserved_tokens();
  if (lines.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), lines.begin())) {
    throw DataError(path + ": vocabulary must start with <pad>, <unk>, <sos>, </s>");
  }
  return Vocabulary(std::move(lines));
}

void Vocabulary::save(const std::string& path) const { write_lines(path, tokens_); }

int Vocabulary::id(const std::string& token) const {
  const auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw VocabError("token id " + std::to_string(id) + " outside vocabulary of " +
                     std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const Tokens& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Tokens Vocabulary::decode(std::span<const int> ids) const {
  Tokens out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

Vocabulary build_vocab(std::span<const RawExample> examples, Side side, std::size_t max_size) {
  if (examples.empty()) throw ContractError("build_vocab: no examples");
  std::vector<Tokens> sequences;
  sequences.reserve(examples.size());
  for (const auto& ex : examples) sequences.push_back(side == Side::source ? ex.fact : ex.rationale);
  return Vocabulary::build(sequences, max_size);
}

// ---- ChargeSet --------------------------------------------------------------

ChargeSet::ChargeSet() : ChargeSet(std::vector<std::string>{kOthers}) {}

ChargeSet::ChargeSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty() || names_.back() != kOthers) throw DataError("charge set must end with 'others'");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
      throw DataError("charge set: duplicate label '" + names_[i] + "'");
    }
  }
}

ChargeSet ChargeSet::build(std::span<const RawExample> examples, std::size_t top_k) {
  std::unordered_map<std::string, std::size_t> freq;
  for (const auto& ex : examples) {
    if (ex.charge != kOthers) ++freq[ex.charge];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::string> names;
  for (const auto& [name, count] : ranked) {
    if (names.size() >= top_k) break;
    names.push_back(name);
  }
  names.emplace_back(kOthers);
  return ChargeSet(std::move(names));
}

ChargeSet ChargeSet::load(const std::string& path) { return ChargeSet(read_lines(path)); }

void ChargeSet::save(const std::string& path) const { write_lines(path, names_); }

int ChargeSet::id(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? others() : it->second;
}

const std::string& ChargeSet::name(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= names_.size()) {
    throw VocabError("charge id " + std::to_string(id) + " outside [0, " + std::to_string(names_.size()) + ")");
  }
  return names_[static_cast<std::size_t>(id)];
}

// ---- JSON Lines -------------------------------------------------------------

namespace {

Tokens string_array(const json& obj, const char* field, const std::string& where) {
  const auto it = obj.find(field);
  if (it == obj.end()) throw DataError(where + ": missing field '" + field + "'");
  if (!it->is_array()) throw DataError(where + ": field '" + field + "' must be an array of strings");
  Tokens out;
  for (const auto& v : *it) {
    if (!v.is_string()) throw DataError(where + ": field '" + field + "' must be an array of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

std::vector<RawExample> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);
  std::vector<RawExample> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where + ": expected a JSON object");
    RawExample ex;
    ex.fact = string_array(obj, "fact", where);
    ex.rationale = string_array(obj, "rationale", where);
    const auto charge = obj.find("charge");
    if (charge == obj.end()) throw DataError(where + ": missing field 'charge'");
    if (!charge->is_string()) throw DataError(where + ": field 'charge' must be a string");
    ex.charge = charge->get<std::string>();
    if (ex.fact.empty()) throw DataError(where + ": empty fact");
    out.push_back(std::move(ex));
  }
  return out;
}

void write_jsonl(const std::string& path, std::span<const RawExample> examples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const auto& ex : examples) {
    json obj = {{"fact", ex.fact}, {"rationale", ex.rationale}, {"charge", ex.charge}};
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

Example encode_example(const RawExample& raw, const Vocabulary& source, const Vocabulary& target,
                       const ChargeSet& charges) {
  Example ex;
  const std::size_t src_len = std::min(raw.fact.size(), kMaxSourceLength);
  ex.fact.reserve(src_len);
  for (std::size_t i = 0; i < src_len; ++i) ex.fact.push_back(source.id(raw.fact[i]));
  const std::size_t tgt_len = std::min(raw.rationale.size(), kMaxTargetLength - 1);
  for (std::size_t i = 0; i < tgt_len; ++i) ex.rationale.push_back(target.id(raw.rationale[i]));
  ex.rationale.push_back(kStopId);
  ex.charge = charges.id(raw.charge);
  return ex;
}

std::vector<Example> load_jsonl(const std::string& path, const Vocabulary& source, const Vocabulary& target,
                                const ChargeSet& charges) {
  std::vector<Example> out;
  for (const auto& raw : read_jsonl(path)) out.push_back(encode_example(raw, source, target, charges));
  return out;
}

// ---- synthetic corpus -------------------------------------------------------

SynthSpec SynthSpec::defaults() {
  SynthSpec spec;
  spec.pairs = {
      {"on <date> {time} , defendant <name> and victim <name> quarreled at {place} over {dispute} , "
       "<name> attacked the victim with a {tool} {events} , the victim suffered {injury} injury .",
       "the court holds that defendant <name> {disc} injured the victim with a {tool} at {place} {count} "
       "causing {injury} injury , the facts are clear .",
       "and struck the victim",
       {"intentional_injury", "affray"},
       {"deliberately", "mutually"}},
      {"on <date> {time} , defendant <name> at {place} obtained the victim 's {item} worth {amount} yuan "
       "{events} , the {item} was later recovered .",
       "the court holds that defendant <name> {disc} obtained a {item} worth {amount} yuan at {place} "
       "{count} for the purpose of illegal possession .",
       "and took it away",
       {"theft", "fraud"},
       {"secretly", "deceptively"}},
      {"on <date> {time} , defendant <name> approached the victim on {street} and grabbed the victim 's "
       "{item} {events} , then fled on a {vehicle} .",
       "the court holds that defendant <name> {disc} seized the {item} of the victim on {street} {count} "
       "and fled on a {vehicle} , the crime is established .",
       "and pulled hard",
       {"robbery", "snatching"},
       {"forcibly", "suddenly"}},
  };
  spec.slots = {
      {"time", {"morning", "noon", "afternoon", "evening", "night"}},
      {"place",
       {"supermarket", "hotel", "station", "market", "restaurant", "internet_cafe", "warehouse", "parking_lot",
        "square", "factory"}},
      {"dispute", {"debt", "parking", "noise", "gambling", "rent", "wages"}},
      {"tool", {"stick", "brick", "knife", "bottle", "chair", "hammer", "belt", "shovel"}},
      {"injury", {"minor", "serious", "light"}},
      {"item",
       {"phone", "laptop", "bicycle", "wallet", "necklace", "watch", "tablet", "camera", "scooter", "handbag"}},
      {"amount", {"150", "500", "800", "1200", "2500", "3000", "6000", "9000"}},
      {"street",
       {"east_road", "west_road", "north_street", "south_street", "river_road", "park_lane", "main_street",
        "bridge_road", "station_road", "market_street"}},
      {"vehicle", {"motorcycle", "bike", "taxi", "bus", "electric_bike", "car"}},
  };
  return spec;
}

namespace {

const std::set<std::string>& builtin_markers() {
  static const std::set<std::string> markers = {"disc", "count", "events"};
  return markers;
}

/// Slot names referenced by a template, in order of appearance.
std::vector<std::string> template_slots(const std::string& tmpl) {
  std::vector<std::string> names;
  std::istringstream in(tmpl);
  for (std::string tok; in >> tok;) {
    if (tok.size() > 2 && tok.front() == '{' && tok.back() == '}') names.push_back(tok.substr(1, tok.size() - 2));
  }
  return names;
}

Tokens split(const std::string& text) {
  Tokens out;
  std::istringstream in(text);
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

}  // namespace

void SynthSpec::validate() const {
  if (pairs.empty()) throw DataError("synth spec: no confusable pairs");
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& pair = pairs[p];
    for (const std::string* tmpl : {&pair.fact_template, &pair.rationale_template, &pair.event_clause}) {
      for (const auto& name : template_slots(*tmpl)) {
        if (builtin_markers().count(name) != 0) {
          if (tmpl == &pair.event_clause || (tmpl == &pair.fact_template && name != "events") ||
              (tmpl == &pair.rationale_template && name == "events")) {
            throw DataError("synth spec: pair " + std::to_string(p) + " uses {" + name + "} in the wrong template");
          }
          continue;
        }
        const auto it = slots.find(name);
        if (it == slots.end()) {
          throw DataError("synth spec: pair " + std::to_string(p) + " references undefined slot {" + name + "}");
        }
        if (it->second.empty()) throw DataError("synth spec: slot {" + name + "} has no values");
      }
    }
    if (pair.charges[0] == pair.charges[1] || pair.discriminators[0] == pair.discriminators[1]) {
      throw DataError("synth spec: pair " + std::to_string(p) + " must have two distinct charges and discriminators");
    }
  }
}

std::optional<std::pair<std::string, std::string>> SynthSpec::discriminators_for(const std::string& charge) const {
  for (const auto& pair : pairs) {
    for (int m = 0; m < 2; ++m) {
      if (pair.charges[static_cast<std::size_t>(m)] == charge) {
        return std::make_pair(pair.discriminators[static_cast<std::size_t>(m)],
                              pair.discriminators[static_cast<std::size_t>(1 - m)]);
      }
    }
  }
  return std::nullopt;
}

RawExample render_example(const SynthSpec& spec, std::size_t pair_index, int member, const SlotDraw& draw) {
  const ConfusablePair& pair = spec.pairs.at(pair_index);
  const auto m = static_cast<std::size_t>(member);
  auto render = [&](const std::string& tmpl) {
    Tokens out;
    for (const auto& tok : split(tmpl)) {
      if (tok.size() <= 2 || tok.front() != '{' || tok.back() != '}') {
        out.push_back(tok);
        continue;
      }
      const std::string name = tok.substr(1, tok.size() - 2);
      if (name == "disc") {
        out.push_back(pair.discriminators.at(m));
      } else if (name == "count") {
        if (spec.latent_count) out.emplace_back(kCountWords.at(static_cast<std::size_t>(draw.events - 1)));
      } else if (name == "events") {
        const Tokens clause = split(pair.event_clause);
        for (int k = 0; k < draw.events; ++k) out.insert(out.end(), clause.begin(), clause.end());
      } else {
        const auto it = draw.values.find(name);
        if (it == draw.values.end()) throw DataError("synth: no value drawn for slot {" + name + "}");
        out.push_back(it->second);
      }
    }
    return out;
  };
  RawExample ex;
  ex.fact = render(pair.fact_template);
  ex.rationale = render(pair.rationale_template);
  ex.charge = pair.charges.at(m);
  return ex;
}

SynthCorpus synth_generate(const SynthSpec& spec) {
  spec.validate();
  if (spec.train_size < 1 || spec.dev_size < 1 || spec.test_size < 1) {
    throw ContractError("synth: every split size must be >= 1");
  }
  std::mt19937_64 rng(spec.seed);

  std::vector<std::vector<std::string>> pair_slots;
  for (const auto& pair : spec.pairs) {
    std::set<std::string> names;
    for (const auto& n : template_slots(pair.fact_template)) {
      if (builtin_markers().count(n) == 0) names.insert(n);
    }
    for (const auto& n : template_slots(pair.rationale_template)) {
      if (builtin_markers().count(n) == 0) names.insert(n);
    }
    pair_slots.emplace_back(names.begin(), names.end());
  }

  std::set<std::string> used;
  auto draw_split = [&](std::size_t size) {
    std::vector<RawExample> out;
    std::size_t attempts = 0;
    while (out.size() < size) {
      if (++attempts > 1000 * (size + 10)) throw DataError("synth: slot pools too small for the requested sizes");
      // The charge is drawn independently of every fact slot.
      const std::size_t p = std::uniform_int_distribution<std::size_t>(0, spec.pairs.size() - 1)(rng);
      const int member = std::uniform_int_distribution<int>(0, 1)(rng);
      SlotDraw draw;
      std::string key = std::to_string(p);
      for (const auto& name : pair_slots[p]) {
        const auto& pool = spec.slots.at(name);
        const std::size_t v = std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
        draw.values[name] = pool[v];
        key += '|' + pool[v];
      }
      if (spec.latent_count) draw.events = std::uniform_int_distribution<int>(1, 3)(rng);
      key += '#' + std::to_string(draw.events);
      if (!used.insert(key).second) continue;
      out.push_back(render_example(spec, p, member, draw));
    }
    return out;
  };

  SynthCorpus corpus;
  corpus.train = draw_split(spec.train_size);
  corpus.dev = draw_split(spec.dev_size);
  corpus.test = draw_split(spec.test_size);
  return corpus;
}

std::string SynthSpec::to_json() const {
  nlohmann::ordered_json j;
  j["train_size"] = train_size;
  j["dev_size"] = dev_size;
  j["test_size"] = test_size;
  j["seed"] = seed;
  j["latent_count"] = latent_count;
  j["pairs"] = nlohmann::ordered_json::array();
  for (const auto& p : pairs) {
    j["pairs"].push_back({{"fact_template", p.fact_template},
                          {"rationale_template", p.rationale_template},
                          {"event_clause", p.event_clause},
                          {"charges", p.charges},
                          {"discriminators", p.discriminators}});
  }
  j["slots"] = slots;
  return j.dump(2);
}

SynthSpec SynthSpec::from_json(const std::string& text) {
  SynthSpec spec = defaults();
  try {
    const json j = json::parse(text);
    if (j.contains("train_size")) spec.train_size = j.at("train_size").get<std::size_t>();
    if (j.contains("dev_size")) spec.dev_size = j.at("dev_size").get<std::size_t>();
    if (j.contains("test_size")) spec.test_size = j.at("test_size").get<std::size_t>();
    if (j.contains("seed")) spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("latent_count")) spec.latent_count = j.at("latent_count").get<bool>();
    if (j.contains("pairs")) {
      spec.pairs.clear();
      for (const auto& p : j.at("pairs")) {
        ConfusablePair pair;
        pair.fact_template = p.at("fact_template").get<std::string>();
        pair.rationale_template = p.at("rationale_template").get<std::string>();
        pair.event_clause = p.value("event_clause", std::string());
        pair.charges = p.at("charges").get<std::array<std::string, 2>>();
        pair.discriminators = p.at("discriminators").get<std::array<std::string, 2>>();
        spec.pairs.push_back(std::move(pair));
      }
    }
    if (j.contains("slots")) spec.slots = j.at("slots").get<std::map<std::string, std::vector<std::string>>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("synth spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

// ---- BM25 -------------------------------------------------------------------

Bm25Index::Bm25Index(std::span<const Tokens> documents, double k1, double b) : k1_(k1), b_(b) {
  if (documents.empty()) throw ContractError("bm25: empty pool");
  double total = 0.0;
  for (const Tokens& doc : documents) {
    std::unordered_map<std::string, std::size_t> tf;
    for (const auto& t : doc) ++tf[t];
    for (const auto& [term, count] : tf) ++doc_freq_[term];
    term_freqs_.push_back(std::move(tf));
    lengths_.push_back(doc.size());
    total += static_cast<double>(doc.size());
  }
  avgdl_ = total / static_cast<double>(documents.size());
}

double Bm25Index::idf(const std::string& term) const {
  const auto it = doc_freq_.find(term);
  const double df = it == doc_freq_.end() ? 0.0 : static_cast<double>(it->second);
  const auto n = static_cast<double>(lengths_.size());
  return std::log((n - df + 0.5) / (df + 0.5) + 1.0);
}

double Bm25Index::score(const Tokens& query, std::size_t doc) const {
  const auto& tf = term_freqs_.at(doc);
  const double norm = avgdl_ > 0.0 ? static_cast<double>(lengths_[doc]) / avgdl_ : 0.0;
  std::set<std::string> terms(query.begin(), query.end());
  double s = 0.0;
  for (const auto& term : terms) {
    const auto it = tf.find(term);
    if (it == tf.end()) continue;
    const auto f = static_cast<double>(it->second);
    s += idf(term) * f * (k1_ + 1.0) / (f + k1_ * (1.0 - b_ + b_ * norm));
  }
  return s;
}

std::size_t Bm25Index::best(const Tokens& query) const {
  std::size_t best = 0;
  double best_score = score(query, 0);
  for (std::size_t d = 1; d < lengths_.size(); ++d) {
    const double s = score(query, d);
    if (s > best_score) {
      best_score = s;
      best = d;
    }
  }
  return best;
}

namespace {

std::vector<std::size_t> filter_pool(std::span<const RawExample> pool, const std::optional<std::string>& charge) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!charge || pool[i].charge == *charge) idx.push_back(i);
  }
  if (idx.empty()) {
    throw ContractError(charge ? "no pool example carries charge '" + *charge + "'" : std::string("empty pool"));
  }
  return idx;
}

Bm25Index index_of(std::span<const RawExample> pool, const std::vector<std::size_t>& members, double k1, double b) {
  std::vector<Tokens> docs;
  docs.reserve(members.size());
  for (std::size_t i : members) docs.push_back(pool[i].fact);
  return Bm25Index(docs, k1, b);
}

}  // namespace

const Tokens& bm25_retrieve(const Tokens& query_fact, std::span<const RawExample> pool,
                            const std::optional<std::string>& charge_filter, double k1, double b) {
  const std::vector<std::size_t> members = filter_pool(pool, charge_filter);
  const Bm25Index index = index_of(pool, members, k1, b);
  return pool[members[index.best(query_fact)]].rationale;
}

Bm25Retriever::Bm25Retriever(std::span<const RawExample> pool, double k1, double b)
    : pool_(pool), k1_(k1), b_(b), all_(filter_pool(pool, std::nullopt)) {
  full_index_.emplace(index_of(pool_, all_, k1_, b_));
  for (std::size_t i = 0; i < pool_.size(); ++i) by_charge_[pool_[i].charge].push_back(i);
  for (const auto& [charge, members] : by_charge_) charge_index_.emplace(charge, index_of(pool_, members, k1_, b_));
}

const RawExample& Bm25Retriever::retrieve(const Tokens& query_fact,
                                          const std::optional<std::string>& charge_filter) const {
  if (!charge_filter) return pool_[all_[full_index_->best(query_fact)]];
  const auto it = charge_index_.find(*charge_filter);
  if (it == charge_index_.end()) throw ContractError("no pool example carries charge '" + *charge_filter + "'");
  return pool_[by_charge_.at(*charge_filter)[it->second.best(query_fact)]];
}

const Tokens& rand_baseline(std::span<const RawExample> pool, const std::optional<std::string>& charge_filter,
                            std::mt19937_64& rng) {
  const std::vector<std::size_t> members = filter_pool(pool, charge_filter);
  const std::size_t pick = std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng);
  return pool[members[pick]].rationale;
}

}  // namespace lcs2s
