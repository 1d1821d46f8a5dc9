#include "lcs2s/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lcs2s/checkpoint.hpp"
#include "lcs2s/corpus.hpp"
#include "lcs2s/decoding.hpp"
#include "lcs2s/metrics.hpp"
#include "lcs2s/model.hpp"
#include "lcs2s/training.hpp"

namespace lcs2s {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GenDataOptions {
  std::string out_dir;
  std::string spec_path;
  std::size_t train_size = 2000;
  std::size_t dev_size = 200;
  std::size_t test_size = 200;
  std::uint64_t seed = 13;
  bool latent_count = false;
};

struct VocabOptions {
  std::string train_path;
  std::string out_dir;
  std::size_t src_max = kDefaultSourceVocab;
  std::size_t tgt_max = kDefaultTargetVocab;
  std::size_t top_charges = kDefaultTopCharges;
};

struct TrainOptions {
  std::string train_path;
  std::string dev_path;
  std::string vocab_dir;
  std::string out_dir;
  std::string precision = "f32";
  std::string label_mode = "full";
  bool no_attention = false;
  ModelConfig model;
  TrainConfig train;
};

struct GenerateOptions {
  std::string checkpoint;
  std::string vocab_dir;
  std::string input;
  std::string output;
  std::string precision = "f32";
  int beam = 5;
  bool greedy = false;
  int max_len = static_cast<int>(kMaxTargetLength);
  std::string charge_override;
  std::string dump_attention;
};

struct EvaluateOptions {
  std::string predictions;
  std::string references;
  std::size_t bucket_width = 10;
  std::string json_out;
};

struct BaselineOptions {
  std::string train_path;
  std::string test_path;
  std::string out_dir;
  std::string method = "all";
  std::uint64_t seed = 7;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

/// Persists the resolved options of the parsed subcommand in CLI11 config
/// format, loadable again with --config.
void write_resolved_config(const CLI::App& sub, const std::string& path) {
  const std::string prefix = sub.get_name() + ".";
  std::istringstream all(sub.get_parent()->config_to_str(true, false));
  std::string kept;
  for (std::string line; std::getline(all, line);) {
    if (line.starts_with(prefix)) kept += line + "\n";
  }
  write_text(path, kept);
}

std::string vocab_file(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

struct Vocabs {
  Vocabulary source;
  Vocabulary target;
  ChargeSet charges;
};

Vocabs load_vocabs(const std::string& dir) {
  return {Vocabulary::load(vocab_file(dir, "src.vocab")), Vocabulary::load(vocab_file(dir, "tgt.vocab")),
          ChargeSet::load(vocab_file(dir, "charges.txt"))};
}

// ---- gen-data ---------------------------------------------------------------

int run_gen_data(const GenDataOptions& opt, const CLI::App& app) {
  SynthSpec spec = SynthSpec::defaults();
  if (!opt.spec_path.empty()) {
    std::ifstream in(opt.spec_path);
    if (!in) throw DataError("cannot open synth spec: " + opt.spec_path);
    std::stringstream buf;
    buf << in.rdbuf();
    spec = SynthSpec::from_json(buf.str());
  }
  spec.train_size = opt.train_size;
  spec.dev_size = opt.dev_size;
  spec.test_size = opt.test_size;
  spec.seed = opt.seed;
  spec.latent_count = opt.latent_count;
  const SynthCorpus corpus = synth_generate(spec);
  ensure_dir(opt.out_dir);
  write_jsonl((fs::path(opt.out_dir) / "train.jsonl").string(), corpus.train);
  write_jsonl((fs::path(opt.out_dir) / "dev.jsonl").string(), corpus.dev);
  write_jsonl((fs::path(opt.out_dir) / "test.jsonl").string(), corpus.test);
  write_text((fs::path(opt.out_dir) / "synth_spec.json").string(), spec.to_json() + "\n");
  write_resolved_config(app, (fs::path(opt.out_dir) / "gen-data.config.toml").string());
  std::cout << "wrote " << corpus.train.size() << '/' << corpus.dev.size() << '/' << corpus.test.size()
            << " examples to " << opt.out_dir << '\n';
  return kExitOk;
}

// ---- build-vocab ------------------------------------------------------------

int run_build_vocab(const VocabOptions& opt, const CLI::App& app) {
  const std::vector<RawExample> train = read_jsonl(opt.train_path);
  if (train.empty()) throw DataError(opt.train_path + ": no examples");
  ensure_dir(opt.out_dir);
  const Vocabulary src = build_vocab(train, Side::source, opt.src_max);
  const Vocabulary tgt = build_vocab(train, Side::target, opt.tgt_max);
  const ChargeSet charges = ChargeSet::build(train, opt.top_charges);
  src.save(vocab_file(opt.out_dir, "src.vocab"));
  tgt.save(vocab_file(opt.out_dir, "tgt.vocab"));
  charges.save(vocab_file(opt.out_dir, "charges.txt"));
  write_resolved_config(app, vocab_file(opt.out_dir, "build-vocab.config.toml"));
  std::cout << "source vocab " << src.size() << ", target vocab " << tgt.size() << ", charges "
            << charges.size() << '\n';
  return kExitOk;
}

// ---- train ------------------------------------------------------------------

template <typename Scalar>
int run_train_as(const TrainOptions& opt, const CLI::App& app) {
  const Vocabs vocabs = load_vocabs(opt.vocab_dir);
  const std::vector<Example> train_set = load_jsonl(opt.train_path, vocabs.source, vocabs.target, vocabs.charges);
  const std::vector<Example> dev_set = load_jsonl(opt.dev_path, vocabs.source, vocabs.target, vocabs.charges);

  ModelConfig model = opt.model;
  model.src_vocab_size = static_cast<int>(vocabs.source.size());
  model.tgt_vocab_size = static_cast<int>(vocabs.target.size());
  model.num_charges = static_cast<int>(vocabs.charges.size());
  model.label_mode = parse_label_mode(opt.label_mode);
  model.attention_enabled = !opt.no_attention;

  ensure_dir(opt.out_dir);
  TrainConfig config = opt.train;
  config.checkpoint_path = (fs::path(opt.out_dir) / "best.ckpt").string();
  config.log_path = (fs::path(opt.out_dir) / "train.log").string();
  write_text(config.log_path, "");
  write_resolved_config(app, (fs::path(opt.out_dir) / "train.config.toml").string());

  const TrainResult<Scalar> result =
      lcs2s::train<Scalar>(train_set, dev_set, model, config, [](const TrainLogRecord& r) { std::cout << r.to_line() << '\n'; });
  std::cout << "best validation perplexity " << result.best_perplexity << " after " << result.batches
            << " batches; checkpoint " << config.checkpoint_path << '\n';
  return kExitOk;
}

// ---- generate ---------------------------------------------------------------

template <typename Scalar>
int run_generate_as(const GenerateOptions& opt, const CLI::App& app) {
  const Vocabs vocabs = load_vocabs(opt.vocab_dir);
  const ModelParams<Scalar> params = load_checkpoint<Scalar>(opt.checkpoint);
  if (params.config().tgt_vocab_size != static_cast<int>(vocabs.target.size()) ||
      params.config().src_vocab_size != static_cast<int>(vocabs.source.size()) ||
      params.config().num_charges != static_cast<int>(vocabs.charges.size())) {
    throw DataError(opt.checkpoint + ": checkpoint does not match the vocabularies in " + opt.vocab_dir);
  }
  std::optional<int> override_id;
  if (!opt.charge_override.empty()) {
    if (!vocabs.charges.contains(opt.charge_override)) {
      throw DataError("--charge-override: unknown charge '" + opt.charge_override + "'");
    }
    override_id = vocabs.charges.id(opt.charge_override);
  }
  if (!opt.dump_attention.empty()) ensure_dir(opt.dump_attention);

  const std::vector<RawExample> inputs = read_jsonl(opt.input);
  std::ofstream out(opt.output, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + opt.output);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const RawExample& raw = inputs[i];
    const Example ex = encode_example(raw, vocabs.source, vocabs.target, vocabs.charges);
    const int charge = override_id.value_or(ex.charge);
    const Hypothesis<Scalar> hyp = opt.greedy ? greedy_decode(params, ex.fact, charge, opt.max_len)
                                              : beam_search(params, ex.fact, charge, opt.beam, opt.max_len);
    const Tokens emitted = vocabs.target.decode(hyp.tokens);
    Tokens generated;
    for (const auto& t : emitted) {
      if (t != "</s>") generated.push_back(t);
    }
    json obj = {{"fact", raw.fact}, {"rationale", raw.rationale}, {"charge", raw.charge}, {"generated", generated}};
    if (override_id) obj["conditioned_charge"] = opt.charge_override;
    out << obj.dump() << '\n';

    if (!opt.dump_attention.empty() && params.config().attention_enabled) {
      const Tokens source(raw.fact.begin(), raw.fact.begin() + static_cast<std::ptrdiff_t>(ex.fact.size()));
      export_attention((fs::path(opt.dump_attention) / (std::to_string(i) + ".csv")).string(), hyp, source, emitted);
    }
  }
  if (!out) throw DataError("failed writing " + opt.output);
  write_resolved_config(app, opt.output + ".config.toml");
  std::cout << "decoded " << inputs.size() << " examples to " << opt.output << '\n';
  return kExitOk;
}

// ---- evaluate ---------------------------------------------------------------

struct PredictionPairs {
  std::vector<Tokens> generated;
  std::vector<Tokens> references;
};

/// Without a "generated" field a line counts as its own prediction, so a plain
/// corpus file can stand in for a predictions file.
PredictionPairs read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions: " + path);
  PredictionPairs pairs;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    try {
      const json obj = json::parse(line);
      pairs.references.push_back(obj.at("rationale").get<Tokens>());
      pairs.generated.push_back(obj.contains("generated") ? obj.at("generated").get<Tokens>()
                                                          : obj.at("rationale").get<Tokens>());
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  if (pairs.references.empty()) throw DataError(path + ": no predictions");
  return pairs;
}

int run_evaluate(const EvaluateOptions& opt, const CLI::App& app) {
  PredictionPairs pairs = read_predictions(opt.predictions);
  if (!opt.references.empty()) {
    const std::vector<RawExample> refs = read_jsonl(opt.references);
    if (refs.size() != pairs.generated.size()) {
      throw DataError(opt.references + ": " + std::to_string(refs.size()) + " references for " +
                      std::to_string(pairs.generated.size()) + " predictions");
    }
    for (std::size_t i = 0; i < refs.size(); ++i) pairs.references[i] = refs[i].rationale;
  }
  const EvalReport report = evaluate(pairs.generated, pairs.references, opt.bucket_width);
  std::cout << report.to_text();
  if (!opt.json_out.empty()) {
    write_text(opt.json_out, report.to_json() + "\n");
    write_resolved_config(app, opt.json_out + ".config.toml");
  }
  return kExitOk;
}

// ---- baseline ---------------------------------------------------------------

int run_baseline(const BaselineOptions& opt, const CLI::App& app) {
  const std::vector<RawExample> pool = read_jsonl(opt.train_path);
  const std::vector<RawExample> test = read_jsonl(opt.test_path);
  if (pool.empty() || test.empty()) throw DataError("baseline: empty train or test file");
  std::vector<std::string> methods;
  if (opt.method == "all") methods = {"rand", "rand+charge", "bm25", "bm25+charge"};
  else methods = {opt.method};

  ensure_dir(opt.out_dir);
  const Bm25Retriever retriever(pool);
  for (const std::string& method : methods) {
    std::mt19937_64 rng(opt.seed);
    std::vector<Tokens> generated;
    std::vector<Tokens> references;
    std::ofstream out((fs::path(opt.out_dir) / (method + ".jsonl")).string(), std::ios::trunc);
    for (const RawExample& ex : test) {
      const bool by_charge = method.ends_with("+charge");
      const std::optional<std::string> filter = by_charge ? std::optional<std::string>(ex.charge) : std::nullopt;
      const Tokens picked = method.starts_with("bm25") ? retriever.retrieve(ex.fact, filter).rationale
                                                       : rand_baseline(pool, filter, rng);
      json obj = {{"fact", ex.fact}, {"rationale", ex.rationale}, {"charge", ex.charge}, {"generated", picked}};
      out << obj.dump() << '\n';
      generated.push_back(picked);
      references.push_back(ex.rationale);
    }
    const EvalReport report = evaluate(generated, references);
    write_text((fs::path(opt.out_dir) / (method + ".eval.json")).string(), report.to_json() + "\n");
    std::printf("%-12s bleu4 %.4f rouge1 %.4f rouge2 %.4f rougeL %.4f\n", method.c_str(), report.bleu4,
                report.rouge1_f1, report.rouge2_f1, report.rougeL_f1);
  }
  write_resolved_config(app, (fs::path(opt.out_dir) / "baseline.config.toml").string());
  return kExitOk;
}

}  // namespace

int dispatch(int argc, char** argv) {
  CLI::App app{"Label-conditioned sequence-to-sequence toolkit"};
  app.set_config("--config", "", "Read options from a file written by an earlier run");
  app.require_subcommand(1);
  app.fallthrough();

  GenDataOptions gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic confusable-charge corpus");
  gen_cmd->add_option("--out-dir", gen.out_dir, "Output directory")->required();
  gen_cmd->add_option("--spec", gen.spec_path, "JSON synth spec (defaults built in)");
  gen_cmd->add_option("--train-size", gen.train_size)->capture_default_str();
  gen_cmd->add_option("--dev-size", gen.dev_size)->capture_default_str();
  gen_cmd->add_option("--test-size", gen.test_size)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_flag("--latent-count", gen.latent_count, "Add the repeated-event count detail");

  VocabOptions voc;
  CLI::App* voc_cmd = app.add_subcommand("build-vocab", "Build source/target vocabularies and the charge set");
  voc_cmd->add_option("--train", voc.train_path, "Training corpus (JSON Lines)")->required();
  voc_cmd->add_option("--out-dir", voc.out_dir)->required();
  voc_cmd->add_option("--src-max", voc.src_max)->capture_default_str();
  voc_cmd->add_option("--tgt-max", voc.tgt_max)->capture_default_str();
  voc_cmd->add_option("--top-charges", voc.top_charges)->capture_default_str();

  TrainOptions tr;
  CLI::App* tr_cmd = app.add_subcommand("train", "Train a model with early stopping");
  tr_cmd->add_option("--train", tr.train_path)->required();
  tr_cmd->add_option("--dev", tr.dev_path)->required();
  tr_cmd->add_option("--vocab-dir", tr.vocab_dir)->required();
  tr_cmd->add_option("--out-dir", tr.out_dir)->required();
  tr_cmd->add_option("--precision", tr.precision)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  tr_cmd->add_option("--label-mode", tr.label_mode)
      ->check(CLI::IsMember({"full", "no_softmax", "no_hidden", "no_charge"}))
      ->capture_default_str();
  tr_cmd->add_flag("--no-attention", tr.no_attention, "Drop attention (plain encoder-decoder)");
  tr_cmd->add_option("--embed-dim", tr.model.embed_dim)->capture_default_str();
  tr_cmd->add_option("--label-embed-dim", tr.model.label_embed_dim)->capture_default_str();
  tr_cmd->add_option("--hidden-dim", tr.model.hidden_dim)->capture_default_str();
  tr_cmd->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
  tr_cmd->add_option("--lr", tr.train.init_lr)->capture_default_str();
  tr_cmd->add_option("--lr-reduce", tr.train.lr_reduce_factor)->capture_default_str();
  tr_cmd->add_option("--check-interval", tr.train.check_interval_batches)->capture_default_str();
  tr_cmd->add_option("--patience", tr.train.patience)->capture_default_str();
  tr_cmd->add_option("--max-target-len", tr.train.max_target_len)->capture_default_str();
  tr_cmd->add_option("--clip", tr.train.grad_clip_norm)->capture_default_str();
  tr_cmd->add_option("--max-batches", tr.train.max_batches, "0 = until early stopping")->capture_default_str();
  tr_cmd->add_option("--seed", tr.train.seed)->capture_default_str();

  GenerateOptions ge;
  CLI::App* ge_cmd = app.add_subcommand("generate", "Decode rationales for a corpus file");
  ge_cmd->add_option("--checkpoint", ge.checkpoint)->required();
  ge_cmd->add_option("--vocab-dir", ge.vocab_dir)->required();
  ge_cmd->add_option("--input", ge.input)->required();
  ge_cmd->add_option("--output", ge.output)->required();
  ge_cmd->add_option("--precision", ge.precision)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  ge_cmd->add_option("--beam", ge.beam)->check(CLI::PositiveNumber)->capture_default_str();
  ge_cmd->add_flag("--greedy", ge.greedy, "Argmax decoding instead of beam search");
  ge_cmd->add_option("--max-len", ge.max_len)->check(CLI::PositiveNumber)->capture_default_str();
  ge_cmd->add_option("--charge-override", ge.charge_override, "Condition every example on this charge");
  ge_cmd->add_option("--dump-attention", ge.dump_attention, "Directory for per-example attention CSVs");

  EvaluateOptions ev;
  CLI::App* ev_cmd = app.add_subcommand("evaluate", "Score a predictions file");
  ev_cmd->add_option("--predictions", ev.predictions)->required();
  ev_cmd->add_option("--references", ev.references, "Score against this corpus file's rationales");
  ev_cmd->add_option("--bucket-width", ev.bucket_width)->check(CLI::PositiveNumber)->capture_default_str();
  ev_cmd->add_option("--json", ev.json_out, "Also write the report as JSON");

  BaselineOptions ba;
  CLI::App* ba_cmd = app.add_subcommand("baseline", "Run the retrieval and random baselines");
  ba_cmd->add_option("--train", ba.train_path, "Retrieval pool")->required();
  ba_cmd->add_option("--test", ba.test_path)->required();
  ba_cmd->add_option("--out-dir", ba.out_dir)->required();
  ba_cmd->add_option("--method", ba.method)
      ->check(CLI::IsMember({"all", "bm25", "bm25+charge", "rand", "rand+charge"}))
      ->capture_default_str();
  ba_cmd->add_option("--seed", ba.seed)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen_data(gen, *gen_cmd);
    if (*voc_cmd) return run_build_vocab(voc, *voc_cmd);
    if (*tr_cmd) {
      return tr.precision == "f64" ? run_train_as<double>(tr, *tr_cmd) : run_train_as<float>(tr, *tr_cmd);
    }
    if (*ge_cmd) {
      return ge.precision == "f64" ? run_generate_as<double>(ge, *ge_cmd) : run_generate_as<float>(ge, *ge_cmd);
    }
    if (*ev_cmd) return run_evaluate(ev, *ev_cmd);
    if (*ba_cmd) return run_baseline(ba, *ba_cmd);
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lcs2s
