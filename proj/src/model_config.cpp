#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lcs2s/model.hpp"

namespace lcs2s {

std::string to_string(LabelMode mode) {
  switch (mode) {
    case LabelMode::full: return "full";
    case LabelMode::no_softmax: return "no_softmax";
    case LabelMode::no_hidden: return "no_hidden";
    case LabelMode::no_charge: return "no_charge";
  }
  return "full";
}

LabelMode parse_label_mode(std::string_view text) {
  if (text == "full") return LabelMode::full;
  if (text == "no_softmax") return LabelMode::no_softmax;
  if (text == "no_hidden") return LabelMode::no_hidden;
  if (text == "no_charge") return LabelMode::no_charge;
  throw ContractError("unknown label mode '" + std::string(text) +
                      "' (expected full, no_softmax, no_hidden or no_charge)");
}

void ModelConfig::validate() const {
  const std::pair<const char*, int> dims[] = {
      {"src_vocab_size", src_vocab_size}, {"tgt_vocab_size", tgt_vocab_size},
      {"num_charges", num_charges},       {"embed_dim", embed_dim},
      {"label_embed_dim", label_embed_dim}, {"hidden_dim", hidden_dim},
  };
  for (const auto& [name, value] : dims) {
    if (value < 1) throw ContractError(std::string("model config: ") + name + " must be >= 1");
  }
  if (tgt_vocab_size <= kStopId) {
    throw ContractError("model config: tgt_vocab_size must cover the reserved tokens");
  }
}

std::vector<std::pair<std::string, std::string>> ModelConfig::to_fields() const {
  return {
      {"src_vocab_size", std::to_string(src_vocab_size)},
      {"tgt_vocab_size", std::to_string(tgt_vocab_size)},
      {"num_charges", std::to_string(num_charges)},
      {"embed_dim", std::to_string(embed_dim)},
      {"label_embed_dim", std::to_string(label_embed_dim)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"label_mode", to_string(label_mode)},
      {"attention_enabled", attention_enabled ? "1" : "0"},
  };
}

namespace {

int parse_int_field(const std::map<std::string, std::string>& fields, const std::string& key) {
  const auto it = fields.find(key);
  if (it == fields.end()) throw DataError("model config: missing field '" + key + "'");
  int value = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("model config: field '" + key + "' is not an integer: '" + s + "'");
  }
  return value;
}

}  // namespace

ModelConfig ModelConfig::from_fields(const std::map<std::string, std::string>& fields) {
  static const char* const known[] = {"src_vocab_size", "tgt_vocab_size", "num_charges",
                                      "embed_dim",      "label_embed_dim", "hidden_dim",
                                      "label_mode",     "attention_enabled"};
  for (const auto& [key, value] : fields) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw DataError("model config: unknown field '" + key + "'");
  }
  ModelConfig config;
  config.src_vocab_size = parse_int_field(fields, "src_vocab_size");
  config.tgt_vocab_size = parse_int_field(fields, "tgt_vocab_size");
  config.num_charges = parse_int_field(fields, "num_charges");
  config.embed_dim = parse_int_field(fields, "embed_dim");
  config.label_embed_dim = parse_int_field(fields, "label_embed_dim");
  config.hidden_dim = parse_int_field(fields, "hidden_dim");
  const auto mode = fields.find("label_mode");
  if (mode == fields.end()) throw DataError("model config: missing field 'label_mode'");
  config.label_mode = parse_label_mode(mode->second);
  config.attention_enabled = parse_int_field(fields, "attention_enabled") != 0;
  config.validate();
  return config;
}

}  // namespace lcs2s
