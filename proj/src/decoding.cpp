#include "lcs2s/decoding.hpp"

#include <cstdio>
#include <fstream>

namespace lcs2s {

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void write_attention_csv(const std::string& path, const std::vector<std::vector<double>>& attention,
                         const std::vector<std::string>& source_tokens,
                         const std::vector<std::string>& target_tokens) {
  if (attention.size() != target_tokens.size()) {
    throw ContractError("attention export: " + std::to_string(attention.size()) + " rows for " +
                        std::to_string(target_tokens.size()) + " target tokens");
  }
  for (const auto& row : attention) {
    if (row.size() != source_tokens.size()) {
      throw ContractError("attention export: row of " + std::to_string(row.size()) + " weights for " +
                          std::to_string(source_tokens.size()) + " source tokens");
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open attention file for writing: " + path);
  for (const auto& tok : source_tokens) out << ',' << csv_field(tok);
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < attention.size(); ++r) {
    out << csv_field(target_tokens[r]);
    for (double w : attention[r]) {
      std::snprintf(buf, sizeof buf, "%.8f", w);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing attention file: " + path);
}

}  // namespace lcs2s
