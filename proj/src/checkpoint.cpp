#include "lcs2s/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace lcs2s {

namespace {

constexpr const char* kMagic = "LCS2S";

std::uint32_t to_little_endian(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((bits & 0xffu) << 24) | ((bits & 0xff00u) << 8) | ((bits >> 8) & 0xff00u) | (bits >> 24);
  }
  return bits;
}

std::string read_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": truncated checkpoint header");
  return line;
}

}  // namespace

void write_checkpoint_file(const std::string& path, const ModelConfig& config,
                           const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out << kMagic << '\n' << "version " << kCheckpointVersion << '\n';
  for (const auto& [key, value] : config.to_fields()) out << key << ' ' << value << '\n';
  out << "params " << tensors.size() << '\n';
  for (const NamedTensor& t : tensors) {
    out << t.name << ' ' << t.value.rows() << ' ' << t.value.cols() << '\n';
    for (Index i = 0; i < t.value.size(); ++i) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, t.value.data() + i, sizeof bits);
      bits = to_little_endian(bits);
      out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
  }
  out.flush();
  if (!out) throw DataError("failed writing checkpoint: " + path);
}

CheckpointContents read_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  if (read_line(in, path) != kMagic) throw DataError(path + ": not a checkpoint (bad magic)");
  {
    std::istringstream version(read_line(in, path));
    std::string key;
    int number = 0;
    if (!(version >> key >> number) || key != "version") throw DataError(path + ": missing version");
    if (number != kCheckpointVersion) {
      throw DataError(path + ": unsupported checkpoint version " + std::to_string(number));
    }
  }

  std::map<std::string, std::string> fields;
  std::size_t count = 0;
  for (;;) {
    std::istringstream line(read_line(in, path));
    std::string key;
    std::string value;
    if (!(line >> key >> value)) throw DataError(path + ": malformed header line");
    if (key == "params") {
      count = std::stoul(value);
      break;
    }
    fields[key] = value;
  }

  CheckpointContents contents;
  contents.config = ModelConfig::from_fields(fields);
  for (std::size_t k = 0; k < count; ++k) {
    std::istringstream line(read_line(in, path));
    NamedTensor t;
    Index rows = 0;
    Index cols = 0;
    if (!(line >> t.name >> rows >> cols) || rows < 0 || cols < 0) {
      throw DataError(path + ": malformed parameter record " + std::to_string(k));
    }
    t.value.resize(rows, cols);
    for (Index i = 0; i < t.value.size(); ++i) {
      std::uint32_t bits = 0;
      if (!in.read(reinterpret_cast<char*>(&bits), sizeof bits)) {
        throw DataError(path + ": truncated data for parameter '" + t.name + "'");
      }
      bits = to_little_endian(bits);
      std::memcpy(t.value.data() + i, &bits, sizeof bits);
    }
    contents.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError(path + ": trailing bytes after parameters");
  return contents;
}

}  // namespace lcs2s
