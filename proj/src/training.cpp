#include "lcs2s/training.hpp"

#include <cstdio>
#include <fstream>

namespace lcs2s {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ContractError("train config: batch_size must be >= 1");
  if (patience < 1) throw ContractError("train config: patience must be >= 1");
  if (!(lr_reduce_factor > 0.0 && lr_reduce_factor < 1.0)) {
    throw ContractError("train config: lr_reduce_factor must lie in (0, 1)");
  }
  if (check_interval_batches < 1) throw ContractError("train config: check_interval_batches must be >= 1");
  if (max_target_len < 1) throw ContractError("train config: max_target_len must be >= 1");
  if (init_lr < 0.0) throw ContractError("train config: init_lr must be >= 0");
  if (max_batches < 0) throw ContractError("train config: max_batches must be >= 0");
}

std::string TrainLogRecord::to_line() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "batch=%ld loss=%.6f val_ppl=%.6f lr=%.8g improved=%d", batch, loss,
                val_ppl, lr, improved ? 1 : 0);
  return buf;
}

std::vector<int> clip_target(const std::vector<int>& rationale, std::size_t max_len) {
  if (rationale.size() <= max_len) return rationale;
  std::vector<int> out(rationale.begin(), rationale.begin() + static_cast<std::ptrdiff_t>(max_len));
  out.back() = kStopId;
  return out;
}

void append_log_line(const std::string& path, const TrainLogRecord& record) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError("cannot append to training log: " + path);
  out << record.to_line() << '\n';
  if (!out) throw DataError("failed writing training log: " + path);
}

}  // namespace lcs2s
