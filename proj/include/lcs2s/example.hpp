#pragma once

#include <cstddef>
#include <vector>

namespace lcs2s {

// Reserved vocabulary ids, identical on the source and target side.
inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kSosId = 2;
inline constexpr int kStopId = 3;
inline constexpr int kNumReserved = 4;

inline constexpr std::size_t kMaxSourceLength = 256;
inline constexpr std::size_t kMaxTargetLength = 50;  // including the stop token

/// One encoded (fact, rationale, charge) triple. The rationale ends with kStopId.
struct Example {
  std::vector<int> fact;
  std::vector<int> rationale;
  int charge = 0;
};

}  // namespace lcs2s
