#pragma once

namespace lcs2s {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point for the lcs2s command line:
///   gen-data | build-vocab | train | generate | evaluate | baseline
/// Every subcommand writes its fully resolved options (loadable with
/// --config) next to its outputs.
int dispatch(int argc, char** argv);

}  // namespace lcs2s
