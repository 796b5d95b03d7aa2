#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace npnce::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitEstimation = 3;

/// Runs the command line `args` (program name excluded). Diagnostics go to
/// `err` as one line; short summaries to `out`. Returns the exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Names accepted by `bench --preset`.
std::vector<std::string> bench_presets();

}  // namespace npnce::cli
