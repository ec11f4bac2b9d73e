#pragma once

#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cached_dfl/config.hpp"
#include "cached_dfl/metrics.hpp"

namespace cached_dfl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;

/// Defaults < CACHED_DFL_SEED < config file < flags. `flags` maps setting
/// names (without dashes) to raw values.
ExperimentConfig resolve_config(const std::optional<std::string>& config_path,
                                const std::map<std::string, std::string>& flags);

/// 1-based number of epochs until mean accuracy first reaches `target`.
std::optional<std::size_t> epochs_to_target(std::span<const metrics::EpochMetrics> series,
                                            double target);

/// 1-based epoch count at which the best mean accuracy was first reached.
std::size_t epochs_to_best(std::span<const metrics::EpochMetrics> series);

/// Entry point shared by the executable and the tests; args exclude argv[0].
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cached_dfl::cli
