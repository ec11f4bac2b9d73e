#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cached_dfl/cache.hpp"
#include "cached_dfl/dataset.hpp"
#include "cached_dfl/model.hpp"

namespace cached_dfl::metrics {

/// One row of a run's output. Variances are population variances (divide by
/// the number of agents, resp. cached entries).
struct EpochMetrics {
    std::size_t epoch = 0;
    double mean_acc = 0.0;
    double var_acc = 0.0;
    double cache_count_mean = 0.0;
    double cache_count_var = 0.0;
    double cache_age_mean = 0.0;
    double cache_age_var = 0.0;
    double lr = 0.0;
    std::size_t contacts = 0;
};

inline constexpr const char* kCsvHeader =
    "epoch,mean_acc,var_acc,cache_count_mean,cache_count_var,cache_age_mean,cache_age_var,lr,"
    "contacts";

std::pair<double, double> mean_variance(std::span<const double> xs);

/// Fixed per-agent test subsample drawn without replacement from (seed, agent).
/// Returns an empty list (meaning the full test set) when count is 0 or not
/// smaller than the test set.
std::vector<std::size_t> eval_subsample(std::size_t test_size, std::size_t count,
                                        std::uint64_t seed, std::size_t agent);

/// Evaluates model i on eval_rows[i] (full test set when empty) and combines
/// the accuracies with cache statistics.
EpochMetrics measure(std::span<const learning::ModelParams* const> models,
                     const learning::Dataset& testset,
                     std::span<const std::vector<std::size_t>> eval_rows,
                     std::span<const cache::ModelCache> caches, cache::Epoch t, double lr,
                     std::size_t contacts);

/// Stops once the best metric has not improved for `patience` epochs
/// (0 disables stopping).
class EarlyStopper {
public:
    explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

    /// Records the metric of the next epoch; true means stop after it.
    bool update(double metric);
    std::size_t best_epoch() const noexcept { return best_epoch_; }
    double best() const noexcept { return best_; }

private:
    std::size_t patience_;
    std::size_t seen_ = 0;
    std::size_t best_epoch_ = 0;
    double best_ = -1.0;
};

/// Six significant digits, as written to CSV.
std::string format_value(double v);

std::string to_csv(std::span<const EpochMetrics> series);
std::vector<EpochMetrics> parse_csv(const std::string& text);
nlohmann::json to_json(std::span<const EpochMetrics> series);

/// Throw IoError with the path on failure.
void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);
void write_csv(std::span<const EpochMetrics> series, const std::string& path);
void write_json(const nlohmann::json& config, std::span<const EpochMetrics> series,
                const std::string& path);

}  // namespace cached_dfl::metrics
