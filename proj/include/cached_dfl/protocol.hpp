#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cached_dfl/cache.hpp"
#include "cached_dfl/config.hpp"
#include "cached_dfl/dataset.hpp"
#include "cached_dfl/metrics.hpp"
#include "cached_dfl/mobility.hpp"
#include "cached_dfl/model.hpp"
#include "cached_dfl/training.hpp"

namespace cached_dfl::protocol {

using cache::AgentId;
using cache::CachedModel;
using cache::Epoch;
using cache::ModelCache;
using learning::ModelParams;

struct AgentRuntime {
    AgentId id = 0;
    std::shared_ptr<const ModelParams> model;    // model at the start of the epoch
    std::shared_ptr<const ModelParams> trained;  // result of this epoch's local update
    std::size_t group = 0;
    ModelCache cache;
    learning::AgentDataset data;

    std::size_t sample_count() const noexcept { return data.sample_count(); }
    /// The agent's fresh model as it is offered to peers at epoch t.
    CachedModel own_view(Epoch t) const;
};

/// Cache update rule applied to one side of an exchange.
class CachePolicy {
public:
    static CachePolicy lru();
    static CachePolicy group_based(std::vector<std::size_t> group_map,
                                   std::vector<std::size_t> quotas);

    ModelCache update(const ModelCache& mine, const CachedModel& incoming,
                      const ModelCache& incoming_cache, Epoch t) const;

private:
    std::vector<std::size_t> group_map_;
    std::vector<std::size_t> quotas_;
    bool grouped_ = false;
};

/// Mutual exchange of own and cached models. Both sides read the caches as
/// they were before the exchange; returns the new caches of (a, b).
std::pair<ModelCache, ModelCache> exchange(const AgentRuntime& a, const AgentRuntime& b, Epoch t,
                                           const CachePolicy& policy);

/// Sample-count weighted average, summed in ascending owner order. Every
/// model must carry parameters of one architecture.
ModelParams weighted_average(std::vector<CachedModel> models);

/// Aggregates the agent's own fresh model with every cached model, weights
/// n_j / sum(n).
ModelParams aggregate(const CachedModel& own, const ModelCache& cache);

/// Unweighted mean of two models (the no-cache baseline's contact rule).
ModelParams pairwise_mean(const ModelParams& a, const ModelParams& b);

struct DataBundle {
    std::shared_ptr<const learning::Dataset> train;
    std::shared_ptr<const learning::Dataset> test;
};

/// Synthetic data from (seed, 0) / (seed, 1) streams, or IDX files.
DataBundle load_data(const ExperimentConfig& cfg);

/// Speeds vehicles up by `factor` and divides the local steps by it.
ExperimentConfig speedup_config(const ExperimentConfig& base, std::size_t factor);

/// One experiment advanced epoch by epoch.
///
/// Each epoch runs three phases: every agent trains locally; vehicles move
/// for epoch_seconds and every pair that comes into range exchanges models
/// (pairs sorted lexicographically within a tick, caches updated in place);
/// finally caches are stale-evicted and each agent aggregates. The CFL
/// baseline replaces phases two and three with a server average.
class Experiment {
public:
    explicit Experiment(ExperimentConfig cfg);
    Experiment(ExperimentConfig cfg, DataBundle data);

    metrics::EpochMetrics run_epoch();
    bool finished() const noexcept { return static_cast<std::size_t>(t_) >= cfg_.epochs; }

    Epoch epoch() const noexcept { return t_; }
    double lr() const noexcept { return scheduler_.lr(); }
    const ExperimentConfig& config() const noexcept { return cfg_; }
    const std::vector<AgentRuntime>& agents() const noexcept { return agents_; }
    const DataBundle& data() const noexcept { return data_; }
    const mobility::Fleet* fleet() const noexcept { return fleet_ ? &*fleet_ : nullptr; }
    /// Pairs that triggered an exchange in the last epoch, in processing order.
    const std::vector<mobility::Contact>& last_contacts() const noexcept { return contacts_; }

private:
    void setup();
    void local_phase();
    void contact_phase();
    void aggregation_phase();

    ExperimentConfig cfg_;
    DataBundle data_;
    learning::PlateauScheduler scheduler_;
    std::optional<mobility::Fleet> fleet_;
    std::optional<CachePolicy> policy_;
    std::vector<AgentRuntime> agents_;
    std::vector<std::vector<std::size_t>> eval_rows_;
    std::vector<mobility::Contact> contacts_;
    Epoch t_ = 0;
};

/// Runs until `epochs` or early stop; one EpochMetrics per executed epoch.
std::vector<metrics::EpochMetrics> run(const ExperimentConfig& cfg);
std::vector<metrics::EpochMetrics> run(const ExperimentConfig& cfg, const DataBundle& data);

/// Centralised FedAvg on the same agents and data.
std::vector<metrics::EpochMetrics> baseline_cfl(const ExperimentConfig& cfg);

/// Calls on_contact(a, b) for each pair entering range during one epoch of
/// `ticks` mobility steps; pairs already in range at the previous tick are
/// skipped, and the first tick of every epoch treats all pairs as new.
/// Returns the number of triggered contacts.
template <class OnContact>
std::size_t run_contact_ticks(mobility::Fleet& fleet, double dt, std::size_t ticks, double range,
                              OnContact&& on_contact) {
    std::vector<mobility::Contact> previous;
    std::size_t count = 0;
    for (std::size_t k = 0; k < ticks; ++k) {
        fleet.step_all(dt);
        const auto pts = fleet.positions();
        auto current = mobility::detect_contacts(pts, range);
        for (const auto& pair : current) {
            if (std::binary_search(previous.begin(), previous.end(), pair)) continue;
            on_contact(pair.first, pair.second);
            ++count;
        }
        previous = std::move(current);
    }
    return count;
}

/// Mobility and cache exchange only, with zero-size model tokens. Uses the
/// config's tau_max, epoch_seconds and cache_size; statistics are averaged
/// over `measure_epochs` epochs after a warm-up of 2 * tau_max epochs.
cache::CacheStats simulate_cache_occupancy(const ExperimentConfig& cfg,
                                           std::size_t measure_epochs);

}  // namespace cached_dfl::protocol
