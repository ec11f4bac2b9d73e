#pragma once

#include <cstddef>
#include <limits>
#include <span>

#include "cached_dfl/dataset.hpp"
#include "cached_dfl/model.hpp"
#include "cached_dfl/rng.hpp"

namespace cached_dfl::learning {

struct LocalLearnerConfig {
    std::size_t local_steps = 10;  // K
    double eta = 0.1;
    double rho = 0.01;
    std::size_t batch_size = 64;
};

/// K proximal SGD steps anchored at `params`; each mini-batch is drawn
/// uniformly with replacement from the agent's samples.
ModelParams local_update(const ModelParams& params, const AgentDataset& data,
                         const LocalLearnerConfig& cfg, Rng& rng);

struct PlateauConfig {
    double factor = 0.1;
    std::size_t patience = 10;
    double min_lr = 1e-4;
};

/// Learning-rate reduction on a plateau of a maximised metric. A metric
/// improves when it is strictly greater than the best seen; after `patience`
/// consecutive non-improving epochs the rate is multiplied by `factor`
/// (floored at min_lr) and the counter restarts.
class PlateauScheduler {
public:
    PlateauScheduler(double initial_lr, PlateauConfig cfg);

    /// Feeds one epoch's metric and returns the learning rate for the next epoch.
    double step(double metric);
    double lr() const noexcept { return lr_; }

private:
    PlateauConfig cfg_;
    double lr_;
    double best_ = -std::numeric_limits<double>::infinity();
    std::size_t bad_epochs_ = 0;
};

/// Learning rate after replaying `history` through a fresh scheduler.
double reduce_on_plateau(double initial_lr, const PlateauConfig& cfg,
                         std::span<const double> history);

}  // namespace cached_dfl::learning
