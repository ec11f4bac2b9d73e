#include "cached_dfl/training.hpp"

#include <algorithm>

#include "cached_dfl/errors.hpp"

namespace cached_dfl::learning {

ModelParams local_update(const ModelParams& params, const AgentDataset& data,
                         const LocalLearnerConfig& cfg, Rng& rng) {
    if (cfg.local_steps == 0) return params;
    if (data.indices.empty()) throw ConfigError("local update on an empty dataset");
    if (cfg.batch_size == 0) throw ConfigError("batch size must be at least 1");

    ModelParams x = params;
    std::vector<std::size_t> batch(cfg.batch_size);
    std::uniform_int_distribution<std::size_t> pick(0, data.indices.size() - 1);
    for (std::size_t k = 0; k < cfg.local_steps; ++k) {
        for (auto& b : batch) b = data.indices[pick(rng)];
        const auto g = grad(x, *data.source, batch, params, cfg.rho);
        for (std::size_t i = 0; i < g.size(); ++i) x.weights[i] -= cfg.eta * g[i];
    }
    return x;
}

PlateauScheduler::PlateauScheduler(double initial_lr, PlateauConfig cfg)
    : cfg_(cfg), lr_(initial_lr) {}

double PlateauScheduler::step(double metric) {
    if (metric > best_) {
        best_ = metric;
        bad_epochs_ = 0;
        return lr_;
    }
    if (++bad_epochs_ >= cfg_.patience) {
        lr_ = std::max(lr_ * cfg_.factor, std::min(lr_, cfg_.min_lr));
        bad_epochs_ = 0;
    }
    return lr_;
}

double reduce_on_plateau(double initial_lr, const PlateauConfig& cfg,
                         std::span<const double> history) {
    PlateauScheduler s(initial_lr, cfg);
    for (double m : history) s.step(m);
    return s.lr();
}

}  // namespace cached_dfl::learning
