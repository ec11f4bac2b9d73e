#include "cached_dfl/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "cached_dfl/errors.hpp"
#include "cached_dfl/parallel.hpp"

namespace cached_dfl::protocol {

CachedModel AgentRuntime::own_view(Epoch t) const {
    return CachedModel{id, trained, t, sample_count(), group};
}

CachePolicy CachePolicy::lru() { return CachePolicy{}; }

CachePolicy CachePolicy::group_based(std::vector<std::size_t> group_map,
                                     std::vector<std::size_t> quotas) {
    CachePolicy p;
    p.group_map_ = std::move(group_map);
    p.quotas_ = std::move(quotas);
    p.grouped_ = true;
    return p;
}

ModelCache CachePolicy::update(const ModelCache& mine, const CachedModel& incoming,
                               const ModelCache& incoming_cache, Epoch t) const {
    if (grouped_) return cache::gb_update(mine, incoming, incoming_cache, t, group_map_, quotas_);
    return cache::lru_update(mine, incoming, incoming_cache, t);
}

std::pair<ModelCache, ModelCache> exchange(const AgentRuntime& a, const AgentRuntime& b, Epoch t,
                                           const CachePolicy& policy) {
    if (a.id == b.id) throw std::invalid_argument("an agent cannot exchange with itself");
    return {policy.update(a.cache, b.own_view(t), b.cache, t),
            policy.update(b.cache, a.own_view(t), a.cache, t)};
}

ModelParams weighted_average(std::vector<CachedModel> models) {
    if (models.empty()) throw std::invalid_argument("nothing to average");
    std::sort(models.begin(), models.end(),
              [](const CachedModel& x, const CachedModel& y) { return x.owner < y.owner; });
    double total = 0.0;
    for (const auto& m : models) {
        if (!m.params) throw std::invalid_argument("cached model carries no parameters");
        if (!(m.params->arch == models.front().params->arch)) {
            throw std::invalid_argument("cannot average models of different architectures");
        }
        total += static_cast<double>(m.sample_count);
    }
    ModelParams out{models.front().params->arch,
                    std::vector<double>(models.front().params->weights.size(), 0.0)};
    for (const auto& m : models) {
        const double alpha = static_cast<double>(m.sample_count) / total;
        const auto& w = m.params->weights;
        for (std::size_t i = 0; i < w.size(); ++i) out.weights[i] += alpha * w[i];
    }
    return out;
}

ModelParams aggregate(const CachedModel& own, const ModelCache& cache) {
    if (own.sample_count < 1) throw std::invalid_argument("own sample count must be positive");
    if (cache.empty()) return *own.params;
    std::vector<CachedModel> all(cache.entries().begin(), cache.entries().end());
    all.push_back(own);
    return weighted_average(std::move(all));
}

ModelParams pairwise_mean(const ModelParams& a, const ModelParams& b) {
    if (!(a.arch == b.arch)) throw std::invalid_argument("cannot average different architectures");
    ModelParams out = a;
    for (std::size_t i = 0; i < out.weights.size(); ++i) {
        out.weights[i] = 0.5 * (a.weights[i] + b.weights[i]);
    }
    return out;
}

DataBundle load_data(const ExperimentConfig& cfg) {
    if (cfg.dataset == "synthetic") {
        learning::SyntheticSpec spec;
        spec.input_dim = cfg.input_dim;
        spec.classes = 10;
        spec.separation = cfg.separation;
        spec.noise = cfg.noise;
        spec.condition = cfg.condition;
        spec.samples = cfg.train_samples;
        auto train = std::make_shared<const learning::Dataset>(
            learning::make_synthetic(spec, derive_seed(cfg.seed, Stream::dataset, {0})));
        spec.samples = cfg.test_samples;
        auto test = std::make_shared<const learning::Dataset>(
            learning::make_synthetic(spec, derive_seed(cfg.seed, Stream::dataset, {1})));
        return {std::move(train), std::move(test)};
    }
    // idx:<train images>,<train labels>,<test images>,<test labels>
    std::vector<std::string> paths;
    std::stringstream ss(cfg.dataset.substr(4));
    std::string item;
    while (std::getline(ss, item, ',')) paths.push_back(item);
    if (paths.size() != 4) {
        throw ConfigError("dataset: idx needs four comma-separated paths");
    }
    auto train = std::make_shared<const learning::Dataset>(learning::load_idx(paths[0], paths[1]));
    auto test = std::make_shared<const learning::Dataset>(learning::load_idx(paths[2], paths[3]));
    if (train->input_dim() != test->input_dim()) {
        throw ConfigError("dataset: train and test images differ in size");
    }
    return {std::move(train), std::move(test)};
}

ExperimentConfig speedup_config(const ExperimentConfig& base, std::size_t factor) {
    if (factor < 1) throw ConfigError("speedup factor must be at least 1");
    if (base.local_steps % factor != 0) {
        throw ConfigError("local steps " + std::to_string(base.local_steps) +
                          " are not divisible by speedup " + std::to_string(factor));
    }
    ExperimentConfig cfg = base;
    cfg.speed = base.speed * static_cast<double>(factor);
    cfg.local_steps = base.local_steps / factor;
    return cfg;
}

namespace {

std::optional<mobility::AreaSpec> area_spec(const ExperimentConfig& cfg) {
    if (cfg.areas == 0) return std::nullopt;
    return mobility::AreaSpec{cfg.areas, cfg.restricted_per_area,
                              cfg.agents - cfg.areas * cfg.restricted_per_area};
}

std::vector<std::size_t> overlap_agents_per_area(const ExperimentConfig& cfg) {
    std::vector<std::size_t> per_area(3);
    if (const auto spec = area_spec(cfg)) {
        for (std::size_t a = 0; a < 3; ++a) per_area[a] = spec->agents_in_area(a);
    } else {
        for (std::size_t a = 0; a < 3; ++a) per_area[a] = cfg.agents / 3 + (a < cfg.agents % 3);
    }
    return per_area;
}

std::vector<learning::AgentDataset> make_partition(const ExperimentConfig& cfg,
                                                   std::shared_ptr<const learning::Dataset> train) {
    const std::uint64_t seed = derive_seed(cfg.seed, Stream::partition);
    switch (cfg.partition) {
        case PartitionScheme::shards: {
            const auto tiers = learning::default_shard_tiers();
            std::vector<std::size_t> counts;
            try {
                counts = learning::shard_allocation(cfg.agents, tiers);
            } catch (const ConfigError&) {
                counts = learning::apportioned_shard_allocation(cfg.agents, tiers);
            }
            return learning::partition_shards_with_counts(std::move(train), {}, std::move(counts),
                                                          seed);
        }
        case PartitionScheme::iid:
            return learning::partition_iid(std::move(train), cfg.agents, seed);
        case PartitionScheme::dirichlet:
            return learning::partition_dirichlet(std::move(train), cfg.agents, cfg.dirichlet_pi,
                                                 seed);
        case PartitionScheme::overlap: {
            const auto per_area = overlap_agents_per_area(cfg);
            return learning::partition_overlap(std::move(train), cfg.overlap, per_area, seed);
        }
    }
    throw ConfigError("unknown partition scheme");
}

std::size_t tick_count(const ExperimentConfig& cfg) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.epoch_seconds / cfg.dt)));
}

}  // namespace

Experiment::Experiment(ExperimentConfig cfg) : Experiment(cfg, load_data(cfg)) {}

Experiment::Experiment(ExperimentConfig cfg, DataBundle data)
    : cfg_(std::move(cfg)),
      data_(std::move(data)),
      scheduler_(cfg_.lr, learning::PlateauConfig{cfg_.lr_factor, cfg_.lr_patience, cfg_.min_lr}) {
    cfg_.validate();
    setup();
}

void Experiment::setup() {
    const auto partition = make_partition(cfg_, data_.train);
    if (partition.size() != cfg_.agents) {
        throw ConfigError("partition produced " + std::to_string(partition.size()) + " agents");
    }
    for (std::size_t i = 0; i < partition.size(); ++i) {
        if (partition[i].indices.empty()) {
            throw ConfigError("agent " + std::to_string(i) + " received no training samples");
        }
    }

    const learning::Architecture arch{cfg_.model, data_.train->input_dim(), cfg_.hidden,
                                      data_.train->classes()};
    auto initial = std::make_shared<const ModelParams>(learning::init_params(arch, cfg_.seed));

    const bool moves = cfg_.policy != Policy::cfl && cfg_.contact_mode == ContactMode::mobility;
    auto map = mobility::build_grid(cfg_.grid_rows, cfg_.grid_cols, cfg_.block_length);
    auto vehicles = mobility::init_vehicles(map, cfg_.agents, cfg_.speed, area_spec(cfg_),
                                            cfg_.seed);

    // Group of an agent: its home area, else its overlap data area, else the
    // band it starts in.
    std::vector<std::size_t> groups(cfg_.agents, 0);
    const std::size_t bands = cfg_.gb_quotas.empty() ? 1 : cfg_.gb_quotas.size();
    if (cfg_.areas > 0) {
        for (std::size_t i = 0; i < cfg_.agents; ++i) groups[i] = vehicles[i].home_area.value_or(0);
    } else if (cfg_.partition == PartitionScheme::overlap) {
        const auto per_area = overlap_agents_per_area(cfg_);
        std::size_t i = 0;
        for (std::size_t a = 0; a < per_area.size(); ++a) {
            for (std::size_t k = 0; k < per_area[a]; ++k) groups[i++] = a;
        }
    } else if (bands > 1) {
        mobility::validate_areas(map, bands);
        for (std::size_t i = 0; i < cfg_.agents; ++i) {
            groups[i] = mobility::area_of(vehicles[i], map, bands);
        }
    }

    if (cfg_.policy == Policy::gb) {
        const std::size_t used = *std::max_element(groups.begin(), groups.end()) + 1;
        if (used > cfg_.gb_quotas.size()) {
            throw ConfigError("agents span " + std::to_string(used) + " groups but only " +
                              std::to_string(cfg_.gb_quotas.size()) + " quotas were given");
        }
        // Pad the map so gb_update sees one quota per group.
        std::vector<std::size_t> group_map = groups;
        const std::size_t max_group = cfg_.gb_quotas.size() - 1;
        if (used - 1 < max_group) group_map.push_back(max_group);
        policy_ = CachePolicy::group_based(std::move(group_map), cfg_.gb_quotas);
    } else if (cfg_.policy == Policy::lru) {
        policy_ = CachePolicy::lru();
    }

    std::optional<std::vector<std::size_t>> quotas;
    if (cfg_.policy == Policy::gb) quotas = cfg_.gb_quotas;
    agents_.reserve(cfg_.agents);
    for (std::size_t i = 0; i < cfg_.agents; ++i) {
        agents_.push_back(AgentRuntime{i, initial, nullptr, groups[i],
                                       ModelCache(i, cfg_.cache_size,
                                                  static_cast<Epoch>(cfg_.tau_max), quotas),
                                       partition[i]});
        eval_rows_.push_back(
            metrics::eval_subsample(data_.test->size(), cfg_.eval_samples, cfg_.seed, i));
    }
    if (moves) fleet_.emplace(std::move(map), std::move(vehicles), cfg_.seed);
}

void Experiment::local_phase() {
    const learning::LocalLearnerConfig lc{cfg_.local_steps, scheduler_.lr(), cfg_.rho,
                                          cfg_.batch_size};
    parallel_for(agents_.size(), [&](std::size_t i) {
        auto& a = agents_[i];
        Rng rng = make_rng(cfg_.seed, Stream::training,
                           {static_cast<std::uint64_t>(a.id), static_cast<std::uint64_t>(t_)});
        a.trained = std::make_shared<const ModelParams>(learning::local_update(*a.model, a.data, lc, rng));
    });
}

void Experiment::contact_phase() {
    contacts_.clear();
    auto on_contact = [&](std::size_t i, std::size_t j) {
        auto& a = agents_[i];
        auto& b = agents_[j];
        contacts_.emplace_back(i, j);
        if (cfg_.policy == Policy::none) {
            auto mean = std::make_shared<const ModelParams>(pairwise_mean(*a.trained, *b.trained));
            a.trained = mean;
            b.trained = mean;
            return;
        }
        auto [ca, cb] = exchange(a, b, t_, *policy_);
        a.cache = std::move(ca);
        b.cache = std::move(cb);
    };

    if (cfg_.contact_mode == ContactMode::full_mesh) {
        for (std::size_t i = 0; i < agents_.size(); ++i) {
            for (std::size_t j = i + 1; j < agents_.size(); ++j) on_contact(i, j);
        }
        return;
    }
    run_contact_ticks(*fleet_, cfg_.dt, tick_count(cfg_), cfg_.range, on_contact);
}

void Experiment::aggregation_phase() {
    if (cfg_.policy == Policy::none) {
        for (auto& a : agents_) a.model = a.trained;
        return;
    }
    const auto tau_max = static_cast<Epoch>(cfg_.tau_max);
    parallel_for(agents_.size(), [&](std::size_t i) {
        auto& a = agents_[i];
        a.cache = cache::evict_stale(std::move(a.cache), t_, tau_max);
        for (const auto& e : a.cache.entries()) {
            if (e.staleness(t_) >= tau_max || e.owner == a.id) {
                throw std::logic_error("stale or self-owned model reached aggregation");
            }
        }
        a.model = std::make_shared<const ModelParams>(aggregate(a.own_view(t_), a.cache));
    });
}

metrics::EpochMetrics Experiment::run_epoch() {
    if (finished()) throw std::logic_error("experiment already finished");
    const double lr_used = scheduler_.lr();
    local_phase();

    if (cfg_.policy == Policy::cfl) {
        std::vector<CachedModel> all;
        all.reserve(agents_.size());
        for (const auto& a : agents_) all.push_back(a.own_view(t_));
        auto global = std::make_shared<const ModelParams>(weighted_average(std::move(all)));
        for (auto& a : agents_) a.model = global;
        contacts_.clear();
    } else {
        contact_phase();
        aggregation_phase();
    }

    std::vector<const ModelParams*> models;
    std::vector<ModelCache> caches;
    models.reserve(agents_.size());
    for (const auto& a : agents_) {
        models.push_back(a.model.get());
        caches.push_back(a.cache);
    }
    auto m = metrics::measure(models, *data_.test, eval_rows_, caches, t_, lr_used,
                              contacts_.size());
    scheduler_.step(m.mean_acc);
    ++t_;
    return m;
}

std::vector<metrics::EpochMetrics> run(const ExperimentConfig& cfg, const DataBundle& data) {
    cfg.validate();
    std::vector<metrics::EpochMetrics> series;
    if (cfg.epochs == 0) return series;
    Experiment exp(cfg, data);
    metrics::EarlyStopper stopper(cfg.patience);
    while (!exp.finished()) {
        series.push_back(exp.run_epoch());
        if (stopper.update(series.back().mean_acc)) break;
    }
    return series;
}

std::vector<metrics::EpochMetrics> run(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.epochs == 0) return {};
    return run(cfg, load_data(cfg));
}

std::vector<metrics::EpochMetrics> baseline_cfl(const ExperimentConfig& cfg) {
    ExperimentConfig c = cfg;
    c.policy = Policy::cfl;
    return run(c);
}

cache::CacheStats simulate_cache_occupancy(const ExperimentConfig& cfg,
                                           std::size_t measure_epochs) {
    cfg.validate();
    if (cfg.policy != Policy::lru && cfg.policy != Policy::gb) {
        throw ConfigError("cache statistics need policy lru or gb");
    }
    auto map = mobility::build_grid(cfg.grid_rows, cfg.grid_cols, cfg.block_length);
    auto vehicles = mobility::init_vehicles(map, cfg.agents, cfg.speed, area_spec(cfg), cfg.seed);

    CachePolicy policy = CachePolicy::lru();
    std::optional<std::vector<std::size_t>> quotas;
    if (cfg.policy == Policy::gb) {
        std::vector<std::size_t> groups(cfg.agents);
        for (std::size_t i = 0; i < cfg.agents; ++i) {
            groups[i] = vehicles[i].home_area.value_or(
                mobility::area_of(vehicles[i], map, cfg.gb_quotas.size()));
        }
        groups.push_back(cfg.gb_quotas.size() - 1);
        policy = CachePolicy::group_based(std::move(groups), cfg.gb_quotas);
        quotas = cfg.gb_quotas;
    }
    mobility::Fleet fleet(std::move(map), std::move(vehicles), cfg.seed);

    std::vector<AgentRuntime> agents;
    agents.reserve(cfg.agents);
    for (std::size_t i = 0; i < cfg.agents; ++i) {
        agents.push_back(AgentRuntime{i, nullptr, nullptr, 0,
                                      ModelCache(i, cfg.cache_size,
                                                 static_cast<Epoch>(cfg.tau_max), quotas),
                                      {}});
    }

    const std::size_t warmup = 2 * cfg.tau_max;
    const auto tau_max = static_cast<Epoch>(cfg.tau_max);
    cache::CacheStats sum;
    std::vector<ModelCache> caches;
    for (std::size_t epoch = 0; epoch < warmup + measure_epochs; ++epoch) {
        const auto t = static_cast<Epoch>(epoch);
        run_contact_ticks(fleet, cfg.dt, tick_count(cfg), cfg.range, [&](std::size_t i, std::size_t j) {
            auto [ci, cj] = exchange(agents[i], agents[j], t, policy);
            agents[i].cache = std::move(ci);
            agents[j].cache = std::move(cj);
        });
        caches.clear();
        for (auto& a : agents) {
            a.cache = cache::evict_stale(std::move(a.cache), t, tau_max);
            caches.push_back(a.cache);
        }
        if (epoch < warmup) continue;
        const auto s = cache::cache_stats(caches, t);
        sum.count_mean += s.count_mean;
        sum.count_var += s.count_var;
        sum.age_mean += s.age_mean;
        sum.age_var += s.age_var;
    }
    if (measure_epochs > 0) {
        const auto n = static_cast<double>(measure_epochs);
        sum.count_mean /= n;
        sum.count_var /= n;
        sum.age_mean /= n;
        sum.age_var /= n;
    }
    return sum;
}

}  // namespace cached_dfl::protocol
