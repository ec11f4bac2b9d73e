#include "cached_dfl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "cached_dfl/errors.hpp"
#include "cached_dfl/rng.hpp"

namespace cached_dfl::learning {

Dataset::Dataset(std::size_t input_dim, std::size_t classes, std::vector<double> features,
                 std::vector<int> labels)
    : input_dim_(input_dim),
      classes_(classes),
      features_(std::move(features)),
      labels_(std::move(labels)) {
    if (features_.size() != labels_.size() * input_dim_) {
        throw ConfigError("feature matrix size does not match label count");
    }
    for (int l : labels_) {
        if (l < 0 || static_cast<std::size_t>(l) >= classes_) {
            throw ConfigError("label " + std::to_string(l) + " outside [0, " +
                              std::to_string(classes_) + ")");
        }
    }
}

Dataset make_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
    if (spec.samples == 0 || spec.classes < 2) {
        throw ConfigError("synthetic data needs samples >= 1 and classes >= 2");
    }
    if (spec.input_dim < spec.classes) {
        throw ConfigError("synthetic input dimension must be at least the number of classes");
    }
    if (!(spec.noise >= 0.0)) throw ConfigError("synthetic noise must be non-negative");
    if (!(spec.condition >= 1.0)) throw ConfigError("synthetic condition must be at least 1");

    Rng rng = make_rng(seed, Stream::dataset);
    std::vector<int> labels(spec.samples);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        labels[i] = static_cast<int>(i % spec.classes);
    }
    std::shuffle(labels.begin(), labels.end(), rng);

    std::vector<double> scale(spec.input_dim, 1.0);
    if (spec.input_dim > 1) {
        for (std::size_t d = 0; d < spec.input_dim; ++d) {
            scale[d] = std::pow(spec.condition, -static_cast<double>(d) /
                                                    static_cast<double>(spec.input_dim - 1));
        }
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> features(spec.samples * spec.input_dim);
    for (std::size_t i = 0; i < spec.samples; ++i) {
        double* row = features.data() + i * spec.input_dim;
        for (std::size_t d = 0; d < spec.input_dim; ++d) row[d] = spec.noise * gauss(rng);
        row[static_cast<std::size_t>(labels[i])] += spec.separation;
        for (std::size_t d = 0; d < spec.input_dim; ++d) row[d] *= scale[d];
    }
    return Dataset(spec.input_dim, spec.classes, std::move(features), std::move(labels));
}

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open file");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t at) {
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) |
           (std::uint32_t{b[at + 2]} << 8) | std::uint32_t{b[at + 3]};
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lbl = read_file(labels_path);
    if (img.size() < 16) throw IoError(images_path, "truncated IDX header");
    if (lbl.size() < 8) throw IoError(labels_path, "truncated IDX header");
    if (be32(img, 0) != 0x00000803) throw IoError(images_path, "not an IDX image file (bad magic)");
    if (be32(lbl, 0) != 0x00000801) throw IoError(labels_path, "not an IDX label file (bad magic)");

    const std::size_t count = be32(img, 4);
    const std::size_t dim = std::size_t{be32(img, 8)} * be32(img, 12);
    if (be32(lbl, 4) != count) throw IoError(labels_path, "label count differs from image count");
    if (img.size() != 16 + count * dim) throw IoError(images_path, "payload size mismatch");
    if (lbl.size() != 8 + count) throw IoError(labels_path, "payload size mismatch");
    if (dim == 0) throw IoError(images_path, "zero-sized images");

    std::vector<double> features(count * dim);
    for (std::size_t i = 0; i < features.size(); ++i) features[i] = img[16 + i] / 255.0;
    std::vector<int> labels(count);
    int max_label = 0;
    for (std::size_t i = 0; i < count; ++i) {
        labels[i] = lbl[8 + i];
        max_label = std::max(max_label, labels[i]);
    }
    return Dataset(dim, std::max<std::size_t>(10, static_cast<std::size_t>(max_label) + 1),
                   std::move(features), std::move(labels));
}

std::vector<ShardTier> default_shard_tiers() {
    return {{0.1, 4}, {0.2, 3}, {0.3, 2}, {0.4, 1}};
}

namespace {

void check_fractions(std::span<const ShardTier> tiers) {
    double sum = 0.0;
    for (const auto& t : tiers) {
        if (t.fraction < 0.0) throw ConfigError("shard tier fractions must be non-negative");
        sum += t.fraction;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("shard tier fractions must sum to 1");
}

std::vector<std::size_t> expand(std::span<const ShardTier> tiers,
                                std::span<const std::size_t> agents_per_tier) {
    std::vector<std::size_t> counts;
    for (std::size_t k = 0; k < tiers.size(); ++k) {
        counts.insert(counts.end(), agents_per_tier[k], tiers[k].shards);
    }
    return counts;
}

}  // namespace

std::vector<std::size_t> shard_allocation(std::size_t n_agents, std::span<const ShardTier> tiers) {
    check_fractions(tiers);
    std::vector<std::size_t> per_tier;
    for (const auto& t : tiers) {
        const double q = t.fraction * static_cast<double>(n_agents);
        const double r = std::round(q);
        if (std::abs(q - r) > 1e-9) {
            throw ConfigError("shard tier " + std::to_string(t.fraction) + " x " +
                              std::to_string(n_agents) + " agents is not a whole number");
        }
        per_tier.push_back(static_cast<std::size_t>(r));
    }
    return expand(tiers, per_tier);
}

std::vector<std::size_t> apportioned_shard_allocation(std::size_t n_agents,
                                                      std::span<const ShardTier> tiers) {
    check_fractions(tiers);
    std::vector<std::size_t> per_tier(tiers.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < tiers.size(); ++k) {
        const double q = tiers[k].fraction * static_cast<double>(n_agents);
        per_tier[k] = static_cast<std::size_t>(std::floor(q + 1e-9));
        assigned += per_tier[k];
        remainders.emplace_back(q - static_cast<double>(per_tier[k]), k);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < n_agents; ++k, ++assigned) {
        ++per_tier[remainders[k % remainders.size()].second];
    }
    return expand(tiers, per_tier);
}

std::vector<AgentDataset> partition_shards_with_counts(std::shared_ptr<const Dataset> data,
                                                       std::span<const std::size_t> pool,
                                                       std::vector<std::size_t> shard_counts,
                                                       std::uint64_t seed) {
    std::vector<std::size_t> order;
    if (pool.empty()) {
        order.resize(data->size());
        std::iota(order.begin(), order.end(), std::size_t{0});
    } else {
        order.assign(pool.begin(), pool.end());
    }
    const std::size_t n_shards =
        std::accumulate(shard_counts.begin(), shard_counts.end(), std::size_t{0});
    if (n_shards == 0) throw ConfigError("shard partition needs at least one shard");
    if (n_shards > order.size()) {
        throw ConfigError("cannot cut " + std::to_string(order.size()) + " samples into " +
                          std::to_string(n_shards) + " shards");
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return data->label(a) < data->label(b);
    });

    Rng rng = make_rng(seed, Stream::partition);
    std::vector<std::size_t> shard_ids(n_shards);
    std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
    std::shuffle(shard_ids.begin(), shard_ids.end(), rng);
    std::shuffle(shard_counts.begin(), shard_counts.end(), rng);

    const std::size_t n = order.size();
    std::vector<AgentDataset> out(shard_counts.size());
    std::size_t next = 0;
    for (std::size_t a = 0; a < shard_counts.size(); ++a) {
        out[a].source = data;
        for (std::size_t s = 0; s < shard_counts[a]; ++s) {
            const std::size_t shard = shard_ids[next++];
            const std::size_t lo = shard * n / n_shards;
            const std::size_t hi = (shard + 1) * n / n_shards;
            out[a].indices.insert(out[a].indices.end(), order.begin() + lo, order.begin() + hi);
        }
        std::sort(out[a].indices.begin(), out[a].indices.end());
    }
    return out;
}

std::vector<AgentDataset> partition_shards(std::shared_ptr<const Dataset> data,
                                           std::size_t n_agents, std::size_t n_shards,
                                           std::span<const ShardTier> tiers, std::uint64_t seed) {
    if (n_agents == 0) throw ConfigError("number of agents must be at least 1");
    auto counts = shard_allocation(n_agents, tiers);
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (total != n_shards) {
        throw ConfigError("shard tiers deal " + std::to_string(total) + " shards, expected " +
                          std::to_string(n_shards));
    }
    return partition_shards_with_counts(std::move(data), {}, std::move(counts), seed);
}

std::vector<AgentDataset> partition_iid(std::shared_ptr<const Dataset> data, std::size_t n_agents,
                                        std::uint64_t seed) {
    if (n_agents == 0) throw ConfigError("number of agents must be at least 1");
    std::vector<std::size_t> perm(data->size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(seed, Stream::partition);
    std::shuffle(perm.begin(), perm.end(), rng);

    const std::size_t base = perm.size() / n_agents;
    const std::size_t extra = perm.size() % n_agents;
    std::vector<AgentDataset> out(n_agents);
    std::size_t at = 0;
    for (std::size_t a = 0; a < n_agents; ++a) {
        const std::size_t len = base + (a < extra ? 1 : 0);
        out[a].source = data;
        out[a].indices.assign(perm.begin() + at, perm.begin() + at + len);
        std::sort(out[a].indices.begin(), out[a].indices.end());
        at += len;
    }
    return out;
}

std::vector<AgentDataset> partition_dirichlet(std::shared_ptr<const Dataset> data,
                                              std::size_t n_agents, double pi, std::uint64_t seed) {
    if (n_agents == 0) throw ConfigError("number of agents must be at least 1");
    if (!(pi > 0.0)) throw ConfigError("Dirichlet concentration must be positive");
    Rng rng = make_rng(seed, Stream::partition);
    std::gamma_distribution<double> gamma(pi, 1.0);

    std::vector<std::vector<std::size_t>> by_class(data->classes());
    for (std::size_t i = 0; i < data->size(); ++i) {
        by_class[static_cast<std::size_t>(data->label(i))].push_back(i);
    }

    std::vector<AgentDataset> out(n_agents);
    for (auto& d : out) d.source = data;
    std::vector<double> p(n_agents);
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        double sum = 0.0;
        for (double& v : p) sum += (v = gamma(rng));
        if (!(sum > 0.0)) {
            std::fill(p.begin(), p.end(), 1.0);
            sum = static_cast<double>(n_agents);
        }
        const auto n_c = static_cast<double>(members.size());
        double cumulative = 0.0;
        std::size_t lo = 0;
        for (std::size_t a = 0; a < n_agents; ++a) {
            cumulative += p[a] / sum;
            const std::size_t hi = a + 1 == n_agents
                                       ? members.size()
                                       : std::min(members.size(), static_cast<std::size_t>(
                                                                      std::llround(cumulative * n_c)));
            if (hi > lo) {
                out[a].indices.insert(out[a].indices.end(), members.begin() + lo,
                                      members.begin() + hi);
                lo = hi;
            }
        }
    }

    for (auto& d : out) {
        if (!d.indices.empty()) continue;
        auto largest = std::max_element(out.begin(), out.end(), [](const auto& a, const auto& b) {
            return a.indices.size() < b.indices.size();
        });
        if (largest->indices.size() <= 1) {
            throw ConfigError("not enough samples to give every agent at least one");
        }
        d.indices.push_back(largest->indices.back());
        largest->indices.pop_back();
    }
    for (auto& d : out) std::sort(d.indices.begin(), d.indices.end());
    return out;
}

std::array<std::vector<int>, 3> overlap_label_sets(std::size_t n_overlap) {
    switch (n_overlap) {
        case 0: return {{{0, 1, 2, 3}, {4, 5, 6}, {7, 8, 9}}};
        case 1: return {{{9, 0, 1, 2, 3}, {3, 4, 5, 6}, {6, 7, 8, 9}}};
        case 2: return {{{8, 9, 0, 1, 2, 3}, {2, 3, 4, 5, 6}, {5, 6, 7, 8, 9}}};
        case 3: return {{{7, 8, 9, 0, 1, 2, 3}, {1, 2, 3, 4, 5, 6}, {4, 5, 6, 7, 8, 9}}};
        default: throw ConfigError("overlap must be 0, 1, 2 or 3");
    }
}

std::vector<AgentDataset> partition_overlap(std::shared_ptr<const Dataset> data,
                                            std::size_t n_overlap,
                                            std::span<const std::size_t> agents_per_area,
                                            std::uint64_t seed) {
    if (data->classes() != 10) throw ConfigError("overlap partition requires a 10-class dataset");
    const auto sets = overlap_label_sets(n_overlap);
    if (agents_per_area.size() != sets.size()) {
        throw ConfigError("overlap partition requires exactly 3 areas");
    }

    std::vector<std::vector<std::size_t>> by_class(10);
    for (std::size_t i = 0; i < data->size(); ++i) {
        by_class[static_cast<std::size_t>(data->label(i))].push_back(i);
    }

    Rng rng = make_rng(seed, Stream::partition, {0xA2EA});
    std::array<std::vector<std::size_t>, 3> pools;
    for (int label = 0; label < 10; ++label) {
        std::vector<std::size_t> owners;
        for (std::size_t a = 0; a < sets.size(); ++a) {
            if (std::find(sets[a].begin(), sets[a].end(), label) != sets[a].end()) {
                owners.push_back(a);
            }
        }
        auto& members = by_class[static_cast<std::size_t>(label)];
        std::shuffle(members.begin(), members.end(), rng);
        const std::size_t n = members.size();
        for (std::size_t k = 0; k < owners.size(); ++k) {
            const std::size_t lo = k * n / owners.size();
            const std::size_t hi = (k + 1) * n / owners.size();
            pools[owners[k]].insert(pools[owners[k]].end(), members.begin() + lo,
                                    members.begin() + hi);
        }
    }

    const auto tiers = default_shard_tiers();
    std::vector<AgentDataset> out;
    for (std::size_t a = 0; a < sets.size(); ++a) {
        if (agents_per_area[a] == 0) throw ConfigError("every area needs at least one agent");
        auto counts = apportioned_shard_allocation(agents_per_area[a], tiers);
        auto part = partition_shards_with_counts(data, pools[a], std::move(counts),
                                                 derive_seed(seed, Stream::partition, {a}));
        for (auto& d : part) out.push_back(std::move(d));
    }
    return out;
}

}  // namespace cached_dfl::learning
