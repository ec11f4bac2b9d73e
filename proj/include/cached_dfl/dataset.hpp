#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cached_dfl::learning {

/// Dense labelled samples, features stored row-major.
class Dataset {
public:
    Dataset() = default;
    Dataset(std::size_t input_dim, std::size_t classes, std::vector<double> features,
            std::vector<int> labels);

    std::size_t size() const noexcept { return labels_.size(); }
    std::size_t input_dim() const noexcept { return input_dim_; }
    std::size_t classes() const noexcept { return classes_; }

    std::span<const double> row(std::size_t i) const noexcept {
        return {features_.data() + i * input_dim_, input_dim_};
    }
    int label(std::size_t i) const noexcept { return labels_[i]; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    const std::vector<double>& features() const noexcept { return features_; }

private:
    std::size_t input_dim_ = 0;
    std::size_t classes_ = 0;
    std::vector<double> features_;
    std::vector<int> labels_;
};

/// Isotropic Gaussian mixture. Class c is centred on separation * e_c (the
/// vertices of a scaled simplex embedded in the first `classes` coordinates);
/// every coordinate carries N(0, noise^2). Labels are exactly balanced
/// (sample i before shuffling has label i mod classes). With condition > 1
/// feature j is then multiplied by condition^(-j / (input_dim - 1)), which
/// leaves the Bayes accuracy unchanged but makes gradient training slow on
/// the small-scale features.
struct SyntheticSpec {
    std::size_t samples = 20000;
    std::size_t input_dim = 32;
    std::size_t classes = 10;
    double separation = 1.0;
    double noise = 1.0;
    double condition = 1.0;
};

Dataset make_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

/// IDX (big-endian) images 0x00000803 (count, rows, cols) + labels 0x00000801
/// (count). Pixels are scaled to [0, 1]. Throws IoError on I/O or format
/// problems, including any other magic number.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// One agent's share of a training set: indices into a shared Dataset.
struct AgentDataset {
    std::shared_ptr<const Dataset> source;
    std::vector<std::size_t> indices;

    std::size_t sample_count() const noexcept { return indices.size(); }
};

/// Fraction of agents that receive `shards` shards each.
struct ShardTier {
    double fraction;
    std::size_t shards;
};

/// 10% of agents get 4 shards, 20% get 3, 30% get 2, 40% get 1.
std::vector<ShardTier> default_shard_tiers();

/// Per-agent shard counts (in tier order). Throws ConfigError when the
/// fractions do not sum to 1 or fraction * n_agents is not integral.
std::vector<std::size_t> shard_allocation(std::size_t n_agents, std::span<const ShardTier> tiers);

/// Like shard_allocation, but rounds non-integral tier sizes by largest
/// remainder (ties to the earlier tier) so any agent count works.
std::vector<std::size_t> apportioned_shard_allocation(std::size_t n_agents,
                                                      std::span<const ShardTier> tiers);

/// Sort-by-label shard partition: the data is cut into n_shards near-equal
/// contiguous shards, shards are shuffled and dealt to agents whose shard
/// counts follow `tiers` (assigned to agents in random order). Throws
/// ConfigError if the tier counts do not add up to n_shards.
std::vector<AgentDataset> partition_shards(std::shared_ptr<const Dataset> data,
                                           std::size_t n_agents, std::size_t n_shards,
                                           std::span<const ShardTier> tiers, std::uint64_t seed);

/// Shard partition with explicit per-agent shard counts; the number of shards
/// is their sum. Operates on `pool` (all samples when empty).
std::vector<AgentDataset> partition_shards_with_counts(std::shared_ptr<const Dataset> data,
                                                       std::span<const std::size_t> pool,
                                                       std::vector<std::size_t> shard_counts,
                                                       std::uint64_t seed);

/// Uniform random split; part sizes differ by at most one (larger parts first).
std::vector<AgentDataset> partition_iid(std::shared_ptr<const Dataset> data, std::size_t n_agents,
                                        std::uint64_t seed);

/// Per-class Dirichlet(pi) proportions over agents. Agents left empty receive
/// one sample from the currently largest agent.
std::vector<AgentDataset> partition_dirichlet(std::shared_ptr<const Dataset> data,
                                              std::size_t n_agents, double pi, std::uint64_t seed);

/// Label sets of the three areas for 0..3 shared labels between neighbours.
std::array<std::vector<int>, 3> overlap_label_sets(std::size_t n_overlap);

/// Area-grouped partition for 10-class data. Samples of a label shared by two
/// areas are split evenly between them; inside an area the samples are dealt
/// to its agents with the shard method (two shards per agent on average).
/// Output is area-major: agents_per_area[0] datasets of area 0 first, etc.
std::vector<AgentDataset> partition_overlap(std::shared_ptr<const Dataset> data,
                                            std::size_t n_overlap,
                                            std::span<const std::size_t> agents_per_area,
                                            std::uint64_t seed);

}  // namespace cached_dfl::learning
