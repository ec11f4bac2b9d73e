#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cached_dfl/model.hpp"

namespace cached_dfl {

enum class Policy { lru, gb, none, cfl };
enum class PartitionScheme { shards, iid, dirichlet, overlap };
enum class ContactMode { mobility, full_mesh };

std::string to_string(Policy p);
std::string to_string(PartitionScheme p, std::size_t overlap);
std::string to_string(ContactMode m);
Policy parse_policy(const std::string& text);

/// Complete, resolved description of one experiment.
struct ExperimentConfig {
    // population and training
    std::size_t agents = 100;
    std::size_t epochs = 1000;
    std::size_t local_steps = 10;
    double lr = 0.1;
    double rho = 0.01;
    std::size_t batch_size = 64;

    // caching
    std::size_t cache_size = 10;
    std::size_t tau_max = 10;
    Policy policy = Policy::lru;
    std::vector<std::size_t> gb_quotas;

    // data
    PartitionScheme partition = PartitionScheme::shards;
    std::size_t overlap = 0;
    double dirichlet_pi = 0.5;
    learning::ModelKind model = learning::ModelKind::softmax;
    std::size_t hidden = 64;
    std::string dataset = "synthetic";
    std::size_t train_samples = 20000;
    std::size_t test_samples = 4000;
    std::size_t input_dim = 32;
    double separation = 3.0;
    double noise = 1.0;
    double condition = 1.0;  // feature-scale spread of the synthetic data
    std::size_t eval_samples = 0;  // per-agent test subsample, 0 = full test set

    // mobility
    double speed = 13.89;
    double epoch_seconds = 120.0;
    double dt = 1.0;
    double range = 100.0;
    std::size_t grid_rows = 10;
    std::size_t grid_cols = 10;
    double block_length = 1000.0;
    std::size_t areas = 0;  // 0 = every vehicle roams freely
    std::size_t restricted_per_area = 0;
    ContactMode contact_mode = ContactMode::mobility;

    // schedule
    std::uint64_t seed = 1;
    std::size_t patience = 20;  // early stopping window, 0 disables
    double lr_factor = 0.1;
    std::size_t lr_patience = 10;
    double min_lr = 1e-4;
    std::optional<double> target_acc;

    /// Throws ConfigError naming the first offending field.
    void validate() const;
};

/// Names accepted by apply_setting, in output order.
const std::vector<std::string>& setting_names();

/// Keys that only affect the mobility simulation.
bool is_mobility_setting(const std::string& key);

/// Parses `value` into the field named `key` (flag name without dashes).
/// Unknown keys and malformed values raise ConfigError.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Every field with defaults materialised.
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Inverse of to_json; unknown keys raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

/// Parses `key = value` lines (`#` starts a comment) or, if the text starts
/// with `{`, a JSON object as produced by to_json.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

}  // namespace cached_dfl
