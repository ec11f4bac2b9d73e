#include "cached_dfl/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "cached_dfl/errors.hpp"

namespace cached_dfl {

std::string to_string(Policy p) {
    switch (p) {
        case Policy::lru: return "lru";
        case Policy::gb: return "gb";
        case Policy::none: return "none";
        case Policy::cfl: return "cfl";
    }
    return "?";
}

std::string to_string(PartitionScheme p, std::size_t overlap) {
    switch (p) {
        case PartitionScheme::shards: return "shards";
        case PartitionScheme::iid: return "iid";
        case PartitionScheme::dirichlet: return "dirichlet";
        case PartitionScheme::overlap: return "overlap-" + std::to_string(overlap);
    }
    return "?";
}

std::string to_string(ContactMode m) {
    return m == ContactMode::mobility ? "mobility" : "full-mesh";
}

Policy parse_policy(const std::string& text) {
    if (text == "lru") return Policy::lru;
    if (text == "gb") return Policy::gb;
    if (text == "none" || text == "dfl") return Policy::none;
    if (text == "cfl") return Policy::cfl;
    throw ConfigError("policy: unknown value '" + text + "' (expected lru, gb, none or cfl)");
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
    return out;
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_real(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

std::vector<std::size_t> parse_counts(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_count(key, item));
    if (out.empty()) throw ConfigError(key + ": expected a comma-separated list");
    return out;
}

void parse_partition(ExperimentConfig& cfg, const std::string& value) {
    const std::string v = trim(value);
    if (v == "shards") {
        cfg.partition = PartitionScheme::shards;
    } else if (v == "iid") {
        cfg.partition = PartitionScheme::iid;
    } else if (v == "dirichlet") {
        cfg.partition = PartitionScheme::dirichlet;
    } else if (v.rfind("overlap-", 0) == 0) {
        const std::size_t n = parse_count("partition", v.substr(8));
        if (n > 3) throw ConfigError("partition: overlap must be between 0 and 3");
        cfg.partition = PartitionScheme::overlap;
        cfg.overlap = n;
    } else {
        throw ConfigError("partition: unknown value '" + value +
                          "' (expected shards, iid, dirichlet or overlap-0..3)");
    }
}

std::string join(const std::vector<std::size_t>& xs) {
    std::string s;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(xs[i]);
    }
    return s;
}

struct Setting {
    std::string name;
    bool mobility;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<nlohmann::json(const ExperimentConfig&)> get;
};

#define CDFL_COUNT(key, field, mob)                                                         \
    Setting {                                                                               \
        key, mob, [](ExperimentConfig& c, const std::string& v) { c.field = parse_count(key, v); }, \
            [](const ExperimentConfig& c) { return nlohmann::json(c.field); }                 \
    }
#define CDFL_REAL(key, field, mob)                                                         \
    Setting {                                                                              \
        key, mob, [](ExperimentConfig& c, const std::string& v) { c.field = parse_real(key, v); }, \
            [](const ExperimentConfig& c) { return nlohmann::json(c.field); }                \
    }

const std::vector<Setting>& settings() {
    static const std::vector<Setting> table = {
        CDFL_COUNT("agents", agents, false),
        CDFL_COUNT("epochs", epochs, false),
        CDFL_COUNT("local-steps", local_steps, false),
        CDFL_REAL("lr", lr, false),
        CDFL_REAL("rho", rho, false),
        CDFL_COUNT("batch-size", batch_size, false),
        CDFL_COUNT("cache-size", cache_size, false),
        CDFL_COUNT("tau-max", tau_max, false),
        Setting{"policy", false,
                [](ExperimentConfig& c, const std::string& v) { c.policy = parse_policy(trim(v)); },
                [](const ExperimentConfig& c) { return nlohmann::json(to_string(c.policy)); }},
        Setting{"gb-quotas", false,
                [](ExperimentConfig& c, const std::string& v) {
                    c.gb_quotas = trim(v).empty() ? std::vector<std::size_t>{}
                                                  : parse_counts("gb-quotas", v);
                },
                [](const ExperimentConfig& c) { return nlohmann::json(join(c.gb_quotas)); }},
        Setting{"partition", false, parse_partition,
                [](const ExperimentConfig& c) {
                    return nlohmann::json(to_string(c.partition, c.overlap));
                }},
        CDFL_REAL("dirichlet-pi", dirichlet_pi, false),
        Setting{"model", false,
                [](ExperimentConfig& c, const std::string& v) {
                    c.model = learning::parse_model_kind(trim(v));
                },
                [](const ExperimentConfig& c) { return nlohmann::json(learning::to_string(c.model)); }},
        CDFL_COUNT("hidden", hidden, false),
        Setting{"dataset", false,
                [](ExperimentConfig& c, const std::string& v) { c.dataset = trim(v); },
                [](const ExperimentConfig& c) { return nlohmann::json(c.dataset); }},
        CDFL_COUNT("train-samples", train_samples, false),
        CDFL_COUNT("test-samples", test_samples, false),
        CDFL_COUNT("input-dim", input_dim, false),
        CDFL_REAL("separation", separation, false),
        CDFL_REAL("noise", noise, false),
        CDFL_REAL("condition", condition, false),
        CDFL_COUNT("eval-samples", eval_samples, false),
        CDFL_REAL("speed", speed, true),
        CDFL_REAL("epoch-seconds", epoch_seconds, true),
        CDFL_REAL("dt", dt, true),
        CDFL_REAL("range", range, true),
        CDFL_COUNT("grid-rows", grid_rows, true),
        CDFL_COUNT("grid-cols", grid_cols, true),
        CDFL_REAL("block-length", block_length, true),
        CDFL_COUNT("areas", areas, true),
        CDFL_COUNT("restricted-per-area", restricted_per_area, true),
        Setting{"contact-mode", true,
                [](ExperimentConfig& c, const std::string& v) {
                    const std::string s = trim(v);
                    if (s == "mobility") {
                        c.contact_mode = ContactMode::mobility;
                    } else if (s == "full-mesh") {
                        c.contact_mode = ContactMode::full_mesh;
                    } else {
                        throw ConfigError("contact-mode: unknown value '" + v +
                                          "' (expected mobility or full-mesh)");
                    }
                },
                [](const ExperimentConfig& c) { return nlohmann::json(to_string(c.contact_mode)); }},
        Setting{"seed", false,
                [](ExperimentConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
                [](const ExperimentConfig& c) { return nlohmann::json(c.seed); }},
        CDFL_COUNT("patience", patience, false),
        CDFL_REAL("lr-factor", lr_factor, false),
        CDFL_COUNT("lr-patience", lr_patience, false),
        CDFL_REAL("min-lr", min_lr, false),
        Setting{"target-acc", false,
                [](ExperimentConfig& c, const std::string& v) {
                    if (trim(v).empty() || trim(v) == "none") {
                        c.target_acc.reset();
                    } else {
                        c.target_acc = parse_real("target-acc", v);
                    }
                },
                [](const ExperimentConfig& c) {
                    return c.target_acc ? nlohmann::json(*c.target_acc) : nlohmann::json(nullptr);
                }},
    };
    return table;
}

#undef CDFL_COUNT
#undef CDFL_REAL

const Setting& find_setting(const std::string& key) {
    for (const auto& s : settings()) {
        if (s.name == key) return s;
    }
    throw ConfigError("unknown setting '" + key + "'");
}

}  // namespace

const std::vector<std::string>& setting_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& s : settings()) out.push_back(s.name);
        return out;
    }();
    return names;
}

bool is_mobility_setting(const std::string& key) { return find_setting(key).mobility; }

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    find_setting(key).set(cfg, value);
}

nlohmann::json to_json(const ExperimentConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& s : settings()) j[s.name] = s.get(cfg);
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base) {
    if (!j.is_object()) throw ConfigError("configuration JSON must be an object");
    for (const auto& [key, value] : j.items()) {
        if (value.is_null()) {
            apply_setting(base, key, "");
        } else if (value.is_string()) {
            apply_setting(base, key, value.get<std::string>());
        } else {
            apply_setting(base, key, value.dump());
        }
    }
    return base;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> out;
    const std::string body = trim(text);
    if (!body.empty() && body.front() == '{') {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError(std::string("malformed JSON configuration: ") + e.what());
        }
        if (!j.is_object()) throw ConfigError("configuration JSON must be an object");
        // Only the config block of a results file is a configuration.
        if (j.contains("config") && j["config"].is_object()) j = j["config"];
        for (const auto& [key, value] : j.items()) {
            if (value.is_null()) {
                out.emplace_back(key, "");
            } else {
                out.emplace_back(key, value.is_string() ? value.get<std::string>() : value.dump());
            }
        }
        return out;
    }

    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        if (key.rfind("--", 0) == 0) key.erase(0, 2);
        out.emplace_back(key, trim(line.substr(eq + 1)));
    }
    return out;
}

void ExperimentConfig::validate() const {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(agents >= 1, "agents must be at least 1");
    require(lr > 0.0, "lr must be positive");
    require(rho >= 0.0, "rho must be non-negative");
    require(batch_size >= 1, "batch-size must be at least 1");
    require(tau_max >= 1, "tau-max must be at least 1");
    require(policy == Policy::none || policy == Policy::cfl || cache_size >= 1,
            "cache-size must be at least 1");
    require(dirichlet_pi > 0.0, "dirichlet-pi must be positive");
    require(model != learning::ModelKind::mlp || hidden >= 1, "hidden must be at least 1");
    require(train_samples >= 1 && test_samples >= 1, "train/test sample counts must be positive");
    require(input_dim >= 1, "input-dim must be at least 1");
    require(noise >= 0.0, "noise must be non-negative");
    require(condition >= 1.0, "condition must be at least 1");
    require(speed > 0.0, "speed must be positive");
    require(epoch_seconds > 0.0, "epoch-seconds must be positive");
    require(dt > 0.0, "dt must be positive");
    require(range > 0.0, "range must be positive");
    require(grid_rows >= 2 && grid_cols >= 2, "grid-rows and grid-cols must be at least 2");
    require(block_length > 0.0, "block-length must be positive");
    require(lr_factor > 0.0 && lr_factor <= 1.0, "lr-factor must be in (0, 1]");
    require(min_lr >= 0.0, "min-lr must be non-negative");
    require(!target_acc || (*target_acc >= 0.0 && *target_acc <= 1.0),
            "target-acc must be in [0, 1]");
    require(dataset == "synthetic" || dataset.rfind("idx:", 0) == 0,
            "dataset must be 'synthetic' or 'idx:<img>,<lbl>,<test img>,<test lbl>'");
    if (areas > 0) {
        require(areas * restricted_per_area <= agents,
                "areas x restricted-per-area exceeds the number of agents");
        require(grid_rows >= areas, "grid-rows must be at least the number of areas");
    }
    if (policy == Policy::gb) {
        require(!gb_quotas.empty(), "policy gb requires gb-quotas");
        const std::size_t sum =
            std::accumulate(gb_quotas.begin(), gb_quotas.end(), std::size_t{0});
        require(sum == cache_size, "gb-quotas must sum to cache-size");
        require(areas == 0 || gb_quotas.size() == areas,
                "gb-quotas needs one entry per area");
        require(gb_quotas.size() <= grid_rows, "more gb groups than grid rows");
    }
    if (partition == PartitionScheme::overlap) {
        require(areas == 0 || areas == 3, "overlap partitions use exactly 3 areas");
        require(agents >= 3, "overlap partitions need at least 3 agents");
    }
}

}  // namespace cached_dfl
