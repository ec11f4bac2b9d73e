#include "cached_dfl/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>

#include "cached_dfl/errors.hpp"
#include "cached_dfl/protocol.hpp"

namespace cached_dfl::cli {

namespace fs = std::filesystem;

ExperimentConfig resolve_config(const std::optional<std::string>& config_path,
                                const std::map<std::string, std::string>& flags) {
    ExperimentConfig cfg;
    if (const char* env = std::getenv("CACHED_DFL_SEED"); env && *env) {
        apply_setting(cfg, "seed", env);
    }
    if (config_path) {
        for (const auto& [key, value] : parse_config_text(metrics::read_text(*config_path))) {
            apply_setting(cfg, key, value);
        }
    }
    for (const auto& [key, value] : flags) apply_setting(cfg, key, value);
    return cfg;
}

std::optional<std::size_t> epochs_to_target(std::span<const metrics::EpochMetrics> series,
                                            double target) {
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (series[i].mean_acc >= target) return i + 1;
    }
    return std::nullopt;
}

std::size_t epochs_to_best(std::span<const metrics::EpochMetrics> series) {
    if (series.empty()) return 0;
    const auto best = std::max_element(series.begin(), series.end(),
                                       [](const auto& a, const auto& b) {
                                           return a.mean_acc < b.mean_acc;
                                       });
    return static_cast<std::size_t>(best - series.begin()) + 1;
}

namespace {

struct Invocation {
    std::map<std::string, std::string> raw;
    std::string config_path;
    std::string out_dir = "results";
};

void add_setting_flags(CLI::App* sub, Invocation& inv) {
    for (const auto& name : setting_names()) {
        sub->add_option("--" + name, inv.raw[name], "experiment setting");
    }
    sub->add_option("--config", inv.config_path, "key = value or JSON configuration file");
    sub->add_option("--out", inv.out_dir, "output directory");
}

std::map<std::string, std::string> given_flags(const CLI::App* sub, const Invocation& inv) {
    std::map<std::string, std::string> flags;
    for (const auto& name : setting_names()) {
        if (sub->count("--" + name) > 0) flags[name] = inv.raw.at(name);
    }
    return flags;
}

ExperimentConfig resolve(const CLI::App* sub, const Invocation& inv,
                         const std::map<std::string, std::string>& extra = {}) {
    auto flags = given_flags(sub, inv);
    for (const auto& [k, v] : extra) flags.emplace(k, v);
    const std::optional<std::string> path =
        sub->count("--config") > 0 ? std::optional<std::string>(inv.config_path) : std::nullopt;
    auto cfg = resolve_config(path, flags);
    cfg.validate();
    return cfg;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

void print_config(std::ostream& out, const ExperimentConfig& cfg) {
    out << "config " << to_json(cfg).dump() << "\n";
}

int cmd_run(const CLI::App* sub, const Invocation& inv, std::ostream& out, std::ostream& err) {
    const auto cfg = resolve(sub, inv);
    if (cfg.policy == Policy::cfl) {
        for (const auto& [key, value] : given_flags(sub, inv)) {
            if (is_mobility_setting(key)) {
                err << "warning: --" << key << " has no effect with --policy cfl\n";
            }
        }
    }
    print_config(out, cfg);
    ensure_dir(inv.out_dir);
    const auto series = protocol::run(cfg);
    metrics::write_csv(series, join_path(inv.out_dir, "metrics.csv"));
    metrics::write_json(to_json(cfg), series, join_path(inv.out_dir, "run.json"));
    if (series.empty()) {
        out << "no epochs executed\n";
    } else {
        out << "final mean accuracy " << metrics::format_value(series.back().mean_acc)
            << " after " << series.size() << " epochs; best reached at epoch "
            << epochs_to_best(series) << "\n";
    }
    return kExitOk;
}

int cmd_compare(const CLI::App* sub, const Invocation& inv, std::ostream& out) {
    const auto base = resolve(sub, inv);
    print_config(out, base);
    ensure_dir(inv.out_dir);
    const auto data = protocol::load_data(base);

    std::string summary = "policy,final_acc,best_acc,epochs,epochs_to_target\n";
    nlohmann::json doc = {{"config", to_json(base)}, {"runs", nlohmann::json::object()}};
    for (Policy p : {Policy::lru, Policy::none, Policy::cfl}) {
        ExperimentConfig cfg = base;
        cfg.policy = p;
        if (p != Policy::gb) cfg.gb_quotas.clear();
        const auto series = base.epochs == 0 ? std::vector<metrics::EpochMetrics>{}
                                             : protocol::run(cfg, data);
        metrics::write_csv(series, join_path(inv.out_dir, to_string(p) + ".csv"));
        doc["runs"][to_string(p)] = metrics::to_json(series);

        const double final_acc = series.empty() ? 0.0 : series.back().mean_acc;
        double best = 0.0;
        for (const auto& m : series) best = std::max(best, m.mean_acc);
        std::string target = "";
        if (base.target_acc) {
            const auto e = epochs_to_target(series, *base.target_acc);
            target = e ? std::to_string(*e) : "never";
        }
        summary += to_string(p) + "," + metrics::format_value(final_acc) + "," +
                   metrics::format_value(best) + "," + std::to_string(series.size()) + "," +
                   target + "\n";
    }
    metrics::write_text(join_path(inv.out_dir, "summary.csv"), summary);
    metrics::write_text(join_path(inv.out_dir, "compare.json"), doc.dump(2) + "\n");
    out << summary;
    return kExitOk;
}

int cmd_sweep(const CLI::App* sub, const Invocation& inv, const std::string& param,
              const std::string& values_text, std::ostream& out) {
    if (param != "tau-max" && param != "cache-size" && param != "speedup") {
        throw ConfigError("sweep: --param must be tau-max, cache-size or speedup");
    }
    std::vector<std::string> values;
    std::stringstream ss(values_text);
    for (std::string v; std::getline(ss, v, ',');) {
        if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw ConfigError("sweep: --values must list at least one value");

    const auto base = resolve(sub, inv);
    std::vector<ExperimentConfig> cells;
    for (const auto& v : values) {
        ExperimentConfig cfg = base;
        if (param == "speedup") {
            std::size_t factor = 0;
            try {
                factor = std::stoul(v);
            } catch (const std::exception&) {
                throw ConfigError("sweep: speedup value '" + v + "' is not an integer");
            }
            cfg = protocol::speedup_config(base, factor);
        } else {
            apply_setting(cfg, param, v);
        }
        cfg.validate();
        cells.push_back(cfg);
    }
    print_config(out, base);
    ensure_dir(inv.out_dir);
    const auto data = protocol::load_data(base);

    std::string csv = std::string("value,") + metrics::kCsvHeader + "\n";
    nlohmann::json doc = {{"config", to_json(base)}, {"param", param}, {"cells", nlohmann::json::array()}};
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto series = protocol::run(cells[i], data);
        const std::string body = metrics::to_csv(series);
        std::stringstream rows(body);
        std::string line;
        std::getline(rows, line);  // header
        while (std::getline(rows, line)) csv += values[i] + "," + line + "\n";
        doc["cells"].push_back({{"value", values[i]},
                                {"config", to_json(cells[i])},
                                {"series", metrics::to_json(series)}});
        out << param << "=" << values[i] << " local-steps=" << cells[i].local_steps
            << " speed=" << metrics::format_value(cells[i].speed) << " final mean accuracy "
            << (series.empty() ? "n/a" : metrics::format_value(series.back().mean_acc)) << "\n";
    }
    metrics::write_text(join_path(inv.out_dir, "sweep.csv"), csv);
    metrics::write_text(join_path(inv.out_dir, "sweep.json"), doc.dump(2) + "\n");
    return kExitOk;
}

std::vector<double> parse_reals(const std::string& what, const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string v; std::getline(ss, v, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(v, &used));
            if (used != v.size()) throw std::invalid_argument(v);
        } catch (const std::exception&) {
            throw ConfigError(what + ": '" + v + "' is not a number");
        }
    }
    if (out.empty()) throw ConfigError(what + ": expected a comma-separated list");
    return out;
}

int cmd_stats(const CLI::App* sub, const Invocation& inv, const std::string& tau_text,
              const std::string& seconds_text, std::size_t measure_epochs, std::ostream& out) {
    // Unlimited cache unless a size was requested explicitly.
    std::map<std::string, std::string> extra;
    if (sub->count("--cache-size") == 0) {
        std::size_t agents = resolve(sub, inv).agents;
        extra["cache-size"] = std::to_string(agents);
    }
    if (sub->count("--policy") == 0) extra["policy"] = "lru";
    const auto base = resolve(sub, inv, extra);
    const auto taus = parse_reals("--tau-values", tau_text);
    const auto seconds = parse_reals("--epoch-seconds-values", seconds_text);
    print_config(out, base);
    ensure_dir(inv.out_dir);

    std::string csv = "epoch_seconds,tau_max,count_mean,count_var,age_mean,age_var\n";
    out << "epoch_s  tau_max  count_mean  count_var  age_mean  age_var\n";
    for (double secs : seconds) {
        for (double tau : taus) {
            ExperimentConfig cfg = base;
            cfg.epoch_seconds = secs;
            if (tau < 1.0 || tau != std::floor(tau)) {
                throw ConfigError("--tau-values must be positive integers");
            }
            cfg.tau_max = static_cast<std::size_t>(tau);
            cfg.validate();
            const auto s = protocol::simulate_cache_occupancy(cfg, measure_epochs);
            const std::string row = metrics::format_value(secs) + "," +
                                    std::to_string(cfg.tau_max) + "," +
                                    metrics::format_value(s.count_mean) + "," +
                                    metrics::format_value(s.count_var) + "," +
                                    metrics::format_value(s.age_mean) + "," +
                                    metrics::format_value(s.age_var);
            csv += row + "\n";
            char line[160];
            std::snprintf(line, sizeof line, "%7.0f  %7zu  %10.4f  %9.4f  %8.4f  %7.4f\n", secs,
                          cfg.tau_max, s.count_mean, s.count_var, s.age_mean, s.age_var);
            out << line;
        }
    }
    metrics::write_text(join_path(inv.out_dir, "stats.csv"), csv);
    return kExitOk;
}

}  // namespace

int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cached decentralized federated learning simulator", "cached-dfl"};
    app.require_subcommand(1);

    Invocation run_inv, compare_inv, sweep_inv, stats_inv;
    auto* run = app.add_subcommand("run", "run one experiment");
    add_setting_flags(run, run_inv);
    auto* compare = app.add_subcommand("compare", "run lru, none and cfl on identical data");
    add_setting_flags(compare, compare_inv);
    auto* sweep = app.add_subcommand("sweep", "one run per value of a parameter");
    add_setting_flags(sweep, sweep_inv);
    std::string sweep_param, sweep_values;
    sweep->add_option("--param", sweep_param, "tau-max, cache-size or speedup")->required();
    sweep->add_option("--values", sweep_values, "comma-separated values")->required();
    auto* stats = app.add_subcommand("stats", "cache occupancy and age without training");
    add_setting_flags(stats, stats_inv);
    std::string tau_values = "1,2,3,4,5,10,20";
    std::string second_values = "30,60,120";
    std::size_t measure_epochs = 30;
    stats->add_option("--tau-values", tau_values, "staleness bounds to tabulate");
    stats->add_option("--epoch-seconds-values", second_values, "epoch lengths to tabulate");
    stats->add_option("--measure-epochs", measure_epochs, "epochs averaged after warm-up");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run, run_inv, out, err);
        if (compare->parsed()) return cmd_compare(compare, compare_inv, out);
        if (sweep->parsed()) return cmd_sweep(sweep, sweep_inv, sweep_param, sweep_values, out);
        if (stats->parsed()) {
            return cmd_stats(stats, stats_inv, tau_values, second_values, measure_epochs, out);
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitConfig;
}

}  // namespace cached_dfl::cli
