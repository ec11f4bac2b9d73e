#include "cached_dfl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cached_dfl/errors.hpp"
#include "cached_dfl/parallel.hpp"
#include "cached_dfl/rng.hpp"

namespace cached_dfl::metrics {

std::pair<double, double> mean_variance(std::span<const double> xs) {
    if (xs.empty()) return {0.0, 0.0};
    const auto n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    return {mean, var / n};
}

std::vector<std::size_t> eval_subsample(std::size_t test_size, std::size_t count,
                                        std::uint64_t seed, std::size_t agent) {
    if (count == 0 || count >= test_size) return {};
    std::vector<std::size_t> all(test_size);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng rng = make_rng(seed, Stream::evaluation, {agent});
    // Partial Fisher-Yates: the first `count` slots form the sample.
    for (std::size_t i = 0; i < count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, test_size - 1);
        std::swap(all[i], all[pick(rng)]);
    }
    all.resize(count);
    std::sort(all.begin(), all.end());
    return all;
}

EpochMetrics measure(std::span<const learning::ModelParams* const> models,
                     const learning::Dataset& testset,
                     std::span<const std::vector<std::size_t>> eval_rows,
                     std::span<const cache::ModelCache> caches, cache::Epoch t, double lr,
                     std::size_t contacts) {
    std::vector<double> acc(models.size());
    parallel_for(models.size(), [&](std::size_t i) {
        const std::span<const std::size_t> rows =
            i < eval_rows.size() ? std::span<const std::size_t>(eval_rows[i])
                                 : std::span<const std::size_t>();
        acc[i] = learning::evaluate(*models[i], testset, rows);
    });
    EpochMetrics m;
    m.epoch = static_cast<std::size_t>(t);
    std::tie(m.mean_acc, m.var_acc) = mean_variance(acc);
    const auto cs = cache::cache_stats(caches, t);
    m.cache_count_mean = cs.count_mean;
    m.cache_count_var = cs.count_var;
    m.cache_age_mean = cs.age_mean;
    m.cache_age_var = cs.age_var;
    m.lr = lr;
    m.contacts = contacts;
    return m;
}

bool EarlyStopper::update(double metric) {
    const std::size_t epoch = seen_++;
    if (epoch == 0 || metric > best_) {
        best_ = metric;
        best_epoch_ = epoch;
    }
    return patience_ > 0 && epoch - best_epoch_ >= patience_;
}

std::string format_value(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string to_csv(std::span<const EpochMetrics> series) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& m : series) {
        out += std::to_string(m.epoch);
        for (double v : {m.mean_acc, m.var_acc, m.cache_count_mean, m.cache_count_var,
                         m.cache_age_mean, m.cache_age_var, m.lr}) {
            out += ',';
            out += format_value(v);
        }
        out += ',';
        out += std::to_string(m.contacts);
        out += '\n';
    }
    return out;
}

std::vector<EpochMetrics> parse_csv(const std::string& text) {
    std::stringstream ss(text);
    std::string line;
    if (!std::getline(ss, line) || line != kCsvHeader) {
        throw ConfigError("metrics CSV has an unexpected header");
    }
    std::vector<EpochMetrics> out;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream row(line);
        std::string cell;
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        if (cells.size() != 9) throw ConfigError("metrics CSV row has " +
                                                 std::to_string(cells.size()) + " fields");
        EpochMetrics m;
        m.epoch = std::stoul(cells[0]);
        m.mean_acc = std::stod(cells[1]);
        m.var_acc = std::stod(cells[2]);
        m.cache_count_mean = std::stod(cells[3]);
        m.cache_count_var = std::stod(cells[4]);
        m.cache_age_mean = std::stod(cells[5]);
        m.cache_age_var = std::stod(cells[6]);
        m.lr = std::stod(cells[7]);
        m.contacts = std::stoul(cells[8]);
        out.push_back(m);
    }
    return out;
}

nlohmann::json to_json(std::span<const EpochMetrics> series) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : series) {
        arr.push_back({{"epoch", m.epoch},
                       {"mean_acc", m.mean_acc},
                       {"var_acc", m.var_acc},
                       {"cache_count_mean", m.cache_count_mean},
                       {"cache_count_var", m.cache_count_var},
                       {"cache_age_mean", m.cache_age_mean},
                       {"cache_age_var", m.cache_age_var},
                       {"lr", m.lr},
                       {"contacts", m.contacts}});
    }
    return arr;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path, "cannot open for writing");
    out << text;
    out.flush();
    if (!out) throw IoError(path, "write failed");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path, "cannot open for reading");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_csv(std::span<const EpochMetrics> series, const std::string& path) {
    write_text(path, to_csv(series));
}

void write_json(const nlohmann::json& config, std::span<const EpochMetrics> series,
                const std::string& path) {
    const nlohmann::json doc = {{"config", config}, {"series", to_json(series)}};
    write_text(path, doc.dump(2) + "\n");
}

}  // namespace cached_dfl::metrics
