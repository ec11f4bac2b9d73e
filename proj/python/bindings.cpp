#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <tuple>
#include <vector>

#include "cached_dfl/cache.hpp"
#include "cached_dfl/config.hpp"
#include "cached_dfl/errors.hpp"
#include "cached_dfl/metrics.hpp"
#include "cached_dfl/mobility.hpp"
#include "cached_dfl/protocol.hpp"

namespace py = pybind11;
using namespace cached_dfl;

namespace {

// (owner, train_epoch, sample_count, group)
using EntryTuple = std::tuple<std::size_t, long long, std::size_t, std::size_t>;

cache::ModelCache make_cache(std::size_t holder, std::size_t capacity, long long tau_max,
                             const std::vector<EntryTuple>& entries,
                             std::optional<std::vector<std::size_t>> quotas = std::nullopt) {
    cache::ModelCache c(holder, capacity, tau_max, std::move(quotas));
    std::vector<cache::CachedModel> models;
    for (const auto& [owner, epoch, n, group] : entries) {
        models.push_back({owner, nullptr, epoch, n, group});
    }
    c.assign(std::move(models));
    return c;
}

std::vector<EntryTuple> entries_of(const cache::ModelCache& c) {
    std::vector<EntryTuple> out;
    for (const auto& e : c.entries()) {
        out.emplace_back(e.owner, e.train_epoch, e.sample_count, e.group);
    }
    return out;
}

ExperimentConfig config_from(const std::string& json_text) {
    return config_from_json(nlohmann::json::parse(json_text));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cached decentralized federated learning simulator core";

    static py::exception<IoError> io_error(m, "IoError", PyExc_OSError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const IoError& e) {
            py::set_error(io_error, e.what());
        }
    });

    py::class_<mobility::GridMap>(m, "GridMap")
        .def_property_readonly("rows", &mobility::GridMap::rows)
        .def_property_readonly("cols", &mobility::GridMap::cols)
        .def_property_readonly("block_length", &mobility::GridMap::block_length)
        .def_property_readonly("intersection_count", &mobility::GridMap::intersection_count)
        .def_property_readonly("street_count", &mobility::GridMap::street_count)
        .def("degree", &mobility::GridMap::degree, py::arg("node"))
        .def("diameter", [](const mobility::GridMap& g) { return mobility::grid_diameter(g); });

    m.def("build_grid", &mobility::build_grid, py::arg("rows"), py::arg("cols"),
          py::arg("block_length"));

    m.def(
        "detect_contacts",
        [](const std::vector<std::pair<double, double>>& points, double range) {
            std::vector<mobility::Point> pts;
            for (const auto& [x, y] : points) pts.push_back({x, y});
            return mobility::detect_contacts(pts, range);
        },
        py::arg("points"), py::arg("range"));

    m.def(
        "lru_update",
        [](std::size_t holder, std::size_t capacity, long long tau_max,
           const std::vector<EntryTuple>& mine, const EntryTuple& incoming,
           const std::vector<EntryTuple>& incoming_cache, long long t) {
            const auto a = make_cache(holder, capacity, tau_max, mine);
            const auto b = make_cache(std::get<0>(incoming), capacity, tau_max, incoming_cache);
            const cache::CachedModel in{std::get<0>(incoming), nullptr, std::get<1>(incoming),
                                        std::get<2>(incoming), std::get<3>(incoming)};
            return entries_of(cache::lru_update(a, in, b, t));
        },
        py::arg("holder"), py::arg("capacity"), py::arg("tau_max"), py::arg("cache"),
        py::arg("incoming"), py::arg("incoming_cache"), py::arg("t"),
        "Entries are (owner, train_epoch, sample_count, group) tuples.");

    m.def(
        "gb_update",
        [](std::size_t holder, long long tau_max, const std::vector<EntryTuple>& mine,
           const EntryTuple& incoming, const std::vector<EntryTuple>& incoming_cache, long long t,
           const std::vector<std::size_t>& group_map, const std::vector<std::size_t>& quotas) {
            std::size_t capacity = 0;
            for (auto q : quotas) capacity += q;
            const auto a = make_cache(holder, capacity, tau_max, mine, quotas);
            const auto b = make_cache(std::get<0>(incoming), capacity, tau_max, incoming_cache, quotas);
            const cache::CachedModel in{std::get<0>(incoming), nullptr, std::get<1>(incoming),
                                        std::get<2>(incoming), std::get<3>(incoming)};
            return entries_of(cache::gb_update(a, in, b, t, group_map, quotas));
        },
        py::arg("holder"), py::arg("tau_max"), py::arg("cache"), py::arg("incoming"),
        py::arg("incoming_cache"), py::arg("t"), py::arg("group_map"), py::arg("quotas"));

    m.def("default_config_json", [] { return to_json(ExperimentConfig{}).dump(); });
    m.def(
        "resolve_config_json",
        [](const std::string& text) {
            const auto cfg = config_from(text);
            cfg.validate();
            return to_json(cfg).dump();
        },
        py::arg("config_json"));
    m.def(
        "speedup_config_json",
        [](const std::string& text, std::size_t factor) {
            return to_json(protocol::speedup_config(config_from(text), factor)).dump();
        },
        py::arg("config_json"), py::arg("factor"));
    m.def(
        "run_json",
        [](const std::string& text) {
            const auto cfg = config_from(text);
            std::vector<metrics::EpochMetrics> series;
            {
                py::gil_scoped_release release;
                series = protocol::run(cfg);
            }
            return metrics::to_json(series).dump();
        },
        py::arg("config_json"));
    m.def(
        "metrics_csv_json",
        [](const std::string& series_json) {
            std::vector<metrics::EpochMetrics> series;
            for (const auto& row : nlohmann::json::parse(series_json)) {
                metrics::EpochMetrics e;
                e.epoch = row.at("epoch").get<std::size_t>();
                e.mean_acc = row.at("mean_acc").get<double>();
                e.var_acc = row.at("var_acc").get<double>();
                e.cache_count_mean = row.at("cache_count_mean").get<double>();
                e.cache_count_var = row.at("cache_count_var").get<double>();
                e.cache_age_mean = row.at("cache_age_mean").get<double>();
                e.cache_age_var = row.at("cache_age_var").get<double>();
                e.lr = row.at("lr").get<double>();
                e.contacts = row.at("contacts").get<std::size_t>();
                series.push_back(e);
            }
            return metrics::to_csv(series);
        },
        py::arg("series_json"));
    m.def(
        "cache_occupancy_json",
        [](const std::string& text, std::size_t measure_epochs) {
            const auto cfg = config_from(text);
            cache::CacheStats s;
            {
                py::gil_scoped_release release;
                s = protocol::simulate_cache_occupancy(cfg, measure_epochs);
            }
            return nlohmann::json{{"count_mean", s.count_mean},
                                  {"count_var", s.count_var},
                                  {"age_mean", s.age_mean},
                                  {"age_var", s.age_var}}
                .dump();
        },
        py::arg("config_json"), py::arg("measure_epochs"));
}
