#include "doctest.h"

#include <filesystem>
#include <memory>
#include <set>
#include <vector>

#include "cached_dfl/config.hpp"
#include "cached_dfl/errors.hpp"
#include "cached_dfl/metrics.hpp"

using namespace cached_dfl;
using namespace cached_dfl::metrics;

namespace {

learning::Dataset blobs() {
    // label = sign of the single feature
    std::vector<double> f{-2, -1, 1, 2, -3, 3};
    std::vector<int> l{0, 0, 1, 1, 0, 1};
    return learning::Dataset(1, 2, f, l);
}

}  // namespace

TEST_CASE("mean_variance is the population variance") {
    const std::vector<double> xs{1, 2, 3, 4};
    const auto [m, v] = mean_variance(xs);
    CHECK(m == doctest::Approx(2.5));
    CHECK(v == doctest::Approx(1.25));
    const std::vector<double> one{0.7};
    CHECK(mean_variance(one).second == 0.0);
    CHECK(mean_variance(std::vector<double>{}).first == 0.0);
}

TEST_CASE("measure") {
    const auto data = blobs();
    const learning::ModelParams good{{learning::ModelKind::softmax, 1, 0, 2}, {-1, 1, 0, 0}};
    const learning::ModelParams bad{{learning::ModelKind::softmax, 1, 0, 2}, {1, -1, 0, 0}};
    const std::vector<std::vector<std::size_t>> rows(2);
    std::vector<cache::ModelCache> caches{cache::ModelCache(0, 3, 1), cache::ModelCache(1, 3, 1)};

    const learning::ModelParams* same[] = {&good, &good};
    const auto s = measure(same, data, rows, caches, 4, 0.1, 7);
    CHECK(s.mean_acc == 1.0);
    CHECK(s.var_acc == 0.0);
    CHECK(s.epoch == 4);
    CHECK(s.lr == 0.1);
    CHECK(s.contacts == 7);

    const learning::ModelParams* single[] = {&bad};
    const std::vector<std::vector<std::size_t>> one_row(1);
    CHECK(measure(single, data, one_row, std::span(caches).first(1), 0, 0.1, 0).var_acc == 0.0);

    const learning::ModelParams* mixed[] = {&good, &bad};
    const auto d = measure(mixed, data, rows, caches, 0, 0.1, 0);
    CHECK(d.mean_acc == doctest::Approx(0.5));
    CHECK(d.var_acc == doctest::Approx(0.25));

    // each agent can be scored on its own rows
    const std::vector<std::vector<std::size_t>> subsets{{0, 1}, {2, 3}};
    CHECK(measure(mixed, data, subsets, caches, 0, 0.1, 0).mean_acc == doctest::Approx(0.5));
}

TEST_CASE("eval_subsample") {
    CHECK(eval_subsample(100, 0, 1, 3).empty());
    CHECK(eval_subsample(100, 100, 1, 3).empty());
    const auto a = eval_subsample(4000, 1000, 1, 3);
    CHECK(a.size() == 1000);
    CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 1000);
    CHECK(a == eval_subsample(4000, 1000, 1, 3));
    CHECK(a != eval_subsample(4000, 1000, 1, 4));
    CHECK(a != eval_subsample(4000, 1000, 2, 3));
}

TEST_CASE("early stopping") {
    EarlyStopper off(0);
    for (int i = 0; i < 100; ++i) CHECK_FALSE(off.update(0.5));

    // best at epoch 3, then 20 epochs without improvement
    EarlyStopper stop(20);
    const std::vector<double> head{0.1, 0.3, 0.6};
    for (double v : head) CHECK_FALSE(stop.update(v));
    for (int i = 0; i < 19; ++i) CHECK_FALSE(stop.update(0.6 - 0.01 * i));
    CHECK(stop.update(0.5));
    CHECK(stop.best_epoch() == 2);  // 0-based
    CHECK(stop.best() == doctest::Approx(0.6));
}

TEST_CASE("csv") {
    CHECK(to_csv({}) == std::string(kCsvHeader) + "\n");
    CHECK(parse_csv(to_csv({})).empty());

    EpochMetrics m;
    m.epoch = 12;
    m.mean_acc = 0.123456789;
    m.var_acc = 1.5e-7;
    m.cache_count_mean = 9.87654321;
    m.cache_count_var = 0.0;
    m.cache_age_mean = 3.14159265;
    m.cache_age_var = 2.0 / 3.0;
    m.lr = 0.001;
    m.contacts = 4321;
    const std::vector<EpochMetrics> series{m, m};
    const auto text = to_csv(series);
    const auto back = parse_csv(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].epoch == 12);
    CHECK(back[0].mean_acc == doctest::Approx(0.123457).epsilon(1e-9));
    CHECK(back[0].var_acc == doctest::Approx(1.5e-7));
    CHECK(back[0].cache_age_var == doctest::Approx(0.666667).epsilon(1e-9));
    CHECK(back[0].contacts == 4321);
    // a second trip is exact
    CHECK(to_csv(back) == text);
    CHECK(format_value(0.123456789) == "0.123457");
    CHECK_THROWS(parse_csv("not,a,header\n"));
}

TEST_CASE("json and file output") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "cached_dfl_metrics_test";
    fs::create_directories(dir);
    ExperimentConfig cfg;
    cfg.seed = 987654321;
    EpochMetrics m;
    m.mean_acc = 0.5;
    const std::vector<EpochMetrics> series{m};
    const auto path = (dir / "run.json").string();
    write_json(to_json(cfg), series, path);
    const auto doc = nlohmann::json::parse(read_text(path));
    CHECK(doc["config"]["seed"] == 987654321);
    CHECK(doc["series"].size() == 1);
    CHECK(doc["config"].contains("block-length"));

    write_csv(series, (dir / "m.csv").string());
    CHECK(parse_csv(read_text((dir / "m.csv").string())).size() == 1);

    const auto missing = (dir / "no" / "such" / "dir" / "x.csv").string();
    CHECK_THROWS_AS(write_csv(series, missing), IoError);
    try {
        read_text(missing);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find(missing) != std::string::npos);
    }
    fs::remove_all(dir);
}
