#include "doctest.h"

#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <vector>

#include "cached_dfl/errors.hpp"
#include "cached_dfl/protocol.hpp"

using namespace cached_dfl;
using namespace cached_dfl::protocol;
using learning::ModelKind;

namespace {

std::shared_ptr<const ModelParams> vec(std::vector<double> w) {
    return std::make_shared<const ModelParams>(
        ModelParams{{ModelKind::softmax, 1, 0, w.size() / 2}, std::move(w)});
}

CachedModel entry(AgentId owner, Epoch tau, std::size_t n, std::shared_ptr<const ModelParams> p) {
    CachedModel c;
    c.owner = owner;
    c.train_epoch = tau;
    c.sample_count = n;
    c.params = std::move(p);
    return c;
}

AgentRuntime agent(AgentId id, std::size_t samples, std::shared_ptr<const ModelParams> trained,
                   std::vector<CachedModel> cached = {}) {
    AgentRuntime a{id, trained, trained, 0, ModelCache(id, 10, 5), {}};
    a.cache.assign(std::move(cached));
    auto data = std::make_shared<const learning::Dataset>(1, 2, std::vector<double>(samples, 0.0),
                                                          std::vector<int>(samples, 0));
    a.data.source = data;
    for (std::size_t i = 0; i < samples; ++i) a.data.indices.push_back(i);
    return a;
}

ExperimentConfig tiny_config() {
    ExperimentConfig c;
    c.agents = 10;
    c.epochs = 6;
    c.train_samples = 2000;
    c.test_samples = 400;
    c.input_dim = 12;
    c.epoch_seconds = 30.0;
    c.patience = 0;
    c.partition = PartitionScheme::iid;
    return c;
}

}  // namespace

TEST_CASE("exchange hands over own and cached models") {
    const auto p = vec({1, 1}), q = vec({2, 2}), r = vec({3, 3});
    const auto a = agent(0, 10, p, {entry(2, 3, 5, r)});
    const auto b = agent(1, 20, q);
    const auto [ca, cb] = exchange(a, b, 4, CachePolicy::lru());
    REQUIRE(ca.find(1) != nullptr);
    CHECK(ca.find(1)->train_epoch == 4);
    CHECK(ca.find(1)->sample_count == 20);
    CHECK(ca.find(1)->params == q);
    CHECK(ca.find(2) != nullptr);
    CHECK(cb.find(0) != nullptr);
    CHECK(cb.find(2) != nullptr);
    CHECK(cb.find(2)->train_epoch == 3);
    CHECK(cb.find(1) == nullptr);

    // symmetric in its arguments, and repeating it changes nothing
    const auto [cb2, ca2] = exchange(b, a, 4, CachePolicy::lru());
    CHECK(ca2 == ca);
    CHECK(cb2 == cb);
    auto a2 = a;
    auto b2 = b;
    a2.cache = ca;
    b2.cache = cb;
    const auto [ca3, cb3] = exchange(a2, b2, 4, CachePolicy::lru());
    CHECK(ca3 == ca);
    CHECK(cb3 == cb);
    CHECK_THROWS_AS(exchange(a, a, 4, CachePolicy::lru()), std::invalid_argument);
}

TEST_CASE("aggregate weights by sample count") {
    const auto p = vec({0.0, 4.0}), q = vec({2.0, 8.0});
    ModelCache empty(0, 10, 5);
    CHECK(aggregate(entry(0, 1, 10, p), empty).weights == p->weights);

    ModelCache one(0, 10, 5);
    one.assign({entry(1, 1, 10, q)});
    const auto even = aggregate(entry(0, 1, 10, p), one);
    CHECK(even.weights[0] == doctest::Approx(1.0));
    CHECK(even.weights[1] == doctest::Approx(6.0));

    one.assign({entry(1, 1, 30, q)});
    const auto skew = aggregate(entry(0, 1, 10, p), one);
    CHECK(skew.weights[0] == doctest::Approx(0.25 * 0.0 + 0.75 * 2.0));
    CHECK(skew.weights[1] == doctest::Approx(0.25 * 4.0 + 0.75 * 8.0));

    CHECK_THROWS_AS(aggregate(entry(0, 1, 0, p), one), std::invalid_argument);
    ModelCache mixed(0, 10, 5);
    mixed.assign({entry(1, 1, 3, vec({1, 2, 3, 4}))});
    CHECK_THROWS_AS(aggregate(entry(0, 1, 10, p), mixed), std::invalid_argument);
}

TEST_CASE("aggregate is a convex combination") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0, 1);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t k = std::uniform_int_distribution<std::size_t>(0, 9)(rng);
        std::vector<CachedModel> cached;
        std::vector<std::shared_ptr<const ModelParams>> all;
        std::vector<double> n;
        auto make = [&]() {
            std::vector<double> w(6);
            for (auto& v : w) v = g(rng);
            return vec(w);
        };
        const auto own_p = make();
        const std::size_t own_n = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
        all.push_back(own_p);
        n.push_back(double(own_n));
        for (std::size_t j = 0; j < k; ++j) {
            const auto p = make();
            const std::size_t nj = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
            cached.push_back(entry(j + 1, 4, nj, p));
            all.push_back(p);
            n.push_back(double(nj));
        }
        ModelCache c(0, 10, 5);
        c.assign(cached);
        const auto out = aggregate(entry(0, 5, own_n, own_p), c);
        const double total = std::accumulate(n.begin(), n.end(), 0.0);
        for (std::size_t i = 0; i < 6; ++i) {
            double lo = 1e300, hi = -1e300, expect = 0.0;
            for (std::size_t j = 0; j < all.size(); ++j) {
                lo = std::min(lo, all[j]->weights[i]);
                hi = std::max(hi, all[j]->weights[i]);
                expect += n[j] / total * all[j]->weights[i];
            }
            CHECK(out.weights[i] >= lo - 1e-12);
            CHECK(out.weights[i] <= hi + 1e-12);
            CHECK(out.weights[i] == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("pairwise mean conserves the pair mean") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g(0, 3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(8), b(8);
        for (auto& v : a) v = g(rng);
        for (auto& v : b) v = g(rng);
        const auto m = pairwise_mean(*vec(a), *vec(b));
        for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(2 * m.weights[i] - (a[i] + b[i])) <= 1e-12);
    }
}

TEST_CASE("speedup_config") {
    ExperimentConfig base;
    base.local_steps = 30;
    CHECK(speedup_config(base, 1).local_steps == 30);
    CHECK(speedup_config(base, 3).local_steps == 10);
    CHECK(speedup_config(base, 3).speed == doctest::Approx(3 * base.speed));
    CHECK(speedup_config(base, 30).local_steps == 1);
    CHECK_THROWS_AS(speedup_config(base, 4), ConfigError);
    CHECK_THROWS_AS(speedup_config(base, 0), ConfigError);
}

TEST_CASE("run edge cases") {
    auto c = tiny_config();
    c.epochs = 0;
    CHECK(run(c).empty());

    c = tiny_config();
    c.agents = 1;
    c.epochs = 3;
    const auto solo = run(c);
    CHECK(solo.size() == 3);
    for (const auto& m : solo) {
        CHECK(m.contacts == 0);
        CHECK(m.cache_count_mean == 0.0);
        CHECK(m.var_acc == 0.0);
    }

    c = tiny_config();
    c.agents = 0;
    CHECK_THROWS_AS(run(c), ConfigError);
}

TEST_CASE("runs are deterministic") {
    for (auto policy : {Policy::lru, Policy::none, Policy::cfl}) {
        auto c = tiny_config();
        c.policy = policy;
        const auto a = run(c);
        const auto b = run(c);
        CHECK(metrics::to_csv(a) == metrics::to_csv(b));
    }
}

TEST_CASE("policy none: contacts replace both models with their mean") {
    auto c = tiny_config();
    c.policy = Policy::none;
    c.epochs = 3;
    c.epoch_seconds = 120.0;
    c.block_length = 100.0;
    Experiment exp(c);
    for (int e = 0; e < 3; ++e) {
        exp.run_epoch();
        CHECK(exp.last_contacts().size() > 0);
        for (const auto& a : exp.agents()) CHECK(a.cache.empty());
    }
}

TEST_CASE("full-mesh contacts reproduce the centralised average") {
    auto c = tiny_config();
    c.agents = 4;
    c.epochs = 5;
    c.rho = 0.0;
    c.tau_max = 2;
    c.partition = PartitionScheme::shards;
    c.contact_mode = ContactMode::full_mesh;
    auto cfl = c;
    cfl.policy = Policy::cfl;
    Experiment mesh(c), central(cfl);
    for (int e = 0; e < 5; ++e) {
        mesh.run_epoch();
        central.run_epoch();
        const auto& ref = central.agents()[0].model->weights;
        for (const auto& a : mesh.agents()) {
            CHECK(a.cache.size() == 3);
            for (std::size_t i = 0; i < ref.size(); ++i)
                CHECK(std::abs(a.model->weights[i] - ref[i]) <= 1e-9 * std::max(1.0, std::abs(ref[i])));
        }
    }
}

TEST_CASE("cache statistics stay within the staleness bound") {
    auto c = tiny_config();
    c.agents = 30;
    c.tau_max = 3;
    c.cache_size = 30;
    c.epoch_seconds = 60.0;
    c.block_length = 300.0;
    Experiment exp(c);
    for (int e = 0; e < 6; ++e) {
        const auto m = exp.run_epoch();
        CHECK(m.cache_age_mean <= 2.0);
        for (const auto& a : exp.agents())
            for (const auto& en : a.cache.entries()) CHECK(exp.epoch() - 1 - en.train_epoch < 3);
    }
    const auto s1 = simulate_cache_occupancy(c, 10);
    c.tau_max = 1;
    const auto s0 = simulate_cache_occupancy(c, 10);
    CHECK(s0.age_mean == 0.0);
    CHECK(s0.count_mean <= s1.count_mean);
    c.policy = Policy::none;
    CHECK_THROWS_AS(simulate_cache_occupancy(c, 10), ConfigError);
}
