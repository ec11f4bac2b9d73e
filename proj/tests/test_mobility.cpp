#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <random>
#include <vector>

#include "cached_dfl/errors.hpp"
#include "cached_dfl/mobility.hpp"

using namespace cached_dfl;
using namespace cached_dfl::mobility;

namespace {

// Diameter by BFS over (row, col) coordinates, independent of GridMap's adjacency.
std::size_t bfs_diameter(std::size_t rows, std::size_t cols) {
    std::size_t best = 0;
    for (std::size_t s = 0; s < rows * cols; ++s) {
        std::vector<int> dist(rows * cols, -1);
        std::queue<std::size_t> q;
        dist[s] = 0;
        q.push(s);
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            const long r = static_cast<long>(u / cols), c = static_cast<long>(u % cols);
            const long dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
            for (int k = 0; k < 4; ++k) {
                const long nr = r + dr[k], nc = c + dc[k];
                if (nr < 0 || nc < 0 || nr >= static_cast<long>(rows) || nc >= static_cast<long>(cols))
                    continue;
                const auto v = static_cast<std::size_t>(nr) * cols + static_cast<std::size_t>(nc);
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    q.push(v);
                }
            }
        }
        for (int d : dist) best = std::max(best, static_cast<std::size_t>(d));
    }
    return best;
}

std::vector<Contact> brute_contacts(const std::vector<Point>& pts, double range) {
    std::vector<Contact> out;
    for (std::size_t a = 0; a < pts.size(); ++a)
        for (std::size_t b = a + 1; b < pts.size(); ++b) {
            const double dx = pts[a].x - pts[b].x, dy = pts[a].y - pts[b].y;
            if (dx * dx + dy * dy <= range * range) out.emplace_back(a, b);
        }
    return out;
}

double segment_length(const GridMap& map, const Segment& s) {
    const auto a = map.position(s.from), b = map.position(s.to);
    return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

TEST_CASE("build_grid shapes") {
    const auto g2 = build_grid(2, 2, 100.0);
    CHECK(g2.intersection_count() == 4);
    CHECK(g2.street_count() == 4);
    for (NodeId n = 0; n < 4; ++n) CHECK(g2.degree(n) == 2);

    const auto g3 = build_grid(3, 3, 100.0);
    CHECK(g3.degree(g3.node(1, 1)) == 4);
    CHECK(g3.degree(g3.node(0, 1)) == 3);
    CHECK(g3.degree(g3.node(1, 0)) == 3);
    CHECK(g3.degree(g3.node(0, 0)) == 2);

    const auto g10 = build_grid(10, 10, 200.0);
    CHECK(g10.intersection_count() == 100);
    CHECK(grid_diameter(g10) == 18);
    CHECK(bfs_diameter(10, 10) == 18);
    CHECK(g10.position(g10.node(2, 3)).x == doctest::Approx(600.0));
    CHECK(g10.position(g10.node(2, 3)).y == doctest::Approx(400.0));
}

TEST_CASE("grid diameter matches an independent BFS") {
    for (std::size_t r = 2; r <= 7; ++r)
        for (std::size_t c = 2; c <= 7; ++c) CHECK(grid_diameter(build_grid(r, c, 50.0)) == bfs_diameter(r, c));
}

TEST_CASE("build_grid rejects bad dimensions") {
    CHECK_THROWS_AS(build_grid(1, 5, 100.0), ConfigError);
    CHECK_THROWS_AS(build_grid(5, 1, 100.0), ConfigError);
    CHECK_THROWS_AS(build_grid(3, 3, 0.0), ConfigError);
    CHECK_THROWS_AS(build_grid(3, 3, -2.0), ConfigError);
}

TEST_CASE("every degree is 2, 3 or 4 and streets are bidirectional") {
    const auto g = build_grid(6, 4, 10.0);
    for (NodeId n = 0; n < g.intersection_count(); ++n) {
        CHECK(g.degree(n) >= 2);
        CHECK(g.degree(n) <= 4);
    }
    for (const auto& s : g.segments()) {
        CHECK(g.adjacent(s.from, s.to));
        CHECK(std::count(g.segments().begin(), g.segments().end(), Segment{s.to, s.from}) == 1);
    }
}

TEST_CASE("straight travel without reaching an intersection") {
    const auto g = build_grid(2, 2, 100.0);
    VehicleState v;
    v.segment = {0, 1};
    v.offset = 30.0;
    v.speed = 10.0;
    Rng rng(1);
    const auto next = step(v, g, 1.0, rng);
    CHECK(next.segment == v.segment);
    CHECK(next.offset == doctest::Approx(40.0));
}

TEST_CASE("residual distance carries across an intersection") {
    const auto g = build_grid(3, 3, 100.0);
    VehicleState v;
    v.segment = {g.node(1, 0), g.node(1, 1)};
    v.offset = 95.0;
    v.speed = 12.0;
    Rng rng(3);
    const auto next = step(v, g, 1.0, rng);
    CHECK(next.segment.from == g.node(1, 1));
    CHECK(next.offset == doctest::Approx(7.0));
}

TEST_CASE("turn probabilities at an interior intersection") {
    const auto g = build_grid(3, 3, 100.0);
    const NodeId west = g.node(1, 0), centre = g.node(1, 1), east = g.node(1, 2);
    VehicleState v;
    v.segment = {west, centre};
    v.speed = 2.0;

    const auto opts = turn_options(v, g);
    REQUIRE(opts.size() == 4);
    for (const auto& o : opts) {
        if (o.next == east) CHECK(o.probability == doctest::Approx(0.5));
        else CHECK(o.probability == doctest::Approx(1.0 / 6.0));
    }

    Rng rng(11);
    std::map<NodeId, int> counts;
    const int trials = 100000;
    for (int i = 0; i < trials; ++i) {
        v.offset = 99.0;
        const auto next = step(v, g, 1.0, rng);
        REQUIRE(next.segment.from == centre);
        ++counts[next.segment.to];
    }
    CHECK(std::abs(counts[east] / double(trials) - 0.5) < 0.01);
    for (NodeId other : {west, g.node(0, 1), g.node(2, 1)}) {
        CHECK(std::abs(counts[other] / double(trials) - 1.0 / 6.0) < 0.01);
    }
}

TEST_CASE("a dead end forces a U-turn") {
    // 3 x 2 grid split into 3 bands: band 0 only holds the bottom street.
    const auto g = build_grid(3, 2, 100.0);
    VehicleState v;
    v.segment = {g.node(0, 0), g.node(0, 1)};
    v.offset = 99.0;
    v.speed = 2.0;
    v.home_area = 0;
    v.free_roam = false;
    v.area_count = 3;
    const auto opts = turn_options(v, g);
    REQUIRE(opts.size() == 1);
    CHECK(opts[0].next == g.node(0, 0));
    CHECK(opts[0].probability == doctest::Approx(1.0));
    Rng rng(5);
    const auto next = step(v, g, 1.0, rng);
    CHECK(next.segment == Segment{g.node(0, 1), g.node(0, 0)});
    CHECK(next.offset == doctest::Approx(1.0));
}

TEST_CASE("contact detection examples") {
    std::vector<Point> two_near{{0, 0}, {50, 0}};
    CHECK(detect_contacts(two_near, 100.0) == std::vector<Contact>{{0, 1}});
    std::vector<Point> two_far{{0, 0}, {150, 0}};
    CHECK(detect_contacts(two_far, 100.0).empty());
    std::vector<Point> three{{5, 5}, {5, 5}, {5, 5}};
    CHECK(detect_contacts(three, 100.0) == std::vector<Contact>{{0, 1}, {0, 2}, {1, 2}});
    std::vector<Point> boundary{{0, 0}, {100, 0}};
    CHECK(detect_contacts(boundary, 100.0).size() == 1);
}

TEST_CASE("contact detection equals the brute-force filter") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> n_dist(0, 60);
        std::uniform_real_distribution<double> coord(-500.0, 1500.0);
        std::uniform_real_distribution<double> range_dist(1.0, 300.0);
        std::vector<Point> pts(static_cast<std::size_t>(n_dist(rng)));
        for (auto& p : pts) {
            p = {coord(rng), coord(rng)};
            // snap some points onto a lattice so exact-range ties occur
            if (trial % 3 == 0) p = {std::round(p.x / 100.0) * 100.0, std::round(p.y / 100.0) * 100.0};
        }
        const double range = trial % 3 == 0 ? 100.0 : range_dist(rng);
        CHECK(detect_contacts(pts, range) == brute_contacts(pts, range));
    }
}

TEST_CASE("init_vehicles places vehicles on legal segments") {
    const auto g = build_grid(10, 10, 200.0);
    const auto vs = init_vehicles(g, 100, 13.89, std::nullopt, 7);
    REQUIRE(vs.size() == 100);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        CHECK(vs[i].id == i);
        CHECK(g.adjacent(vs[i].segment.from, vs[i].segment.to));
        CHECK(vs[i].offset >= 0.0);
        CHECK(vs[i].offset <= segment_length(g, vs[i].segment));
        CHECK(vs[i].speed == doctest::Approx(13.89));
    }
    const auto again = init_vehicles(g, 100, 13.89, std::nullopt, 7);
    for (std::size_t i = 0; i < vs.size(); ++i) {
        CHECK(again[i].segment == vs[i].segment);
        CHECK(again[i].offset == vs[i].offset);
    }
    CHECK_THROWS_AS(init_vehicles(g, 0, 13.89, std::nullopt, 7), ConfigError);
}

TEST_CASE("restricted vehicles start and stay inside their band") {
    const auto g = build_grid(10, 10, 200.0);
    const AreaSpec spec{3, 30, 9};
    auto vs = init_vehicles(g, 99, 13.89, spec, 7);
    REQUIRE(vs.size() == 99);
    std::size_t restricted = 0;
    for (const auto& v : vs) {
        if (!v.free_roam) {
            ++restricted;
            REQUIRE(v.home_area.has_value());
            CHECK(area_of(v, g, 3) == *v.home_area);
        }
    }
    CHECK(restricted == 90);

    Rng rng(99);
    for (int tick = 0; tick < 3000; ++tick) {
        for (auto& v : vs) {
            v = step(v, g, 1.0, rng);
            CHECK(v.offset >= 0.0);
            CHECK(v.offset <= segment_length(g, v.segment) + 1e-9);
            if (!v.free_roam) CHECK(area_of(v, g, 3) == *v.home_area);
        }
    }
}

TEST_CASE("area bands") {
    const auto g = build_grid(9, 4, 100.0);
    CHECK(area_of_y(0.0, g, 3) == 0);
    CHECK(area_of_y(g.height(), g, 3) == 2);
    const double boundary = g.height() / 3.0;
    CHECK(area_of_y(boundary, g, 3) == 0);
    CHECK(area_of_y(boundary + 1e-6, g, 3) == 1);
    CHECK(area_of_y(2.0 * boundary, g, 3) == 1);
    CHECK_THROWS_AS(validate_areas(build_grid(2, 2, 100.0), 3), ConfigError);
}

TEST_CASE("fleet trajectories and contacts are reproducible") {
    const auto g = build_grid(10, 10, 200.0);
    auto run = [&] {
        Fleet fleet(g, init_vehicles(g, 60, 13.89, std::nullopt, 21), 21);
        std::vector<std::vector<Contact>> seq;
        std::vector<Point> last;
        for (int k = 0; k < 300; ++k) {
            fleet.step_all(1.0);
            last = fleet.positions();
            seq.push_back(detect_contacts(last, 100.0));
        }
        return std::make_pair(seq, last);
    };
    const auto a = run();
    const auto b = run();
    CHECK(a.first == b.first);
    REQUIRE(a.second.size() == b.second.size());
    for (std::size_t i = 0; i < a.second.size(); ++i) {
        CHECK(a.second[i].x == b.second[i].x);
        CHECK(a.second[i].y == b.second[i].y);
    }
}

TEST_CASE("a vehicle advances exactly speed * dt along the road") {
    const auto g = build_grid(4, 4, 100.0);
    VehicleState v;
    v.segment = {g.node(0, 0), g.node(0, 1)};
    v.offset = 0.0;
    v.speed = 37.0;
    Rng rng(8);
    double travelled = 0.0;
    for (int k = 0; k < 200; ++k) {
        const auto before = v;
        v = step(v, g, 1.0, rng);
        if (v.segment == before.segment) {
            travelled += v.offset - before.offset;
        } else {
            // at 37 m/s at most one intersection is crossed per tick
            travelled += (100.0 - before.offset) + v.offset;
        }
    }
    CHECK(travelled == doctest::Approx(200 * 37.0));
}
