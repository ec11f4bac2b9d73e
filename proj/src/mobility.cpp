#include "cached_dfl/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <unordered_map>

#include "cached_dfl/errors.hpp"

namespace cached_dfl::mobility {

GridMap::GridMap(std::size_t rows, std::size_t cols, double block_length)
    : rows_(rows), cols_(cols), block_length_(block_length) {
    if (rows < 2 || cols < 2) {
        throw ConfigError("grid needs at least 2 rows and 2 columns, got " +
                          std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!(block_length > 0.0) || !std::isfinite(block_length)) {
        throw ConfigError("block length must be positive");
    }
    adjacency_.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            auto& adj = adjacency_[node(r, c)];
            // Fixed order: down, left, right, up.
            if (r > 0) adj.push_back(node(r - 1, c));
            if (c > 0) adj.push_back(node(r, c - 1));
            if (c + 1 < cols) adj.push_back(node(r, c + 1));
            if (r + 1 < rows) adj.push_back(node(r + 1, c));
            for (NodeId n : adj) segments_.push_back({node(r, c), n});
        }
    }
}

Point GridMap::position(NodeId n) const noexcept {
    return {static_cast<double>(col_of(n)) * block_length_,
            static_cast<double>(row_of(n)) * block_length_};
}

bool GridMap::adjacent(NodeId a, NodeId b) const noexcept {
    const auto adj = neighbors(a);
    return std::find(adj.begin(), adj.end(), b) != adj.end();
}

GridMap build_grid(std::size_t rows, std::size_t cols, double block_length) {
    return GridMap(rows, cols, block_length);
}

std::size_t grid_diameter(const GridMap& map) {
    const std::size_t n = map.intersection_count();
    std::size_t diameter = 0;
    std::vector<std::size_t> dist(n);
    for (NodeId src = 0; src < n; ++src) {
        std::fill(dist.begin(), dist.end(), SIZE_MAX);
        std::deque<NodeId> frontier{src};
        dist[src] = 0;
        while (!frontier.empty()) {
            const NodeId u = frontier.front();
            frontier.pop_front();
            for (NodeId v : map.neighbors(u)) {
                if (dist[v] == SIZE_MAX) {
                    dist[v] = dist[u] + 1;
                    diameter = std::max(diameter, dist[v]);
                    frontier.push_back(v);
                }
            }
        }
    }
    return diameter;
}

Point position(const VehicleState& v, const GridMap& map) noexcept {
    const Point a = map.position(v.segment.from);
    const Point b = map.position(v.segment.to);
    const double f = v.offset / map.block_length();
    return {a.x + (b.x - a.x) * f, a.y + (b.y - a.y) * f};
}

std::size_t area_of_y(double y, const GridMap& map, std::size_t num_areas) noexcept {
    if (num_areas <= 1 || y <= 0.0) return 0;
    const double band = map.height() / static_cast<double>(num_areas);
    // Tolerance absorbs rounding of r * block_length on exact boundaries.
    const double q = y / band - 1e-9;
    const auto k = static_cast<std::size_t>(std::max(0.0, std::ceil(q) - 1.0));
    return std::min(k, num_areas - 1);
}

std::size_t area_of(const VehicleState& v, const GridMap& map, std::size_t num_areas) noexcept {
    return area_of_y(position(v, map).y, map, num_areas);
}

void validate_areas(const GridMap& map, std::size_t num_areas) {
    if (num_areas == 0) throw ConfigError("number of areas must be at least 1");
    std::vector<bool> seen(num_areas, false);
    for (std::size_t r = 0; r < map.rows(); ++r) {
        seen[area_of_y(static_cast<double>(r) * map.block_length(), map, num_areas)] = true;
    }
    for (std::size_t k = 0; k < num_areas; ++k) {
        if (!seen[k]) {
            throw ConfigError("area " + std::to_string(k) + " contains no intersection row; " +
                              std::to_string(map.rows()) + " rows cannot be split into " +
                              std::to_string(num_areas) + " areas");
        }
    }
}

namespace {

std::size_t node_area(const GridMap& map, NodeId n, std::size_t num_areas) noexcept {
    return area_of_y(map.position(n).y, map, num_areas);
}

}  // namespace

bool segment_allowed(const VehicleState& v, const GridMap& map, NodeId from, NodeId to) noexcept {
    if (!map.adjacent(from, to)) return false;
    if (v.free_roam || !v.home_area || v.area_count == 0) return true;
    return node_area(map, from, v.area_count) == *v.home_area &&
           node_area(map, to, v.area_count) == *v.home_area;
}

std::vector<TurnOption> turn_options(const VehicleState& v, const GridMap& map) {
    const NodeId prev = v.segment.from;
    const NodeId at = v.segment.to;
    // The straight continuation keeps the row/column delta of the arrival road.
    const auto r = static_cast<long long>(map.row_of(at));
    const auto c = static_cast<long long>(map.col_of(at));
    const long long sr = 2 * r - static_cast<long long>(map.row_of(prev));
    const long long sc = 2 * c - static_cast<long long>(map.col_of(prev));
    std::optional<NodeId> straight;
    if (sr >= 0 && sc >= 0 && sr < static_cast<long long>(map.rows()) &&
        sc < static_cast<long long>(map.cols())) {
        const NodeId s = map.node(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
        if (segment_allowed(v, map, at, s)) straight = s;
    }

    std::vector<NodeId> others;
    for (NodeId n : map.neighbors(at)) {
        if (n != straight && segment_allowed(v, map, at, n)) others.push_back(n);
    }

    std::vector<TurnOption> options;
    if (straight && others.empty()) {
        options.push_back({*straight, 1.0});
    } else if (straight) {
        options.push_back({*straight, 0.5});
        for (NodeId n : others) {
            options.push_back({n, 0.5 / static_cast<double>(others.size())});
        }
    } else if (!others.empty()) {
        for (NodeId n : others) {
            options.push_back({n, 1.0 / static_cast<double>(others.size())});
        }
    } else {
        options.push_back({prev, 1.0});
    }
    return options;
}

std::vector<VehicleState> init_vehicles(const GridMap& map, std::size_t n, double speed,
                                        const std::optional<AreaSpec>& areas,
                                        std::uint64_t seed) {
    if (n == 0) throw ConfigError("number of vehicles must be at least 1");
    if (!(speed > 0.0)) throw ConfigError("vehicle speed must be positive");
    if (areas) {
        validate_areas(map, areas->areas);
        if (areas->total() != n) {
            throw ConfigError("area layout describes " + std::to_string(areas->total()) +
                              " vehicles but " + std::to_string(n) + " were requested");
        }
    }

    std::vector<VehicleState> out;
    out.reserve(n);
    auto place = [&](std::size_t id, std::optional<std::size_t> home, bool free_roam) {
        VehicleState v;
        v.id = id;
        v.speed = speed;
        v.home_area = home;
        v.free_roam = free_roam;
        v.area_count = areas ? areas->areas : 0;
        std::vector<Segment> candidates;
        for (const Segment& s : map.segments()) {
            if (segment_allowed(v, map, s.from, s.to)) candidates.push_back(s);
        }
        Rng rng = make_rng(seed, Stream::placement, {id});
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        std::uniform_real_distribution<double> along(0.0, map.block_length());
        v.segment = candidates[pick(rng)];
        v.offset = along(rng);
        out.push_back(v);
    };

    if (!areas) {
        for (std::size_t i = 0; i < n; ++i) place(i, std::nullopt, true);
        return out;
    }
    std::size_t id = 0;
    for (std::size_t a = 0; a < areas->areas; ++a) {
        for (std::size_t k = 0; k < areas->restricted_per_area; ++k) place(id++, a, false);
        for (std::size_t k = 0; k < areas->free_in_area(a); ++k) place(id++, a, true);
    }
    return out;
}

VehicleState step(VehicleState v, const GridMap& map, double dt, Rng& rng) {
    const double length = map.block_length();
    double remaining = v.speed * dt;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (v.offset + remaining > length) {
        remaining -= length - v.offset;
        const auto options = turn_options(v, map);
        NodeId next = options.back().next;
        double u = unit(rng);
        for (const auto& opt : options) {
            if (u < opt.probability) {
                next = opt.next;
                break;
            }
            u -= opt.probability;
        }
        v.segment = {v.segment.to, next};
        v.offset = 0.0;
    }
    v.offset += remaining;
    return v;
}

std::vector<Contact> detect_contacts(std::span<const Point> positions, double range) {
    if (!(range > 0.0)) throw ConfigError("communication range must be positive");
    auto cell_of = [range](double v) { return static_cast<std::int64_t>(std::floor(v / range)); };
    auto key = [](std::int64_t cx, std::int64_t cy) {
        return (static_cast<std::uint64_t>(cx) << 32) ^ static_cast<std::uint32_t>(cy);
    };

    std::unordered_map<std::uint64_t, std::vector<AgentId>> cells;
    for (AgentId i = 0; i < positions.size(); ++i) {
        cells[key(cell_of(positions[i].x), cell_of(positions[i].y))].push_back(i);
    }

    const double r2 = range * range;
    std::vector<Contact> out;
    for (AgentId i = 0; i < positions.size(); ++i) {
        const std::int64_t cx = cell_of(positions[i].x);
        const std::int64_t cy = cell_of(positions[i].y);
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                const auto it = cells.find(key(cx + dx, cy + dy));
                if (it == cells.end()) continue;
                for (AgentId j : it->second) {
                    if (j <= i) continue;
                    const double ex = positions[i].x - positions[j].x;
                    const double ey = positions[i].y - positions[j].y;
                    if (ex * ex + ey * ey <= r2) out.emplace_back(i, j);
                }
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Contact> detect_contacts(std::span<const VehicleState> states, const GridMap& map,
                                     double range) {
    std::vector<Point> pts;
    pts.reserve(states.size());
    for (const auto& v : states) pts.push_back(position(v, map));
    return detect_contacts(pts, range);
}

Fleet::Fleet(GridMap map, std::vector<VehicleState> vehicles, std::uint64_t seed)
    : map_(std::move(map)), vehicles_(std::move(vehicles)) {
    rngs_.reserve(vehicles_.size());
    for (const auto& v : vehicles_) rngs_.push_back(make_rng(seed, Stream::mobility, {v.id}));
}

void Fleet::step_all(double dt) {
    for (std::size_t i = 0; i < vehicles_.size(); ++i) {
        vehicles_[i] = step(vehicles_[i], map_, dt, rngs_[i]);
    }
}

std::vector<Point> Fleet::positions() const {
    std::vector<Point> pts;
    pts.reserve(vehicles_.size());
    for (const auto& v : vehicles_) pts.push_back(position(v, map_));
    return pts;
}

void Fleet::set_speed(double speed) noexcept {
    for (auto& v : vehicles_) v.speed = speed;
}

}  // namespace cached_dfl::mobility
