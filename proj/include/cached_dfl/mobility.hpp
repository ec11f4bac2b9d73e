#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "cached_dfl/rng.hpp"

namespace cached_dfl::mobility {

using NodeId = std::size_t;
using AgentId = std::size_t;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Directed road segment between two adjacent intersections.
struct Segment {
    NodeId from = 0;
    NodeId to = 0;

    friend bool operator==(const Segment&, const Segment&) = default;
};

/// Manhattan-style street grid. Intersection (row, col) sits at
/// (col * block_length, row * block_length); streets join 4-neighbours.
class GridMap {
public:
    GridMap(std::size_t rows, std::size_t cols, double block_length);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double block_length() const noexcept { return block_length_; }
    double width() const noexcept { return static_cast<double>(cols_ - 1) * block_length_; }
    double height() const noexcept { return static_cast<double>(rows_ - 1) * block_length_; }

    std::size_t intersection_count() const noexcept { return rows_ * cols_; }
    NodeId node(std::size_t row, std::size_t col) const noexcept { return row * cols_ + col; }
    std::size_t row_of(NodeId n) const noexcept { return n / cols_; }
    std::size_t col_of(NodeId n) const noexcept { return n % cols_; }
    Point position(NodeId n) const noexcept;

    std::span<const NodeId> neighbors(NodeId n) const noexcept { return adjacency_[n]; }
    std::size_t degree(NodeId n) const noexcept { return adjacency_[n].size(); }
    bool adjacent(NodeId a, NodeId b) const noexcept;

    /// All directed segments, two per street.
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    std::size_t street_count() const noexcept { return segments_.size() / 2; }

private:
    std::size_t rows_;
    std::size_t cols_;
    double block_length_;
    std::vector<std::vector<NodeId>> adjacency_;
    std::vector<Segment> segments_;
};

/// Throws ConfigError for rows < 2, cols < 2 or block_length <= 0.
GridMap build_grid(std::size_t rows, std::size_t cols, double block_length);

/// Number of segments on the longest shortest path between two intersections.
std::size_t grid_diameter(const GridMap& map);

struct VehicleState {
    AgentId id = 0;
    Segment segment;
    double offset = 0.0;  // meters travelled along `segment`
    double speed = 0.0;
    std::optional<std::size_t> home_area;
    bool free_roam = true;
    std::size_t area_count = 0;  // number of horizontal bands the map is split into
};

/// Area assignment for grouped mobility. Agents are laid out area-major: for
/// each area, its restricted vehicles first, then its free vehicles. Free
/// vehicles are spread over areas round-robin (remainder to the lowest areas).
struct AreaSpec {
    std::size_t areas = 3;
    std::size_t restricted_per_area = 30;
    std::size_t free_vehicles = 9;

    std::size_t total() const noexcept { return areas * restricted_per_area + free_vehicles; }
    std::size_t free_in_area(std::size_t area) const noexcept {
        return free_vehicles / areas + (area < free_vehicles % areas ? 1 : 0);
    }
    std::size_t agents_in_area(std::size_t area) const noexcept {
        return restricted_per_area + free_in_area(area);
    }
};

Point position(const VehicleState& v, const GridMap& map) noexcept;

/// Horizontal band index of a y-coordinate. Band k covers
/// (k * H / m, (k + 1) * H / m]; band 0 also contains y = 0, so a point on a
/// boundary belongs to the lower band.
std::size_t area_of_y(double y, const GridMap& map, std::size_t num_areas) noexcept;
std::size_t area_of(const VehicleState& v, const GridMap& map, std::size_t num_areas) noexcept;

/// Throws ConfigError unless every band owns at least one row of intersections.
void validate_areas(const GridMap& map, std::size_t num_areas);

/// Whether a vehicle may drive along from -> to.
bool segment_allowed(const VehicleState& v, const GridMap& map, NodeId from, NodeId to) noexcept;

struct TurnOption {
    NodeId next = 0;
    double probability = 0.0;
};

/// Outgoing choices for a vehicle that has just reached `arrival.to`.
/// Going straight has probability 0.5 when possible; the remaining mass is
/// shared equally by every other permitted road, the reverse road included.
/// Without a straight continuation all permitted roads share it equally, so a
/// dead end yields a forced U-turn.
std::vector<TurnOption> turn_options(const VehicleState& v, const GridMap& map);

std::vector<VehicleState> init_vehicles(const GridMap& map, std::size_t n, double speed,
                                        const std::optional<AreaSpec>& areas,
                                        std::uint64_t seed);

/// Advances the vehicle by speed * dt meters. Residual distance carries across
/// intersections within the same call.
VehicleState step(VehicleState v, const GridMap& map, double dt, Rng& rng);

using Contact = std::pair<AgentId, AgentId>;

/// All pairs (a < b) within `range` (inclusive), sorted lexicographically.
/// Uses a uniform cell grid of side `range`.
std::vector<Contact> detect_contacts(std::span<const Point> positions, double range);
std::vector<Contact> detect_contacts(std::span<const VehicleState> states, const GridMap& map,
                                     double range);

/// A fleet of vehicles with one independent random stream per vehicle.
class Fleet {
public:
    Fleet(GridMap map, std::vector<VehicleState> vehicles, std::uint64_t seed);

    void step_all(double dt);
    std::vector<Point> positions() const;

    const GridMap& map() const noexcept { return map_; }
    const std::vector<VehicleState>& vehicles() const noexcept { return vehicles_; }
    void set_speed(double speed) noexcept;

private:
    GridMap map_;
    std::vector<VehicleState> vehicles_;
    std::vector<Rng> rngs_;
};

}  // namespace cached_dfl::mobility
