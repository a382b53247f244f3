#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "watter/core.hpp"

namespace watter {

// A location is either a road-network node (graph cost model) or a lon/lat
// pair (geodesic cost model). The travel model decides which side is read.
struct Location {
    NodeId node = -1;
    double lon = 0.0;
    double lat = 0.0;

    static Location at_node(NodeId id) {
        Location l;
        l.node = id;
        return l;
    }
    static Location at(double lon, double lat) {
        Location l;
        l.lon = lon;
        l.lat = lat;
        return l;
    }
    bool is_node() const { return node >= 0; }

    friend bool operator==(const Location& a, const Location& b) {
        return a.node == b.node && a.lon == b.lon && a.lat == b.lat;
    }
};

inline double haversine_m(double lon1, double lat1, double lon2, double lat2) {
    constexpr double kEarthRadiusM = 6371000.0;
    constexpr double kDeg = 3.14159265358979323846 / 180.0;
    const double dlat = (lat2 - lat1) * kDeg;
    const double dlon = (lon2 - lon1) * kDeg;
    const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                     std::cos(lat1 * kDeg) * std::cos(lat2 * kDeg) * std::sin(dlon / 2) * std::sin(dlon / 2);
    return 2.0 * kEarthRadiusM * std::atan2(std::sqrt(a), std::sqrt(1.0 - a));
}

// Shortest travel time between locations, in milliseconds. Graph mode runs
// over an undirected weighted road graph with all-pairs costs cached at
// construction; geodesic mode divides the haversine distance by a constant
// speed. Read-only after construction.
class TravelModel {
public:
    enum class Mode { graph, geodesic };

    static TravelModel geodesic(double speed_mps) {
        if (speed_mps <= 0) throw std::invalid_argument("speed must be positive");
        TravelModel m;
        m.mode_ = Mode::geodesic;
        m.speed_mps_ = speed_mps;
        return m;
    }

    struct Edge {
        NodeId u, v;
        double weight_s;
    };

    static TravelModel from_graph(int node_count, std::span<const Edge> edges) {
        if (node_count <= 0) throw std::invalid_argument("graph needs at least one node");
        TravelModel m;
        m.mode_ = Mode::graph;
        m.adj_.assign(static_cast<std::size_t>(node_count), {});
        for (const Edge& e : edges) {
            if (e.u < 0 || e.v < 0 || e.u >= node_count || e.v >= node_count)
                throw std::invalid_argument("edge endpoint out of range");
            if (e.weight_s <= 0) throw std::invalid_argument("edge weights must be positive");
            DurMs w = seconds_to_ms(e.weight_s);
            m.adj_[static_cast<std::size_t>(e.u)].push_back({e.v, w});
            m.adj_[static_cast<std::size_t>(e.v)].push_back({e.u, w});
        }
        m.build_all_pairs();
        return m;
    }

    // Text format: first line "node_count edge_count", then one
    // "u v weight_seconds" triple per line.
    static TravelModel load_graph(std::istream& in) {
        int n = 0, e = 0;
        if (!(in >> n >> e)) throw std::invalid_argument("bad graph header");
        std::vector<Edge> edges;
        edges.reserve(static_cast<std::size_t>(e));
        for (int i = 0; i < e; ++i) {
            Edge edge{};
            if (!(in >> edge.u >> edge.v >> edge.weight_s)) throw std::invalid_argument("bad graph edge line");
            edges.push_back(edge);
        }
        return from_graph(n, edges);
    }

    static TravelModel load_graph_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open graph file: " + path);
        return load_graph(in);
    }

    Mode mode() const { return mode_; }
    bool is_graph() const { return mode_ == Mode::graph; }
    int node_count() const { return static_cast<int>(adj_.size()); }
    double speed_mps() const { return speed_mps_; }

    DurMs cost(const Location& a, const Location& b) const {
        if (mode_ == Mode::graph) {
            if (!a.is_node() || !b.is_node()) throw std::invalid_argument("graph model expects node locations");
            if (a.node >= node_count() || b.node >= node_count())
                throw std::invalid_argument("node id out of range");
            DurMs c = dist_[static_cast<std::size_t>(a.node)][static_cast<std::size_t>(b.node)];
            if (c < 0)
                throw UnreachableError("no path between nodes " + std::to_string(a.node) + " and " +
                                       std::to_string(b.node));
            return c;
        }
        if (a.is_node() || b.is_node()) throw std::invalid_argument("geodesic model expects lon/lat locations");
        double meters = haversine_m(a.lon, a.lat, b.lon, b.lat);
        return static_cast<DurMs>(std::llround(meters / speed_mps_ * 1000.0));
    }

    DurMs route_cost(std::span<const Location> route) const {
        if (route.empty()) throw std::invalid_argument("route needs at least one stop");
        DurMs total = 0;
        for (std::size_t i = 0; i + 1 < route.size(); ++i) total += cost(route[i], route[i + 1]);
        return total;
    }

private:
    void build_all_pairs() {
        const std::size_t n = adj_.size();
        dist_.assign(n, std::vector<DurMs>(n, -1));
        using Item = std::pair<DurMs, NodeId>;
        for (std::size_t s = 0; s < n; ++s) {
            auto& d = dist_[s];
            std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
            d[s] = 0;
            heap.push({0, static_cast<NodeId>(s)});
            while (!heap.empty()) {
                auto [cost, u] = heap.top();
                heap.pop();
                if (cost != d[static_cast<std::size_t>(u)]) continue;
                for (const auto& [v, w] : adj_[static_cast<std::size_t>(u)]) {
                    DurMs nd = cost + w;
                    auto vi = static_cast<std::size_t>(v);
                    if (d[vi] < 0 || nd < d[vi]) {
                        d[vi] = nd;
                        heap.push({nd, v});
                    }
                }
            }
        }
    }

    Mode mode_ = Mode::geodesic;
    double speed_mps_ = 10.0;
    std::vector<std::vector<std::pair<NodeId, DurMs>>> adj_;
    std::vector<std::vector<DurMs>> dist_;
};

inline DurMs travel_cost(const TravelModel& model, const Location& a, const Location& b) {
    return model.cost(a, b);
}

inline DurMs route_cost(const TravelModel& model, std::span<const Location> route) {
    return model.route_cost(route);
}

struct BBox {
    double lon_min = 0, lat_min = 0, lon_max = 0, lat_max = 0;

    bool contains(const Location& l) const {
        return l.lon >= lon_min && l.lon <= lon_max && l.lat >= lat_min && l.lat <= lat_max;
    }

    static BBox around(std::span<const Location> locs, double margin_frac) {
        if (locs.empty()) throw std::invalid_argument("bbox needs at least one location");
        BBox b{locs[0].lon, locs[0].lat, locs[0].lon, locs[0].lat};
        for (const Location& l : locs) {
            b.lon_min = std::min(b.lon_min, l.lon);
            b.lat_min = std::min(b.lat_min, l.lat);
            b.lon_max = std::max(b.lon_max, l.lon);
            b.lat_max = std::max(b.lat_max, l.lat);
        }
        double mlon = std::max((b.lon_max - b.lon_min) * margin_frac, 1e-9);
        double mlat = std::max((b.lat_max - b.lat_min) * margin_frac, 1e-9);
        b.lon_min -= mlon;
        b.lon_max += mlon;
        b.lat_min -= mlat;
        b.lat_max += mlat;
        return b;
    }
};

// Uniform n-by-n bucket grid over a lon/lat bounding box. Out-of-box
// locations clamp to the border cell; cell_of reports the clamp so callers
// can count it.
class GridIndex {
public:
    GridIndex() = default;
    GridIndex(const BBox& box, int cells_per_side) : box_(box), n_(cells_per_side) {
        if (cells_per_side <= 0) throw std::invalid_argument("grid needs a positive side");
        if (box.lon_max <= box.lon_min || box.lat_max <= box.lat_min)
            throw std::invalid_argument("degenerate bounding box");
        buckets_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), {});
    }

    int side() const { return n_; }
    int cell_count() const { return n_ * n_; }
    const BBox& box() const { return box_; }

    int cell_of(const Location& l, bool* clamped = nullptr) const {
        double fx = (l.lon - box_.lon_min) / (box_.lon_max - box_.lon_min);
        double fy = (l.lat - box_.lat_min) / (box_.lat_max - box_.lat_min);
        bool outside = fx < 0 || fx >= 1 || fy < 0 || fy >= 1;
        if (clamped) *clamped = outside;
        int col = std::clamp(static_cast<int>(fx * n_), 0, n_ - 1);
        int row = std::clamp(static_cast<int>(fy * n_), 0, n_ - 1);
        return row * n_ + col;
    }

    void insert(std::int64_t id, const Location& l) {
        auto& b = buckets_[static_cast<std::size_t>(cell_of(l))];
        b.insert(std::lower_bound(b.begin(), b.end(), id), id);
    }

    void remove(std::int64_t id, const Location& l) {
        auto& b = buckets_[static_cast<std::size_t>(cell_of(l))];
        auto it = std::lower_bound(b.begin(), b.end(), id);
        if (it != b.end() && *it == id) b.erase(it);
    }

    const std::vector<std::int64_t>& cell_ids(int cell) const {
        return buckets_[static_cast<std::size_t>(cell)];
    }

    // Visits ids bucketed in cells at Chebyshev ring distance `ring` from the
    // cell containing `center`. Ring 0 is the center cell itself.
    template <class Fn>
    void for_ring(const Location& center, int ring, Fn&& fn) const {
        int c = cell_of(center);
        int row = c / n_, col = c % n_;
        auto visit = [&](int r, int k) {
            if (r < 0 || r >= n_ || k < 0 || k >= n_) return;
            for (std::int64_t id : buckets_[static_cast<std::size_t>(r * n_ + k)]) fn(id);
        };
        if (ring == 0) {
            visit(row, col);
            return;
        }
        for (int k = col - ring; k <= col + ring; ++k) {
            visit(row - ring, k);
            visit(row + ring, k);
        }
        for (int r = row - ring + 1; r <= row + ring - 1; ++r) {
            visit(r, col - ring);
            visit(r, col + ring);
        }
    }

    int max_ring() const { return n_; }

    // Lower bound (meters) on the distance from a point to any location in a
    // cell at Chebyshev ring distance `ring`. Used to stop ring expansion.
    double ring_lower_bound_m(int ring) const {
        if (ring <= 1) return 0.0;
        constexpr double kMetersPerDegLat = 111194.9;
        double cell_h_m = (box_.lat_max - box_.lat_min) / n_ * kMetersPerDegLat;
        double worst_lat = std::max(std::abs(box_.lat_min), std::abs(box_.lat_max));
        double cell_w_m =
            (box_.lon_max - box_.lon_min) / n_ * kMetersPerDegLat * std::cos(worst_lat * 3.14159265358979323846 / 180.0);
        return (ring - 1) * std::min(cell_h_m, std::max(cell_w_m, 0.0));
    }

private:
    BBox box_;
    int n_ = 0;
    std::vector<std::vector<std::int64_t>> buckets_;
};

// Nearest entity by travel cost with a ring-expanding grid search. Falls back
// to a linear scan for graph-mode models, where the grid does not apply.
// `loc_of(id)` must return the entity location; `eligible(id)` filters.
template <class LocOf, class Eligible>
std::optional<std::int64_t> nearest_in_grid(const GridIndex& index, const TravelModel& model, const Location& from,
                                            LocOf&& loc_of, Eligible&& eligible) {
    std::optional<std::int64_t> best;
    DurMs best_cost = 0;
    auto consider = [&](std::int64_t id) {
        if (!eligible(id)) return;
        DurMs c = model.cost(loc_of(id), from);
        if (!best || c < best_cost || (c == best_cost && id < *best)) {
            best = id;
            best_cost = c;
        }
    };
    for (int ring = 0; ring <= index.max_ring(); ++ring) {
        if (best) {
            DurMs bound = static_cast<DurMs>(std::llround(index.ring_lower_bound_m(ring) / model.speed_mps() * 1000.0));
            if (bound > best_cost) break;
        }
        index.for_ring(from, ring, consider);
    }
    return best;
}

// Nearest idle worker to `loc`; ties break toward the lowest worker id.
// Works over any worker-shaped range (id / free_loc / idle_at members).
template <class Workers>
std::optional<WorkerId> nearest_idle_worker(const GridIndex& index, const TravelModel& model, const Location& loc,
                                            const Workers& workers, TimeMs now) {
    if (model.is_graph()) {
        std::optional<WorkerId> best;
        DurMs best_cost = 0;
        for (const auto& w : workers) {
            if (!w.idle_at(now)) continue;
            DurMs c = model.cost(w.free_loc, loc);
            if (!best || c < best_cost) {
                best = w.id;
                best_cost = c;
            }
        }
        return best;
    }
    auto r = nearest_in_grid(
        index, model, loc, [&](std::int64_t id) { return workers[static_cast<std::size_t>(id)].free_loc; },
        [&](std::int64_t id) { return workers[static_cast<std::size_t>(id)].idle_at(now); });
    if (!r) return std::nullopt;
    return static_cast<WorkerId>(*r);
}

}  // namespace watter
