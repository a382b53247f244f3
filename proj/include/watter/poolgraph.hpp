#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "watter/domain.hpp"
#include "watter/routing.hpp"
#include "watter/spatial.hpp"

namespace watter {

struct PoolConfig {
    double alpha = 1.0;
    double beta = 1.0;
    int k_max = 3;           // vehicle capacity cap; cliques above it cannot be served
    int prefilter_ring = 2;  // pickup-cell Chebyshev ring probed for new edges; -1 probes everything
};

// Cached best shareable group of one pending order: the clique with the
// smallest average extra time among those containing it, together with its
// cheapest feasible route. The average is stored as integer component sums so
// that re-evaluating it at a later instant is exact: all groups age at the
// same rate beta, so the ranking between entries never drifts.
struct BestGroupEntry {
    Group group;  // empty when no shareable group exists
    std::optional<RoutePlan> route;
    DurMs sum_detour = 0;
    TimeMs sum_release = 0;
    TimeMs expiry = kNeverMs;
    // Earliest instant at which any clique containing this order loses its
    // current cheapest route. When that happens a clique's average extra time
    // can change discontinuously, so the entry must be re-evaluated even if
    // the expiring clique is not the cached best one.
    TimeMs recheck_at = kNeverMs;

    bool empty() const { return group.empty(); }

    double avg_extra_at(TimeMs now, double alpha, double beta) const {
        if (empty()) return std::numeric_limits<double>::infinity();
        const auto k = static_cast<double>(group.size());
        return (alpha * static_cast<double>(sum_detour) +
                beta * static_cast<double>(static_cast<TimeMs>(group.size()) * now - sum_release)) /
               k;
    }
};

// The temporal shareability graph: pending orders as nodes, expiring edges
// between pairwise-shareable orders, and the per-order best-group map G_b.
// Single-writer; callers advance time by calling expire(now) before mutating
// or reading at a later instant.
class ShareGraph {
public:
    ShareGraph(const TravelModel& model, PoolConfig cfg, std::optional<GridIndex> pickup_grid = std::nullopt)
        : model_(&model), cfg_(cfg), grid_(std::move(pickup_grid)) {}

    const PoolConfig& config() const { return cfg_; }
    std::size_t size() const { return pending_.size(); }
    bool contains(OrderId id) const { return pending_.count(id) > 0; }
    const Order& order(OrderId id) const { return pending_.at(id); }
    const std::map<OrderId, Order>& pending() const { return pending_; }

    bool has_edge(OrderId a, OrderId b) const {
        auto it = adj_.find(a);
        return it != adj_.end() && it->second.count(b) > 0;
    }

    TimeMs edge_expiry(OrderId a, OrderId b) const { return adj_.at(a).at(b); }

    const BestGroupEntry& best_group(OrderId id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) throw std::invalid_argument("unknown order " + std::to_string(id));
        return it->second;
    }

    // Inserts a pending order, probes allowed neighbors for shareability, and
    // folds every new clique through the best-group map.
    void insert_order(const Order& o, TimeMs now) {
        if (pending_.count(o.id)) throw std::invalid_argument("order already pending: " + std::to_string(o.id));

        std::vector<OrderId> candidates = neighbor_candidates(o);
        pending_.emplace(o.id, o);
        adj_[o.id];
        entries_[o.id];
        in_best_of_[o.id];
        if (grid_) grid_->insert(o.id, o.pickup);

        for (OrderId j : candidates) {
            const Order& other = pending_.at(j);
            std::vector<Order> pair = {o, other};
            if (auto expiry = pair_latest_expiry(pair, *model_, now, cfg_.k_max); expiry && *expiry > now) {
                adj_[o.id][j] = *expiry;
                adj_[j][o.id] = *expiry;
            }
        }

        improve_members(cliques_containing(o.id, now, 2), now);
    }

    // Departure removes the members and everything incident to them, then
    // re-evaluates each order whose best group touched a removed member.
    // Expiration keeps the members but re-evaluates orders whose best group
    // contains the whole expired group. Neither path re-probed neighbors: the
    // graph topology only changes through insertions and edge expiry.
    void remove_orders(const Group& g, bool departure, TimeMs now) {
        std::set<OrderId> candidates;
        if (departure) {
            for (OrderId m : g)
                if (!pending_.count(m)) throw std::invalid_argument("unknown member " + std::to_string(m));
            for (OrderId m : g)
                for (OrderId j : in_best_of_[m]) candidates.insert(j);
            for (OrderId m : g) candidates.erase(m);
            for (OrderId m : g) erase_node(m);
        } else {
            candidates = orders_whose_best_contains(g);
        }
        for (OrderId c : candidates)
            if (pending_.count(c)) refresh_entry(c, now);
    }

    // Drops edges that have expired by `now` and recomputes best groups that
    // either expired themselves or referenced a dropped edge. Idempotent at a
    // fixed instant.
    void expire(TimeMs now) {
        std::set<OrderId> candidates;
        std::vector<std::pair<OrderId, OrderId>> dead;
        for (const auto& [u, nbrs] : adj_)
            for (const auto& [v, tau] : nbrs)
                if (u < v && tau <= now) dead.push_back({u, v});
        for (const auto& [u, v] : dead) {
            adj_[u].erase(v);
            adj_[v].erase(u);
            for (OrderId j : in_best_of_[u])
                if (in_best_of_[v].count(j)) candidates.insert(j);
        }
        for (const auto& [id, entry] : entries_)
            if (entry.recheck_at <= now) candidates.insert(id);
        for (OrderId c : candidates) refresh_entry(c, now);
    }

    // All cliques of size <= k_max containing `id`, singleton included, over
    // edges alive at `now`. Each clique is reported once, members ascending.
    std::vector<Group> enumerate_cliques_containing(OrderId id, int k_max, TimeMs now) const {
        if (!pending_.count(id)) throw std::invalid_argument("unknown order " + std::to_string(id));
        return cliques_containing(id, now, 1, k_max);
    }

    nlohmann::ordered_json to_json(TimeMs now) const {
        nlohmann::ordered_json j;
        j["now_ms"] = now;
        auto& nodes = j["nodes"] = nlohmann::ordered_json::array();
        for (const auto& [id, o] : pending_) nodes.push_back(id);
        auto& edges = j["edges"] = nlohmann::ordered_json::array();
        for (const auto& [u, nbrs] : adj_)
            for (const auto& [v, tau] : nbrs)
                if (u < v) edges.push_back({{"u", u}, {"v", v}, {"expires_ms", tau}});
        auto& best = j["best_groups"] = nlohmann::ordered_json::object();
        for (const auto& [id, e] : entries_) {
            nlohmann::ordered_json entry;
            entry["group"] = e.group;
            if (!e.empty()) {
                entry["avg_extra_ms"] = e.avg_extra_at(now, cfg_.alpha, cfg_.beta);
                entry["expires_ms"] = e.expiry;
            }
            best[std::to_string(id)] = entry;
        }
        return j;
    }

private:
    std::vector<OrderId> neighbor_candidates(const Order& o) const {
        std::vector<OrderId> out;
        if (grid_ && !model_->is_graph() && cfg_.prefilter_ring >= 0) {
            std::set<OrderId> seen;
            for (int ring = 0; ring <= cfg_.prefilter_ring; ++ring)
                grid_->for_ring(o.pickup, ring, [&](std::int64_t id) { seen.insert(static_cast<OrderId>(id)); });
            out.assign(seen.begin(), seen.end());
        } else {
            for (const auto& [id, _] : pending_) out.push_back(id);
        }
        return out;
    }

    std::vector<OrderId> alive_neighbors(OrderId id, TimeMs now) const {
        std::vector<OrderId> out;
        auto it = adj_.find(id);
        if (it == adj_.end()) return out;
        for (const auto& [j, tau] : it->second)
            if (tau > now) out.push_back(j);
        return out;
    }

    std::vector<Group> cliques_containing(OrderId id, TimeMs now, int min_size, int max_size = 0) const {
        if (max_size == 0) max_size = cfg_.k_max;
        std::vector<OrderId> nbrs = alive_neighbors(id, now);
        std::vector<Group> out;
        Group cur = {id};
        if (min_size <= 1) out.push_back(cur);
        grow_clique(nbrs, 0, now, cur, min_size, max_size, out);
        return out;
    }

    void grow_clique(const std::vector<OrderId>& nbrs, std::size_t from, TimeMs now, Group& cur, int min_size,
                     int max_size, std::vector<Group>& out) const {
        if (static_cast<int>(cur.size()) == max_size) return;
        for (std::size_t i = from; i < nbrs.size(); ++i) {
            OrderId cand = nbrs[i];
            bool adjacent = true;
            for (std::size_t c = 1; c < cur.size() && adjacent; ++c) {
                auto it = adj_.at(cur[c]).find(cand);
                adjacent = it != adj_.at(cur[c]).end() && it->second > now;
            }
            if (!adjacent) continue;
            cur.push_back(cand);
            if (static_cast<int>(cur.size()) >= min_size) {
                Group sorted = cur;
                std::sort(sorted.begin(), sorted.end());
                out.push_back(std::move(sorted));
            }
            grow_clique(nbrs, i + 1, now, cur, min_size, max_size, out);
            cur.pop_back();
        }
    }

    std::vector<Order> materialize(const Group& g) const {
        std::vector<Order> members;
        members.reserve(g.size());
        for (OrderId id : g) members.push_back(pending_.at(id));
        return members;
    }

    struct Candidate {
        double avg;
        std::size_t size;
        const Group* group;
    };

    bool candidate_beats(const Candidate& cand, const BestGroupEntry& entry, TimeMs now) const {
        if (entry.empty()) return true;
        double cur = entry.avg_extra_at(now, cfg_.alpha, cfg_.beta);
        if (cand.avg != cur) return cand.avg < cur;
        if (cand.size != entry.group.size()) return cand.size < entry.group.size();
        return *cand.group < entry.group;
    }

    void set_entry(OrderId id, const Group& g, RoutePlan route, TimeMs now) {
        BestGroupEntry& entry = entries_[id];
        for (OrderId m : entry.group) in_best_of_[m].erase(id);
        entry.group = g;
        entry.sum_detour = 0;
        entry.sum_release = 0;
        std::vector<Order> members = materialize(g);
        for (const Order& o : members) {
            entry.sum_detour += route.detour_of(o.id);
            entry.sum_release += o.release;
        }
        entry.expiry = group_expiry(members, route, now);
        entry.route = std::move(route);
        for (OrderId m : g) in_best_of_[m].insert(id);
    }

    void clear_entry(OrderId id) {
        BestGroupEntry& entry = entries_[id];
        for (OrderId m : entry.group) in_best_of_[m].erase(id);
        entry = BestGroupEntry{};
    }

    // Arrival scan over the cliques containing a new order, cheapest
    // response-bound first. A clique whose response-only lower bound already
    // exceeds every member's cached average can never beat those entries at
    // any later instant either (all averages age at the same rate), so it is
    // skipped without routing; skipped cliques need no recheck trigger
    // because any event that invalidates a cached entry causes a full
    // re-evaluation anyway.
    void improve_members(std::vector<Group> cliques, TimeMs now) {
        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(cliques.size());
        for (std::size_t i = 0; i < cliques.size(); ++i) {
            std::vector<Order> members = materialize(cliques[i]);
            ranked.push_back({average_extra_lower_bound(members, now, cfg_.beta), i});
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        for (const auto& [lb, i] : ranked) {
            const Group& clique = cliques[i];
            bool worth_routing = false;
            for (OrderId m : clique) {
                const BestGroupEntry& entry = entries_.at(m);
                if (entry.empty() || lb <= entry.avg_extra_at(now, cfg_.alpha, cfg_.beta)) {
                    worth_routing = true;
                    break;
                }
            }
            if (!worth_routing) continue;

            std::vector<Order> members = materialize(clique);
            auto route = plan_best_route(members, *model_, now, std::nullopt, cfg_.k_max);
            if (!route) continue;
            TimeMs expiry = group_expiry(members, *route, now);
            double avg = average_extra_time(members, *route, now, cfg_.alpha, cfg_.beta);
            Candidate cand{avg, clique.size(), &clique};
            for (OrderId m : clique) {
                if (candidate_beats(cand, entries_.at(m), now)) set_entry(m, clique, *route, now);
                entries_.at(m).recheck_at = std::min(entries_.at(m).recheck_at, expiry);
            }
        }
    }

    // Full re-evaluation of one order's entry over the current clique set,
    // with the same lower-bound cutoff: once the incumbent's average is below
    // every remaining bound, no later clique can win or tie.
    void refresh_entry(OrderId id, TimeMs now) {
        clear_entry(id);
        const std::vector<Group> cliques = cliques_containing(id, now, 2);
        std::vector<std::pair<double, std::size_t>> ranked;
        ranked.reserve(cliques.size());
        for (std::size_t i = 0; i < cliques.size(); ++i) {
            std::vector<Order> members = materialize(cliques[i]);
            ranked.push_back({average_extra_lower_bound(members, now, cfg_.beta), i});
        }
        std::stable_sort(ranked.begin(), ranked.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        std::optional<Candidate> best;
        std::optional<RoutePlan> best_route;
        TimeMs recheck = kNeverMs;
        for (const auto& [lb, i] : ranked) {
            if (best && lb > best->avg) break;
            const Group& g = cliques[i];
            std::vector<Order> members = materialize(g);
            auto route = plan_best_route(members, *model_, now, std::nullopt, cfg_.k_max);
            if (!route) continue;
            recheck = std::min(recheck, group_expiry(members, *route, now));
            Candidate cand{average_extra_time(members, *route, now, cfg_.alpha, cfg_.beta), g.size(), &g};
            if (!best || cand.avg < best->avg ||
                (cand.avg == best->avg &&
                 (cand.size < best->size || (cand.size == best->size && g < *best->group)))) {
                best = cand;
                best_route = std::move(route);
            }
        }
        if (best) set_entry(id, *best->group, std::move(*best_route), now);
        entries_.at(id).recheck_at = recheck;
    }

    std::set<OrderId> orders_whose_best_contains(const Group& g) const {
        std::set<OrderId> out;
        bool first = true;
        for (OrderId m : g) {
            auto it = in_best_of_.find(m);
            std::set<OrderId> cur = it == in_best_of_.end() ? std::set<OrderId>{} : it->second;
            if (first) {
                out = std::move(cur);
                first = false;
            } else {
                std::set<OrderId> inter;
                for (OrderId id : out)
                    if (cur.count(id)) inter.insert(id);
                out = std::move(inter);
            }
        }
        return out;
    }

    void erase_node(OrderId m) {
        for (const auto& [j, _] : adj_[m]) adj_[j].erase(m);
        if (grid_) grid_->remove(m, pending_.at(m).pickup);
        clear_entry(m);
        adj_.erase(m);
        entries_.erase(m);
        in_best_of_.erase(m);
        pending_.erase(m);
    }

    const TravelModel* model_;
    PoolConfig cfg_;
    std::optional<GridIndex> grid_;
    std::map<OrderId, Order> pending_;
    std::map<OrderId, std::map<OrderId, TimeMs>> adj_;
    std::map<OrderId, BestGroupEntry> entries_;
    std::map<OrderId, std::set<OrderId>> in_best_of_;
};

}  // namespace watter
