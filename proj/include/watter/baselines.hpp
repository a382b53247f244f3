#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "watter/domain.hpp"
#include "watter/routing.hpp"

namespace watter {

// Reference dispatch calculators for small canonical scenarios. They measure
// total worker travel from each worker's first pickup onward: the initial
// positioning leg is free, repositioning between assignments is counted, and
// deadlines are not enforced. These are travel-time arithmetic exercises, not
// the pooling engine.

namespace baseline_detail {

constexpr std::size_t kPartitionLimit = 10;

inline std::vector<Order> relax_deadlines(std::span<const Order> orders) {
    std::vector<Order> out(orders.begin(), orders.end());
    for (Order& o : out) o.deadline = kNeverMs / 2;
    return out;
}

struct WorkerState {
    Location loc;
    int capacity = 0;
    TimeMs free_at = 0;
    bool used = false;
};

struct Pick {
    TimeMs start = 0;
    DurMs repos = 0;
    std::size_t index = 0;
    bool found = false;
};

inline Pick pick_worker(const TravelModel& model, const std::vector<WorkerState>& fleet, const Location& start_loc,
                        int seats, TimeMs ready) {
    Pick best;
    for (std::size_t i = 0; i < fleet.size(); ++i) {
        const WorkerState& w = fleet[i];
        if (w.capacity < seats) continue;
        TimeMs start = std::max(ready, w.free_at);
        DurMs repos = model.cost(w.loc, start_loc);
        if (!best.found || start < best.start || (start == best.start && repos < best.repos)) {
            best = {start, repos, i, true};
        }
    }
    return best;
}

// Serves one routed group on the picked worker, returning the counted travel.
inline DurMs serve_group(const TravelModel& model, std::vector<WorkerState>& fleet, const RoutePlan& route,
                         TimeMs ready) {
    Pick pick = pick_worker(model, fleet, route.start(), route.max_onboard, ready);
    if (!pick.found) throw std::invalid_argument("no worker can seat the group");
    WorkerState& w = fleet[pick.index];
    DurMs counted = (w.used ? pick.repos : 0) + route.total;
    w.free_at = pick.start + pick.repos + route.total;
    w.loc = route.end();
    w.used = true;
    return counted;
}

inline std::vector<WorkerState> fleet_of(std::span<const Worker> workers) {
    std::vector<WorkerState> fleet;
    fleet.reserve(workers.size());
    for (const Worker& w : workers) fleet.push_back({w.start, w.capacity, 0, false});
    return fleet;
}

inline RoutePlan route_of(std::span<const Order> members, const TravelModel& model, int capacity) {
    auto plan = plan_best_route(members, model, 0, std::nullopt, capacity);
    if (!plan) throw std::logic_error("deadline-free route must exist");
    return *plan;
}

// Minimum total route cost over all partitions of `orders` into groups that
// some worker could seat. Ties prefer the lexicographically smallest
// partition with groups sorted by their first member.
inline std::vector<std::vector<std::size_t>> best_partition(std::span<const Order> orders, const TravelModel& model,
                                                            int capacity) {
    if (orders.size() > kPartitionLimit)
        throw std::invalid_argument("partition search is limited to small scenarios");
    std::vector<std::vector<std::size_t>> current, best;
    DurMs best_cost = 0;
    bool found = false;

    std::map<std::vector<std::size_t>, std::optional<DurMs>> cost_cache;
    auto route_cost_of = [&](const std::vector<std::size_t>& group) -> std::optional<DurMs> {
        if (static_cast<int>(group.size()) > std::min(capacity, kMaxGroupSize)) return std::nullopt;
        auto [it, fresh] = cost_cache.try_emplace(group);
        if (fresh) {
            std::vector<Order> members;
            for (std::size_t i : group) members.push_back(orders[i]);
            if (auto plan = plan_best_route(members, model, 0, std::nullopt, capacity)) it->second = plan->total;
        }
        return it->second;
    };

    std::function<void(std::size_t)> recurse = [&](std::size_t next) {
        if (next == orders.size()) {
            DurMs total = 0;
            for (const auto& g : current) {
                auto c = route_cost_of(g);
                if (!c) return;
                total += *c;
            }
            if (!found || total < best_cost || (total == best_cost && current < best)) {
                found = true;
                best_cost = total;
                best = current;
            }
            return;
        }
        // groups added by deeper levels are popped before returning here, so
        // only the groups existing now are extension targets
        const std::size_t existing = current.size();
        for (std::size_t gi = 0; gi < existing; ++gi) {
            if (static_cast<int>(current[gi].size()) >= std::min(capacity, kMaxGroupSize)) continue;
            current[gi].push_back(next);
            recurse(next + 1);
            current[gi].pop_back();
        }
        current.push_back({next});
        recurse(next + 1);
        current.pop_back();
    };
    recurse(0);
    if (!found) throw std::logic_error("no feasible partition");
    return best;
}

}  // namespace baseline_detail

// Non-sharing: every order rides alone, assigned in release order to the
// worker that can start it earliest (ties by repositioning distance, then
// worker id).
inline DurMs serve_sequentially_travel(const TravelModel& model, std::span<const Order> orders,
                                       std::span<const Worker> workers) {
    using namespace baseline_detail;
    auto relaxed = relax_deadlines(orders);
    auto fleet = fleet_of(workers);
    DurMs travel = 0;
    for (const Order& o : relaxed) {
        RoutePlan route = route_of(std::span(&o, 1), model, o.riders);
        travel += serve_group(model, fleet, route, o.release);
    }
    return travel;
}

// Mini-batch grouping: at every batch boundary, the pending orders are
// partitioned with minimum total route cost and each group goes to the worker
// that can start it earliest.
inline DurMs batch_grouping_travel(const TravelModel& model, std::span<const Order> orders,
                                   std::span<const Worker> workers, DurMs batch_period_ms) {
    using namespace baseline_detail;
    auto relaxed = relax_deadlines(orders);
    auto fleet = fleet_of(workers);
    int capacity = 0;
    for (const Worker& w : workers) capacity = std::max(capacity, w.capacity);

    DurMs travel = 0;
    std::size_t next = 0;
    TimeMs boundary = batch_period_ms;
    while (next < relaxed.size()) {
        std::vector<Order> round;
        while (next < relaxed.size() && relaxed[next].release <= boundary) round.push_back(relaxed[next++]);
        if (!round.empty()) {
            auto partition = best_partition(round, model, capacity);
            for (const auto& group : partition) {
                std::vector<Order> members;
                for (std::size_t i : group) members.push_back(round[i]);
                RoutePlan route = route_of(members, model, capacity);
                travel += serve_group(model, fleet, route, boundary);
            }
        }
        boundary += batch_period_ms;
    }
    return travel;
}

// Clairvoyant pooling: the cost-minimal partition of the whole order set,
// each group dispatched when its last member has been released.
inline DurMs pooled_exhaustive_travel(const TravelModel& model, std::span<const Order> orders,
                                      std::span<const Worker> workers) {
    using namespace baseline_detail;
    auto relaxed = relax_deadlines(orders);
    auto fleet = fleet_of(workers);
    int capacity = 0;
    for (const Worker& w : workers) capacity = std::max(capacity, w.capacity);

    auto partition = best_partition(relaxed, model, capacity);
    DurMs travel = 0;
    for (const auto& group : partition) {
        std::vector<Order> members;
        TimeMs ready = 0;
        for (std::size_t i : group) {
            members.push_back(relaxed[i]);
            ready = std::max(ready, relaxed[i].release);
        }
        RoutePlan route = route_of(members, model, capacity);
        travel += serve_group(model, fleet, route, ready);
    }
    return travel;
}

// The best grouping found by the exhaustive partition search, reported with
// original order ids.
inline std::vector<Group> pooled_exhaustive_groups(const TravelModel& model, std::span<const Order> orders,
                                                   int capacity) {
    auto relaxed = baseline_detail::relax_deadlines(orders);
    auto partition = baseline_detail::best_partition(relaxed, model, capacity);
    std::vector<Group> out;
    for (const auto& group : partition) {
        Group g;
        for (std::size_t i : group) g.push_back(relaxed[i].id);
        std::sort(g.begin(), g.end());
        out.push_back(g);
    }
    return out;
}

}  // namespace watter
