#pragma once

#include <optional>
#include <span>
#include <vector>

#include "watter/domain.hpp"
#include "watter/spatial.hpp"

namespace watter {

constexpr int kMaxGroupSize = 5;

namespace detail {

// Exhaustive interleaving search over the 2k stops of a group. Stop index
// 2*i is member i's pickup, 2*i+1 its dropoff. Leg costs come from a matrix
// computed once up front.
struct RouteSearch {
    std::span<const Order> members;
    const TravelModel* model = nullptr;
    TimeMs now = 0;
    const std::optional<Location>* origin = nullptr;
    int capacity = 0;

    int k = 0;
    int n_stops = 0;
    std::vector<DurMs> cost;     // n_stops x n_stops
    std::vector<DurMs> origin_cost;  // origin -> stop

    std::vector<int> seq;
    std::vector<bool> picked, dropped;
    std::vector<DurMs> sub;  // prefix cost at each member's dropoff
    std::vector<DurMs> leg_stack;
    int onboard = 0;
    DurMs prefix = 0;
    DurMs approach = 0;

    bool found = false;
    DurMs best_total = 0;
    std::vector<int> best_seq;
    std::vector<DurMs> best_sub;

    const Location& stop_loc(int stop) const {
        const Order& o = members[static_cast<std::size_t>(stop / 2)];
        return stop % 2 ? o.dropoff : o.pickup;
    }

    void prepare() {
        k = static_cast<int>(members.size());
        n_stops = 2 * k;
        cost.assign(static_cast<std::size_t>(n_stops) * static_cast<std::size_t>(n_stops), 0);
        for (int i = 0; i < n_stops; ++i)
            for (int j = i + 1; j < n_stops; ++j) {
                DurMs c = model->cost(stop_loc(i), stop_loc(j));
                cost[static_cast<std::size_t>(i * n_stops + j)] = c;
                cost[static_cast<std::size_t>(j * n_stops + i)] = c;
            }
        if (*origin) {
            origin_cost.resize(static_cast<std::size_t>(n_stops));
            for (int i = 0; i < n_stops; ++i)
                origin_cost[static_cast<std::size_t>(i)] = model->cost(**origin, stop_loc(i));
        }
        picked.assign(static_cast<std::size_t>(k), false);
        dropped.assign(static_cast<std::size_t>(k), false);
        sub.assign(static_cast<std::size_t>(k), 0);
        seq.reserve(static_cast<std::size_t>(n_stops));
        leg_stack.reserve(static_cast<std::size_t>(n_stops));
    }

    bool deadline_ok(int member) const {
        // t + t_r + approach + T(L_i) < deadline, with t_r frozen at `now`
        return now + approach + sub[static_cast<std::size_t>(member)] <
               members[static_cast<std::size_t>(member)].deadline;
    }

    void push(int member, bool drop) {
        int stop = 2 * member + (drop ? 1 : 0);
        DurMs leg = 0;
        if (seq.empty()) {
            if (*origin) approach = origin_cost[static_cast<std::size_t>(stop)];
        } else {
            leg = cost[static_cast<std::size_t>(seq.back() * n_stops + stop)];
        }
        prefix += leg;
        seq.push_back(stop);
        leg_stack.push_back(leg);
        if (drop) {
            dropped[static_cast<std::size_t>(member)] = true;
            sub[static_cast<std::size_t>(member)] = prefix;
            onboard -= members[static_cast<std::size_t>(member)].riders;
        } else {
            picked[static_cast<std::size_t>(member)] = true;
            onboard += members[static_cast<std::size_t>(member)].riders;
        }
    }

    void pop(int member, bool drop) {
        prefix -= leg_stack.back();
        leg_stack.pop_back();
        seq.pop_back();
        if (drop) {
            dropped[static_cast<std::size_t>(member)] = false;
            onboard += members[static_cast<std::size_t>(member)].riders;
        } else {
            picked[static_cast<std::size_t>(member)] = false;
            onboard -= members[static_cast<std::size_t>(member)].riders;
        }
        if (seq.empty()) approach = 0;
    }

    void extend() {
        if (static_cast<int>(seq.size()) == n_stops) {
            if (!found || prefix < best_total || (prefix == best_total && seq < best_seq)) {
                found = true;
                best_total = prefix;
                best_seq = seq;
                best_sub = sub;
            }
            return;
        }
        if (found && prefix > best_total) return;
        for (int i = 0; i < k; ++i) {
            if (!picked[static_cast<std::size_t>(i)]) {
                if (onboard + members[static_cast<std::size_t>(i)].riders > capacity) continue;
                push(i, false);
                extend();
                pop(i, false);
            } else if (!dropped[static_cast<std::size_t>(i)]) {
                push(i, true);
                if (deadline_ok(i)) extend();
                pop(i, true);
            }
        }
    }
};

}  // namespace detail

// Minimum-cost feasible stop sequence for a group of orders, searched by
// exhaustive interleaving. Feasible means: every pickup precedes its dropoff,
// onboard riders never exceed `capacity`, and for every member
// t + t_r + T(L_i) < deadline with t_r evaluated at `now` (plus the worker
// approach leg when `worker_origin` is given). Equal-cost routes resolve to
// the lexicographically smallest stop-tag sequence. Returns nullopt when no
// interleaving qualifies.
inline std::optional<RoutePlan> plan_best_route(std::span<const Order> members, const TravelModel& model, TimeMs now,
                                                const std::optional<Location>& worker_origin, int capacity) {
    const int k = static_cast<int>(members.size());
    if (k < 1) throw std::invalid_argument("group needs at least one member");
    if (k > kMaxGroupSize) throw std::invalid_argument("group exceeds the supported size cap");

    detail::RouteSearch search;
    search.members = members;
    search.model = &model;
    search.now = now;
    search.origin = &worker_origin;
    search.capacity = capacity;
    search.prepare();
    search.extend();
    if (!search.found) return std::nullopt;

    RoutePlan plan;
    plan.total = search.best_total;
    plan.stops.reserve(static_cast<std::size_t>(2 * k));
    plan.stop_locs.reserve(static_cast<std::size_t>(2 * k));
    int onboard = 0;
    for (int stop : search.best_seq) {
        const Order& o = members[static_cast<std::size_t>(stop / 2)];
        bool drop = stop % 2 != 0;
        plan.stops.push_back({o.id, drop});
        plan.stop_locs.push_back(drop ? o.dropoff : o.pickup);
        onboard += drop ? -o.riders : o.riders;
        plan.max_onboard = std::max(plan.max_onboard, onboard);
    }
    plan.members.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const Order& o = members[static_cast<std::size_t>(i)];
        DurMs sub = search.best_sub[static_cast<std::size_t>(i)];
        plan.members.push_back({o.id, sub, sub - o.direct});
    }
    std::sort(plan.members.begin(), plan.members.end(),
              [](const RoutePlan::MemberCost& a, const RoutePlan::MemberCost& b) { return a.order < b.order; });
    return plan;
}

// Absolute instant after which the route stops being dispatchable: the group
// expiry is now plus the minimum member slack deadline - t - T(L_i) - t_r,
// which reduces to min_i(deadline_i - T(L_i)). A result at or before `now`
// means the group is already expired.
inline TimeMs group_expiry(std::span<const Order> members, const RoutePlan& route, TimeMs /*now*/) {
    TimeMs expiry = kNeverMs;
    for (const Order& o : members) expiry = std::min(expiry, o.deadline - route.subroute_of(o.id));
    return expiry;
}

// Mean member extra time of the group at `now`, in milliseconds. Computed
// from integer sums so that repeated evaluations at different instants stay
// exactly consistent with each other.
inline double average_extra_time(std::span<const Order> members, const RoutePlan& route, TimeMs now, double alpha,
                                 double beta) {
    DurMs sum_detour = 0;
    TimeMs sum_release = 0;
    for (const Order& o : members) {
        sum_detour += route.detour_of(o.id);
        sum_release += o.release;
    }
    const auto k = static_cast<double>(members.size());
    return (alpha * static_cast<double>(sum_detour) +
            beta * static_cast<double>(static_cast<TimeMs>(members.size()) * now - sum_release)) /
           k;
}

// Response-only lower bound on any group's average extra time at `now`:
// detours are non-negative, so no route can score below it. Every group's
// average grows at the same rate beta, which makes comparisons against it
// stable over time.
inline double average_extra_lower_bound(std::span<const Order> members, TimeMs now, double beta) {
    TimeMs sum_release = 0;
    for (const Order& o : members) sum_release += o.release;
    return beta * static_cast<double>(static_cast<TimeMs>(members.size()) * now - sum_release) /
           static_cast<double>(members.size());
}

// Latest instant at which any currently feasible route for the pair remains
// dispatchable. This is the edge expiry of the shareability graph: two orders
// stay shareable while some route, not necessarily the cheapest one, can
// still meet both deadlines.
inline std::optional<TimeMs> pair_latest_expiry(std::span<const Order> members, const TravelModel& model, TimeMs now,
                                                int capacity) {
    struct ExpirySearch : detail::RouteSearch {
        TimeMs best_expiry = 0;
        bool any = false;

        void extend_expiry() {
            if (static_cast<int>(seq.size()) == n_stops) {
                TimeMs expiry = kNeverMs;
                for (int i = 0; i < k; ++i)
                    expiry = std::min(expiry, members[static_cast<std::size_t>(i)].deadline -
                                                  sub[static_cast<std::size_t>(i)]);
                if (!any || expiry > best_expiry) {
                    any = true;
                    best_expiry = expiry;
                }
                return;
            }
            for (int i = 0; i < k; ++i) {
                if (!picked[static_cast<std::size_t>(i)]) {
                    if (onboard + members[static_cast<std::size_t>(i)].riders > capacity) continue;
                    push(i, false);
                    extend_expiry();
                    pop(i, false);
                } else if (!dropped[static_cast<std::size_t>(i)]) {
                    push(i, true);
                    if (deadline_ok(i)) extend_expiry();
                    pop(i, true);
                }
            }
        }
    };
    std::optional<Location> no_origin;
    ExpirySearch search;
    search.members = members;
    search.model = &model;
    search.now = now;
    search.origin = &no_origin;
    search.capacity = capacity;
    search.prepare();
    search.extend_expiry();
    if (!search.any) return std::nullopt;
    return search.best_expiry;
}

}  // namespace watter
