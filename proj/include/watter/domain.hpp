#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <vector>

#include "watter/core.hpp"
#include "watter/spatial.hpp"

namespace watter {

// A rider request. `deadline` is the latest drop-off instant, `watch` the
// preferred waiting window, both derived from the direct pickup-to-dropoff
// cost at ingest. The reject penalty equals the maximum feasible response
// time deadline - release - direct.
struct Order {
    OrderId id = 0;
    Location pickup;
    Location dropoff;
    int riders = 1;
    TimeMs release = 0;
    TimeMs deadline = 0;
    DurMs watch = 0;
    DurMs direct = 0;

    DurMs penalty() const { return deadline - release - direct; }

    static Order make(OrderId id, Location pickup, Location dropoff, int riders, TimeMs release, TimeMs deadline,
                      DurMs watch, DurMs direct) {
        if (riders < 1) throw std::invalid_argument("order needs at least one rider");
        if (watch < 0) throw std::invalid_argument("watch window must be non-negative");
        if (deadline < release + direct) throw std::invalid_argument("deadline precedes the direct route arrival");
        Order o;
        o.id = id;
        o.pickup = pickup;
        o.dropoff = dropoff;
        o.riders = riders;
        o.release = release;
        o.deadline = deadline;
        o.watch = watch;
        o.direct = direct;
        return o;
    }
};

inline DurMs max_response_time(const Order& o) { return o.penalty(); }

struct Worker {
    WorkerId id = 0;
    Location start;
    int capacity = 1;
    TimeMs free_at = 0;
    Location free_loc;

    bool idle_at(TimeMs now) const { return free_at <= now; }
};

// Member order ids, kept sorted ascending and unique.
using Group = std::vector<OrderId>;

inline Group make_group(std::initializer_list<OrderId> ids) {
    Group g(ids);
    std::sort(g.begin(), g.end());
    return g;
}

struct StopTag {
    OrderId order = 0;
    bool is_dropoff = false;

    friend bool operator<(const StopTag& a, const StopTag& b) {
        return a.order != b.order ? a.order < b.order : a.is_dropoff < b.is_dropoff;
    }
    friend bool operator==(const StopTag& a, const StopTag& b) {
        return a.order == b.order && a.is_dropoff == b.is_dropoff;
    }
};

// A feasible stop sequence for a group. Every member appears exactly twice,
// pickup before dropoff. `subroute` is the cost of the route prefix from the
// first stop through the member's dropoff; `detour` subtracts the member's
// direct cost from it.
struct RoutePlan {
    std::vector<StopTag> stops;
    std::vector<Location> stop_locs;
    DurMs total = 0;

    struct MemberCost {
        OrderId order = 0;
        DurMs subroute = 0;
        DurMs detour = 0;
    };
    std::vector<MemberCost> members;  // sorted by order id
    int max_onboard = 0;

    const MemberCost& member(OrderId id) const {
        auto it = std::lower_bound(members.begin(), members.end(), id,
                                   [](const MemberCost& m, OrderId v) { return m.order < v; });
        if (it == members.end() || it->order != id) throw std::invalid_argument("order not on route");
        return *it;
    }
    DurMs subroute_of(OrderId id) const { return member(id).subroute; }
    DurMs detour_of(OrderId id) const { return member(id).detour; }
    const Location& start() const { return stop_locs.front(); }
    const Location& end() const { return stop_locs.back(); }
};

inline DurMs extra_time(DurMs t_d, DurMs t_r, double alpha, double beta) {
    if (t_d < 0 || t_r < 0) throw std::invalid_argument("detour and response times must be non-negative");
    return static_cast<DurMs>(std::llround(alpha * static_cast<double>(t_d) + beta * static_cast<double>(t_r)));
}

enum class DispatchCause { threshold, timeout, online, expiry };

inline const char* to_string(DispatchCause c) {
    switch (c) {
        case DispatchCause::threshold: return "threshold";
        case DispatchCause::timeout: return "timeout";
        case DispatchCause::online: return "online";
        case DispatchCause::expiry: return "expiry";
    }
    return "?";
}

struct ServedRecord {
    OrderId order = 0;
    DurMs t_r = 0;
    DurMs t_d = 0;
    DurMs t_e = 0;
    WorkerId worker = 0;
    DispatchCause cause = DispatchCause::threshold;
};

struct RejectedRecord {
    OrderId order = 0;
    DurMs penalty = 0;
};

// Total extra time of the platform: served extra times plus penalties of
// rejected orders. Order ids must be unique across both record sets.
inline DurMs objective(std::span<const ServedRecord> served, std::span<const RejectedRecord> rejected) {
    std::set<OrderId> seen;
    DurMs total = 0;
    for (const ServedRecord& r : served) {
        if (!seen.insert(r.order).second) throw std::invalid_argument("duplicate order in records");
        total += r.t_e;
    }
    for (const RejectedRecord& r : rejected) {
        if (!seen.insert(r.order).second) throw std::invalid_argument("duplicate order in records");
        total += r.penalty;
    }
    return total;
}

}  // namespace watter
