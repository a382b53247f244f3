#pragma once

#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "watter/poolgraph.hpp"
#include "watter/strategy.hpp"
#include "watter/valuelearn.hpp"

namespace watter {

struct SimConfig {
    StrategyKind strategy = StrategyKind::threshold;
    double alpha = 1.0;
    double beta = 1.0;
    double tau_scale = 1.6;  // deadline = release + tau_scale * direct
    double eta_scale = 0.8;  // watching window = eta_scale * direct
    int k_w = 3;             // maximum vehicle capacity
    int worker_count = 0;
    int grid_side = 10;
    DurMs slot_ms = 10'000;  // timeslot for featurization
    DurMs check_period_ms = 10'000;
    double speed_mps = 10.0;
    std::uint64_t seed = 1;
    bool include_approach = false;
    int prefilter_ring = 2;
    bool dispatch_near_expiry = true;
    std::optional<BBox> bbox;  // defaults to the order envelope plus 1%

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["strategy"] = to_string(strategy);
        j["alpha"] = alpha;
        j["beta"] = beta;
        j["tau_scale"] = tau_scale;
        j["eta_scale"] = eta_scale;
        j["k_w"] = k_w;
        j["worker_count"] = worker_count;
        j["grid_side"] = grid_side;
        j["slot_s"] = ms_to_seconds(slot_ms);
        j["check_period_s"] = ms_to_seconds(check_period_ms);
        j["speed_mps"] = speed_mps;
        j["seed"] = seed;
        j["include_approach"] = include_approach;
        j["prefilter_ring"] = prefilter_ring;
        j["dispatch_near_expiry"] = dispatch_near_expiry;
        if (bbox) j["bbox"] = {bbox->lon_min, bbox->lat_min, bbox->lon_max, bbox->lat_max};
        return j;
    }

    static SimConfig from_json(const nlohmann::ordered_json& j) {
        SimConfig c;
        if (j.contains("strategy")) c.strategy = parse_strategy(j.at("strategy").get<std::string>());
        auto get = [&](const char* key, auto& out) {
            if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
        };
        get("alpha", c.alpha);
        get("beta", c.beta);
        get("tau_scale", c.tau_scale);
        get("eta_scale", c.eta_scale);
        get("k_w", c.k_w);
        get("worker_count", c.worker_count);
        get("grid_side", c.grid_side);
        get("speed_mps", c.speed_mps);
        get("seed", c.seed);
        get("include_approach", c.include_approach);
        get("prefilter_ring", c.prefilter_ring);
        get("dispatch_near_expiry", c.dispatch_near_expiry);
        if (j.contains("slot_s")) c.slot_ms = seconds_to_ms(j.at("slot_s").get<double>());
        if (j.contains("check_period_s")) c.check_period_ms = seconds_to_ms(j.at("check_period_s").get<double>());
        if (j.contains("bbox")) {
            auto b = j.at("bbox");
            c.bbox = BBox{b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
        }
        return c;
    }

    static SimConfig load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open config: " + path);
        nlohmann::ordered_json j;
        in >> j;
        return from_json(j);
    }
};

// One event-log row. Events: arrive, serve_<cause>, theta, assign, reject,
// fail_assign. The a/b/c columns carry t_r/t_d/t_e for serve rows,
// theta/0/0 for theta rows, approach/route/0 for assign rows and
// waited/direct/penalty for reject rows.
struct EventRow {
    TimeMs time_ms = 0;
    std::string event;
    OrderId order = -1;
    int group = -1;
    WorkerId worker = -1;
    std::int64_t a = 0, b = 0, c = 0;
};

inline std::string event_log_csv(std::span<const EventRow> rows) {
    std::ostringstream out;
    out << "time_ms,event,order_id,group_id,worker_id,t_r,t_d,t_e\n";
    for (const EventRow& r : rows)
        out << r.time_ms << ',' << r.event << ',' << r.order << ',' << r.group << ',' << r.worker << ',' << r.a << ','
            << r.b << ',' << r.c << "\n";
    return out.str();
}

inline std::vector<EventRow> parse_event_log(std::istream& in) {
    std::vector<EventRow> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        EventRow r;
        std::istringstream row(line);
        std::string f;
        std::getline(row, f, ',');
        r.time_ms = std::stoll(f);
        std::getline(row, r.event, ',');
        std::getline(row, f, ',');
        r.order = static_cast<OrderId>(std::stol(f));
        std::getline(row, f, ',');
        r.group = static_cast<int>(std::stol(f));
        std::getline(row, f, ',');
        r.worker = static_cast<WorkerId>(std::stol(f));
        std::getline(row, f, ',');
        r.a = std::stoll(f);
        std::getline(row, f, ',');
        r.b = std::stoll(f);
        std::getline(row, f, ',');
        r.c = std::stoll(f);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct MetricsReport {
    std::size_t total_orders = 0;
    std::size_t served = 0;
    std::size_t rejected = 0;
    DurMs total_extra_ms = 0;    // served extra times plus rejection penalties
    DurMs worker_travel_ms = 0;  // approach plus route over all assignments
    DurMs unified_cost_ms = 0;
    double service_rate = 0;
    double mean_response_s = 0;  // over served orders
    double mean_detour_s = 0;
    double mean_extra_s = 0;
    double mean_objective_s = 0;  // total extra over all orders
    std::map<std::string, std::size_t> dispatch_causes;
    double wall_s_per_order = 0;

    nlohmann::ordered_json to_json(bool include_timing = true) const {
        nlohmann::ordered_json j;
        j["total_orders"] = total_orders;
        j["served"] = served;
        j["rejected"] = rejected;
        j["service_rate"] = service_rate;
        j["total_extra_s"] = ms_to_seconds(total_extra_ms);
        j["unified_cost_s"] = ms_to_seconds(unified_cost_ms);
        j["worker_travel_s"] = ms_to_seconds(worker_travel_ms);
        j["mean_response_s"] = mean_response_s;
        j["mean_detour_s"] = mean_detour_s;
        j["mean_extra_s"] = mean_extra_s;
        j["mean_objective_s"] = mean_objective_s;
        j["dispatch_causes"] = dispatch_causes;
        if (include_timing) j["wall_s_per_order"] = wall_s_per_order;
        return j;
    }
};

inline DurMs unified_cost(DurMs worker_travel_ms, std::span<const DurMs> rejected_direct_ms) {
    DurMs total = worker_travel_ms;
    for (DurMs d : rejected_direct_ms) total += 10 * d;
    return total;
}

// Nearest idle worker with enough seats for the route, ties toward the lowest
// id. When `include_approach` is set, member deadlines are re-validated with
// the approach leg included and the next nearest worker is tried on failure.
// Returns the worker id and its approach cost; nullopt when no worker
// qualifies (the group stays pooled).
inline std::optional<std::pair<WorkerId, DurMs>> select_worker(const TravelModel& model, const GridIndex& worker_grid,
                                                               std::span<const Worker> workers,
                                                               std::span<const Order> members, const RoutePlan& route,
                                                               TimeMs t, bool include_approach) {
    int seats = route.max_onboard;
    auto eligible = [&](const Worker& w) { return w.idle_at(t) && w.capacity >= seats; };
    auto validate = [&](DurMs approach) {
        if (!include_approach) return true;
        for (const Order& m : members)
            if (t + approach + route.subroute_of(m.id) >= m.deadline) return false;
        return true;
    };

    if (!include_approach && !model.is_graph()) {
        auto got = nearest_in_grid(
            worker_grid, model, route.start(),
            [&](std::int64_t id) { return workers[static_cast<std::size_t>(id)].free_loc; },
            [&](std::int64_t id) { return eligible(workers[static_cast<std::size_t>(id)]); });
        if (!got) return std::nullopt;
        auto wid = static_cast<WorkerId>(*got);
        return std::make_pair(wid, model.cost(workers[static_cast<std::size_t>(wid)].free_loc, route.start()));
    }

    std::vector<std::pair<DurMs, WorkerId>> ranked;
    for (const Worker& w : workers)
        if (eligible(w)) ranked.push_back({model.cost(w.free_loc, route.start()), w.id});
    std::sort(ranked.begin(), ranked.end());
    for (auto [approach, wid] : ranked)
        if (validate(approach)) return std::make_pair(wid, approach);
    return std::nullopt;
}

// Threshold machinery for one simulation run: absent for online/timeout.
struct StrategyRuntime {
    StrategyKind kind = StrategyKind::online;
    const ThresholdSource* thresholds = nullptr;

    static StrategyRuntime online() { return {StrategyKind::online, nullptr}; }
    static StrategyRuntime timeout() { return {StrategyKind::timeout, nullptr}; }
    static StrategyRuntime expect(const ThresholdSource& src) { return {StrategyKind::threshold, &src}; }
};

struct SimResult {
    MetricsReport metrics;
    std::vector<EventRow> log;
    std::vector<ServedRecord> served;
    std::vector<RejectedRecord> rejected;
};

// The order pooling management loop: orders arrive into the shareability
// graph; asynchronous periodic checks fetch each pending order's best group,
// ask the strategy whether to dispatch, and assign dispatched groups to the
// nearest idle worker with enough capacity. Orders past their watching window
// with no feasible group, or past their physical deadline, are rejected.
class SimEngine {
public:
    struct DecisionContext {
        const Order& focal;
        const std::vector<Order>& members;
        const RoutePlan& route;
        int action;  // the strategy's verdict before any override
        TimeMs now;
        const std::vector<StateVector>* states;  // populated when states are computed
    };

    struct Hooks {
        std::function<int(const DecisionContext&)> override_action;
        std::function<void(const Order&, const StateVector&, TimeMs, DurMs theta)> on_wait;
        std::function<void(const Order&, const StateVector&, int action, DurMs bonus, TimeMs, DurMs theta)>
            on_terminal;
        std::function<void(TimeMs)> on_tick_end;
        bool want_states = false;
    };

    SimEngine(const TravelModel& model, std::vector<Order> orders, std::vector<Worker> workers, SimConfig cfg,
              StrategyRuntime strategy)
        : SimEngine(model, std::move(orders), std::move(workers), cfg, strategy, Hooks()) {}

    SimEngine(const TravelModel& model, std::vector<Order> orders, std::vector<Worker> workers, SimConfig cfg,
              StrategyRuntime strategy, Hooks hooks)
        : model_(&model),
          orders_(std::move(orders)),
          workers_(std::move(workers)),
          cfg_(cfg),
          strategy_(strategy),
          hooks_(std::move(hooks)),
          pool_(model, PoolConfig{cfg.alpha, cfg.beta, cfg.k_w, cfg.prefilter_ring},
                make_pool_grid(model, orders_, cfg)),
          feature_grid_(make_feature_grid(model, orders_, cfg)),
          worker_grid_(feature_grid_) {
        for (std::size_t i = 1; i < orders_.size(); ++i)
            if (orders_[i].release < orders_[i - 1].release)
                throw std::invalid_argument("orders must be sorted by release time");
        if (strategy_.kind == StrategyKind::threshold && !strategy_.thresholds)
            throw std::invalid_argument("threshold strategy needs a threshold source");
        if (hooks_.on_wait || hooks_.on_terminal) hooks_.want_states = true;
        if (!model.is_graph())
            for (const Worker& w : workers_) worker_grid_.insert(w.id, w.free_loc);
    }

    SimResult run() {
        auto start = std::chrono::steady_clock::now();
        std::size_t next_arrival = 0;
        TimeMs next_tick = cfg_.check_period_ms;
        while (next_arrival < orders_.size() || pool_.size() > 0) {
            TimeMs arrival = next_arrival < orders_.size() ? orders_[next_arrival].release : kNeverMs;
            if (arrival <= next_tick) {
                const Order& o = orders_[next_arrival++];
                pool_.expire(o.release);
                pool_.insert_order(o, o.release);
                log_.push_back({o.release, "arrive", o.id, -1, -1, 0, 0, 0});
            } else {
                TimeMs t = next_tick;
                next_tick += cfg_.check_period_ms;
                pool_.expire(t);
                decision_pass(t);
                if (hooks_.on_tick_end) hooks_.on_tick_end(t);
            }
        }

        SimResult result;
        result.metrics = finalize(start);
        result.log = std::move(log_);
        result.served = std::move(served_);
        result.rejected = std::move(rejected_);
        return result;
    }

    const std::vector<Worker>& workers() const { return workers_; }

private:
    static std::optional<GridIndex> make_pool_grid(const TravelModel& model, const std::vector<Order>& orders,
                                                   const SimConfig& cfg) {
        if (model.is_graph() || orders.empty()) return std::nullopt;
        return make_feature_grid(model, orders, cfg);
    }

    static GridIndex make_feature_grid(const TravelModel& model, const std::vector<Order>& orders,
                                       const SimConfig& cfg) {
        if (cfg.bbox) return GridIndex(*cfg.bbox, cfg.grid_side);
        if (model.is_graph() || orders.empty())
            return GridIndex(BBox{0, 0, 1, 1}, cfg.grid_side);  // placeholder; unused in graph mode
        std::vector<Location> locs;
        locs.reserve(orders.size() * 2);
        for (const Order& o : orders) {
            locs.push_back(o.pickup);
            locs.push_back(o.dropoff);
        }
        return GridIndex(BBox::around(locs, 0.01), cfg.grid_side);
    }

    void decision_pass(TimeMs t) {
        pending_cache_.reset();
        std::vector<OrderId> ids;
        ids.reserve(pool_.size());
        for (const auto& [id, o] : pool_.pending()) ids.push_back(id);

        for (OrderId id : ids) {
            if (!pool_.contains(id)) continue;  // dispatched earlier in this pass
            const Order o = pool_.order(id);

            if (t >= o.deadline - o.direct) {  // no response time left
                reject(o, t);
                continue;
            }

            const BestGroupEntry& entry = pool_.best_group(id);
            bool past_watch = t > o.release + o.watch;
            std::vector<Order> members;
            std::optional<RoutePlan> route;
            TimeMs expiry = kNeverMs;
            if (!entry.empty()) {
                members = materialize(entry.group);
                route = entry.route;
                expiry = entry.expiry;
            } else if (past_watch || strategy_.kind == StrategyKind::online) {
                members = {o};
                route = plan_best_route(members, *model_, t, std::nullopt, cfg_.k_w);
                if (route) expiry = group_expiry(members, *route, t);
            }

            if (!route) {
                if (past_watch) reject(o, t);  // past the window with no feasible group
                continue;
            }

            // thresholds and states
            std::vector<DurMs> thetas;
            std::vector<StateVector> states;
            bool need_states =
                hooks_.want_states || (strategy_.kind == StrategyKind::threshold && strategy_.thresholds->needs_state());
            if (need_states)
                for (const Order& m : members) states.push_back(snapshot_state(m, t));
            if (strategy_.kind == StrategyKind::threshold)
                for (std::size_t i = 0; i < members.size(); ++i)
                    thetas.push_back(strategy_.thresholds->threshold_of(members[i], need_states ? &states[i] : nullptr));

            StrategyConfig scfg{strategy_.kind, cfg_.dispatch_near_expiry, cfg_.check_period_ms};
            Decision dec = make_decision(scfg, members, *route, t, thetas, cfg_.alpha, cfg_.beta, expiry);

            int action = dec.dispatch ? 1 : 0;
            if (hooks_.override_action) {
                DecisionContext ctx{o, members, *route, action, t, need_states ? &states : nullptr};
                action = hooks_.override_action(ctx);
            }
            TimeMs earliest_window = kNeverMs;
            for (const Order& m : members) earliest_window = std::min(earliest_window, m.release + m.watch);
            bool forced = t > earliest_window;
            if (action == 1 || forced) {
                DispatchCause cause = forced && action != 1 ? DispatchCause::timeout : dec.cause;
                if (!try_dispatch(members, *route, t, cause, thetas, states)) {
                    log_.push_back({t, "fail_assign", id, -1, -1, 0, 0, 0});
                }
            } else if (hooks_.on_wait) {
                DurMs theta = thetas.empty() ? 0 : theta_of_member(members, thetas, id);
                hooks_.on_wait(o, states.at(member_index(members, id)), t, theta);
            }
        }
    }

    static std::size_t member_index(const std::vector<Order>& members, OrderId id) {
        for (std::size_t i = 0; i < members.size(); ++i)
            if (members[i].id == id) return i;
        throw std::logic_error("member lookup");
    }

    static DurMs theta_of_member(const std::vector<Order>& members, const std::vector<DurMs>& thetas, OrderId id) {
        return thetas.at(member_index(members, id));
    }

    std::vector<Order> materialize(const Group& g) const {
        std::vector<Order> members;
        members.reserve(g.size());
        for (OrderId m : g) members.push_back(pool_.order(m));
        return members;
    }

    // The pending snapshot is rebuilt lazily and invalidated whenever the
    // pool mutates, so states stay current across dispatches within a tick.
    StateVector snapshot_state(const Order& o, TimeMs t) {
        if (!pending_cache_) {
            pending_cache_.emplace();
            pending_cache_->reserve(pool_.size());
            for (const auto& [id, p] : pool_.pending()) pending_cache_->push_back(p);
        }
        return featurize(o, t, *pending_cache_, workers_, feature_grid_, cfg_.slot_ms, &clamped_locations_);
    }

    bool try_dispatch(const std::vector<Order>& members, const RoutePlan& route, TimeMs t, DispatchCause cause,
                      const std::vector<DurMs>& thetas, const std::vector<StateVector>& states) {
        auto assignment = assign_worker(members, route, t);
        if (!assignment) return false;
        auto [wid, approach] = *assignment;

        int gid = next_group_id_++;
        log_.push_back({t, "assign", -1, gid, wid, approach, route.total, 0});
        worker_travel_ms_ += approach + route.total;

        for (std::size_t i = 0; i < members.size(); ++i) {
            const Order& m = members[i];
            DurMs t_r = t - m.release;
            DurMs t_d = route.detour_of(m.id);
            DurMs t_e = extra_time(t_d, t_r, cfg_.alpha, cfg_.beta);
            if (cfg_.alpha == 1.0 && cfg_.beta == 1.0 && t_e > m.penalty())
                throw std::logic_error("served order exceeds its slack");
            served_.push_back({m.id, t_r, t_d, t_e, wid, cause});
            log_.push_back({t, std::string("serve_") + to_string(cause), m.id, gid, wid, t_r, t_d, t_e});
            if (cause == DispatchCause::threshold && !thetas.empty())
                log_.push_back({t, "theta", m.id, gid, -1, thetas[i], 0, 0});
            if (hooks_.on_terminal)
                hooks_.on_terminal(m, states.at(i), 1, m.penalty() - t_d, t,
                                   thetas.empty() ? 0 : thetas[i]);
        }

        Group g;
        for (const Order& m : members) g.push_back(m.id);
        pool_.remove_orders(g, true, t);
        pending_cache_.reset();
        return true;
    }

    std::optional<std::pair<WorkerId, DurMs>> assign_worker(const std::vector<Order>& members, const RoutePlan& route,
                                                            TimeMs t) {
        auto chosen = select_worker(*model_, worker_grid_, workers_, members, route, t, cfg_.include_approach);
        if (!chosen) return std::nullopt;
        Worker& w = workers_[static_cast<std::size_t>(chosen->first)];
        if (!model_->is_graph()) worker_grid_.remove(w.id, w.free_loc);
        w.free_at = t + chosen->second + route.total;
        w.free_loc = route.end();
        if (!model_->is_graph()) worker_grid_.insert(w.id, w.free_loc);
        return chosen;
    }

    void reject(const Order& o, TimeMs t) {
        rejected_.push_back({o.id, o.penalty()});
        log_.push_back({t, "reject", o.id, -1, -1, t - o.release, o.direct, o.penalty()});
        if (hooks_.on_terminal) {
            StateVector s = hooks_.want_states ? snapshot_state(o, t) : StateVector{};
            hooks_.on_terminal(o, s, 0, -(o.penalty() - (t - o.release)), t, 0);
        }
        pool_.remove_orders({o.id}, true, t);
        pending_cache_.reset();
    }

    MetricsReport finalize(std::chrono::steady_clock::time_point start) {
        MetricsReport m;
        m.total_orders = orders_.size();
        m.served = served_.size();
        m.rejected = rejected_.size();
        if (m.served + m.rejected != m.total_orders)
            throw std::logic_error("order conservation violated in the simulation loop");
        m.total_extra_ms = objective(served_, rejected_);
        m.worker_travel_ms = worker_travel_ms_;
        std::map<OrderId, DurMs> directs;
        for (const Order& o : orders_) directs[o.id] = o.direct;
        std::vector<DurMs> rejected_directs;
        for (const RejectedRecord& r : rejected_) rejected_directs.push_back(directs.at(r.order));
        m.unified_cost_ms = unified_cost(worker_travel_ms_, rejected_directs);
        m.service_rate = m.total_orders ? static_cast<double>(m.served) / static_cast<double>(m.total_orders) : 0.0;
        double tr = 0, td = 0, te = 0;
        for (const ServedRecord& r : served_) {
            tr += ms_to_seconds(r.t_r);
            td += ms_to_seconds(r.t_d);
            te += ms_to_seconds(r.t_e);
            ++m.dispatch_causes[to_string(r.cause)];
        }
        if (m.served) {
            m.mean_response_s = tr / static_cast<double>(m.served);
            m.mean_detour_s = td / static_cast<double>(m.served);
            m.mean_extra_s = te / static_cast<double>(m.served);
        }
        if (m.total_orders) m.mean_objective_s = ms_to_seconds(m.total_extra_ms) / static_cast<double>(m.total_orders);
        auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (m.total_orders) m.wall_s_per_order = wall / static_cast<double>(m.total_orders);
        return m;
    }

    const TravelModel* model_;
    std::vector<Order> orders_;
    std::vector<Worker> workers_;
    SimConfig cfg_;
    StrategyRuntime strategy_;
    Hooks hooks_;
    ShareGraph pool_;
    GridIndex feature_grid_;
    GridIndex worker_grid_;
    std::vector<EventRow> log_;
    std::vector<ServedRecord> served_;
    std::vector<RejectedRecord> rejected_;
    DurMs worker_travel_ms_ = 0;
    int next_group_id_ = 0;
    long clamped_locations_ = 0;
    std::optional<std::vector<Order>> pending_cache_;
};

inline SimResult run_simulation(const TravelModel& model, std::vector<Order> orders, std::vector<Worker> workers,
                                const SimConfig& cfg, const StrategyRuntime& strategy,
                                SimEngine::Hooks hooks = SimEngine::Hooks()) {
    SimEngine engine(model, std::move(orders), std::move(workers), cfg, strategy, std::move(hooks));
    return engine.run();
}

struct IngestResult {
    std::vector<Order> orders;
    long skipped = 0;  // malformed rows
    long dropped = 0;  // zero-cost rows
};

// Order CSV ingestion. Geodesic rows are
// release_time_s,pickup_lon,pickup_lat,dropoff_lon,dropoff_lat[,riders];
// graph-mode rows are release_time_s,pickup_node,dropoff_node[,riders]. The
// deadline and watching window derive from the direct cost via the config
// scales. Output is sorted by release time.
inline IngestResult ingest_orders(std::istream& in, const SimConfig& cfg, const TravelModel& model) {
    IngestResult result;
    std::string line;
    bool first = true;
    OrderId next_id = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream row(line);
        std::string f;
        while (std::getline(row, f, ',')) fields.push_back(f);
        try {
            std::size_t want = model.is_graph() ? 3 : 5;
            if (fields.size() < want) throw std::invalid_argument("short row");
            double release_s = std::stod(fields[0]);
            Location pickup, dropoff;
            int riders = 1;
            if (model.is_graph()) {
                pickup = Location::at_node(static_cast<NodeId>(std::stol(fields[1])));
                dropoff = Location::at_node(static_cast<NodeId>(std::stol(fields[2])));
                if (fields.size() > 3) riders = static_cast<int>(std::stol(fields[3]));
            } else {
                pickup = Location::at(std::stod(fields[1]), std::stod(fields[2]));
                dropoff = Location::at(std::stod(fields[3]), std::stod(fields[4]));
                if (fields.size() > 5) riders = static_cast<int>(std::stol(fields[5]));
            }
            DurMs direct = model.cost(pickup, dropoff);
            if (direct <= 0) {
                ++result.dropped;
                continue;
            }
            TimeMs release = seconds_to_ms(release_s);
            result.orders.push_back(Order::make(next_id, pickup, dropoff, riders, release,
                                                release + static_cast<DurMs>(cfg.tau_scale * static_cast<double>(direct)),
                                                static_cast<DurMs>(cfg.eta_scale * static_cast<double>(direct)),
                                                direct));
            ++next_id;
        } catch (const std::exception&) {
            if (!first) ++result.skipped;  // a non-numeric first line is a header
        }
        first = false;
    }
    std::stable_sort(result.orders.begin(), result.orders.end(),
                     [](const Order& a, const Order& b) { return a.release < b.release; });
    return result;
}

inline IngestResult ingest_orders_file(const std::string& path, const SimConfig& cfg, const TravelModel& model) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open orders file: " + path);
    return ingest_orders(in, cfg, model);
}

// Workers drawn from the order pickup distribution with capacities uniform in
// [2, k_w]. Deterministic per seed.
inline std::vector<Worker> generate_workers(std::span<const Order> orders, int count, int k_w, std::uint64_t seed) {
    if (count > 0 && orders.empty()) throw std::invalid_argument("cannot place workers without orders");
    if (k_w < 2) throw std::invalid_argument("maximum capacity must be at least 2");
    Rng rng(seed);
    std::vector<Worker> workers;
    workers.reserve(static_cast<std::size_t>(count));
    for (WorkerId id = 0; id < count; ++id) {
        const Order& o = orders[rng.next_below(orders.size())];
        int capacity = static_cast<int>(rng.next_int(2, k_w));
        workers.push_back({id, o.pickup, capacity, 0, o.pickup});
    }
    return workers;
}

// Worker CSV: graph-mode rows "node,capacity"; geodesic rows
// "lon,lat,capacity".
inline std::vector<Worker> load_workers_file(const std::string& path, const TravelModel& model) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open workers file: " + path);
    std::vector<Worker> workers;
    std::string line;
    bool first = true;
    WorkerId id = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream row(line);
        std::string f;
        while (std::getline(row, f, ',')) fields.push_back(f);
        try {
            Location loc;
            int capacity;
            if (model.is_graph()) {
                loc = Location::at_node(static_cast<NodeId>(std::stol(fields.at(0))));
                capacity = static_cast<int>(std::stol(fields.at(1)));
            } else {
                loc = Location::at(std::stod(fields.at(0)), std::stod(fields.at(1)));
                capacity = static_cast<int>(std::stol(fields.at(2)));
            }
            workers.push_back({id++, loc, capacity, 0, loc});
        } catch (const std::exception&) {
            if (!first) throw std::invalid_argument("bad worker row: " + line);
        }
        first = false;
    }
    return workers;
}

}  // namespace watter
