#pragma once

#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>

#include "watter/domain.hpp"
#include "watter/routing.hpp"
#include "watter/thresholdopt.hpp"
#include "watter/valuelearn.hpp"

namespace watter {

enum class StrategyKind { online, timeout, threshold };

inline const char* to_string(StrategyKind k) {
    switch (k) {
        case StrategyKind::online: return "online";
        case StrategyKind::timeout: return "timeout";
        case StrategyKind::threshold: return "expect";
    }
    return "?";
}

inline StrategyKind parse_strategy(const std::string& name) {
    if (name == "online") return StrategyKind::online;
    if (name == "timeout") return StrategyKind::timeout;
    if (name == "expect" || name == "threshold") return StrategyKind::threshold;
    throw std::invalid_argument("unknown strategy: " + name);
}

struct StrategyConfig {
    StrategyKind kind = StrategyKind::threshold;
    // Timeout strategy: dispatch a group that would expire within one check
    // period instead of losing it.
    bool dispatch_near_expiry = true;
    DurMs check_period_ms = 10'000;
};

struct Decision {
    bool dispatch = false;
    DispatchCause cause = DispatchCause::threshold;
};

// The dispatch-or-hold rule evaluated on one candidate group at instant t_s.
// Orders past their watching window force a dispatch for every strategy; the
// threshold strategy otherwise compares the group's average extra time with
// the mean member threshold.
inline Decision make_decision(const StrategyConfig& cfg, std::span<const Order> members, const RoutePlan& route,
                              TimeMs t_s, std::span<const DurMs> member_thetas, double alpha, double beta,
                              TimeMs group_expiry_at = kNeverMs) {
    TimeMs earliest_timeout = kNeverMs;
    for (const Order& o : members) earliest_timeout = std::min(earliest_timeout, o.release + o.watch);

    switch (cfg.kind) {
        case StrategyKind::online:
            return {true, DispatchCause::online};
        case StrategyKind::timeout:
            if (t_s > earliest_timeout) return {true, DispatchCause::timeout};
            if (cfg.dispatch_near_expiry && group_expiry_at <= t_s + cfg.check_period_ms)
                return {true, DispatchCause::expiry};
            return {false, DispatchCause::timeout};
        case StrategyKind::threshold: {
            if (t_s > earliest_timeout) return {true, DispatchCause::timeout};
            if (member_thetas.size() != members.size())
                throw std::invalid_argument("missing member thresholds for the threshold strategy");
            double avg_extra = average_extra_time(members, route, t_s, alpha, beta);
            double theta_sum = 0;
            for (DurMs t : member_thetas) theta_sum += static_cast<double>(t);
            double theta_bar = theta_sum / static_cast<double>(member_thetas.size());
            return {avg_extra <= theta_bar, DispatchCause::threshold};
        }
    }
    return {};
}

// Per-order expected threshold table, serializable as CSV.
class ThresholdTable {
public:
    ThresholdTable() = default;
    explicit ThresholdTable(std::map<OrderId, DurMs> table) : table_(std::move(table)) {}

    void set(OrderId id, DurMs theta) { table_[id] = theta; }
    bool has(OrderId id) const { return table_.count(id) > 0; }
    DurMs at(OrderId id) const {
        auto it = table_.find(id);
        if (it == table_.end()) throw std::invalid_argument("no threshold for order " + std::to_string(id));
        return it->second;
    }
    std::size_t size() const { return table_.size(); }

    void save_csv(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::invalid_argument("cannot write threshold table: " + path);
        out << "order_id,theta_s\n";
        for (const auto& [id, theta] : table_) out << id << "," << ms_to_seconds(theta) << "\n";
    }

    static ThresholdTable load_csv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open threshold table: " + path);
        ThresholdTable t;
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::istringstream row(line);
            std::string id_s, theta_s;
            std::getline(row, id_s, ',');
            std::getline(row, theta_s, ',');
            t.set(static_cast<OrderId>(std::stol(id_s)), seconds_to_ms(std::stod(theta_s)));
        }
        return t;
    }

private:
    std::map<OrderId, DurMs> table_;
};

enum class ThresholdSourceKind { fixed_table, gmm_optimal, value_net };

// Where per-order thresholds come from: a fixed table, the distribution
// optimizer applied to the order's penalty, or the learned value function.
// All thresholds clamp into [0, penalty].
class ThresholdSource {
public:
    static ThresholdSource fixed(ThresholdTable table) {
        ThresholdSource s;
        s.kind_ = ThresholdSourceKind::fixed_table;
        s.table_ = std::move(table);
        return s;
    }

    static ThresholdSource gmm_optimal(GmmModel model) {
        ThresholdSource s;
        s.kind_ = ThresholdSourceKind::gmm_optimal;
        s.model_ = std::move(model);
        return s;
    }

    static ThresholdSource value_net(const ValueNet* net) {
        if (!net) throw std::invalid_argument("value-net threshold source needs a network");
        ThresholdSource s;
        s.kind_ = ThresholdSourceKind::value_net;
        s.net_ = net;
        return s;
    }

    ThresholdSourceKind kind() const { return kind_; }
    bool needs_state() const { return kind_ == ThresholdSourceKind::value_net; }

    DurMs threshold_of(const Order& o, const StateVector* state = nullptr) const {
        DurMs p = o.penalty();
        switch (kind_) {
            case ThresholdSourceKind::fixed_table:
                return std::clamp<DurMs>(table_.at(o.id), 0, p);
            case ThresholdSourceKind::gmm_optimal: {
                auto it = cache_.find(o.id);
                if (it != cache_.end()) return it->second;
                DurMs theta = std::clamp<DurMs>(seconds_to_ms(optimal_theta(model_, ms_to_seconds(p))), 0, p);
                cache_.emplace(o.id, theta);
                return theta;
            }
            case ThresholdSourceKind::value_net: {
                if (!state) throw std::invalid_argument("value-net threshold needs the order's state");
                DurMs v = seconds_to_ms(net_->value(*state));
                return std::clamp<DurMs>(p - v, 0, p);
            }
        }
        throw std::logic_error("unreachable");
    }

private:
    ThresholdSource() = default;

    ThresholdSourceKind kind_ = ThresholdSourceKind::fixed_table;
    ThresholdTable table_;
    GmmModel model_;
    const ValueNet* net_ = nullptr;
    mutable std::map<OrderId, DurMs> cache_;
};

inline DurMs threshold_of(const Order& o, const ThresholdSource& source, const StateVector* state = nullptr) {
    return source.threshold_of(o, state);
}

}  // namespace watter
