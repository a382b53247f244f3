#pragma once

#include <cmath>
#include <cstring>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "watter/domain.hpp"
#include "watter/spatial.hpp"

namespace watter {

// MDP state of one pending order: pickup/dropoff region one-hots, release
// timeslot and waited slots, pending pickup/dropoff counts per region, idle
// worker counts per region. Dimension 5*n*n + 2 for an n-by-n grid.
struct StateVector {
    std::vector<float> v;

    std::size_t size() const { return v.size(); }
    float operator[](std::size_t i) const { return v[i]; }
};

struct FeatureLayout {
    int n = 10;

    int cells() const { return n * n; }
    int dim() const { return 5 * n * n + 2; }
    int pickup_offset() const { return 0; }
    int dropoff_offset() const { return cells(); }
    int time_offset() const { return 2 * cells(); }
    int demand_pickup_offset() const { return 2 * cells() + 2; }
    int demand_dropoff_offset() const { return 3 * cells() + 2; }
    int supply_offset() const { return 4 * cells() + 2; }
};

inline StateVector featurize(const Order& order, TimeMs now, std::span<const Order> pending,
                             std::span<const Worker> workers, const GridIndex& grid, DurMs slot_ms,
                             long* clamped_count = nullptr) {
    FeatureLayout layout{grid.side()};
    StateVector s;
    s.v.assign(static_cast<std::size_t>(layout.dim()), 0.0f);

    long clamped = 0;
    auto cell = [&](const Location& l) {
        bool c = false;
        int idx = grid.cell_of(l, &c);
        if (c) ++clamped;
        return static_cast<std::size_t>(idx);
    };

    s.v[static_cast<std::size_t>(layout.pickup_offset()) + cell(order.pickup)] = 1.0f;
    s.v[static_cast<std::size_t>(layout.dropoff_offset()) + cell(order.dropoff)] = 1.0f;
    s.v[static_cast<std::size_t>(layout.time_offset())] = static_cast<float>(order.release / slot_ms);
    s.v[static_cast<std::size_t>(layout.time_offset()) + 1] = static_cast<float>((now - order.release) / slot_ms);
    for (const Order& o : pending) {
        s.v[static_cast<std::size_t>(layout.demand_pickup_offset()) + cell(o.pickup)] += 1.0f;
        s.v[static_cast<std::size_t>(layout.demand_dropoff_offset()) + cell(o.dropoff)] += 1.0f;
    }
    for (const Worker& w : workers)
        if (w.idle_at(now)) s.v[static_cast<std::size_t>(layout.supply_offset()) + cell(w.free_loc)] += 1.0f;

    if (clamped_count) *clamped_count += clamped;
    return s;
}

// Two-hidden-layer rectified feed-forward approximator of the state value,
// with manual backpropagation. Values are in seconds. A fixed per-input scale
// keeps count and timeslot features in a trainable range.
class ValueNet {
public:
    ValueNet(int input_dim, int width, std::uint64_t seed)
        : in_(input_dim), h_(width), scale_(static_cast<std::size_t>(input_dim), 1.0) {
        Rng rng(seed);
        auto he = [&](std::vector<double>& w, int fan_in) {
            double s = std::sqrt(2.0 / fan_in);
            for (double& x : w) {
                double u1 = std::max(rng.next_double(), 1e-12), u2 = rng.next_double();
                x = s * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
            }
        };
        w1_.resize(static_cast<std::size_t>(h_) * static_cast<std::size_t>(in_));
        b1_.assign(static_cast<std::size_t>(h_), 0.0);
        w2_.resize(static_cast<std::size_t>(h_) * static_cast<std::size_t>(h_));
        b2_.assign(static_cast<std::size_t>(h_), 0.0);
        w3_.resize(static_cast<std::size_t>(h_));
        he(w1_, in_);
        he(w2_, h_);
        he(w3_, h_);
    }

    static ValueNet for_layout(const FeatureLayout& layout, int width, std::uint64_t seed, DurMs /*slot_ms*/) {
        ValueNet net(layout.dim(), width, seed);
        // one-hots stay unit; timeslots and counts shrink into ~[0, few]
        net.scale_[static_cast<std::size_t>(layout.time_offset())] = 1.0 / 512.0;
        net.scale_[static_cast<std::size_t>(layout.time_offset()) + 1] = 1.0 / 32.0;
        for (int i = layout.demand_pickup_offset(); i < layout.dim(); ++i)
            net.scale_[static_cast<std::size_t>(i)] = 1.0 / 32.0;
        return net;
    }

    int input_dim() const { return in_; }
    int width() const { return h_; }

    double value(const StateVector& s) const {
        Cache c;
        return forward(s, c);
    }

    struct Grads {
        std::vector<double> w1, b1, w2, b2, w3;
        double b3 = 0;

        explicit Grads(const ValueNet& net)
            : w1(net.w1_.size(), 0.0),
              b1(net.b1_.size(), 0.0),
              w2(net.w2_.size(), 0.0),
              b2(net.b2_.size(), 0.0),
              w3(net.w3_.size(), 0.0) {}
    };

    // Accumulates dL/dparams for one sample given dL/dvalue.
    void backward(const StateVector& s, double dvalue, Grads& g) const {
        Cache c;
        forward(s, c);
        std::vector<double> d2(static_cast<std::size_t>(h_));
        for (int j = 0; j < h_; ++j) {
            auto ju = static_cast<std::size_t>(j);
            double gz = c.a2[ju] > 0 ? dvalue * w3_[ju] : 0.0;
            g.w3[ju] += dvalue * c.a2[ju];
            d2[ju] = gz;
        }
        g.b3 += dvalue;
        std::vector<double> d1(static_cast<std::size_t>(h_), 0.0);
        for (int j = 0; j < h_; ++j) {
            auto ju = static_cast<std::size_t>(j);
            if (d2[ju] == 0.0) continue;
            g.b2[ju] += d2[ju];
            const std::size_t row = ju * static_cast<std::size_t>(h_);
            for (int i = 0; i < h_; ++i) {
                auto iu = static_cast<std::size_t>(i);
                g.w2[row + iu] += d2[ju] * c.a1[iu];
                d1[iu] += d2[ju] * w2_[row + iu];
            }
        }
        for (int j = 0; j < h_; ++j) {
            auto ju = static_cast<std::size_t>(j);
            double gz = c.a1[ju] > 0 ? d1[ju] : 0.0;
            if (gz == 0.0) continue;
            g.b1[ju] += gz;
            const std::size_t row = ju * static_cast<std::size_t>(in_);
            for (int i = 0; i < in_; ++i) g.w1[row + static_cast<std::size_t>(i)] += gz * c.x[static_cast<std::size_t>(i)];
        }
    }

    // Flat parameter view used by the optimizer, checkpoints and tests.
    std::vector<double*> parameters() {
        std::vector<double*> out;
        for (auto* vec : {&w1_, &b1_, &w2_, &b2_, &w3_})
            for (double& x : *vec) out.push_back(&x);
        out.push_back(&b3_);
        return out;
    }

    std::vector<double> parameter_values() const {
        std::vector<double> out;
        for (const auto* vec : {&w1_, &b1_, &w2_, &b2_, &w3_}) out.insert(out.end(), vec->begin(), vec->end());
        out.push_back(b3_);
        return out;
    }

    static std::vector<double> flatten(const Grads& g) {
        std::vector<double> out;
        for (const auto* vec : {&g.w1, &g.b1, &g.w2, &g.b2, &g.w3}) out.insert(out.end(), vec->begin(), vec->end());
        out.push_back(g.b3);
        return out;
    }

    void save(const std::string& path, std::uint64_t seed, std::uint32_t epoch) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::invalid_argument("cannot write checkpoint: " + path);
        const char magic[4] = {'W', 'V', 'N', '1'};
        out.write(magic, 4);
        auto put_u32 = [&](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
        put_u32(static_cast<std::uint32_t>(in_));
        put_u32(static_cast<std::uint32_t>(h_));
        out.write(reinterpret_cast<const char*>(&seed), 8);
        put_u32(epoch);
        auto put_doubles = [&](const std::vector<double>& v) {
            out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
        };
        put_doubles(scale_);
        put_doubles(w1_);
        put_doubles(b1_);
        put_doubles(w2_);
        put_doubles(b2_);
        put_doubles(w3_);
        out.write(reinterpret_cast<const char*>(&b3_), 8);
    }

    struct CheckpointMeta {
        std::uint64_t seed = 0;
        std::uint32_t epoch = 0;
    };

    static ValueNet load(const std::string& path, CheckpointMeta* meta = nullptr) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::invalid_argument("cannot open checkpoint: " + path);
        char magic[4];
        in.read(magic, 4);
        if (std::memcmp(magic, "WVN1", 4) != 0) throw std::invalid_argument("bad checkpoint header");
        auto get_u32 = [&] {
            std::uint32_t v = 0;
            in.read(reinterpret_cast<char*>(&v), 4);
            return v;
        };
        int input_dim = static_cast<int>(get_u32());
        int width = static_cast<int>(get_u32());
        std::uint64_t seed = 0;
        in.read(reinterpret_cast<char*>(&seed), 8);
        std::uint32_t epoch = get_u32();
        if (meta) *meta = {seed, epoch};
        ValueNet net(input_dim, width, 0);
        auto get_doubles = [&](std::vector<double>& v) {
            in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
        };
        get_doubles(net.scale_);
        get_doubles(net.w1_);
        get_doubles(net.b1_);
        get_doubles(net.w2_);
        get_doubles(net.b2_);
        get_doubles(net.w3_);
        in.read(reinterpret_cast<char*>(&net.b3_), 8);
        if (!in) throw std::invalid_argument("truncated checkpoint: " + path);
        return net;
    }

private:
    struct Cache {
        std::vector<double> x, a1, a2;
    };

    double forward(const StateVector& s, Cache& c) const {
        if (static_cast<int>(s.size()) != in_) throw std::invalid_argument("state dimension mismatch");
        c.x.resize(static_cast<std::size_t>(in_));
        for (int i = 0; i < in_; ++i)
            c.x[static_cast<std::size_t>(i)] =
                static_cast<double>(s[static_cast<std::size_t>(i)]) * scale_[static_cast<std::size_t>(i)];
        c.a1.assign(static_cast<std::size_t>(h_), 0.0);
        for (int j = 0; j < h_; ++j) {
            auto ju = static_cast<std::size_t>(j);
            double z = b1_[ju];
            const std::size_t row = ju * static_cast<std::size_t>(in_);
            for (int i = 0; i < in_; ++i) {
                double xi = c.x[static_cast<std::size_t>(i)];
                if (xi != 0.0) z += w1_[row + static_cast<std::size_t>(i)] * xi;
            }
            c.a1[ju] = z > 0 ? z : 0.0;
        }
        c.a2.assign(static_cast<std::size_t>(h_), 0.0);
        for (int j = 0; j < h_; ++j) {
            auto ju = static_cast<std::size_t>(j);
            double z = b2_[ju];
            const std::size_t row = ju * static_cast<std::size_t>(h_);
            for (int i = 0; i < h_; ++i) z += w2_[row + static_cast<std::size_t>(i)] * c.a1[static_cast<std::size_t>(i)];
            c.a2[ju] = z > 0 ? z : 0.0;
        }
        double v = b3_;
        for (int j = 0; j < h_; ++j) v += w3_[static_cast<std::size_t>(j)] * c.a2[static_cast<std::size_t>(j)];
        return v;
    }

    int in_, h_;
    std::vector<double> scale_;
    std::vector<double> w1_, b1_, w2_, b2_, w3_;
    double b3_ = 0;
};

struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long t = 0;

    void step(std::vector<double*>& params, const std::vector<double>& grads) {
        if (m.empty()) {
            m.assign(params.size(), 0.0);
            v.assign(params.size(), 0.0);
        }
        ++t;
        double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
        for (std::size_t i = 0; i < params.size(); ++i) {
            m[i] = beta1 * m[i] + (1 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1 - beta2) * grads[i] * grads[i];
            *params[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

// One MDP step. Wait steps carry the negative elapsed time since the previous
// decision (or the release, for the first); terminal steps carry the outcome
// bonus. Rewards are integer milliseconds.
struct Transition {
    StateVector state;
    int action = 0;  // 0 wait, 1 dispatch
    DurMs reward_ms = 0;
    std::optional<StateVector> next;  // empty on terminal transitions
    bool terminal = false;
    OrderId order = 0;
    DurMs penalty_ms = 0;
    DurMs theta_ms = 0;  // distribution-optimal threshold, target-loss anchor
};

class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t) {
        if (!t.terminal && !t.next) throw std::invalid_argument("open transition cannot enter memory");
        if (buf_.size() == capacity_) buf_.pop_front();
        buf_.push_back(std::move(t));
    }

    std::size_t size() const { return buf_.size(); }
    const Transition& operator[](std::size_t i) const { return buf_[i]; }

    std::vector<const Transition*> sample(std::size_t batch, Rng& rng) const {
        std::vector<const Transition*> out;
        out.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i) out.push_back(&buf_[rng.next_below(buf_.size())]);
        return out;
    }

private:
    std::size_t capacity_;
    std::deque<Transition> buf_;
};

// Wait transitions whose next state is still unknown, at most one per live
// order, plus the instant up to which the order's waiting time has already
// been charged.
class WaitBuffer {
public:
    bool has_open(OrderId id) const {
        auto it = episodes_.find(id);
        return it != episodes_.end() && it->second.open.has_value();
    }
    std::size_t open_count() const {
        std::size_t n = 0;
        for (const auto& [id, ep] : episodes_) n += ep.open.has_value() ? 1 : 0;
        return n;
    }

    // Records a wait decision at `now`: the previous open transition, if any,
    // is patched with this state and flushed; a fresh open transition starts.
    void record_wait(ReplayMemory& memory, OrderId id, TimeMs release, const StateVector& s, TimeMs now, DurMs p,
                     DurMs theta) {
        Episode& ep = episode(id, release);
        patch_open(memory, ep, s, now);
        Transition open;
        open.state = s;
        open.action = 0;
        open.order = id;
        open.penalty_ms = p;
        open.theta_ms = theta;
        ep.open = std::move(open);
    }

    // Terminal decision: patches the pending open transition with this state,
    // then flushes the terminal transition carrying the outcome bonus plus
    // any still-uncharged waiting time.
    void replace_terminate(ReplayMemory& memory, OrderId id, TimeMs release, const StateVector& s, int action,
                           DurMs bonus_ms, TimeMs now, DurMs p, DurMs theta) {
        Episode& ep = episode(id, release);
        patch_open(memory, ep, s, now);
        Transition done;
        done.state = s;
        done.action = action;
        done.reward_ms = bonus_ms - (now - ep.covered_until);
        done.terminal = true;
        done.order = id;
        done.penalty_ms = p;
        done.theta_ms = theta;
        memory.push(std::move(done));
        episodes_.erase(id);
    }

    void clear() { episodes_.clear(); }

private:
    struct Episode {
        std::optional<Transition> open;
        TimeMs covered_until = 0;
    };

    Episode& episode(OrderId id, TimeMs release) {
        auto [it, inserted] = episodes_.try_emplace(id);
        if (inserted) it->second.covered_until = release;
        return it->second;
    }

    void patch_open(ReplayMemory& memory, Episode& ep, const StateVector& s, TimeMs now) {
        if (!ep.open) return;
        ep.open->next = s;
        ep.open->reward_ms = -(now - ep.covered_until);
        memory.push(std::move(*ep.open));
        ep.open.reset();
        ep.covered_until = now;
    }

    std::map<OrderId, Episode> episodes_;
};

inline void replace_terminate(WaitBuffer& buffer, ReplayMemory& memory, OrderId id, TimeMs release,
                              const StateVector& s, int action, DurMs bonus_ms, TimeMs now, DurMs p, DurMs theta) {
    buffer.replace_terminate(memory, id, release, s, action, bonus_ms, now, p, theta);
}

// Closed-form accumulated reward of one order lifecycle. At gamma = 1 it
// telescopes exactly: penalty minus extra time when dispatched, minus the
// maximum response time when expired. For gamma < 1 the waits are discounted
// per slot.
struct EpisodeOutcome {
    bool dispatched = false;
    DurMs penalty_ms = 0;
    DurMs detour_ms = 0;    // dispatched only
    DurMs response_ms = 0;  // response time at termination
};

inline double accumulated_reward(const EpisodeOutcome& o, double gamma, DurMs slot_ms) {
    if (gamma == 1.0) {
        if (o.dispatched) return ms_to_seconds(o.penalty_ms - o.detour_ms - o.response_ms);
        return ms_to_seconds(-o.penalty_ms);
    }
    double slot_s = ms_to_seconds(slot_ms);
    auto slots = static_cast<long>(o.response_ms / slot_ms);
    double waits = 0;
    for (long k = 0; k < slots; ++k) waits -= std::pow(gamma, k) * slot_s;
    double terminal = o.dispatched ? ms_to_seconds(o.penalty_ms - o.detour_ms)
                                   : -(ms_to_seconds(o.penalty_ms - o.response_ms));
    return waits + std::pow(gamma, slots) * terminal;
}

// Weighted sum of the temporal-difference loss against the target network and
// the threshold-anchored target loss, averaged over the batch. Values and
// rewards enter in seconds.
inline double td_target_s(const Transition& t, const ValueNet& target, double gamma, DurMs slot_ms) {
    double r = ms_to_seconds(t.reward_ms);
    if (t.terminal) return r;
    return r + std::pow(gamma, ms_to_seconds(slot_ms)) * target.value(*t.next);
}

inline double loss(std::span<const Transition* const> batch, const ValueNet& v, const ValueNet& target, double omega,
                   double gamma, DurMs slot_ms) {
    if (omega < 0.0 || omega > 1.0) throw std::invalid_argument("loss weight must lie in [0, 1]");
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double td = 0, tg = 0;
    for (const Transition* t : batch) {
        double value = v.value(t->state);
        double dtd = td_target_s(*t, target, gamma, slot_ms) - value;
        double dtg = ms_to_seconds(t->penalty_ms - t->theta_ms) - value;
        td += dtd * dtd;
        tg += dtg * dtg;
    }
    const auto n = static_cast<double>(batch.size());
    return omega * td / n + (1.0 - omega) * tg / n;
}

inline double loss_with_grads(std::span<const Transition* const> batch, const ValueNet& v, const ValueNet& target,
                              double omega, double gamma, DurMs slot_ms, ValueNet::Grads& grads) {
    if (omega < 0.0 || omega > 1.0) throw std::invalid_argument("loss weight must lie in [0, 1]");
    if (batch.empty()) throw std::invalid_argument("empty batch");
    double td = 0, tg = 0;
    const auto n = static_cast<double>(batch.size());
    for (const Transition* t : batch) {
        double value = v.value(t->state);
        double dtd = td_target_s(*t, target, gamma, slot_ms) - value;
        double dtg = ms_to_seconds(t->penalty_ms - t->theta_ms) - value;
        td += dtd * dtd;
        tg += dtg * dtg;
        double dvalue = (omega * -2.0 * dtd + (1.0 - omega) * -2.0 * dtg) / n;
        v.backward(t->state, dvalue, grads);
    }
    return omega * td / n + (1.0 - omega) * tg / n;
}

}  // namespace watter
