#pragma once

#include "watter/simharness.hpp"
#include "watter/strategy.hpp"
#include "watter/thresholdopt.hpp"
#include "watter/valuelearn.hpp"

namespace watter {

struct TrainConfig {
    int epochs = 200;
    int warm_epochs = 100;  // epochs driven by the distribution-optimal thresholds
    double lr = 1e-3;
    int batch_size = 256;
    std::size_t memory_capacity = 100'000;
    int target_sync_updates = 1000;
    double eps_start = 0.3;
    double eps_end = 0.01;
    double omega = 0.5;
    double gamma = 1.0;
    int width = 128;
    std::uint64_t seed = 1;
    int updates_per_tick = 1;

    // Ablations: decide by comparing action values instead of the threshold
    // rule, and drop the target loss.
    bool q_value_decisions = false;
    bool use_target_loss = true;
    bool warm_start = true;
};

struct TrainResult {
    ValueNet net;
    std::vector<double> epoch_mean_reward_s;  // accumulated reward per order, averaged per epoch
    std::vector<double> epoch_mean_loss;
    long transitions = 0;
    long updates = 0;
};

// One training run: every epoch replays the historical workload through the
// pooling loop, collecting transitions into the replay memory; decisions come
// from the threshold rule fed by the distribution optimizer during the warm
// epochs and by the value network afterwards, with epsilon exploration on
// top. The network trains on sampled batches after every check tick and the
// target copy refreshes on a fixed update cadence.
inline TrainResult train(const TravelModel& model, const std::vector<Order>& orders,
                         const std::vector<Worker>& workers, const GmmModel& gmm, const SimConfig& sim_cfg,
                         const TrainConfig& cfg) {
    if (orders.empty()) throw std::invalid_argument("training needs a non-empty order log");

    SimConfig engine_cfg = sim_cfg;
    engine_cfg.strategy = StrategyKind::threshold;

    FeatureLayout layout{engine_cfg.grid_side};
    TrainResult result{ValueNet::for_layout(layout, cfg.width, cfg.seed, engine_cfg.slot_ms), {}, {}, 0, 0};
    ValueNet target = result.net;

    // Per-order distribution-optimal thresholds: decision source for the warm
    // phase and anchor for the target loss throughout.
    auto gmm_source = ThresholdSource::gmm_optimal(gmm);
    std::map<OrderId, DurMs> theta_anchor;
    for (const Order& o : orders) theta_anchor[o.id] = gmm_source.threshold_of(o);

    ReplayMemory memory(cfg.memory_capacity);
    WaitBuffer buffer;
    Adam adam;
    adam.lr = cfg.lr;
    Rng explore_rng(cfg.seed ^ 0x5eedULL);
    Rng sample_rng(cfg.seed ^ 0xba7c4ULL);
    double omega_eff = cfg.use_target_loss ? cfg.omega : 1.0;

    std::map<OrderId, TimeMs> releases;
    for (const Order& o : orders) releases[o.id] = o.release;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double eps = cfg.epochs > 1
                         ? cfg.eps_start + (cfg.eps_end - cfg.eps_start) * epoch / (cfg.epochs - 1)
                         : cfg.eps_start;
        bool warm = cfg.warm_start && epoch < cfg.warm_epochs;
        auto net_source = ThresholdSource::value_net(&result.net);
        const ThresholdSource& decide_with = warm ? gmm_source : net_source;

        double epoch_reward = 0;
        long epoch_orders = 0;
        double epoch_loss = 0;
        long epoch_updates = 0;

        SimEngine::Hooks hooks;
        hooks.want_states = true;
        hooks.override_action = [&](const SimEngine::DecisionContext& ctx) {
            int action = ctx.action;
            if (cfg.q_value_decisions && ctx.states) {
                // dispatch when the terminal value beats waiting one slot
                double q_dispatch = 0, v_next = 0;
                for (std::size_t i = 0; i < ctx.members.size(); ++i) {
                    q_dispatch += ms_to_seconds(ctx.members[i].penalty() - ctx.route.detour_of(ctx.members[i].id));
                    StateVector next = (*ctx.states)[i];
                    next.v[static_cast<std::size_t>(layout.time_offset()) + 1] += 1.0f;
                    v_next += result.net.value(next);
                }
                double n = static_cast<double>(ctx.members.size());
                double q_wait = -ms_to_seconds(engine_cfg.slot_ms) +
                                std::pow(cfg.gamma, ms_to_seconds(engine_cfg.slot_ms)) * v_next / n;
                action = q_dispatch / n >= q_wait ? 1 : 0;
            }
            if (explore_rng.next_double() < eps) action = explore_rng.next_bool(0.5) ? 1 : 0;
            return action;
        };
        hooks.on_wait = [&](const Order& o, const StateVector& s, TimeMs now, DurMs /*theta*/) {
            buffer.record_wait(memory, o.id, releases.at(o.id), s, now, o.penalty(), theta_anchor.at(o.id));
            ++result.transitions;
        };
        hooks.on_terminal = [&](const Order& o, const StateVector& s, int action, DurMs bonus, TimeMs now,
                                DurMs /*theta*/) {
            buffer.replace_terminate(memory, o.id, releases.at(o.id), s, action, bonus, now, o.penalty(),
                                     theta_anchor.at(o.id));
            ++result.transitions;
            // accumulated reward of the whole lifecycle, exact at gamma = 1
            DurMs waited = now - releases.at(o.id);
            epoch_reward += ms_to_seconds(action == 1 ? bonus - waited : -o.penalty());
            ++epoch_orders;
        };
        hooks.on_tick_end = [&](TimeMs) {
            for (int u = 0; u < cfg.updates_per_tick; ++u) {
                if (memory.size() < static_cast<std::size_t>(cfg.batch_size)) return;
                auto batch = memory.sample(static_cast<std::size_t>(cfg.batch_size), sample_rng);
                ValueNet::Grads grads(result.net);
                epoch_loss +=
                    loss_with_grads(batch, result.net, target, omega_eff, cfg.gamma, engine_cfg.slot_ms, grads);
                ++epoch_updates;
                auto params = result.net.parameters();
                auto flat = ValueNet::flatten(grads);
                adam.step(params, flat);
                ++result.updates;
                if (result.updates % cfg.target_sync_updates == 0) target = result.net;
            }
        };

        auto sim = run_simulation(model, orders, workers, engine_cfg, StrategyRuntime::expect(decide_with),
                                  std::move(hooks));
        if (buffer.open_count() != 0) throw std::logic_error("wait buffer must drain at episode end");
        buffer.clear();

        result.epoch_mean_reward_s.push_back(epoch_orders ? epoch_reward / static_cast<double>(epoch_orders) : 0.0);
        result.epoch_mean_loss.push_back(epoch_updates ? epoch_loss / static_cast<double>(epoch_updates) : 0.0);
        (void)sim;
    }
    return result;
}

}  // namespace watter
