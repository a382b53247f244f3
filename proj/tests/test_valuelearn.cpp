#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "watter/valuelearn.hpp"

using namespace watter;

namespace {

StateVector random_state(Rng& rng, int dim) {
    StateVector s;
    s.v.resize(static_cast<std::size_t>(dim));
    for (auto& x : s.v) x = static_cast<float>(rng.next_range(0.0, 3.0));
    return s;
}

Transition random_transition(Rng& rng, int dim) {
    Transition t;
    t.state = random_state(rng, dim);
    t.terminal = rng.next_bool(0.4);
    t.action = t.terminal && rng.next_bool(0.7) ? 1 : 0;
    if (!t.terminal) t.next = random_state(rng, dim);
    t.reward_ms = rng.next_int(-200'000, 200'000);
    t.penalty_ms = rng.next_int(10'000, 400'000);
    t.theta_ms = rng.next_int(0, t.penalty_ms);
    return t;
}

}  // namespace

TEST_CASE("featurize lays out the state blocks") {
    auto model = TravelModel::geodesic(10.0);
    GridIndex grid(wtest::test_city_box(), 4);
    FeatureLayout layout{4};
    Rng rng(5);
    Order o = wtest::random_order(rng, model, 0, grid.box(), 20'000, 20'000);

    SECTION("empty pool and no idle workers leave zero tallies") {
        StateVector s = featurize(o, o.release, {}, {}, grid, 10'000);
        REQUIRE(static_cast<int>(s.size()) == layout.dim());
        double demand = 0;
        for (int i = layout.demand_pickup_offset(); i < layout.dim(); ++i)
            demand += s[static_cast<std::size_t>(i)];
        CHECK(demand == 0.0);
        double onehots = 0;
        for (int i = 0; i < layout.time_offset(); ++i) onehots += s[static_cast<std::size_t>(i)];
        CHECK(onehots == 2.0);  // one pickup cell, one dropoff cell
        CHECK(s[static_cast<std::size_t>(layout.time_offset()) + 1] == 0.0f);  // waited slots at release
        CHECK(s[static_cast<std::size_t>(layout.time_offset())] == 2.0f);      // release slot 20 s / 10 s
    }

    SECTION("tallies match an independent count") {
        std::vector<Order> pool;
        for (OrderId i = 1; i <= 40; ++i) pool.push_back(wtest::random_order(rng, model, i, grid.box(), 0, 30'000));
        std::vector<Worker> workers;
        for (WorkerId i = 0; i < 25; ++i) {
            Location l = wtest::random_point(rng, grid.box());
            workers.push_back({i, l, 2, rng.next_bool(0.5) ? 0 : kNeverMs, l});
        }
        TimeMs now = 55'000;
        StateVector s = featurize(o, now, pool, workers, grid, 10'000);

        for (int cell = 0; cell < layout.cells(); ++cell) {
            int pickup = 0, dropoff = 0, idle = 0;
            for (const Order& q : pool) {
                if (grid.cell_of(q.pickup) == cell) ++pickup;
                if (grid.cell_of(q.dropoff) == cell) ++dropoff;
            }
            for (const Worker& w : workers)
                if (w.idle_at(now) && grid.cell_of(w.free_loc) == cell) ++idle;
            CHECK(s[static_cast<std::size_t>(layout.demand_pickup_offset() + cell)] == static_cast<float>(pickup));
            CHECK(s[static_cast<std::size_t>(layout.demand_dropoff_offset() + cell)] == static_cast<float>(dropoff));
            CHECK(s[static_cast<std::size_t>(layout.supply_offset() + cell)] == static_cast<float>(idle));
        }
        CHECK(s[static_cast<std::size_t>(layout.time_offset()) + 1] == 3.0f);  // waited 35 s -> 3 slots
    }

    SECTION("out-of-box locations clamp and are counted") {
        long clamped = 0;
        DurMs far = model.cost(Location::at(-1.0, -1.0), Location::at(0.05, 0.05));
        Order outside = Order::make(9, Location::at(-1.0, -1.0), Location::at(0.05, 0.05), 1, 0, 2 * far, 1000, far);
        featurize(outside, 0, {}, {}, grid, 10'000, &clamped);
        CHECK(clamped == 1);
    }
}

TEST_CASE("value net checkpoints round-trip bit-exactly") {
    Rng rng(11);
    FeatureLayout layout{3};
    ValueNet net = ValueNet::for_layout(layout, 16, 42, 10'000);
    net.save("net_roundtrip.bin", 42, 7);
    ValueNet::CheckpointMeta meta;
    ValueNet back = ValueNet::load("net_roundtrip.bin", &meta);
    CHECK(meta.seed == 42);
    CHECK(meta.epoch == 7);
    REQUIRE(back.parameter_values() == net.parameter_values());
    for (int i = 0; i < 20; ++i) {
        StateVector s = random_state(rng, layout.dim());
        REQUIRE(back.value(s) == net.value(s));
    }
    std::remove("net_roundtrip.bin");
}

TEST_CASE("loss weights") {
    Rng rng(13);
    const int dim = 22;
    ValueNet v(dim, 12, 3), target(dim, 12, 4);
    std::vector<Transition> batch;
    for (int i = 0; i < 32; ++i) batch.push_back(random_transition(rng, dim));
    std::vector<const Transition*> ptrs;
    for (const auto& t : batch) ptrs.push_back(&t);

    SECTION("omega outside the unit interval is rejected") {
        CHECK_THROWS_AS(loss(ptrs, v, target, -0.1, 1.0, 10'000), std::invalid_argument);
        CHECK_THROWS_AS(loss(ptrs, v, target, 1.1, 1.0, 10'000), std::invalid_argument);
    }

    SECTION("omega one is the pure temporal-difference loss") {
        double td = 0;
        for (const auto& t : batch) {
            double d = td_target_s(t, target, 1.0, 10'000) - v.value(t.state);
            td += d * d;
        }
        td /= static_cast<double>(batch.size());
        CHECK(loss(ptrs, v, target, 1.0, 1.0, 10'000) == Catch::Approx(td));
    }

    SECTION("omega zero vanishes at the threshold fixed point") {
        // constant net exactly at p - theta for a batch sharing one anchor
        std::vector<Transition> anchored = batch;
        for (auto& t : anchored) {
            t.penalty_ms = 240'000;
            t.theta_ms = 90'000;
        }
        std::vector<const Transition*> aptrs;
        for (const auto& t : anchored) aptrs.push_back(&t);
        ValueNet flat(dim, 12, 5);
        auto params = flat.parameters();
        for (double* p : params) *p = 0.0;
        *params.back() = 150.0;  // p - theta in seconds
        CHECK(loss(aptrs, flat, target, 0.0, 1.0, 10'000) == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("analytic gradients match central differences") {
    Rng rng(17);
    const int dim = 22;
    const DurMs slot = 10'000;
    int checked_params = 0;
    for (int trial = 0; trial < 20; ++trial) {
        ValueNet v(dim, 8, 100 + static_cast<std::uint64_t>(trial));
        ValueNet target(dim, 8, 200 + static_cast<std::uint64_t>(trial));
        std::vector<Transition> batch;
        for (int i = 0; i < 16; ++i) batch.push_back(random_transition(rng, dim));
        std::vector<const Transition*> ptrs;
        for (const auto& t : batch) ptrs.push_back(&t);
        double omega = rng.next_range(0.0, 1.0);

        ValueNet::Grads grads(v);
        loss_with_grads(ptrs, v, target, omega, 1.0, slot, grads);
        std::vector<double> analytic = ValueNet::flatten(grads);
        auto params = v.parameters();
        REQUIRE(analytic.size() == params.size());

        // probe a deterministic subset of parameters
        for (std::size_t i = 0; i < params.size(); i += 17) {
            double saved = *params[i];
            double h = 1e-5 * std::max(1.0, std::abs(saved));
            *params[i] = saved + h;
            double up = loss(ptrs, v, target, omega, 1.0, slot);
            *params[i] = saved - h;
            double down = loss(ptrs, v, target, omega, 1.0, slot);
            *params[i] = saved;
            double fd = (up - down) / (2 * h);
            double denom = std::max({1.0, std::abs(fd), std::abs(analytic[i])});
            REQUIRE(std::abs(analytic[i] - fd) / denom < 1e-4);
            ++checked_params;
        }
    }
    CHECK(checked_params > 200);
}

TEST_CASE("terminal patching") {
    FeatureLayout layout{2};
    auto state_with = [&](float tag) {
        StateVector s;
        s.v.assign(static_cast<std::size_t>(layout.dim()), 0.0f);
        s.v[0] = tag;
        return s;
    };

    SECTION("an order with no prior waits contributes exactly one terminal") {
        ReplayMemory memory(100);
        WaitBuffer buffer;
        buffer.replace_terminate(memory, 5, 1000, state_with(1), 1, 200'000, 8000, 300'000, 90'000);
        REQUIRE(memory.size() == 1);
        CHECK(memory[0].terminal);
        CHECK(memory[0].action == 1);
        // bonus minus the uncovered 7 s of waiting
        CHECK(memory[0].reward_ms == 200'000 - 7000);
        CHECK_FALSE(buffer.has_open(5));
    }

    SECTION("one prior wait yields the patched wait then the terminal, in order") {
        ReplayMemory memory(100);
        WaitBuffer buffer;
        buffer.record_wait(memory, 5, 1000, state_with(1), 4000, 300'000, 90'000);
        REQUIRE(memory.size() == 0);  // still open
        buffer.replace_terminate(memory, 5, 1000, state_with(2), 1, 200'000, 14'000, 300'000, 90'000);
        REQUIRE(memory.size() == 2);
        CHECK_FALSE(memory[0].terminal);
        CHECK(memory[0].reward_ms == -13'000);  // covers release 1 s .. terminal 14 s
        REQUIRE(memory[0].next.has_value());
        CHECK(memory[0].next->v[0] == 2.0f);
        CHECK(memory[1].terminal);
        CHECK(memory[1].reward_ms == 200'000);  // waiting already fully charged
    }

    SECTION("long wait chains reconstruct the full state sequence") {
        ReplayMemory memory(1000);
        WaitBuffer buffer;
        Rng rng(3);
        TimeMs release = 500;
        TimeMs now = release;
        std::vector<float> tags;
        for (int k = 1; k <= 20; ++k) {
            now += rng.next_int(1, 15'000);
            buffer.record_wait(memory, 9, release, state_with(static_cast<float>(k)), now, 300'000, 90'000);
            tags.push_back(static_cast<float>(k));
        }
        now += rng.next_int(1, 15'000);
        buffer.replace_terminate(memory, 9, release, state_with(99), 1, 111'000, now, 300'000, 90'000);
        REQUIRE(memory.size() == 21);
        DurMs total = 0;
        for (std::size_t i = 0; i < 20; ++i) {
            CHECK(memory[i].state.v[0] == tags[i]);
            float expect_next = i + 1 < 20 ? tags[i + 1] : 99.0f;
            REQUIRE(memory[i].next.has_value());
            CHECK(memory[i].next->v[0] == expect_next);
            total += memory[i].reward_ms;
        }
        total += memory[20].reward_ms;
        // gamma=1 telescoping: sum of rewards = bonus - response time
        CHECK(total == 111'000 - (now - release));
        CHECK(buffer.open_count() == 0);
    }

    SECTION("open transitions cannot enter the memory") {
        ReplayMemory memory(10);
        Transition open;
        open.state = state_with(1);
        open.terminal = false;
        CHECK_THROWS_AS(memory.push(std::move(open)), std::invalid_argument);
    }
}

TEST_CASE("accumulated reward closed forms") {
    SECTION("dispatch at release with no detour earns the full penalty") {
        EpisodeOutcome o{true, 360'000, 0, 0};
        CHECK(accumulated_reward(o, 1.0, 10'000) == Catch::Approx(360.0));
    }

    SECTION("expiry forfeits the maximum response time") {
        EpisodeOutcome o{false, 360'000, 0, 287'000};
        CHECK(accumulated_reward(o, 1.0, 10'000) == Catch::Approx(-360.0));
    }

    SECTION("penalty minus extra time at unit discount") {
        EpisodeOutcome o{true, 360'000, 20'000, 30'000};
        CHECK(accumulated_reward(o, 1.0, 10'000) == Catch::Approx(310.0));
    }

    SECTION("discounting matches the slotted sum") {
        EpisodeOutcome o{true, 360'000, 20'000, 30'000};
        double g = 0.99;
        double want = -10.0 * (1 + g + g * g) + g * g * g * 340.0;
        CHECK(accumulated_reward(o, g, 10'000) == Catch::Approx(want));
    }
}

TEST_CASE("training on the target loss alone contracts toward the anchors") {
    Rng rng(23);
    const int dim = 22;
    ValueNet v(dim, 16, 7);
    ValueNet target = v;
    std::vector<Transition> batch;
    for (int i = 0; i < 64; ++i) batch.push_back(random_transition(rng, dim));
    std::vector<const Transition*> ptrs;
    for (const auto& t : batch) ptrs.push_back(&t);

    auto mean_gap = [&] {
        double gap = 0;
        for (const auto& t : batch) gap += std::abs(ms_to_seconds(t.penalty_ms - t.theta_ms) - v.value(t.state));
        return gap / static_cast<double>(batch.size());
    };

    Adam adam;  // default learning rate 1e-3
    double prev = mean_gap();
    double first = prev;
    for (int step = 0; step < 50; ++step) {
        ValueNet::Grads grads(v);
        loss_with_grads(ptrs, v, target, 0.0, 1.0, 10'000, grads);
        auto params = v.parameters();
        auto flat = ValueNet::flatten(grads);
        adam.step(params, flat);
        double cur = mean_gap();
        CHECK(cur <= prev + 1e-9);
        prev = cur;
    }
    CHECK(prev < first);
}
