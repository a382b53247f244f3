#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "watter/routing.hpp"

using namespace watter;

namespace {

// Asserts the three feasibility constraints directly on a returned plan.
void check_constraints(std::span<const Order> members, const RoutePlan& plan, TimeMs now, int capacity) {
    std::map<OrderId, int> pick_pos, drop_pos;
    for (int i = 0; i < static_cast<int>(plan.stops.size()); ++i) {
        const StopTag& t = plan.stops[static_cast<std::size_t>(i)];
        (t.is_dropoff ? drop_pos : pick_pos)[t.order] = i;
    }
    int onboard = 0, peak = 0;
    for (const StopTag& t : plan.stops) {
        const Order* o = nullptr;
        for (const Order& m : members)
            if (m.id == t.order) o = &m;
        onboard += t.is_dropoff ? -o->riders : o->riders;
        peak = std::max(peak, onboard);
    }
    REQUIRE(peak <= capacity);
    for (const Order& o : members) {
        REQUIRE(pick_pos.count(o.id) == 1);
        REQUIRE(drop_pos.count(o.id) == 1);
        REQUIRE(pick_pos[o.id] < drop_pos[o.id]);
        REQUIRE(now + plan.subroute_of(o.id) < o.deadline);
    }
}

}  // namespace

TEST_CASE("singleton groups ride the direct route") {
    auto model = TravelModel::geodesic(10.0);
    Rng rng(31);
    auto box = wtest::test_city_box();
    Order o = wtest::random_order(rng, model, 0, box, 0, 1000);
    auto plan = plan_best_route(std::span(&o, 1), model, o.release, std::nullopt, 2);
    REQUIRE(plan.has_value());
    CHECK(plan->total == o.direct);
    CHECK(plan->detour_of(o.id) == 0);
    CHECK(plan->stops.size() == 2);
    CHECK_FALSE(plan->stops[0].is_dropoff);
    CHECK(plan->stops[1].is_dropoff);
}

TEST_CASE("canonical scenario pair routes") {
    auto model = wtest::example1_model();
    auto orders = wtest::example1_orders(model);

    std::vector<Order> g13 = {orders[0], orders[2]};
    auto plan13 = plan_best_route(g13, model, 10'000, std::nullopt, 2);
    REQUIRE(plan13.has_value());
    CHECK(plan13->total == 180'000);  // d, a, c

    std::vector<Order> g24 = {orders[1], orders[3]};
    auto plan24 = plan_best_route(g24, model, 12'000, std::nullopt, 2);
    REQUIRE(plan24.has_value());
    CHECK(plan24->total == 120'000);  // d, e, f

    CHECK(plan13->total + plan24->total == 300'000);  // five minutes of worker travel
}

TEST_CASE("matches the exhaustive permutation oracle") {
    auto model = TravelModel::geodesic(10.0);
    auto box = wtest::test_city_box();
    Rng rng(101);
    int feasible = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        int k = static_cast<int>(rng.next_int(2, 3));
        std::vector<Order> members;
        TimeMs now = rng.next_int(0, 600'000);
        for (OrderId i = 0; i < k; ++i)
            members.push_back(wtest::random_order(rng, model, i, box, std::max<TimeMs>(0, now - 120'000), now));
        int capacity = static_cast<int>(rng.next_int(2, 3));

        auto got = plan_best_route(members, model, now, std::nullopt, capacity);
        auto want = wtest::oracle_best_route(members, model, now, capacity);
        REQUIRE(got.has_value() == want.has_value());
        if (!got) continue;
        ++feasible;
        REQUIRE(got->total == want->total);
        check_constraints(members, *got, now, capacity);
        for (const Order& o : members) REQUIRE(got->subroute_of(o.id) == want->subroute.at(o.id));
    }
    CHECK(feasible > 100);  // the workload must actually exercise feasible groups
}

TEST_CASE("oversized groups are rejected") {
    auto model = TravelModel::geodesic(10.0);
    Rng rng(3);
    auto box = wtest::test_city_box();
    std::vector<Order> members;
    for (OrderId i = 0; i < 6; ++i) members.push_back(wtest::random_order(rng, model, i, box, 0, 0));
    CHECK_THROWS_AS(plan_best_route(members, model, 0, std::nullopt, 6), std::invalid_argument);
}

TEST_CASE("group expiry is the minimum member slack") {
    auto model = TravelModel::geodesic(10.0);
    Location p = Location::at(0.0, 0.0), d = Location::at(0.05394, 0.0);

    SECTION("singleton with 360 s of slack") {
        DurMs direct = model.cost(p, d);
        Order o = Order::make(0, p, d, 1, 0, direct + 360'000, 0, direct);
        auto plan = plan_best_route(std::span(&o, 1), model, 0, std::nullopt, 2);
        REQUIRE(plan.has_value());
        CHECK(group_expiry(std::span(&o, 1), *plan, 0) == 360'000);
    }

    SECTION("matches per-member recomputation") {
        Rng rng(77);
        auto box = wtest::test_city_box();
        for (int trial = 0; trial < 200; ++trial) {
            int k = static_cast<int>(rng.next_int(1, 3));
            std::vector<Order> members;
            TimeMs now = rng.next_int(0, 60'000);
            for (OrderId i = 0; i < k; ++i) members.push_back(wtest::random_order(rng, model, i, box, 0, now));
            auto plan = plan_best_route(members, model, now, std::nullopt, 3);
            if (!plan) continue;
            TimeMs want = kNeverMs;
            for (const Order& o : members)
                want = std::min(want, now + (o.deadline - o.release - plan->subroute_of(o.id) - (now - o.release)));
            CHECK(group_expiry(members, *plan, now) == want);
            CHECK(group_expiry(members, *plan, now) > now);  // plan was feasible at `now`
        }
    }
}

TEST_CASE("average extra time") {
    auto model = wtest::example1_model();
    auto orders = wtest::example1_orders(model);

    SECTION("singleton dispatched at release has none") {
        std::vector<Order> g = {orders[0]};
        auto plan = plan_best_route(g, model, orders[0].release, std::nullopt, 2);
        REQUIRE(plan.has_value());
        CHECK(average_extra_time(g, *plan, orders[0].release, 1.0, 1.0) == 0.0);
    }

    SECTION("mean of member extras") {
        // detours 60 s and 0 at dispatch time 10 s: responses 5 s and 0
        std::vector<Order> g = {orders[0], orders[2]};
        auto plan = plan_best_route(g, model, 10'000, std::nullopt, 2);
        REQUIRE(plan.has_value());
        CHECK(plan->detour_of(0) == 60'000);
        CHECK(plan->detour_of(2) == 0);
        CHECK(average_extra_time(g, *plan, 10'000, 1.0, 1.0) == Catch::Approx(32'500.0));
    }

    SECTION("non-decreasing in the decision instant") {
        Rng rng(13);
        auto geo = TravelModel::geodesic(10.0);
        auto box = wtest::test_city_box();
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<Order> members;
            TimeMs now = rng.next_int(0, 600'000);
            int k = static_cast<int>(rng.next_int(1, 3));
            for (OrderId i = 0; i < k; ++i)
                members.push_back(wtest::random_order(rng, geo, i, box, std::max<TimeMs>(0, now - 60'000), now));
            auto plan = plan_best_route(members, geo, now, std::nullopt, 3);
            if (!plan) continue;
            double a = average_extra_time(members, *plan, now, 1.0, 1.0);
            double b = average_extra_time(members, *plan, now + rng.next_int(1, 60'000), 1.0, 1.0);
            CHECK(a <= b);
        }
    }
}

TEST_CASE("pair expiry covers every feasible interleaving") {
    auto model = TravelModel::geodesic(10.0);
    auto box = wtest::test_city_box();
    Rng rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        TimeMs now = rng.next_int(0, 100'000);
        std::vector<Order> pair = {wtest::random_order(rng, model, 0, box, 0, now),
                                   wtest::random_order(rng, model, 1, box, 0, now)};
        auto plan = plan_best_route(pair, model, now, std::nullopt, 2);
        auto expiry = pair_latest_expiry(pair, model, now, 2);
        REQUIRE(plan.has_value() == expiry.has_value());
        if (!plan) continue;
        CHECK(*expiry >= group_expiry(pair, *plan, now));
    }
}
