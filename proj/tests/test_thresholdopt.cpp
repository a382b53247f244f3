#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"
#include "watter/thresholdopt.hpp"

using namespace watter;

namespace {

double box_muller(Rng& rng, double mean, double sigma) {
    double u1 = std::max(rng.next_double(), 1e-12);
    double u2 = rng.next_double();
    return mean + sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * GmmModel::kPi * u2);
}

std::vector<double> gaussian_samples(Rng& rng, double mean, double sigma, int n) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(box_muller(rng, mean, sigma));
    return out;
}

GmmModel random_model(Rng& rng, int k) {
    GmmModel m;
    double wsum = 0;
    for (int i = 0; i < k; ++i) {
        double w = rng.next_range(0.2, 1.0);
        m.components.push_back({w, rng.next_range(5.0, 400.0), rng.next_range(1.0, 900.0)});
        wsum += w;
    }
    for (auto& c : m.components) c.weight /= wsum;
    return m;
}

}  // namespace

TEST_CASE("single-component fit recovers the sample moments") {
    Rng rng(5);
    auto samples = gaussian_samples(rng, 42.0, 7.0, 2000);
    auto fit = fit_em(samples, 1, 1e-10, 50, 3);
    REQUIRE(fit.model.k() == 1);

    double mean = 0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(samples.size());
    double var = 0;
    for (double x : samples) var += (x - mean) * (x - mean);
    var /= static_cast<double>(samples.size());

    CHECK(fit.model.components[0].mean == Catch::Approx(mean).margin(1e-6));
    CHECK(fit.model.components[0].variance == Catch::Approx(var).margin(1e-4));
    CHECK(fit.model.components[0].weight == Catch::Approx(1.0));
}

TEST_CASE("two separated clusters are recovered") {
    Rng rng(11);
    auto samples = gaussian_samples(rng, 10.0, 1.0, 500);
    auto more = gaussian_samples(rng, 100.0, 1.0, 500);
    samples.insert(samples.end(), more.begin(), more.end());

    auto fit = fit_em(samples, 2, 1e-10, 200, 17);
    auto comps = fit.model.components;
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.mean < b.mean; });
    CHECK(std::abs(comps[0].mean - 10.0) < 0.5);
    CHECK(std::abs(comps[1].mean - 100.0) < 0.5);
    CHECK(std::abs(comps[0].weight - 0.5) < 0.05);
    CHECK(std::abs(comps[1].weight - 0.5) < 0.05);
}

TEST_CASE("log-likelihood never decreases across EM iterations") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        int k = static_cast<int>(rng.next_int(1, 3));
        std::vector<double> samples;
        int clusters = static_cast<int>(rng.next_int(1, 3));
        for (int c = 0; c < clusters; ++c) {
            auto part = gaussian_samples(rng, rng.next_range(5.0, 300.0), rng.next_range(0.5, 30.0),
                                         static_cast<int>(rng.next_int(40, 160)));
            samples.insert(samples.end(), part.begin(), part.end());
        }
        auto fit = fit_em(samples, k, 1e-12, 60, rng.next_u64());
        for (std::size_t i = 1; i < fit.log_likelihood.size(); ++i) {
            double prev = fit.log_likelihood[i - 1], cur = fit.log_likelihood[i];
            REQUIRE(cur >= prev - 1e-9 * (1.0 + std::abs(prev)));
        }
    }
}

TEST_CASE("degenerate and undersized sample sets") {
    std::vector<double> flat(10, 3.25);
    auto fit = fit_em(flat, 3, 1e-8, 50, 1);
    REQUIRE(fit.model.k() == 1);
    CHECK(fit.model.components[0].mean == Catch::Approx(3.25));
    CHECK(fit.model.components[0].variance == Catch::Approx(kVarianceFloor));

    std::vector<double> two = {1.0, 2.0};
    CHECK_THROWS_AS(fit_em(two, 3, 1e-8, 50, 1), std::invalid_argument);
}

TEST_CASE("mixture cdf") {
    SECTION("is one half at the mean of a single component") {
        GmmModel m;
        m.components = {{1.0, 50.0, 9.0}};
        CHECK(m.cdf(50.0) == Catch::Approx(0.5));
    }

    SECTION("approaches one in the upper tail") {
        GmmModel m;
        m.components = {{0.4, 10.0, 4.0}, {0.6, 80.0, 25.0}};
        CHECK(m.cdf(1e7) == Catch::Approx(1.0).margin(1e-9));
        CHECK(m.cdf(-1e7) == Catch::Approx(0.0).margin(1e-9));
    }

    SECTION("matches numeric integration of the density") {
        Rng rng(31);
        for (int trial = 0; trial < 20; ++trial) {
            GmmModel m = random_model(rng, static_cast<int>(rng.next_int(1, 3)));
            double lo = 1e9, hi = -1e9;
            for (const auto& c : m.components) {
                lo = std::min(lo, c.mean - 12.0 * std::sqrt(c.variance));
                hi = std::max(hi, c.mean + 12.0 * std::sqrt(c.variance));
            }
            double x = rng.next_range(lo, hi);
            // Simpson's rule over [lo, x]
            const int steps = 20000;
            double h = (x - lo) / steps;
            double integral = m.pdf(lo) + m.pdf(x);
            for (int i = 1; i < steps; ++i) integral += m.pdf(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
            integral *= h / 3.0;
            REQUIRE(m.cdf(x) == Catch::Approx(integral).margin(1e-6));
        }
    }

    SECTION("is monotone and clamped") {
        Rng rng(37);
        GmmModel m = random_model(rng, 3);
        double prev = -0.1;
        for (double x = -100.0; x <= 900.0; x += 3.7) {
            double v = m.cdf(x);
            REQUIRE(v >= prev);
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
            prev = v;
        }
    }
}

TEST_CASE("optimal threshold") {
    SECTION("uniform cdf peaks at half the penalty") {
        double p = 360.0;
        auto uniform = [&](double x) { return std::clamp(x / p, 0.0, 1.0); };
        double theta = optimal_theta_for_cdf(uniform, p);
        CHECK(theta == Catch::Approx(p / 2).margin(1e-6 * p));
        CHECK((p - theta) * uniform(theta) == Catch::Approx(p / 4.0).margin(1e-6 * p));
    }

    SECTION("a point mass below the penalty pulls the threshold onto it") {
        GmmModel m;
        m.components = {{1.0, 120.0, kVarianceFloor}};
        double theta = optimal_theta(m, 360.0);
        CHECK(theta == Catch::Approx(120.0).margin(0.5));
        CHECK((360.0 - theta) * m.cdf(theta) == Catch::Approx(240.0).margin(1.0));
    }

    SECTION("matches a dense grid scan on random mixtures") {
        Rng rng(41);
        for (int trial = 0; trial < 30; ++trial) {
            GmmModel m = random_model(rng, 3);
            double p = rng.next_range(30.0, 800.0);
            double theta = optimal_theta(m, p);
            REQUIRE(theta >= 0.0);
            REQUIRE(theta <= p);
            double got = (p - theta) * m.cdf(theta);

            double best = 0;
            const int grid = 100'000;
            for (int i = 0; i <= grid; ++i) {
                double t = p * static_cast<double>(i) / grid;
                best = std::max(best, (p - t) * m.cdf(t));
            }
            REQUIRE(got >= best - 1e-6 * p);
            REQUIRE(got <= p);  // objective bracketing
        }
    }

    SECTION("weakly increases with the penalty") {
        Rng rng(43);
        for (int trial = 0; trial < 20; ++trial) {
            GmmModel m = random_model(rng, static_cast<int>(rng.next_int(1, 3)));
            double p1 = rng.next_range(30.0, 300.0);
            double p2 = p1 + rng.next_range(1.0, 300.0);
            CHECK(optimal_theta(m, p1) <= optimal_theta(m, p2) + 1e-6 * p2);
        }
    }
}

TEST_CASE("model files round-trip") {
    Rng rng(47);
    for (int trial = 0; trial < 20; ++trial) {
        GmmModel m = random_model(rng, static_cast<int>(rng.next_int(1, 4)));
        GmmModel back = GmmModel::from_json(m.to_json());
        REQUIRE(back.k() == m.k());
        for (int i = 0; i < m.k(); ++i) {
            auto idx = static_cast<std::size_t>(i);
            CHECK(back.components[idx].weight == m.components[idx].weight);
            CHECK(back.components[idx].mean == m.components[idx].mean);
            CHECK(back.components[idx].variance == m.components[idx].variance);
        }
    }
}
