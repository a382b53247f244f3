#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "watter/core.hpp"

namespace watter {

// Gaussian mixture over historical extra times. Unit-agnostic pure math; the
// file interfaces feed it seconds.
struct GmmModel {
    struct Component {
        double weight = 1.0;
        double mean = 0.0;
        double variance = 1.0;
    };
    std::vector<Component> components;

    int k() const { return static_cast<int>(components.size()); }

    double pdf(double x) const {
        double p = 0;
        for (const Component& c : components) {
            double z = (x - c.mean) * (x - c.mean) / c.variance;
            p += c.weight / std::sqrt(2.0 * kPi * c.variance) * std::exp(-0.5 * z);
        }
        return p;
    }

    double cdf(double x) const {
        double p = 0;
        for (const Component& c : components)
            p += c.weight * 0.5 * std::erfc(-(x - c.mean) / std::sqrt(2.0 * c.variance));
        return std::clamp(p, 0.0, 1.0);
    }

    double log_likelihood(std::span<const double> samples) const {
        double ll = 0;
        for (double x : samples) ll += std::log(std::max(pdf(x), 1e-300));
        return ll;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["k"] = k();
        auto w = nlohmann::ordered_json::array();
        auto m = nlohmann::ordered_json::array();
        auto v = nlohmann::ordered_json::array();
        for (const Component& c : components) {
            w.push_back(c.weight);
            m.push_back(c.mean);
            v.push_back(c.variance);
        }
        j["weights"] = std::move(w);
        j["means"] = std::move(m);
        j["variances"] = std::move(v);
        return j;
    }

    static GmmModel from_json(const nlohmann::ordered_json& j) {
        GmmModel model;
        auto k = j.at("k").get<std::size_t>();
        for (std::size_t i = 0; i < k; ++i)
            model.components.push_back({j.at("weights").at(i).get<double>(), j.at("means").at(i).get<double>(),
                                        j.at("variances").at(i).get<double>()});
        return model;
    }

    void save(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw std::invalid_argument("cannot write model file: " + path);
        out << to_json().dump(2) << "\n";
    }

    static GmmModel load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::invalid_argument("cannot open model file: " + path);
        nlohmann::ordered_json j;
        in >> j;
        return from_json(j);
    }

    static constexpr double kPi = 3.14159265358979323846;
};

constexpr double kVarianceFloor = 1e-4;

struct GmmFit {
    GmmModel model;
    std::vector<double> log_likelihood;  // one value per EM iteration
};

// Expectation-maximization fit with k-means++ style seeding. Iterates until
// the relative log-likelihood improvement drops below `tol` or `max_iter`
// rounds. All-identical samples collapse to a single floored component.
inline GmmFit fit_em(std::span<const double> samples, int k, double tol = 1e-8, int max_iter = 200,
                     std::uint64_t seed = 1) {
    const std::size_t n = samples.size();
    if (k < 1) throw std::invalid_argument("need at least one component");
    if (static_cast<int>(n) < k) throw std::invalid_argument("fewer samples than components");

    auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    if (*mn == *mx) {
        GmmFit fit;
        fit.model.components = {{1.0, *mn, kVarianceFloor}};
        fit.log_likelihood = {fit.model.log_likelihood(samples)};
        return fit;
    }

    // k-means++ seeding
    Rng rng(seed);
    std::vector<double> centers;
    centers.push_back(samples[rng.next_below(n)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double c : centers) best = std::min(best, (samples[i] - c) * (samples[i] - c));
            d2[i] = best;
            total += best;
        }
        if (total == 0) {
            centers.push_back(samples[rng.next_below(n)]);
            continue;
        }
        double roll = rng.next_double() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            roll -= d2[i];
            if (roll <= 0) {
                pick = i;
                break;
            }
        }
        centers.push_back(samples[pick]);
    }

    double overall_mean = 0;
    for (double x : samples) overall_mean += x;
    overall_mean /= static_cast<double>(n);
    double overall_var = 0;
    for (double x : samples) overall_var += (x - overall_mean) * (x - overall_mean);
    overall_var = std::max(overall_var / static_cast<double>(n), kVarianceFloor);

    GmmModel model;
    for (double c : centers) model.components.push_back({1.0 / k, c, overall_var});

    GmmFit fit;
    std::vector<double> resp(n * static_cast<std::size_t>(k));
    for (int iter = 0; iter < max_iter; ++iter) {
        // E-step with log-sum-exp
        double ll = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double mx_log = -std::numeric_limits<double>::infinity();
            std::vector<double> logs(static_cast<std::size_t>(k));
            for (int c = 0; c < k; ++c) {
                const auto& comp = model.components[static_cast<std::size_t>(c)];
                double z = (samples[i] - comp.mean) * (samples[i] - comp.mean) / comp.variance;
                logs[static_cast<std::size_t>(c)] =
                    std::log(comp.weight) - 0.5 * std::log(2.0 * GmmModel::kPi * comp.variance) - 0.5 * z;
                mx_log = std::max(mx_log, logs[static_cast<std::size_t>(c)]);
            }
            double sum = 0;
            for (int c = 0; c < k; ++c) sum += std::exp(logs[static_cast<std::size_t>(c)] - mx_log);
            ll += mx_log + std::log(sum);
            for (int c = 0; c < k; ++c)
                resp[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)] =
                    std::exp(logs[static_cast<std::size_t>(c)] - mx_log) / sum;
        }
        fit.log_likelihood.push_back(ll);

        // M-step
        for (int c = 0; c < k; ++c) {
            double nc = 0, mean = 0;
            for (std::size_t i = 0; i < n; ++i) {
                double r = resp[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
                nc += r;
                mean += r * samples[i];
            }
            auto& comp = model.components[static_cast<std::size_t>(c)];
            if (nc < 1e-12) {
                comp.weight = 1e-12;
                continue;
            }
            mean /= nc;
            double var = 0;
            for (std::size_t i = 0; i < n; ++i) {
                double r = resp[i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)];
                var += r * (samples[i] - mean) * (samples[i] - mean);
            }
            comp.weight = nc / static_cast<double>(n);
            comp.mean = mean;
            comp.variance = std::max(var / nc, kVarianceFloor);
        }
        double wsum = 0;
        for (const auto& comp : model.components) wsum += comp.weight;
        for (auto& comp : model.components) comp.weight /= wsum;

        if (fit.log_likelihood.size() >= 2) {
            double prev = fit.log_likelihood[fit.log_likelihood.size() - 2];
            if (std::abs(ll - prev) < tol * (1.0 + std::abs(ll))) break;
        }
    }
    fit.model = model;
    return fit;
}

inline double gmm_cdf(const GmmModel& model, double x) { return model.cdf(x); }

// Maximizer of (p - theta) * F(theta) over [0, p]: dense grid scan followed
// by golden-section refinement around the best cell. The mixture CDF can make
// the objective multimodal, so the grid does the global work and the
// refinement only polishes.
template <class Cdf>
double optimal_theta_for_cdf(Cdf&& cdf, double p, int grid_points = 4096) {
    if (p <= 0) throw std::invalid_argument("penalty must be positive");
    auto objective = [&](double theta) { return (p - theta) * cdf(theta); };

    double best_theta = 0, best_value = objective(0);
    for (int i = 1; i <= grid_points; ++i) {
        double theta = p * static_cast<double>(i) / grid_points;
        double value = objective(theta);
        if (value > best_value) {
            best_value = value;
            best_theta = theta;
        }
    }

    double lo = std::max(0.0, best_theta - p / grid_points);
    double hi = std::min(p, best_theta + p / grid_points);
    constexpr double kInvPhi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
    double fc = objective(c), fd = objective(d);
    for (int i = 0; i < 80; ++i) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kInvPhi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kInvPhi * (b - a);
            fd = objective(d);
        }
    }
    double mid = (a + b) / 2;
    return objective(mid) >= best_value ? mid : best_theta;
}

inline double optimal_theta(const GmmModel& model, double p) {
    return optimal_theta_for_cdf([&](double x) { return model.cdf(x); }, p);
}

}  // namespace watter
