#ifndef HVS_DATAGEN_HPP
#define HVS_DATAGEN_HPP

// Synthetic populations: an auxiliary size variable x = offset + eta and four
// study variables (linear, quadratic, exponential, bump) in x.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "hvs/design.hpp"
#include "hvs/error.hpp"
#include "hvs/rng.hpp"

namespace hvs {

enum class SizeDistribution { Gamma, LogNormal };

inline constexpr std::array<const char*, 4> kVariableNames = {"linear", "quadratic", "exponential", "bump"};

struct PopulationConfig {
    SizeDistribution size_distribution = SizeDistribution::Gamma;
    double offset = 8.0;   // alpha in x = alpha + eta
    double param1 = 4.0;   // gamma shape, or lognormal meanlog
    double param2 = 0.5;   // gamma scale, or lognormal sdlog
    std::size_t population_size = 20000;
    double target_y_mean = 20.0;
    double target_y_sd = 3.0;
    double signal_sd = 2.6;  // sd of the noiseless part of each y
    std::uint64_t seed = 1;

    static PopulationConfig gamma_recipe(std::size_t N, std::uint64_t seed) {
        return {SizeDistribution::Gamma, 8.0, 4.0, 0.5, N, 20.0, 3.0, 2.6, seed};
    }
    static PopulationConfig lognormal_recipe(std::size_t N, std::uint64_t seed) {
        return {SizeDistribution::LogNormal, 7.0, 1.0, 0.35, N, 20.0, 3.0, 2.6, seed};
    }
};

inline std::string to_string(SizeDistribution d) { return d == SizeDistribution::Gamma ? "gamma" : "lognormal"; }

/// Coefficients of one study-variable model. Unused slots stay zero.
///   linear:      a0 + a1 u + sigma eps
///   quadratic:   a0 + a1 u^2 + sigma eps
///   exponential: exp(a0 + a1 u) + sigma eps
///   bump:        a0 + a1 u^2 - a2 exp(-a3 u^2) + sigma eps
/// with u = x - mean(x).
struct ModelCoefficients {
    double a0 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double a3 = 0.0;
    double sigma = 0.0;
};

struct Population {
    std::vector<double> x;
    std::array<std::vector<double>, 4> y;
    double mu_x = 0.0;
    std::array<ModelCoefficients, 4> coefficients{};

    std::size_t size() const noexcept { return x.size(); }
};

namespace detail {

enum class StreamTag : std::uint64_t { Size = 1, Noise = 2 };

inline std::uint64_t unit_stream(StreamTag tag, std::uint64_t variable, std::uint64_t unit) {
    return (static_cast<std::uint64_t>(tag) << 60) | (variable << 56) | unit;
}

inline double standard_normal(RngStream& rng) {
    const double r = std::sqrt(-2.0 * std::log(rng.uniform_pos()));
    return r * std::cos(2.0 * std::numbers::pi * rng.uniform());
}

// Erlang sum for integral shapes, Marsaglia-Tsang otherwise.
inline double gamma_variate(RngStream& rng, double shape, double scale) {
    if (shape == std::floor(shape) && shape <= 16.0) {
        double s = 0.0;
        for (int i = 0; i < static_cast<int>(shape); ++i) s -= std::log(rng.uniform_pos());
        return scale * s;
    }
    const double boost = shape < 1.0 ? std::pow(rng.uniform_pos(), 1.0 / shape) : 1.0;
    const double a = shape < 1.0 ? shape + 1.0 : shape;
    const double d = a - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        const double z = standard_normal(rng);
        double v = 1.0 + c * z;
        if (v <= 0.0) continue;
        v = v * v * v;
        const double u = rng.uniform_pos();
        if (std::log(u) < 0.5 * z * z + d - d * v + d * std::log(v)) return scale * d * v * boost;
    }
}

struct Moments {
    double mean;
    double sd;
};

template <typename F>
Moments moments_of(std::span<const double> u, F&& f) {
    double sum = 0.0;
    for (double v : u) sum += f(v);
    const double mean = sum / static_cast<double>(u.size());
    double ss = 0.0;
    for (double v : u) {
        const double d = f(v) - mean;
        ss += d * d;
    }
    return {mean, std::sqrt(ss / static_cast<double>(u.size()))};
}

// Smallest root of an increasing function on [0, inf) by bracketing + bisection.
template <typename F>
double solve_increasing(F&& f, double target) {
    double lo = 0.0;
    double hi = 1.0;
    while (f(hi) < target) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw Error(ErrorKind::InvalidInput, "calibration did not bracket");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Draws x and the four study variables. Unit k always uses the same streams,
/// so a population of size N is a prefix of any larger one with the same seed
/// (before calibration, which depends on the whole population).
inline Population generate_population(const PopulationConfig& cfg) {
    if (cfg.population_size < 10) throw Error(ErrorKind::InvalidInput, "population size must be at least 10");
    if (!(cfg.signal_sd >= 0.0) || cfg.signal_sd > cfg.target_y_sd) {
        throw Error(ErrorKind::InvalidInput, "signal sd must lie in [0, target sd]");
    }
    const std::size_t N = cfg.population_size;
    Population pop;
    pop.x.resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        RngStream rng(cfg.seed, detail::unit_stream(detail::StreamTag::Size, 0, k));
        const double eta = cfg.size_distribution == SizeDistribution::Gamma
                               ? detail::gamma_variate(rng, cfg.param1, cfg.param2)
                               : std::exp(cfg.param1 + cfg.param2 * detail::standard_normal(rng));
        pop.x[k] = cfg.offset + eta;
    }
    double sx = 0.0;
    for (double v : pop.x) sx += v;
    pop.mu_x = sx / static_cast<double>(N);

    std::vector<double> u(N);
    for (std::size_t k = 0; k < N; ++k) u[k] = pop.x[k] - pop.mu_x;

    const double target = cfg.signal_sd;
    const double noise_sd = std::sqrt(cfg.target_y_sd * cfg.target_y_sd - target * target);
    auto& c = pop.coefficients;

    {
        const auto m = detail::moments_of(u, [](double v) { return v; });
        c[0].a1 = m.sd > 0.0 ? target / m.sd : 0.0;
        c[0].a0 = cfg.target_y_mean - c[0].a1 * m.mean;
    }
    {
        const auto m = detail::moments_of(u, [](double v) { return v * v; });
        c[1].a1 = m.sd > 0.0 ? target / m.sd : 0.0;
        c[1].a0 = cfg.target_y_mean - c[1].a1 * m.mean;
    }
    {
        // exp(a0 + a1 u) has coefficient of variation independent of a0.
        const double cv = target / cfg.target_y_mean;
        c[2].a1 = target > 0.0 ? detail::solve_increasing(
                                     [&](double a) {
                                         const auto m = detail::moments_of(u, [a](double v) { return std::exp(a * v); });
                                         return m.sd / m.mean;
                                     },
                                     cv)
                               : 0.0;
        const auto m = detail::moments_of(u, [a = c[2].a1](double v) { return std::exp(a * v); });
        c[2].a0 = std::log(cfg.target_y_mean / m.mean);
    }
    {
        c[3].a2 = 3.0;
        c[3].a3 = 1.0;
        auto bump = [&](double a) {
            return [a, &c](double v) { return a * v * v - c[3].a2 * std::exp(-c[3].a3 * v * v); };
        };
        const double floor_sd = detail::moments_of(u, bump(0.0)).sd;
        c[3].a1 = floor_sd >= target ? 0.0 : detail::solve_increasing(
                                                  [&](double a) { return detail::moments_of(u, bump(a)).sd; }, target);
        c[3].a0 = cfg.target_y_mean - detail::moments_of(u, bump(c[3].a1)).mean;
    }
    for (auto& coef : c) coef.sigma = noise_sd;

    for (std::size_t j = 0; j < 4; ++j) pop.y[j].resize(N);
    for (std::size_t k = 0; k < N; ++k) {
        const double v = u[k];
        std::array<double, 4> eps{};
        for (std::size_t j = 0; j < 4; ++j) {
            RngStream rng(cfg.seed, detail::unit_stream(detail::StreamTag::Noise, j, k));
            eps[j] = detail::standard_normal(rng);
        }
        pop.y[0][k] = c[0].a0 + c[0].a1 * v + c[0].sigma * eps[0];
        pop.y[1][k] = c[1].a0 + c[1].a1 * v * v + c[1].sigma * eps[1];
        pop.y[2][k] = std::exp(c[2].a0 + c[2].a1 * v) + c[2].sigma * eps[2];
        pop.y[3][k] = c[3].a0 + c[3].a1 * v * v - c[3].a2 * std::exp(-c[3].a3 * v * v) + c[3].sigma * eps[3];
    }
    return pop;
}

/// Inclusion probabilities proportional to x. No capping: any unit that
/// would reach probability 1 is an error.
inline DesignSpec pps_probabilities(std::span<const double> x, int n) {
    const std::size_t N = x.size();
    if (n < 1 || static_cast<std::size_t>(n) >= N) {
        throw Error(ErrorKind::DegenerateSize, "n = " + std::to_string(n) + " with N = " + std::to_string(N));
    }
    double total = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        if (!(x[k] > 0.0) || !std::isfinite(x[k])) {
            throw Error(ErrorKind::InvalidInput, "size measure of unit " + std::to_string(k + 1) + " is not positive", k);
        }
        total += x[k];
    }
    std::vector<double> pi(N);
    std::string offenders;
    std::optional<std::size_t> first;
    for (std::size_t k = 0; k < N; ++k) {
        pi[k] = n * (x[k] / total);
        if (pi[k] >= 1.0) {
            if (!first) first = k;
            if (!offenders.empty()) offenders += ",";
            offenders += std::to_string(k + 1);
        }
    }
    if (first) throw Error(ErrorKind::Saturated, "units " + offenders + " reach probability 1", first);
    return validate_design(pi);
}

}  // namespace hvs

#endif  // HVS_DATAGEN_HPP
