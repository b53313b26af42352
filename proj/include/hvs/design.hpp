#ifndef HVS_DESIGN_HPP
#define HVS_DESIGN_HPP

// Hanurav-Vijayan fixed-size unequal probability sampling.
//
// All positions below are zero-based indices into the ascending ("sorted")
// ordering of the inclusion probabilities. DesignSpec::perm maps them back to
// the caller's indexing.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hvs/error.hpp"
#include "hvs/rng.hpp"

namespace hvs {

enum class Variant { DrawByDraw, Sequential };

inline constexpr double kSizeTolerance = 1e-9;
inline constexpr double kWeightTolerance = 1e-12;

/// Validated first-order inclusion probabilities in ascending order.
class DesignSpec {
public:
    std::size_t population_size() const noexcept { return pi_.size(); }
    int sample_size() const noexcept { return n_; }
    const std::vector<double>& pi() const noexcept { return pi_; }
    /// Inclusive prefix sums: cum()[l] = pi()[0] + ... + pi()[l].
    const std::vector<double>& cum() const noexcept { return cum_; }
    /// Sorted position -> caller index.
    const std::vector<std::size_t>& perm() const noexcept { return perm_; }
    /// Caller index -> sorted position.
    const std::vector<std::size_t>& rank() const noexcept { return rank_; }

    /// pi_{N-n}^+ : total mass of the N - n smallest units.
    double lower_mass() const noexcept { return cum_[pi_.size() - n_ - 1]; }
    /// pi_{N-n+1} : smallest of the n largest probabilities.
    double pivot() const noexcept { return pi_[pi_.size() - n_]; }
    /// Gap pi_{N-n+i+1} - pi_{N-n+i} for i in 1..n, with pi_{N+1} = 1.
    double top_gap(int i) const noexcept {
        const std::size_t lo = pi_.size() - n_ + i - 1;
        const double hi = lo + 1 < pi_.size() ? pi_[lo + 1] : 1.0;
        return hi - pi_[lo];
    }

    friend DesignSpec validate_design(std::span<const double> pi_raw);

private:
    std::vector<double> pi_;
    int n_ = 0;
    std::vector<std::size_t> perm_;
    std::vector<std::size_t> rank_;
    std::vector<double> cum_;
};

/// Sorts, checks and indexes a vector of inclusion probabilities.
inline DesignSpec validate_design(std::span<const double> pi_raw) {
    if (pi_raw.empty()) throw Error(ErrorKind::DegenerateSize, "empty design");
    for (std::size_t k = 0; k < pi_raw.size(); ++k) {
        const double p = pi_raw[k];
        if (!(p > 0.0 && p < 1.0)) {
            throw Error(ErrorKind::NonProbability, "unit " + std::to_string(k + 1), k);
        }
    }
    const double total = std::accumulate(pi_raw.begin(), pi_raw.end(), 0.0);
    const double rounded = std::round(total);
    if (std::abs(total - rounded) > kSizeTolerance) {
        throw Error(ErrorKind::NonIntegerSize, "sum of probabilities is " + std::to_string(total));
    }
    if (rounded < 1.0 || rounded >= static_cast<double>(pi_raw.size())) {
        throw Error(ErrorKind::DegenerateSize,
                    "n = " + std::to_string(static_cast<long long>(rounded)) +
                        " with N = " + std::to_string(pi_raw.size()));
    }

    DesignSpec d;
    const std::size_t N = pi_raw.size();
    d.n_ = static_cast<int>(rounded);
    d.perm_.resize(N);
    std::iota(d.perm_.begin(), d.perm_.end(), std::size_t{0});
    std::stable_sort(d.perm_.begin(), d.perm_.end(),
                     [&](std::size_t a, std::size_t b) { return pi_raw[a] < pi_raw[b]; });
    d.rank_.resize(N);
    d.pi_.resize(N);
    d.cum_.resize(N);
    double running = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        d.rank_[d.perm_[k]] = k;
        d.pi_[k] = pi_raw[d.perm_[k]];
        running += d.pi_[k];
        d.cum_[k] = running;
    }
    return d;
}

/// Result of the random rounding step: n', N' and the vector pi(0).
struct SplitOutcome {
    int n_prime = 0;
    std::size_t n_big = 0;           // N' = N - (n - n')
    std::vector<double> pi0;         // length N, sorted space
    std::vector<double> cum0;        // inclusive prefix sums of pi0
    std::vector<double> tail0;       // tail0[k] = sum of pi0[k..N'-1]; length N'+1
    std::vector<double> delta;       // law of n'; empty when n' was not drawn

    /// n' - pi_k^+(0) evaluated as a suffix sum: mass strictly after k in U'.
    double mass_after(std::size_t k) const noexcept { return tail0[k + 1]; }
};

/// Law of n' over {1..n}; element i-1 holds Pr(n' = i).
inline std::vector<double> phase1_deltas(const DesignSpec& design) {
    const int n = design.sample_size();
    const double lower = design.lower_mass();
    if (!(lower > 0.0)) throw Error(ErrorKind::ZeroPrefix, "pi^+_{N-n} is zero");
    const double pivot = design.pivot();
    std::vector<double> delta(n);
    for (int i = 1; i <= n; ++i) {
        delta[i - 1] = design.top_gap(i) * (lower + i * pivot) / lower;
    }
    return delta;
}

/// Deterministic pi(0) for a given n'.
inline SplitOutcome split_probabilities(const DesignSpec& design, int n_prime) {
    const int n = design.sample_size();
    if (n_prime < 1 || n_prime > n) {
        throw Error(ErrorKind::OutOfRange, "n' = " + std::to_string(n_prime) + " outside 1.." + std::to_string(n));
    }
    const auto& pi = design.pi();
    const std::size_t N = pi.size();
    const std::size_t first_top = N - n;  // zero-based position of pi_{N-n+1}

    SplitOutcome s;
    s.n_prime = n_prime;
    s.n_big = N - (n - n_prime);
    s.pi0.resize(N);
    if (n_prime == n && pi[first_top] == pi[N - 1]) {
        s.pi0 = pi;
    } else {
        const double denom = design.lower_mass() + n_prime * design.pivot();
        const double block = n_prime * design.pivot() / denom;
        for (std::size_t k = 0; k < N; ++k) {
            if (k < first_top) {
                s.pi0[k] = n_prime * pi[k] / denom;
            } else if (k < s.n_big) {
                s.pi0[k] = block;
            } else {
                s.pi0[k] = 1.0;
            }
        }
    }
    s.cum0.resize(N);
    std::partial_sum(s.pi0.begin(), s.pi0.end(), s.cum0.begin());
    s.tail0.assign(s.n_big + 1, 0.0);
    for (std::size_t k = s.n_big; k-- > 0;) s.tail0[k] = s.tail0[k + 1] + s.pi0[k];
    return s;
}

/// Inverse-CDF draw over non-negative weights using one uniform variate.
inline std::size_t draw_categorical(std::span<const double> weights, double u) {
    double total = 0.0;
    for (double w : weights) total += w;
    const double target = u * total;
    double running = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] <= 0.0) continue;
        running += weights[k];
        last_positive = k;
        if (target < running) return k;
    }
    return last_positive;
}

inline SplitOutcome phase1_split(const DesignSpec& design, RngStream& rng) {
    auto delta = phase1_deltas(design);
    const int n_prime = static_cast<int>(draw_categorical(delta, rng.uniform())) + 1;
    SplitOutcome s = split_probabilities(design, n_prime);
    s.delta = std::move(delta);
    return s;
}

/// Fixed-size sample, with the split that produced it.
struct SampleSelection {
    std::vector<std::size_t> units_sorted;    // ascending sorted positions
    std::vector<std::size_t> units_original;  // ascending caller indices
    SplitOutcome split;
    std::vector<std::uint8_t> indicators;     // length N, sorted space
};

namespace detail {

inline SampleSelection finish_selection(const DesignSpec& design, SplitOutcome split,
                                        std::vector<std::uint8_t> indicators) {
    SampleSelection sel;
    for (std::size_t k = split.n_big; k < indicators.size(); ++k) indicators[k] = 1;
    for (std::size_t k = 0; k < indicators.size(); ++k) {
        if (indicators[k]) {
            sel.units_sorted.push_back(k);
            sel.units_original.push_back(design.perm()[k]);
        }
    }
    std::sort(sel.units_original.begin(), sel.units_original.end());
    sel.split = std::move(split);
    sel.indicators = std::move(indicators);
    return sel;
}

}  // namespace detail

/// Phase 2 by successive draws from shrinking windows of U'.
inline SampleSelection phase2_draw_by_draw(const DesignSpec& design, SplitOutcome split, RngStream& rng) {
    const int m = split.n_prime;
    const std::size_t n_big = split.n_big;
    const auto& pi0 = split.pi0;
    std::vector<std::uint8_t> ind(pi0.size(), 0);
    std::vector<double> weights;
    weights.reserve(n_big);

    std::size_t lo = 0;  // first admissible candidate, i_{j-1} + 1
    for (int j = 1; j <= m; ++j) {
        const std::size_t hi = n_big - m + j - 1;  // last admissible candidate
        std::size_t pick = lo;
        if (hi > lo) {
            weights.clear();
            double product = 1.0;
            const double scale = static_cast<double>(m - j + 1) / m;
            for (std::size_t k = lo; k <= hi; ++k) {
                weights.push_back(product * scale * pi0[k]);
                if (k == hi) break;
                const double rest = split.mass_after(k);
                if (!(rest > 0.0)) throw Error(ErrorKind::NumericalUnderflow, "no remaining mass after unit " + std::to_string(k + 1));
                double factor = 1.0 - (m - j) * pi0[k] / rest;
                if (factor < 0.0) {
                    if (factor < -kWeightTolerance) {
                        throw Error(ErrorKind::NumericalUnderflow,
                                    "negative weight factor at unit " + std::to_string(k + 1));
                    }
                    factor = 0.0;
                }
                product *= factor;
            }
            pick = lo + draw_categorical(weights, rng.uniform());
        }
        ind[pick] = 1;
        lo = pick + 1;
    }
    return detail::finish_selection(design, std::move(split), std::move(ind));
}

/// Acceptance probability of the sequential scan at position t given that
/// `needed` units of U' are still to be selected.
inline double sequential_acceptance(const SplitOutcome& split, std::size_t t, int needed) {
    const double p = needed * split.pi0[t] / split.tail0[t];
    if (p > 1.0 + kWeightTolerance) {
        throw Error(ErrorKind::ProbabilityOverflow, "updated probability " + std::to_string(p) +
                                                        " at unit " + std::to_string(t + 1));
    }
    return std::min(p, 1.0);
}

/// Phase 2 as a single sequential (Sunter-type) scan over U'.
inline SampleSelection phase2_sequential(const DesignSpec& design, SplitOutcome split, RngStream& rng) {
    const std::size_t n_big = split.n_big;
    std::vector<std::uint8_t> ind(split.pi0.size(), 0);
    int needed = split.n_prime;
    for (std::size_t t = 0; t < n_big && needed > 0; ++t) {
        if (static_cast<std::size_t>(needed) == n_big - t) {
            for (std::size_t k = t; k < n_big; ++k) ind[k] = 1;
            break;
        }
        if (rng.uniform() < sequential_acceptance(split, t, needed)) {
            ind[t] = 1;
            --needed;
        }
    }
    return detail::finish_selection(design, std::move(split), std::move(ind));
}

inline SampleSelection hv_sample(const DesignSpec& design, RngStream& rng, Variant variant) {
    SplitOutcome split = phase1_split(design, rng);
    return variant == Variant::Sequential ? phase2_sequential(design, std::move(split), rng)
                                          : phase2_draw_by_draw(design, std::move(split), rng);
}

inline std::string to_string(Variant v) {
    return v == Variant::Sequential ? "sequential" : "draw-by-draw";
}

}  // namespace hvs

#endif  // HVS_DESIGN_HPP
