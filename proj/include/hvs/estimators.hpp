#ifndef HVS_ESTIMATORS_HPP
#define HVS_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>

#include "hvs/design.hpp"
#include "hvs/error.hpp"
#include "hvs/inclusion.hpp"

namespace hvs {

enum class EstimatorKind { HT, CHT };

inline std::string to_string(EstimatorKind k) { return k == EstimatorKind::HT ? "HT" : "CHT"; }

struct EstimateResult {
    EstimatorKind kind = EstimatorKind::HT;
    double total = 0.0;
    double mean = 0.0;  // total / N
    std::optional<double> variance_estimate;
};

namespace detail {

inline void check_dimensions(std::span<const double> y, const DesignSpec& design) {
    if (y.size() != design.population_size()) {
        throw Error(ErrorKind::DimensionMismatch, "y has " + std::to_string(y.size()) + " values, design has " +
                                                      std::to_string(design.population_size()) + " units");
    }
}

inline void check_selection(const SampleSelection& sel, const DesignSpec& design) {
    if (sel.indicators.size() != design.population_size() || sel.split.pi0.size() != design.population_size()) {
        throw Error(ErrorKind::DimensionMismatch, "selection does not belong to this design");
    }
}

}  // namespace detail

/// Horvitz-Thompson total. `y` is indexed in caller space.
inline EstimateResult ht_total(const SampleSelection& sel, std::span<const double> y, const DesignSpec& design) {
    detail::check_dimensions(y, design);
    detail::check_selection(sel, design);
    double total = 0.0;
    for (std::size_t k : sel.units_sorted) total += y[design.perm()[k]] / design.pi()[k];
    return {EstimatorKind::HT, total, total / static_cast<double>(design.population_size()), std::nullopt};
}

/// Sen-Yates-Grundy estimate of the conditional variance of the CHT total.
/// Units forced into the sample by the split are excluded.
inline double syg_variance(const SampleSelection& sel, std::span<const double> y, const DesignSpec& design,
                           const JointMatrix& joint) {
    detail::check_dimensions(y, design);
    detail::check_selection(sel, design);
    if (joint.kind() != JointMatrix::Kind::Conditional || joint.size() != design.population_size()) {
        throw Error(ErrorKind::DimensionMismatch, "SYG needs the conditional joint matrix of this design");
    }
    const auto& pi0 = sel.split.pi0;
    std::vector<std::size_t> in_split;
    std::vector<double> expanded;
    for (std::size_t k : sel.units_sorted) {
        if (k >= sel.split.n_big) break;
        in_split.push_back(k);
        expanded.push_back(y[design.perm()[k]] / pi0[k]);
    }
    double v = 0.0;
    for (std::size_t a = 0; a < in_split.size(); ++a) {
        for (std::size_t b = a + 1; b < in_split.size(); ++b) {
            const std::size_t k = in_split[a];
            const std::size_t l = in_split[b];
            const double pkl = joint(k, l);
            if (!(pkl > 0.0)) {
                throw Error(ErrorKind::ZeroJoint, "pi_kl(0) = 0 for sampled units " + std::to_string(k + 1) + " and " +
                                                      std::to_string(l + 1));
            }
            const double diff = expanded[a] - expanded[b];
            v += (pi0[k] * pi0[l] - pkl) / pkl * diff * diff;
        }
    }
    return std::max(v, 0.0);
}

/// Conditional Horvitz-Thompson total, built on pi(0). The SYG variance is
/// attached on request when n' >= 2.
inline EstimateResult cht_total(const SampleSelection& sel, std::span<const double> y, const DesignSpec& design,
                                bool with_variance = false) {
    detail::check_dimensions(y, design);
    detail::check_selection(sel, design);
    const auto& pi0 = sel.split.pi0;
    double total = 0.0;
    for (std::size_t k : sel.units_sorted) {
        const double yk = y[design.perm()[k]];
        total += k < sel.split.n_big ? yk / pi0[k] : yk;
    }
    EstimateResult r{EstimatorKind::CHT, total, total / static_cast<double>(design.population_size()), std::nullopt};
    // With a single draw in U' the within-U' joint probabilities vanish and no
    // unbiased variance estimator exists.
    if (with_variance && sel.split.n_prime >= 2) {
        r.variance_estimate = syg_variance(sel, y, design, conditional_joint(sel.split));
    }
    return r;
}

/// xi(0) = sum_k (y_k / pi_k)(pi_k(0) - pi_k): the Phase-1 error of the HT total.
inline double xi0(const SplitOutcome& split, std::span<const double> y, const DesignSpec& design) {
    detail::check_dimensions(y, design);
    if (split.pi0.size() != design.population_size()) {
        throw Error(ErrorKind::DimensionMismatch, "split does not belong to this design");
    }
    double s = 0.0;
    for (std::size_t k = 0; k < split.pi0.size(); ++k) {
        s += y[design.perm()[k]] / design.pi()[k] * (split.pi0[k] - design.pi()[k]);
    }
    return s;
}

/// delta_n * Delta^2, where Delta is xi(0) at n' = n. Lower bound on V(HT).
inline double ht_variance_lower_bound(const DesignSpec& design, std::span<const double> y) {
    detail::check_dimensions(y, design);
    const std::size_t N = design.population_size();
    const int n = design.sample_size();
    const auto& pi = design.pi();
    const double denom = design.lower_mass() + n * design.pivot();
    double low_sum = 0.0;
    for (std::size_t k = 0; k < N - n; ++k) low_sum += y[design.perm()[k]];
    double delta = (n / denom - 1.0) * low_sum;
    for (std::size_t k = N - n; k < N; ++k) {
        delta += y[design.perm()[k]] * (n * design.pivot() / (pi[k] * denom) - 1.0);
    }
    const double delta_n = design.top_gap(n) * (design.lower_mass() + n * design.pivot()) / design.lower_mass();
    return delta_n * delta * delta;
}

/// E(1/n') in closed form: sum_i gap_i / i + pi_{N-n+1}(1 - pi_{N-n+1}) / pi^+_{N-n}.
inline double expected_inverse_nprime(const DesignSpec& design) {
    double s = 0.0;
    for (int i = 1; i <= design.sample_size(); ++i) s += design.top_gap(i) / i;
    const double pivot = design.pivot();
    return s + pivot * (1.0 - pivot) / design.lower_mass();
}

}  // namespace hvs

#endif  // HVS_ESTIMATORS_HPP
