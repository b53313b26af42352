#ifndef HVS_INCLUSION_HPP
#define HVS_INCLUSION_HPP

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hvs/design.hpp"
#include "hvs/error.hpp"

namespace hvs {

/// Symmetric N x N matrix of inclusion probabilities in sorted space.
/// The diagonal holds first-order probabilities.
class JointMatrix {
public:
    enum class Kind { Conditional, Unconditional };

    JointMatrix(std::size_t size, Kind kind, int sample_size)
        : size_(size), kind_(kind), sample_size_(sample_size), values_(size * size, 0.0) {}

    std::size_t size() const noexcept { return size_; }
    Kind kind() const noexcept { return kind_; }
    /// n' for a conditional matrix, n otherwise.
    int sample_size() const noexcept { return sample_size_; }

    double operator()(std::size_t k, std::size_t l) const noexcept { return values_[k * size_ + l]; }
    void set(std::size_t k, std::size_t l, double v) noexcept {
        values_[k * size_ + l] = v;
        values_[l * size_ + k] = v;
    }
    void add(std::size_t k, std::size_t l, double v) noexcept {
        values_[k * size_ + l] += v;
        if (k != l) values_[l * size_ + k] += v;
    }

private:
    std::size_t size_;
    Kind kind_;
    int sample_size_;
    std::vector<double> values_;
};

/// Closed-form second-order probabilities of Phase 2 given pi(0). The 1 - P_k
/// factors are carried as a running product, so the cost is O(N'^2).
inline JointMatrix conditional_joint(const SplitOutcome& split) {
    const std::size_t N = split.pi0.size();
    const std::size_t n_big = split.n_big;
    const int m = split.n_prime;
    const auto& pi0 = split.pi0;
    JointMatrix joint(N, JointMatrix::Kind::Conditional, m);

    for (std::size_t k = 0; k < N; ++k) joint.set(k, k, pi0[k]);

    double survive = 1.0;  // (1 - P_1(0)) ... (1 - P_{k-1}(0))
    const double pair_scale = static_cast<double>(m) * (m - 1);
    for (std::size_t k = 0; k + 1 < n_big; ++k) {
        const double rest = split.mass_after(k);
        if (!(rest > 0.0)) {
            throw Error(ErrorKind::DivideByZero, "n' - pi^+_k(0) vanishes at unit " + std::to_string(k + 1));
        }
        const double big_p = pi0[k] / rest;
        const double lead = pair_scale * survive * big_p;
        for (std::size_t l = k + 1; l < n_big; ++l) joint.set(k, l, lead * pi0[l] / m);
        survive *= 1.0 - big_p;
    }
    for (std::size_t k = 0; k < n_big; ++k) {
        for (std::size_t l = n_big; l < N; ++l) joint.set(k, l, pi0[k]);
    }
    for (std::size_t k = n_big; k < N; ++k) {
        for (std::size_t l = k + 1; l < N; ++l) joint.set(k, l, 1.0);
    }
    return joint;
}

/// Unconditional second-order probabilities: the conditional matrices
/// averaged over the law of n', summed in ascending n'.
inline JointMatrix unconditional_joint(const DesignSpec& design) {
    const std::size_t N = design.population_size();
    const auto delta = phase1_deltas(design);
    JointMatrix joint(N, JointMatrix::Kind::Unconditional, design.sample_size());
    for (int i = 1; i <= design.sample_size(); ++i) {
        const double w = delta[i - 1];
        if (w == 0.0) continue;
        const JointMatrix cond = conditional_joint(split_probabilities(design, i));
        for (std::size_t k = 0; k < N; ++k) {
            for (std::size_t l = k + 1; l < N; ++l) joint.add(k, l, w * cond(k, l));
        }
    }
    for (std::size_t k = 0; k < N; ++k) joint.set(k, k, design.pi()[k]);
    return joint;
}

/// Exact law of the sample, keyed by ascending sorted-space unit sets.
struct ExactDistribution {
    std::size_t population_size = 0;
    int sample_size = 0;
    std::optional<int> n_prime;  // set when conditioned on a split
    std::map<std::vector<std::size_t>, double> entries;
};

inline constexpr std::size_t kDefaultMaxEnumerationSize = 12;

namespace detail {

// The oracle evaluates the branch probabilities in their textbook form
// (n' - pi^+(0) from prefix sums, unnormalized window weights rescaled by
// n' / (n' - pi^+_{i_{j-1}}(0))) so that it shares no arithmetic path with
// the samplers.

inline double remaining_by_prefix(const SplitOutcome& s, std::size_t upto_exclusive) {
    return s.n_prime - (upto_exclusive == 0 ? 0.0 : s.cum0[upto_exclusive - 1]);
}

inline void enumerate_sequential(const SplitOutcome& s, std::size_t t, int needed, double prob,
                                 std::vector<std::size_t>& chosen,
                                 std::map<std::vector<std::size_t>, double>& out) {
    const std::size_t n_big = s.n_big;
    auto emit = [&](std::vector<std::size_t> set) {
        for (std::size_t k = n_big; k < s.pi0.size(); ++k) set.push_back(k);
        out[set] += prob;
    };
    if (needed == 0) {
        emit(chosen);
        return;
    }
    if (static_cast<std::size_t>(needed) == n_big - t) {
        auto set = chosen;
        for (std::size_t k = t; k < n_big; ++k) set.push_back(k);
        emit(std::move(set));
        return;
    }
    double p = needed * s.pi0[t] / remaining_by_prefix(s, t);
    p = std::clamp(p, 0.0, 1.0);
    if (p > 0.0) {
        chosen.push_back(t);
        enumerate_sequential(s, t + 1, needed - 1, prob * p, chosen, out);
        chosen.pop_back();
    }
    if (p < 1.0) enumerate_sequential(s, t + 1, needed, prob * (1.0 - p), chosen, out);
}

inline void enumerate_draws(const SplitOutcome& s, int j, std::size_t lo, double prob,
                            std::vector<std::size_t>& chosen,
                            std::map<std::vector<std::size_t>, double>& out) {
    const int m = s.n_prime;
    if (j > m) {
        auto set = chosen;
        for (std::size_t k = s.n_big; k < s.pi0.size(); ++k) set.push_back(k);
        out[set] += prob;
        return;
    }
    const std::size_t hi = s.n_big - m + j - 1;
    const double rescale = m / remaining_by_prefix(s, lo);
    double product = 1.0;
    for (std::size_t k = lo; k <= hi; ++k) {
        const double a = product * (m - j + 1) / static_cast<double>(m) * s.pi0[k];
        const double p = rescale * a;
        if (p > 0.0) {
            chosen.push_back(k);
            enumerate_draws(s, j + 1, k + 1, prob * p, chosen, out);
            chosen.pop_back();
        }
        product *= 1.0 - (m - j) * s.pi0[k] / remaining_by_prefix(s, k + 1);
    }
}

}  // namespace detail

/// Exact law of the sample conditional on a given split.
inline ExactDistribution enumerate_conditional(const SplitOutcome& split, Variant variant,
                                               std::size_t max_size = kDefaultMaxEnumerationSize) {
    const std::size_t N = split.pi0.size();
    if (N > max_size) {
        throw Error(ErrorKind::TooLarge, "N = " + std::to_string(N) + " exceeds enumeration cap " + std::to_string(max_size));
    }
    ExactDistribution dist;
    dist.population_size = N;
    dist.sample_size = static_cast<int>(N - split.n_big) + split.n_prime;
    dist.n_prime = split.n_prime;
    std::vector<std::size_t> chosen;
    if (variant == Variant::Sequential) {
        detail::enumerate_sequential(split, 0, split.n_prime, 1.0, chosen, dist.entries);
    } else {
        detail::enumerate_draws(split, 1, 0, 1.0, chosen, dist.entries);
    }
    return dist;
}

/// Exact law of the sample: every n' outcome times every Phase-2 branch.
inline ExactDistribution enumerate_distribution(const DesignSpec& design, Variant variant,
                                                std::size_t max_size = kDefaultMaxEnumerationSize) {
    const std::size_t N = design.population_size();
    if (N > max_size) {
        throw Error(ErrorKind::TooLarge, "N = " + std::to_string(N) + " exceeds enumeration cap " + std::to_string(max_size));
    }
    ExactDistribution dist;
    dist.population_size = N;
    dist.sample_size = design.sample_size();
    const auto delta = phase1_deltas(design);
    for (int i = 1; i <= design.sample_size(); ++i) {
        if (delta[i - 1] == 0.0) continue;
        const auto cond = enumerate_conditional(split_probabilities(design, i), variant, max_size);
        for (const auto& [set, p] : cond.entries) dist.entries[set] += delta[i - 1] * p;
    }
    return dist;
}

/// First- and second-order moments of the indicators under `dist`.
inline JointMatrix moments_from_distribution(const ExactDistribution& dist) {
    JointMatrix joint(dist.population_size,
                      dist.n_prime ? JointMatrix::Kind::Conditional : JointMatrix::Kind::Unconditional,
                      dist.n_prime.value_or(dist.sample_size));
    for (const auto& [set, p] : dist.entries) {
        for (std::size_t a = 0; a < set.size(); ++a) {
            joint.add(set[a], set[a], p);
            for (std::size_t b = a + 1; b < set.size(); ++b) joint.add(set[a], set[b], p);
        }
    }
    return joint;
}

/// Total-variation distance between two sample laws.
inline double total_variation(const ExactDistribution& a, const ExactDistribution& b) {
    double sum = 0.0;
    for (const auto& [set, p] : a.entries) {
        auto it = b.entries.find(set);
        sum += std::abs(p - (it == b.entries.end() ? 0.0 : it->second));
    }
    for (const auto& [set, p] : b.entries) {
        if (!a.entries.contains(set)) sum += std::abs(p);
    }
    return 0.5 * sum;
}

}  // namespace hvs

#endif  // HVS_INCLUSION_HPP
