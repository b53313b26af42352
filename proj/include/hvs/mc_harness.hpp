#ifndef HVS_MC_HARNESS_HPP
#define HVS_MC_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hvs/datagen.hpp"
#include "hvs/design.hpp"
#include "hvs/error.hpp"
#include "hvs/estimators.hpp"
#include "hvs/inclusion.hpp"

namespace hvs {

/// Supplies the population sampled at grid point n.
using PopulationSource = std::function<Population(int n)>;

/// Regenerates the recipe with N = round(n / fraction) at every grid point.
inline PopulationSource recipe_source(PopulationConfig base, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw Error(ErrorKind::InfeasibleGrid, "sampling fraction must lie in (0,1)");
    return [base, fraction](int n) {
        PopulationConfig cfg = base;
        cfg.population_size = static_cast<std::size_t>(std::llround(n / fraction));
        return generate_population(cfg);
    };
}

inline PopulationSource fixed_source(Population pop) {
    return [pop = std::move(pop)](int) { return pop; };
}

struct Scenario {
    PopulationSource population;
    std::vector<int> n_grid;
    int replicates = 10000;  // B
    std::vector<EstimatorKind> estimators{EstimatorKind::HT, EstimatorKind::CHT};
    std::vector<int> variables{0, 1, 2, 3};
    Variant variant = Variant::Sequential;
    std::uint64_t master_seed = 1;
    bool keep_replicates = false;
    bool track_inclusion = false;
    unsigned threads = 1;
};

struct McCell {
    int n = 0;
    int variable = 0;
    EstimatorKind estimator = EstimatorKind::HT;
    double mean_estimate = 0.0;  // average of the B mean estimates
    double v_mc = 0.0;
    std::optional<double> rv_mc;
    std::vector<double> replicate_values;  // only with keep_replicates
};

struct McReport {
    std::vector<McCell> cells;
    /// Per grid point, empirical inclusion frequency of each unit (caller space).
    std::map<int, std::vector<double>> inclusion_frequency;

    const McCell* find(int n, int variable, EstimatorKind est) const {
        for (const auto& c : cells) {
            if (c.n == n && c.variable == variable && c.estimator == est) return &c;
        }
        return nullptr;
    }
};

/// Replicate b at grid point n draws from this stream; adding grid points or
/// replicates never perturbs existing ones.
constexpr std::uint64_t replicate_stream(int n, std::uint64_t b) noexcept {
    return (static_cast<std::uint64_t>(n) << 32) | (b & 0xFFFFFFFFull);
}

namespace detail {

/// Welford accumulator; `merge` is Chan's pairwise update.
struct RunningMoments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double v) noexcept {
        count += 1.0;
        const double d = v - mean;
        mean += d / count;
        m2 += d * (v - mean);
    }
    void merge(const RunningMoments& o) noexcept {
        if (o.count == 0.0) return;
        if (count == 0.0) {
            *this = o;
            return;
        }
        const double total = count + o.count;
        const double d = o.mean - mean;
        mean += d * o.count / total;
        m2 += o.m2 + d * d * count * o.count / total;
        count = total;
    }
};

inline constexpr int kChunk = 256;

}  // namespace detail

inline McReport run_scenario(const Scenario& sc) {
    if (sc.replicates < 2) throw Error(ErrorKind::InvalidInput, "B must be at least 2");
    if (sc.n_grid.empty()) throw Error(ErrorKind::InfeasibleGrid, "empty n grid");
    for (int v : sc.variables) {
        if (v < 0 || v > 3) throw Error(ErrorKind::InvalidInput, "variable index " + std::to_string(v));
    }
    const std::size_t nvar = sc.variables.size();
    const std::size_t nest = sc.estimators.size();
    const std::size_t width = nvar * nest;

    McReport report;
    for (std::size_t g = 0; g < sc.n_grid.size(); ++g) {
        const int n = sc.n_grid[g];
        const Population pop = sc.population(n);
        if (n < 1 || static_cast<std::size_t>(n) >= pop.size()) {
            throw Error(ErrorKind::InfeasibleGrid, "n = " + std::to_string(n) + " with N = " + std::to_string(pop.size()));
        }
        const DesignSpec design = pps_probabilities(pop.x, n);
        const std::size_t N = pop.size();
        const double inv_n = 1.0 / static_cast<double>(N);

        const int B = sc.replicates;
        const int chunks = (B + detail::kChunk - 1) / detail::kChunk;
        std::vector<std::vector<detail::RunningMoments>> partial(chunks, std::vector<detail::RunningMoments>(width));
        std::vector<std::vector<double>> stored(sc.keep_replicates ? width : 0, std::vector<double>(B));
        std::vector<std::vector<std::uint32_t>> hits(sc.track_inclusion ? chunks : 0);

        std::atomic<int> next{0};
        auto worker = [&] {
            for (int c = next++; c < chunks; c = next++) {
                auto& acc = partial[c];
                if (sc.track_inclusion) hits[c].assign(N, 0);
                const int end = std::min(B, (c + 1) * detail::kChunk);
                for (int b = c * detail::kChunk; b < end; ++b) {
                    RngStream rng(sc.master_seed, replicate_stream(n, static_cast<std::uint64_t>(b)));
                    const SampleSelection sel = hv_sample(design, rng, sc.variant);
                    if (sc.track_inclusion) {
                        for (std::size_t u : sel.units_original) ++hits[c][u];
                    }
                    for (std::size_t v = 0; v < nvar; ++v) {
                        const auto& y = pop.y[sc.variables[v]];
                        for (std::size_t e = 0; e < nest; ++e) {
                            const double total = sc.estimators[e] == EstimatorKind::HT ? ht_total(sel, y, design).total
                                                                                       : cht_total(sel, y, design).total;
                            const double mu = total * inv_n;
                            acc[v * nest + e].push(mu);
                            if (sc.keep_replicates) stored[v * nest + e][b] = mu;
                        }
                    }
                }
            }
        };
        const unsigned nthreads = std::max(1u, std::min<unsigned>(sc.threads, static_cast<unsigned>(chunks)));
        if (nthreads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
            for (auto& th : pool) th.join();
        }

        for (std::size_t v = 0; v < nvar; ++v) {
            for (std::size_t e = 0; e < nest; ++e) {
                detail::RunningMoments total;
                for (int c = 0; c < chunks; ++c) total.merge(partial[c][v * nest + e]);
                McCell cell;
                cell.n = n;
                cell.variable = sc.variables[v];
                cell.estimator = sc.estimators[e];
                cell.mean_estimate = total.mean;
                cell.v_mc = total.m2 / total.count;
                if (g > 0) {
                    const McCell* prev = report.find(sc.n_grid[g - 1], cell.variable, cell.estimator);
                    if (prev && prev->v_mc > 0.0) cell.rv_mc = cell.v_mc / prev->v_mc;
                }
                if (sc.keep_replicates) cell.replicate_values = std::move(stored[v * nest + e]);
                report.cells.push_back(std::move(cell));
            }
        }
        if (sc.track_inclusion) {
            std::vector<double> freq(N, 0.0);
            for (const auto& h : hits) {
                for (std::size_t u = 0; u < N; ++u) freq[u] += h[u];
            }
            for (double& f : freq) f /= B;
            report.inclusion_frequency[n] = std::move(freq);
        }
    }
    return report;
}

struct InclusionCheckRow {
    std::size_t unit = 0;  // caller index
    double pi = 0.0;
    double freq = 0.0;
    double z_score = 0.0;
    bool flagged = false;  // |z| > 4
};

/// Compares empirical inclusion frequencies with the target probabilities.
/// With `exact` set the frequencies come from the enumerated law instead of
/// sampling (small designs only).
inline std::vector<InclusionCheckRow> empirical_inclusion_check(const DesignSpec& design, int replicates,
                                                                std::uint64_t seed, Variant variant,
                                                                bool exact = false) {
    const std::size_t N = design.population_size();
    std::vector<double> freq(N, 0.0);
    if (exact) {
        const JointMatrix m = moments_from_distribution(enumerate_distribution(design, variant));
        for (std::size_t k = 0; k < N; ++k) freq[design.perm()[k]] = m(k, k);
    } else {
        for (double p : design.pi()) {
            if (p * (1.0 - p) * replicates < 25.0) {
                throw Error(ErrorKind::TooFewReplicates,
                            "B = " + std::to_string(replicates) + " gives min pi(1-pi)B below 25");
            }
        }
        std::vector<std::uint64_t> hits(N, 0);
        for (int b = 0; b < replicates; ++b) {
            RngStream rng(seed, static_cast<std::uint64_t>(b));
            const auto sel = hv_sample(design, rng, variant);
            for (std::size_t u : sel.units_original) ++hits[u];
        }
        for (std::size_t u = 0; u < N; ++u) freq[u] = static_cast<double>(hits[u]) / replicates;
    }
    std::vector<InclusionCheckRow> rows(N);
    for (std::size_t u = 0; u < N; ++u) {
        const double p = design.pi()[design.rank()[u]];
        rows[u].unit = u;
        rows[u].pi = p;
        rows[u].freq = freq[u];
        rows[u].z_score = exact ? 0.0 : (freq[u] - p) * std::sqrt(replicates / (p * (1.0 - p)));
        rows[u].flagged = std::abs(rows[u].z_score) > 4.0;
    }
    return rows;
}

}  // namespace hvs

#endif  // HVS_MC_HARNESS_HPP
