#ifndef HVS_DIAGNOSTICS_HPP
#define HVS_DIAGNOSTICS_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "hvs/design.hpp"
#include "hvs/error.hpp"

namespace hvs {

/// Gap statistics on the n largest inclusion probabilities, plus an
/// empirical profile of how far the design is from equal probabilities.
struct DesignProfile {
    int n = 0;
    std::size_t population_size = 0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
    double min_scaled_pi = 0.0;  // min N pi_k / n
    double max_scaled_pi = 0.0;  // max N pi_k / n
    double sampling_fraction = 0.0;
    double max_top_gap = 0.0;    // max over i = 1..n-1
};

inline DesignProfile profile_design(const DesignSpec& design) {
    const int n = design.sample_size();
    if (n < 2) throw Error(ErrorKind::TooSmall, "gap indicators need n >= 2");
    const std::size_t N = design.population_size();
    const auto& pi = design.pi();

    DesignProfile p;
    p.n = n;
    p.population_size = N;
    double weighted = 0.0;
    for (int i = 1; i <= n - 1; ++i) {
        const double gap = design.top_gap(i);
        weighted += (n - i) * gap;
        p.max_top_gap = std::max(p.max_top_gap, gap);
    }
    p.d1 = weighted / n;
    p.d2 = static_cast<double>(N) * p.max_top_gap;
    p.d3 = std::log(static_cast<double>(n)) * p.max_top_gap;
    const double scale = static_cast<double>(N) / n;
    p.min_scaled_pi = scale * pi.front();
    p.max_scaled_pi = scale * pi.back();
    p.sampling_fraction = static_cast<double>(n) / static_cast<double>(N);
    return p;
}

inline std::vector<DesignProfile> indicator_curve(const std::vector<DesignSpec>& designs) {
    std::vector<DesignProfile> rows;
    rows.reserve(designs.size());
    for (const auto& d : designs) rows.push_back(profile_design(d));
    return rows;
}

}  // namespace hvs

#endif  // HVS_DIAGNOSTICS_HPP
