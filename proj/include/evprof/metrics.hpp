#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "evprof/core.hpp"

namespace evprof {

enum class EmaeDomain { soc_indexed, time_indexed };

enum class EmaeNormalizer {
    envelope,      // sum of pointwise max(predicted, realized)
    realized_sum,  // sum of realized values (classic NMAE)
};

struct EmaeResult {
    double value = 0.0;  // percent, [0, 100]
    std::size_t n_points = 0;
    EmaeDomain domain = EmaeDomain::soc_indexed;
};

inline EmaeResult emae(std::span<const double> predicted, std::span<const double> realized,
                       EmaeDomain domain = EmaeDomain::soc_indexed,
                       EmaeNormalizer normalizer = EmaeNormalizer::envelope) {
    if (predicted.size() != realized.size()) throw DataError("EMAE series length mismatch");
    if (predicted.empty()) throw DataError("EMAE needs at least one point");
    double abs_err = 0.0;
    double denom = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double p = predicted[i];
        const double r = realized[i];
        if (p < 0.0 || r < 0.0) throw DataError("EMAE inputs must be non-negative");
        abs_err += std::abs(p - r);
        denom += normalizer == EmaeNormalizer::envelope ? std::max(p, r) : r;
    }
    EmaeResult result;
    result.n_points = predicted.size();
    result.domain = domain;
    result.value = denom == 0.0 ? 0.0 : std::min(100.0 * abs_err / denom, 100.0);
    return result;
}

// Per-unit charging time error; positive means underestimation.
inline double time_error_pu(double real_minutes, double predicted_minutes) {
    if (real_minutes <= 0.0) throw DataError("real duration must be > 0");
    return (real_minutes - predicted_minutes) / real_minutes;
}

// Per-unit scheduled energy error; positive means underestimation.
inline double energy_error_pu(double real_kwh, double scheduled_kwh) {
    if (real_kwh <= 0.0) throw DataError("real energy must be > 0");
    return (real_kwh - scheduled_kwh) / real_kwh;
}

// ---------------------------------------------------------------------------
// Box-plot statistics
// ---------------------------------------------------------------------------

// Quantile with linear interpolation between order statistics.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    const std::size_t n = sorted.size();
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    if (n == 1) return sorted[0];
    const double pos = q * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, n - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

struct DistributionSummary {
    double q1 = std::numeric_limits<double>::quiet_NaN();
    double median = std::numeric_limits<double>::quiet_NaN();
    double q3 = std::numeric_limits<double>::quiet_NaN();
    double whisker_lo = std::numeric_limits<double>::quiet_NaN();
    double whisker_hi = std::numeric_limits<double>::quiet_NaN();
    std::size_t n_outliers = 0;
    std::size_t n = 0;

    bool empty() const { return n == 0; }
    double iqr() const { return q3 - q1; }
};

// Tukey box statistics: whiskers at the most extreme samples inside
// 1.5 * IQR of the quartiles, everything outside counted as outliers.
inline DistributionSummary summarize_distribution(std::vector<double> samples) {
    DistributionSummary s;
    s.n = samples.size();
    if (samples.empty()) return s;
    std::sort(samples.begin(), samples.end());
    s.q1 = quantile_sorted(samples, 0.25);
    s.median = quantile_sorted(samples, 0.50);
    s.q3 = quantile_sorted(samples, 0.75);
    const double lo_fence = s.q1 - 1.5 * s.iqr();
    const double hi_fence = s.q3 + 1.5 * s.iqr();
    s.whisker_lo = s.q3;
    s.whisker_hi = s.q1;
    bool any_in = false;
    for (double v : samples) {
        if (v < lo_fence || v > hi_fence) {
            ++s.n_outliers;
        } else {
            if (!any_in) {
                s.whisker_lo = v;
                any_in = true;
            }
            s.whisker_hi = v;
        }
    }
    if (!any_in) {
        s.whisker_lo = s.q1;
        s.whisker_hi = s.q3;
    }
    return s;
}

// ---------------------------------------------------------------------------
// 1-D Gaussian KDE
// ---------------------------------------------------------------------------

struct KdeResult {
    std::vector<double> xs;
    std::vector<double> ys;
    double bandwidth = 0.0;

    double dx() const { return xs.size() > 1 ? xs[1] - xs[0] : 0.0; }

    // Trapezoid integral over the grid.
    double integral() const {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < xs.size(); ++i) acc += 0.5 * (ys[i] + ys[i + 1]);
        return acc * dx();
    }
};

inline double silverman_bandwidth(std::span<const double> samples) {
    const std::size_t n = samples.size();
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    double mean = 0.0;
    for (double x : sorted) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : sorted) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    const double iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    double spread = sd;
    if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
    double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
    if (!(h > 0.0)) h = std::max(1e-3, 1e-3 * std::abs(mean));  // degenerate sample sets
    return h;
}

inline std::vector<double> kde_on_grid(std::span<const double> samples, double bandwidth,
                                       std::span<const double> grid) {
    std::vector<double> ys(grid.size(), 0.0);
    const double norm =
        1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * M_PI));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        double acc = 0.0;
        for (double x : samples) {
            const double z = (grid[g] - x) / bandwidth;
            acc += std::exp(-0.5 * z * z);
        }
        ys[g] = acc * norm;
    }
    return ys;
}

// Gaussian-kernel density on an evenly spaced grid spanning the samples plus
// four bandwidths of margin; bandwidth by Silverman's rule unless overridden.
inline KdeResult kde_1d(std::span<const double> samples, double bandwidth = 0.0) {
    if (samples.size() < 2) throw DataError("KDE needs at least 2 samples");
    for (double x : samples) {
        if (!std::isfinite(x)) throw DataError("non-finite KDE sample");
    }
    KdeResult result;
    result.bandwidth = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(samples);

    const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
    const double lo = *mn - 4.0 * result.bandwidth;
    const double hi = *mx + 4.0 * result.bandwidth;
    std::size_t n_grid = 512;
    const double fine = 8.0 * (hi - lo) / result.bandwidth;
    if (fine > static_cast<double>(n_grid)) {
        n_grid = std::min<std::size_t>(8192, static_cast<std::size_t>(fine));
    }
    result.xs.resize(n_grid);
    const double step = (hi - lo) / static_cast<double>(n_grid - 1);
    for (std::size_t i = 0; i < n_grid; ++i) result.xs[i] = lo + step * static_cast<double>(i);
    result.ys = kde_on_grid(samples, result.bandwidth, result.xs);
    return result;
}

// Total-variation distance between two sample sets, via their KDEs evaluated
// on a shared grid.
inline double kde_total_variation(std::span<const double> a, std::span<const double> b) {
    const double ha = silverman_bandwidth(a);
    const double hb = silverman_bandwidth(b);
    const auto [a_mn, a_mx] = std::minmax_element(a.begin(), a.end());
    const auto [b_mn, b_mx] = std::minmax_element(b.begin(), b.end());
    const double lo = std::min(*a_mn - 4.0 * ha, *b_mn - 4.0 * hb);
    const double hi = std::max(*a_mx + 4.0 * ha, *b_mx + 4.0 * hb);
    constexpr std::size_t n_grid = 2048;
    std::vector<double> grid(n_grid);
    const double step = (hi - lo) / static_cast<double>(n_grid - 1);
    for (std::size_t i = 0; i < n_grid; ++i) grid[i] = lo + step * static_cast<double>(i);
    const auto fa = kde_on_grid(a, ha, grid);
    const auto fb = kde_on_grid(b, hb, grid);
    double tv = 0.0;
    for (std::size_t i = 0; i + 1 < n_grid; ++i) {
        tv += 0.5 * (std::abs(fa[i] - fb[i]) + std::abs(fa[i + 1] - fb[i + 1])) * 0.5;
    }
    return tv * step;
}

}  // namespace evprof
