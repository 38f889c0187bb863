#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "evprof/core.hpp"
#include "evprof/dataset.hpp"

namespace evprof {

struct HistoryRow {
    double capacity_kwh = 0.0;
    SocGridProfile profile;
    std::string session_id;
};

struct HistoryMatrix {
    std::vector<HistoryRow> rows;
    std::size_t skipped = 0;  // training sessions that could not be resampled
};

// One row per resampled training session; degenerate sessions are skipped
// and counted rather than aborting the build.
inline HistoryMatrix build_history_matrix(const std::vector<ChargingSession>& train) {
    if (train.empty()) throw DataError("no training sessions for the history matrix");
    HistoryMatrix matrix;
    matrix.rows.reserve(train.size());
    for (const auto& s : train) {
        try {
            matrix.rows.push_back({s.capacity_kwh, resample_to_soc_grid(s), s.session_id});
        } catch (const DataError&) {
            ++matrix.skipped;
        }
    }
    if (matrix.rows.empty()) throw DataError("every training session failed to resample");
    return matrix;
}

struct SessionHistory {
    double capacity_kwh = 0.0;
    // (soc %, power kW) at dt steps from t_a, SoC non-decreasing.
    std::vector<std::pair<double, double>> observed;
    double current_soc = 0.0;  // SoC at the refinement instant
    double soc_target = 100.0;
};

struct ProfileSlice {
    int soc_start = 0;
    std::vector<double> powers;  // one per integer SoC from soc_start
    std::string source_session_id;
    std::size_t source_row = std::numeric_limits<std::size_t>::max();

    int soc_end() const { return soc_start + static_cast<int>(powers.size()) - 1; }
};

namespace detail {

// Observations keyed by the integer-SoC grid points the EV has visited;
// consecutive minutes at the same grid point keep the first power.
inline std::vector<std::pair<int, double>> visited_grid_points(
    const std::vector<std::pair<double, double>>& observed) {
    std::vector<std::pair<int, double>> grid;
    grid.reserve(observed.size());
    for (const auto& [soc, power] : observed) {
        const int g = clamp_soc_index(static_cast<int>(std::llround(soc)));
        if (!grid.empty() && grid.back().first == g) continue;
        grid.emplace_back(g, power);
    }
    return grid;
}

}  // namespace detail

// Nearest historical row by Euclidean distance over [capacity, observed
// powers]; ties go to the lowest row index. Returns that row's profile on
// the integer SoCs in [current_soc, soc_target].
inline ProfileSlice refine(const HistoryMatrix& matrix, const SessionHistory& history,
                           bool standardize = false) {
    if (matrix.rows.empty()) throw DataError("history matrix is empty");
    if (history.observed.empty()) throw DataError("refine needs at least one observation");
    if (history.soc_target < history.current_soc) {
        throw ConfigError("soc_target below current SoC");
    }

    const auto grid_obs = detail::visited_grid_points(history.observed);
    const std::size_t dims = 1 + grid_obs.size();

    std::vector<double> query(dims);
    query[0] = history.capacity_kwh;
    for (std::size_t k = 0; k < grid_obs.size(); ++k) query[k + 1] = grid_obs[k].second;

    // Optional z-scoring of each coordinate over the matrix rows; off by
    // default to match the raw-norm formulation.
    std::vector<double> mu, sigma;
    if (standardize) {
        mu.assign(dims, 0.0);
        sigma.assign(dims, 0.0);
        for (const auto& row : matrix.rows) {
            mu[0] += row.capacity_kwh;
            for (std::size_t k = 0; k < grid_obs.size(); ++k) {
                mu[k + 1] += row.profile[grid_obs[k].first];
            }
        }
        for (double& m : mu) m /= static_cast<double>(matrix.rows.size());
        for (const auto& row : matrix.rows) {
            const double dc = row.capacity_kwh - mu[0];
            sigma[0] += dc * dc;
            for (std::size_t k = 0; k < grid_obs.size(); ++k) {
                const double d = row.profile[grid_obs[k].first] - mu[k + 1];
                sigma[k + 1] += d * d;
            }
        }
        for (double& s : sigma) {
            s = std::sqrt(s / static_cast<double>(matrix.rows.size()));
            if (s <= 0.0) s = 1.0;
        }
    }

    std::size_t best_row = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < matrix.rows.size(); ++j) {
        const auto& row = matrix.rows[j];
        double d2 = 0.0;
        {
            double d = row.capacity_kwh - query[0];
            if (standardize) d /= sigma[0];
            d2 += d * d;
        }
        for (std::size_t k = 0; k < grid_obs.size(); ++k) {
            double d = row.profile[grid_obs[k].first] - query[k + 1];
            if (standardize) d /= sigma[k + 1];
            d2 += d * d;
        }
        if (d2 < best_dist) {
            best_dist = d2;
            best_row = j;
        }
    }

    const auto& winner = matrix.rows[best_row];
    ProfileSlice slice;
    slice.soc_start = soc_ceil(history.current_soc);
    const int soc_end = std::max(slice.soc_start, soc_floor(history.soc_target));
    slice.powers = winner.profile.slice(slice.soc_start, soc_end);
    slice.source_session_id = winner.session_id;
    slice.source_row = best_row;
    return slice;
}

struct RollingStep {
    int iteration = 0;  // 0 = the unconnected prediction passed in
    ProfileSlice slice;
};

// Minute-by-minute rolling refinement: at iteration i the query holds the
// realized (SoC, P) of minutes t_a .. t_{i-1}.
inline std::vector<RollingStep> run_rolling_session(const HistoryMatrix& matrix,
                                                    const ChargingSession& session,
                                                    const SocGridProfile& unconnected_prediction,
                                                    int max_refinements,
                                                    bool standardize = false) {
    if (session.records.empty()) throw DataError("session has no records");

    std::vector<RollingStep> steps;
    const int soc_end = std::max(soc_ceil(session.soc_a), soc_floor(session.soc_d));

    RollingStep initial;
    initial.iteration = 0;
    initial.slice.soc_start = soc_ceil(session.soc_a);
    initial.slice.powers = unconnected_prediction.slice(initial.slice.soc_start, soc_end);
    initial.slice.source_session_id = "unconnected";
    steps.push_back(std::move(initial));

    const std::size_t n = session.records.size();
    const std::size_t n_updates = std::min<std::size_t>(n, static_cast<std::size_t>(
                                                               std::max(max_refinements, 0)));
    SessionHistory history;
    history.capacity_kwh = session.capacity_kwh;
    history.soc_target = session.soc_d;
    for (std::size_t i = 1; i <= n_updates; ++i) {
        history.observed.emplace_back(session.records[i - 1].soc, session.records[i - 1].power);
        history.current_soc = session.records[std::min(i, n - 1)].soc;
        RollingStep step;
        step.iteration = static_cast<int>(i);
        step.slice = refine(matrix, history, standardize);
        steps.push_back(std::move(step));
    }
    return steps;
}

}  // namespace evprof
