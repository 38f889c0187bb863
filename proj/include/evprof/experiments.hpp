#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evprof/core.hpp"
#include "evprof/dataset.hpp"
#include "evprof/gmm.hpp"
#include "evprof/metrics.hpp"
#include "evprof/random_forest.hpp"
#include "evprof/refiner.hpp"
#include "evprof/rng.hpp"
#include "evprof/transposition.hpp"

namespace evprof {

// ---------------------------------------------------------------------------
// Training-set assembly
// ---------------------------------------------------------------------------

struct RfTrainingBuild {
    RfTrainingSet data;
    std::size_t skipped = 0;
};

// (temp_at_arrival, capacity) -> resampled grid profile, one pair per
// session. Sessions that cannot be resampled are skipped and counted.
inline RfTrainingBuild build_rf_training_set(const std::vector<ChargingSession>& sessions) {
    RfTrainingBuild build;
    for (const auto& s : sessions) {
        if (!s.temp_at_arrival) {
            throw DataError("session '" + s.session_id + "' has no joined weather");
        }
        try {
            SocGridProfile profile = resample_to_soc_grid(s);
            build.data.features.push_back({*s.temp_at_arrival, s.capacity_kwh});
            build.data.targets.push_back(profile);
        } catch (const DataError&) {
            ++build.skipped;
        }
    }
    if (build.data.size() == 0) throw DataError("no usable training sessions");
    return build;
}

inline std::vector<double> capacity_samples(const std::vector<ChargingSession>& sessions) {
    std::vector<double> out;
    out.reserve(sessions.size());
    for (const auto& s : sessions) out.push_back(s.capacity_kwh);
    return out;
}

// ---------------------------------------------------------------------------
// Forecast-update experiment (EMAE by refinement iteration)
// ---------------------------------------------------------------------------

struct ForecastExperimentOptions {
    int max_iterations = 30;
    std::uint64_t seed = 1;
    EmaeNormalizer normalizer = EmaeNormalizer::envelope;
    unsigned max_threads = 0;
};

struct IterationDistribution {
    std::string label;  // "0" estimated-C, "0C" known-C, then "1".."N"
    std::vector<double> emae_values;
    DistributionSummary summary;
};

struct ForecastExperimentResult {
    std::vector<IterationDistribution> iterations;
    std::size_t sessions_used = 0;
    std::size_t sessions_skipped = 0;

    const IterationDistribution* find(const std::string& label) const {
        for (const auto& it : iterations) {
            if (it.label == label) return &it;
        }
        return nullptr;
    }
};

// Per test session: the two unconnected forecasts (capacity estimated and
// known) scored over the realized SoC span, then one score per rolling
// refinement over the remaining [SoC_i, SoC_d] range.
inline ForecastExperimentResult run_forecast_experiment(
    const std::vector<ChargingSession>& test_sessions, const RfModel& rf,
    const GmmModel& capacity_model, const HistoryMatrix& matrix,
    const ForecastExperimentOptions& opts = {}) {
    struct SessionOutcome {
        bool used = false;
        double emae_estimated = 0.0;
        double emae_known = 0.0;
        std::vector<double> emae_by_iteration;
    };
    std::vector<SessionOutcome> outcomes(test_sessions.size());

    parallel_for(
        test_sessions.size(),
        [&](std::size_t i) {
            const auto& session = test_sessions[i];
            if (!session.temp_at_arrival) {
                throw DataError("session '" + session.session_id + "' has no joined weather");
            }
            SocGridProfile realized;
            try {
                realized = resample_to_soc_grid(session);
            } catch (const DataError&) {
                return;  // degenerate span, skipped
            }
            const int s0 = soc_ceil(session.soc_a);
            const int s1 = soc_floor(session.soc_d);
            if (s1 < s0) return;

            auto& out = outcomes[i];
            Rng rng(Rng::derive(opts.seed, i));
            const double temp = *session.temp_at_arrival;

            const double cap_est = estimate_capacity(capacity_model, rng);
            const SocGridProfile pred_est = rf.predict(temp, cap_est);
            const SocGridProfile pred_known = rf.predict(temp, session.capacity_kwh);
            const auto realized_span = realized.slice(s0, s1);
            out.emae_estimated = emae(pred_est.slice(s0, s1), realized_span,
                                      EmaeDomain::soc_indexed, opts.normalizer)
                                     .value;
            out.emae_known = emae(pred_known.slice(s0, s1), realized_span,
                                  EmaeDomain::soc_indexed, opts.normalizer)
                                 .value;

            const auto steps =
                run_rolling_session(matrix, session, pred_est, opts.max_iterations);
            for (const auto& step : steps) {
                if (step.iteration == 0) continue;
                if (step.slice.powers.empty()) continue;
                const auto realized_slice =
                    realized.slice(step.slice.soc_start, step.slice.soc_end());
                out.emae_by_iteration.push_back(emae(step.slice.powers, realized_slice,
                                                     EmaeDomain::soc_indexed, opts.normalizer)
                                                    .value);
            }
            out.used = true;
        },
        opts.max_threads);

    ForecastExperimentResult result;
    result.iterations.emplace_back();
    result.iterations.back().label = "0";
    result.iterations.emplace_back();
    result.iterations.back().label = "0C";
    for (int i = 1; i <= opts.max_iterations; ++i) {
        result.iterations.emplace_back();
        result.iterations.back().label = std::to_string(i);
    }
    for (const auto& out : outcomes) {
        if (!out.used) {
            ++result.sessions_skipped;
            continue;
        }
        ++result.sessions_used;
        result.iterations[0].emae_values.push_back(out.emae_estimated);
        result.iterations[1].emae_values.push_back(out.emae_known);
        for (std::size_t k = 0; k < out.emae_by_iteration.size(); ++k) {
            result.iterations[2 + k].emae_values.push_back(out.emae_by_iteration[k]);
        }
    }
    for (auto& it : result.iterations) it.summary = summarize_distribution(it.emae_values);
    return result;
}

// ---------------------------------------------------------------------------
// Information-availability ablation (eight scenarios)
// ---------------------------------------------------------------------------

struct AblationOptions {
    int n_seeds = 5;
    std::uint64_t seed = 1;
    double dt_minutes = 1.0;
    EmaeNormalizer normalizer = EmaeNormalizer::envelope;
    double p_min_kw = kTranspositionPowerFloorKw;
    unsigned max_threads = 0;
};

struct AblationRow {
    std::string session_id;
    int seed_index = 0;
    double emae_pct = 0.0;
    double time_error_pu = 0.0;
    // Absent for the perfect-information scenario, where scheduled energy is
    // known by construction.
    std::optional<double> energy_error_pu;
};

struct ScenarioReport {
    ScenarioFlags flags;
    std::string label;
    std::vector<AblationRow> rows;
    DistributionSummary emae_summary;
    DistributionSummary time_summary;
    DistributionSummary energy_summary;
};

struct AblationResult {
    std::vector<ScenarioReport> scenarios;
    std::size_t sessions_used = 0;
    std::size_t sessions_skipped = 0;
};

inline AblationResult run_ablation(const std::vector<ChargingSession>& uncontrolled_sessions,
                                   const RfModel& rf, const GmmModel& capacity_model,
                                   const HourlySocModels& soc_models,
                                   const AblationOptions& opts = {}) {
    if (opts.n_seeds < 1) throw ConfigError("n_seeds must be >= 1");

    // A session enters every scenario or none, so the reports stay aligned.
    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < uncontrolled_sessions.size(); ++i) {
        const auto& s = uncontrolled_sessions[i];
        if (!s.temp_at_arrival) {
            throw DataError("session '" + s.session_id + "' has no joined weather");
        }
        if (s.soc_d > s.soc_a && s.duration_minutes() > 0.0) usable.push_back(i);
    }

    AblationResult result;
    result.sessions_used = usable.size();
    result.sessions_skipped = uncontrolled_sessions.size() - usable.size();

    const auto scenarios = all_scenarios();
    for (std::size_t sc = 0; sc < scenarios.size(); ++sc) {
        const ScenarioFlags flags = scenarios[sc];
        ScenarioReport report;
        report.flags = flags;
        report.label = flags.label();
        report.rows.resize(usable.size() * static_cast<std::size_t>(opts.n_seeds));

        parallel_for(
            report.rows.size(),
            [&](std::size_t slot) {
                const std::size_t u = slot / static_cast<std::size_t>(opts.n_seeds);
                const int seed_index = static_cast<int>(slot % static_cast<std::size_t>(opts.n_seeds));
                const auto& session = uncontrolled_sessions[usable[u]];
                Rng rng(Rng::derive(opts.seed, (sc << 40) ^ (usable[u] << 8) ^
                                                   static_cast<std::size_t>(seed_index)));

                TranspositionInput input =
                    apply_scenario(session, flags, capacity_model, soc_models, rng,
                                   opts.dt_minutes);
                input.profile = rf.predict(*session.temp_at_arrival, input.capacity_kwh);
                const PowerTimeSeries predicted = transpose_to_time(input, opts.p_min_kw);

                std::vector<double> real_powers;
                real_powers.reserve(session.records.size());
                for (const auto& rec : session.records) real_powers.push_back(rec.power);

                // Union horizon, zero-padded.
                std::vector<double> pred = predicted.powers;
                std::vector<double> real = real_powers;
                const std::size_t len = std::max(pred.size(), real.size());
                pred.resize(len, 0.0);
                real.resize(len, 0.0);

                AblationRow row;
                row.session_id = session.session_id;
                row.seed_index = seed_index;
                row.emae_pct =
                    emae(pred, real, EmaeDomain::time_indexed, opts.normalizer).value;
                row.time_error_pu =
                    time_error_pu(session.duration_minutes(), predicted.exact_duration_minutes);
                if (!flags.all_known()) {
                    const double real_energy = scheduled_energy(
                        session.capacity_kwh, session.soc_a, session.soc_d);
                    row.energy_error_pu =
                        energy_error_pu(real_energy, predicted.scheduled_energy_kwh);
                }
                report.rows[slot] = std::move(row);
            },
            opts.max_threads);

        std::vector<double> emae_values, time_values, energy_values;
        for (const auto& row : report.rows) {
            emae_values.push_back(row.emae_pct);
            time_values.push_back(row.time_error_pu);
            if (row.energy_error_pu) energy_values.push_back(*row.energy_error_pu);
        }
        report.emae_summary = summarize_distribution(std::move(emae_values));
        report.time_summary = summarize_distribution(std::move(time_values));
        report.energy_summary = summarize_distribution(std::move(energy_values));
        result.scenarios.push_back(std::move(report));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Hourly SoC error distributions
// ---------------------------------------------------------------------------

struct SocErrorByHour {
    std::array<std::vector<double>, 24> arrival_errors;
    std::array<std::vector<double>, 24> departure_errors;
    std::array<DistributionSummary, 24> arrival_summary;
    std::array<DistributionSummary, 24> departure_summary;
};

// Signed errors, real minus predicted, grouped by the hour the prediction
// would be drawn for.
inline SocErrorByHour soc_error_by_hour(const std::vector<ChargingSession>& test_sessions,
                                        const HourlySocModels& models, int n_seeds,
                                        std::uint64_t seed) {
    if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
    SocErrorByHour result;
    for (std::size_t i = 0; i < test_sessions.size(); ++i) {
        const auto& s = test_sessions[i];
        const int ha = hour_of_day(s.t_a);
        const int hd = hour_of_day(s.t_d);
        Rng rng(Rng::derive(seed, 0x50C + i));
        for (int j = 0; j < n_seeds; ++j) {
            const double pred_a = estimate_soc(models, TargetKind::arrival_soc, ha, rng);
            const double pred_d = estimate_soc(models, TargetKind::departure_soc, hd, rng);
            result.arrival_errors[static_cast<std::size_t>(ha)].push_back(s.soc_a - pred_a);
            result.departure_errors[static_cast<std::size_t>(hd)].push_back(s.soc_d - pred_d);
        }
    }
    for (int h = 0; h < 24; ++h) {
        const auto idx = static_cast<std::size_t>(h);
        result.arrival_summary[idx] = summarize_distribution(result.arrival_errors[idx]);
        result.departure_summary[idx] = summarize_distribution(result.departure_errors[idx]);
    }
    return result;
}

}  // namespace evprof
