#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "evprof/core.hpp"
#include "evprof/dataset.hpp"
#include "evprof/gmm.hpp"
#include "evprof/io.hpp"
#include "evprof/rng.hpp"

namespace evprof {

// Floor applied to profile powers inside the surrogate so near-zero taper
// tails cannot blow up the per-step dwell time.
inline constexpr double kTranspositionPowerFloorKw = 0.5;

struct ScenarioFlags {
    bool capacity_known = true;
    bool soc_start_known = true;
    bool soc_end_known = true;

    bool all_known() const { return capacity_known && soc_start_known && soc_end_known; }

    // Compact label, e.g. "kke" = capacity known, soc_a known, soc_d estimated.
    std::string label() const {
        std::string s;
        s += capacity_known ? 'k' : 'e';
        s += soc_start_known ? 'k' : 'e';
        s += soc_end_known ? 'k' : 'e';
        return s;
    }
};

// The eight information-availability scenarios, perfect information first,
// no information last.
inline std::vector<ScenarioFlags> all_scenarios() {
    std::vector<ScenarioFlags> out;
    for (int mask = 7; mask >= 0; --mask) {
        out.push_back({(mask & 4) != 0, (mask & 2) != 0, (mask & 1) != 0});
    }
    return out;
}

struct TranspositionInput {
    SocGridProfile profile;
    double capacity_kwh = 0.0;
    double soc_start = 0.0;
    double soc_end = 0.0;
    double dt_minutes = 1.0;
    ScenarioFlags flags;
};

struct PowerTimeSeries {
    double start_offset_minutes = 0.0;  // 0 at t_a
    std::vector<double> powers;         // kW at dt spacing
    double dt_minutes = 1.0;
    double duration_minutes = 0.0;        // (len-1) * dt for len >= 1
    double exact_duration_minutes = 0.0;  // continuous surrogate duration
    double scheduled_energy_kwh = 0.0;

    // Left-Riemann energy of the sampled series, kWh.
    double sampled_energy_kwh() const {
        double e = 0.0;
        for (std::size_t i = 0; i + 1 < powers.size(); ++i) e += powers[i];
        return e * dt_minutes / 60.0;
    }
};

inline double scheduled_energy(double capacity_kwh, double soc_start, double soc_end) {
    if (capacity_kwh <= 0.0) throw ConfigError("capacity must be > 0");
    return capacity_kwh * (soc_end - soc_start) / 100.0;
}

// Energy-balance EV surrogate: climbing from SoC s to s+1 takes
// capacity * 0.01 / P(s) hours with P(s) = max(profile[s], floor). The
// sampled series is step-constant per SoC segment.
inline PowerTimeSeries transpose_to_time(const TranspositionInput& input,
                                         double p_min_kw = kTranspositionPowerFloorKw) {
    if (input.capacity_kwh <= 0.0) throw ConfigError("capacity must be > 0");
    if (input.soc_end < input.soc_start) throw ConfigError("soc_end below soc_start");
    if (input.soc_start < 0.0 || input.soc_end > 100.0) {
        throw ConfigError("SoC bounds must lie in [0,100]");
    }
    if (input.dt_minutes <= 0.0) throw ConfigError("dt must be > 0");

    PowerTimeSeries series;
    series.dt_minutes = input.dt_minutes;
    series.scheduled_energy_kwh =
        scheduled_energy(input.capacity_kwh, input.soc_start, input.soc_end);

    if (input.soc_end <= input.soc_start) {
        return series;  // degenerate span: empty series, zero duration
    }

    // Piecewise-constant segments in time, one per (partial) 1 % SoC step.
    struct Segment {
        double t_end_minutes;
        double power_kw;
    };
    std::vector<Segment> segments;
    double t_minutes = 0.0;
    double soc = input.soc_start;
    while (soc < input.soc_end - 1e-12) {
        const int s = clamp_soc_index(static_cast<int>(std::floor(soc)));
        const double seg_end = std::min(std::floor(soc) + 1.0, input.soc_end);
        const double power = std::max(input.profile[s], p_min_kw);
        const double hours = input.capacity_kwh * (seg_end - soc) / 100.0 / power;
        t_minutes += hours * 60.0;
        segments.push_back({t_minutes, power});
        soc = seg_end;
    }
    series.exact_duration_minutes = t_minutes;

    const std::size_t len =
        static_cast<std::size_t>(std::floor(t_minutes / input.dt_minutes + 1e-9)) + 1;
    series.powers.reserve(len);
    std::size_t seg = 0;
    for (std::size_t k = 0; k < len; ++k) {
        const double t = static_cast<double>(k) * input.dt_minutes;
        while (seg + 1 < segments.size() && t >= segments[seg].t_end_minutes) ++seg;
        series.powers.push_back(segments[seg].power_kw);
    }
    series.duration_minutes = static_cast<double>(len - 1) * input.dt_minutes;
    return series;
}

// Draws each of {capacity, soc_start, soc_end} from the session when flagged
// known, otherwise from the corresponding mixture. Infeasible sampled pairs
// (end < start) are resampled up to 20 times, then swapped.
inline TranspositionInput apply_scenario(const ChargingSession& session,
                                         const ScenarioFlags& flags, const GmmModel& capacity_model,
                                         const HourlySocModels& soc_models, Rng& rng,
                                         double dt_minutes = 1.0) {
    TranspositionInput input;
    input.flags = flags;
    input.dt_minutes = dt_minutes;
    input.capacity_kwh =
        flags.capacity_known ? session.capacity_kwh : estimate_capacity(capacity_model, rng);

    const int arrival_hour = hour_of_day(session.t_a);
    const int departure_hour = hour_of_day(session.t_d);
    auto draw_start = [&] {
        return flags.soc_start_known
                   ? session.soc_a
                   : estimate_soc(soc_models, TargetKind::arrival_soc, arrival_hour, rng);
    };
    auto draw_end = [&] {
        return flags.soc_end_known
                   ? session.soc_d
                   : estimate_soc(soc_models, TargetKind::departure_soc, departure_hour, rng);
    };

    input.soc_start = draw_start();
    input.soc_end = draw_end();
    for (int attempt = 0; attempt < 20 && input.soc_end < input.soc_start; ++attempt) {
        if (!flags.soc_start_known) input.soc_start = draw_start();
        if (!flags.soc_end_known) input.soc_end = draw_end();
    }
    if (input.soc_end < input.soc_start) std::swap(input.soc_start, input.soc_end);
    return input;
}

}  // namespace evprof
