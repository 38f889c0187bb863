#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "evprof/core.hpp"
#include "evprof/dataset.hpp"
#include "evprof/io.hpp"
#include "evprof/rng.hpp"

namespace evprof {

// Deterministic toy fleet: three EV archetypes with taper-shaped intrinsic
// profiles, per-session jitter, and a matching hourly weather table. Sessions
// are simulated minute by minute with the recorded power driving the SoC, so
// the logs are energy-consistent by construction.
struct SynthConfig {
    int n_sessions = 240;
    std::uint64_t seed = 1;
    Timestamp start = 1648771200;  // 2022-04-01T00:00:00Z
    int span_days = 450;
    double controlled_fraction = 0.2;
    bool integer_soc = false;  // record SoC snapped to the integer grid
};

struct SynthFleet {
    std::vector<ChargingSession> sessions;
    WeatherTable weather;
};

namespace detail {

struct Archetype {
    double capacity_kwh;
    double plateau_kw;
    double plateau_end_soc;  // percent where the taper starts
    double tail_kw;          // power at 100 %
};

inline double archetype_power(const Archetype& a, double soc) {
    if (soc <= a.plateau_end_soc) return a.plateau_kw;
    const double frac = (soc - a.plateau_end_soc) / (100.0 - a.plateau_end_soc);
    return a.plateau_kw + (a.tail_kw - a.plateau_kw) * frac;
}

}  // namespace detail

inline SynthFleet generate_synthetic_fleet(const SynthConfig& cfg) {
    if (cfg.n_sessions < 1) throw ConfigError("n_sessions must be >= 1");
    const std::array<detail::Archetype, 3> archetypes{{
        {42.0, 46.0, 55.0, 6.0},
        {64.0, 98.0, 45.0, 10.0},
        {84.0, 152.0, 30.0, 12.0},
    }};
    // Arrivals concentrated in daytime hours, nothing between 2 and 5 a.m.
    const std::array<double, 24> hour_weights{0.7, 0.4, 0.0, 0.0, 0.0, 0.3, 1.0, 2.0,
                                              3.5, 4.5, 4.0, 3.5, 3.0, 3.0, 3.5, 4.0,
                                              4.5, 5.0, 4.0, 3.0, 2.0, 1.5, 1.0, 0.8};
    double weight_total = 0.0;
    for (double w : hour_weights) weight_total += w;

    Rng rng(cfg.seed);
    SynthFleet fleet;
    fleet.sessions.reserve(static_cast<std::size_t>(cfg.n_sessions));

    for (int s = 0; s < cfg.n_sessions; ++s) {
        const double archetype_u = rng.u01();
        const auto& arche = archetypes[archetype_u < 0.45 ? 0 : (archetype_u < 0.80 ? 1 : 2)];

        ChargingSession session;
        char sid[32];
        std::snprintf(sid, sizeof(sid), "synth-%06d", s + 1);
        session.session_id = sid;
        session.charger_id = rng.bernoulli(0.5) ? "CH1" : "CH2";
        session.capacity_kwh = std::max(5.0, arche.capacity_kwh + rng.normal(0.0, 1.2));
        session.controlled = rng.bernoulli(cfg.controlled_fraction);

        // Arrival time: uniform day, hour by the weight table, uniform minute.
        const int day = rng.uniform_int(0, cfg.span_days - 1);
        double hu = rng.u01() * weight_total;
        int hour = 23;
        for (int h = 0; h < 24; ++h) {
            hu -= hour_weights[static_cast<std::size_t>(h)];
            if (hu < 0.0) {
                hour = h;
                break;
            }
        }
        const int minute = rng.uniform_int(0, 59);
        Timestamp t = cfg.start + static_cast<Timestamp>(day) * 86400 + hour * 3600 + minute * 60;

        const double scale = rng.uniform(0.92, 1.08);
        const double cap_limit_kw = rng.uniform(20.0, 40.0);
        double soc = std::clamp(rng.normal(24.0, 9.0), 2.0, 65.0);
        const double soc_target =
            std::clamp(soc + std::max(10.0, rng.normal(48.0, 14.0)), soc + 5.0, 99.0);

        for (int step = 0; step < 600; ++step) {
            double power = detail::archetype_power(arche, soc) * scale;
            if (session.controlled) power = std::min(power, cap_limit_kw);
            power = std::max(power, 0.8);
            const double recorded_soc =
                cfg.integer_soc ? std::floor(soc + 0.5) : soc;
            session.records.push_back({t, std::min(recorded_soc, 100.0), power});
            if (soc >= soc_target) break;
            // The recorded power is what charges the battery over the minute.
            soc = std::min(soc + power / session.capacity_kwh * (1.0 / 60.0) * 100.0, 100.0);
            t += 60;
        }
        session.t_a = session.records.front().timestamp;
        session.t_d = session.records.back().timestamp;
        session.soc_a = session.records.front().soc;
        session.soc_d = session.records.back().soc;
        fleet.sessions.push_back(std::move(session));
    }

    // Hourly temperatures over the span plus one day of margin each side:
    // seasonal + diurnal sinusoids with mild noise.
    Rng wrng(Rng::derive(cfg.seed, 0x7EA7));
    for (Timestamp t = cfg.start - 86400;
         t <= cfg.start + static_cast<Timestamp>(cfg.span_days + 1) * 86400; t += 3600) {
        const double day_of_year = static_cast<double>((t / 86400) % 365);
        const double hour = static_cast<double>(hour_of_day(t));
        const double temp = 11.0 + 9.0 * std::sin(2.0 * M_PI * (day_of_year - 110.0) / 365.0) +
                            4.0 * std::sin(2.0 * M_PI * (hour - 9.0) / 24.0) +
                            wrng.normal(0.0, 1.0);
        fleet.weather.entries.emplace_back(t, temp);
    }
    return fleet;
}

inline void write_sessions_csv(const std::string& path,
                               const std::vector<ChargingSession>& sessions) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "session_id,charger_id,timestamp,soc_percent,power_kw,capacity_kwh,controlled\n";
    for (const auto& s : sessions) {
        for (const auto& rec : s.records) {
            out << s.session_id << ',' << s.charger_id << ',' << format_iso8601(rec.timestamp)
                << ',' << format_double(rec.soc) << ',' << format_double(rec.power) << ','
                << format_double(s.capacity_kwh) << ',' << (s.controlled ? 1 : 0) << '\n';
        }
    }
}

inline void write_weather_csv(const std::string& path, const WeatherTable& weather) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << "timestamp,temperature_c\n";
    for (const auto& [ts, temp] : weather.entries) {
        out << format_iso8601(ts) << ',' << format_double(temp) << '\n';
    }
}

}  // namespace evprof
