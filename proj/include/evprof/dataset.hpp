#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "evprof/core.hpp"
#include "evprof/io.hpp"
#include "evprof/rng.hpp"

namespace evprof {

struct SessionRecord {
    Timestamp timestamp = 0;
    double soc = 0.0;    // percent, [0, 100]
    double power = 0.0;  // kW, >= 0
};

struct ChargingSession {
    std::string session_id;
    std::string charger_id;
    std::vector<SessionRecord> records;  // sorted by timestamp
    double capacity_kwh = 0.0;
    bool controlled = false;
    Timestamp t_a = 0;
    Timestamp t_d = 0;
    double soc_a = 0.0;
    double soc_d = 0.0;
    std::optional<double> temp_at_arrival;  // set by join_weather

    // Wall duration in minutes.
    double duration_minutes() const { return static_cast<double>(t_d - t_a) / 60.0; }
};

enum class SplitMode { chronological, seeded_random };

struct DatasetSplit {
    std::vector<ChargingSession> train;
    std::vector<ChargingSession> test;
    double split_ratio = 0.70;
    SplitMode split_mode = SplitMode::chronological;
};

struct CsvSchema {
    std::string session_id = "session_id";
    std::string charger_id = "charger_id";
    std::string timestamp = "timestamp";
    std::string soc_percent = "soc_percent";
    std::string power_kw = "power_kw";
    std::string capacity_kwh = "capacity_kwh";
    std::string controlled = "controlled";
};

struct LoadResult {
    std::vector<ChargingSession> sessions;
    std::size_t record_count = 0;  // parsed measurement rows, incl. rejected sessions
    std::map<std::string, std::size_t> rejected;

    std::size_t rejected_sessions() const {
        std::size_t n = 0;
        for (const auto& [reason, count] : rejected) n += count;
        return n;
    }
};

// ---------------------------------------------------------------------------
// load_sessions
// ---------------------------------------------------------------------------

// Groups measurement rows by session id (first-appearance order), sorts each
// session by timestamp and drops sessions that violate the session
// invariants. Row-level problems (unparseable fields, negative power, SoC
// outside [0,100]) are hard errors carrying the source line number.
inline LoadResult load_sessions(const std::string& path, const CsvSchema& schema = {}) {
    CsvTable table = read_csv(path);

    auto require = [&](const std::string& name) {
        int idx = table.column(name);
        if (idx < 0) throw DataError("missing column '" + name + "' in '" + path + "'");
        return static_cast<std::size_t>(idx);
    };
    const std::size_t c_sid = require(schema.session_id);
    const std::size_t c_cid = require(schema.charger_id);
    const std::size_t c_ts = require(schema.timestamp);
    const std::size_t c_soc = require(schema.soc_percent);
    const std::size_t c_pow = require(schema.power_kw);
    const std::size_t c_cap = require(schema.capacity_kwh);
    const std::size_t c_ctl = require(schema.controlled);

    if (table.rows.empty()) throw DataError("no measurement rows in '" + path + "'");

    struct RawSession {
        ChargingSession session;
        bool meta_conflict = false;
    };
    std::vector<RawSession> raw;
    std::map<std::string, std::size_t> index_of;

    LoadResult result;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line_no = table.line_numbers[r];
        if (row.size() < table.header.size()) {
            throw DataError("line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " +
                            std::to_string(row.size()));
        }
        SessionRecord rec;
        rec.timestamp = parse_iso8601(row[c_ts]);
        rec.soc = parse_double_field(row[c_soc], "soc_percent", line_no);
        rec.power = parse_double_field(row[c_pow], "power_kw", line_no);
        const double capacity = parse_double_field(row[c_cap], "capacity_kwh", line_no);
        const long long ctl = parse_int_field(row[c_ctl], "controlled", line_no);
        if (rec.soc < 0.0 || rec.soc > 100.0) {
            throw DataError("line " + std::to_string(line_no) + ": soc_percent out of [0,100]");
        }
        if (rec.power < 0.0) {
            throw DataError("line " + std::to_string(line_no) + ": negative power_kw");
        }
        if (capacity <= 0.0) {
            throw DataError("line " + std::to_string(line_no) + ": capacity_kwh must be > 0");
        }
        if (ctl != 0 && ctl != 1) {
            throw DataError("line " + std::to_string(line_no) + ": controlled must be 0 or 1");
        }
        ++result.record_count;

        const std::string& sid = row[c_sid];
        auto it = index_of.find(sid);
        if (it == index_of.end()) {
            index_of.emplace(sid, raw.size());
            raw.push_back({});
            auto& s = raw.back().session;
            s.session_id = sid;
            s.charger_id = row[c_cid];
            s.capacity_kwh = capacity;
            s.controlled = ctl == 1;
            s.records.push_back(rec);
        } else {
            auto& rs = raw[it->second];
            if (rs.session.capacity_kwh != capacity || rs.session.controlled != (ctl == 1)) {
                rs.meta_conflict = true;
            }
            rs.session.records.push_back(rec);
        }
    }

    for (auto& rs : raw) {
        auto& s = rs.session;
        std::stable_sort(s.records.begin(), s.records.end(),
                         [](const SessionRecord& a, const SessionRecord& b) {
                             return a.timestamp < b.timestamp;
                         });
        if (rs.meta_conflict) {
            ++result.rejected["inconsistent_metadata"];
            continue;
        }
        if (s.records.size() < 2) {
            ++result.rejected["too_few_records"];
            continue;
        }
        bool dup_ts = false, soc_drop = false;
        for (std::size_t i = 1; i < s.records.size(); ++i) {
            if (s.records[i].timestamp == s.records[i - 1].timestamp) dup_ts = true;
            if (s.records[i].soc < s.records[i - 1].soc) soc_drop = true;
        }
        if (dup_ts) {
            ++result.rejected["duplicate_timestamp"];
            continue;
        }
        if (soc_drop) {
            ++result.rejected["non_monotone_soc"];
            continue;
        }
        s.t_a = s.records.front().timestamp;
        s.t_d = s.records.back().timestamp;
        s.soc_a = s.records.front().soc;
        s.soc_d = s.records.back().soc;
        result.sessions.push_back(std::move(s));
    }
    return result;
}

// ---------------------------------------------------------------------------
// join_weather
// ---------------------------------------------------------------------------

struct WeatherTable {
    // (timestamp, temperature C), sorted by timestamp.
    std::vector<std::pair<Timestamp, double>> entries;

    // Nearest entry; ties between two equally distant hours go to the later
    // one. Throws when the nearest entry is more than max_gap away.
    double at_nearest(Timestamp ts, std::int64_t max_gap_seconds = 24 * 3600) const {
        if (entries.empty()) throw DataError("weather table is empty");
        auto it = std::lower_bound(entries.begin(), entries.end(), ts,
                                   [](const auto& e, Timestamp t) { return e.first < t; });
        const std::pair<Timestamp, double>* best = nullptr;
        std::int64_t best_dist = 0;
        if (it != entries.end()) {
            best = &*it;
            best_dist = it->first - ts;
        }
        if (it != entries.begin()) {
            auto prev = std::prev(it);
            std::int64_t d = ts - prev->first;
            if (best == nullptr || d < best_dist) {
                best = &*prev;
                best_dist = d;
            }
        }
        if (best_dist > max_gap_seconds) {
            throw DataError("no weather within 24 h of " + format_iso8601(ts));
        }
        return best->second;
    }
};

inline WeatherTable load_weather_csv(const std::string& path) {
    CsvTable table = read_csv(path);
    int c_ts = table.column("timestamp");
    int c_temp = table.column("temperature_c");
    if (c_ts < 0) throw DataError("missing column 'timestamp' in '" + path + "'");
    if (c_temp < 0) throw DataError("missing column 'temperature_c' in '" + path + "'");
    WeatherTable w;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        w.entries.emplace_back(parse_iso8601(row[static_cast<std::size_t>(c_ts)]),
                               parse_double_field(row[static_cast<std::size_t>(c_temp)],
                                                  "temperature_c", table.line_numbers[r]));
    }
    std::sort(w.entries.begin(), w.entries.end());
    return w;
}

// Sets temp_at_arrival from the hour nearest each session's t_a. Every other
// field is left untouched. Throws when a session is outside coverage.
inline void join_weather(std::vector<ChargingSession>& sessions, const WeatherTable& weather) {
    for (auto& s : sessions) {
        try {
            s.temp_at_arrival = weather.at_nearest(s.t_a);
        } catch (const DataError& e) {
            throw DataError("session '" + s.session_id + "': " + e.what());
        }
    }
}

// ---------------------------------------------------------------------------
// resample_to_soc_grid
// ---------------------------------------------------------------------------

// Linear interpolation over (soc, power) with duplicate-SoC powers averaged
// first; constant extrapolation outside [soc_a, soc_d].
inline SocGridProfile resample_to_soc_grid(const ChargingSession& session) {
    if (session.records.size() < 2) {
        throw DataError("session '" + session.session_id + "': need at least 2 records");
    }
    // Average duplicates. Records are SoC-sorted already (monotone invariant).
    std::vector<std::pair<double, double>> points;
    points.reserve(session.records.size());
    for (const auto& rec : session.records) {
        if (!points.empty() && points.back().first == rec.soc) {
            points.back().second += rec.power;  // temporarily a running sum
        } else {
            points.emplace_back(rec.soc, rec.power);
        }
    }
    // Second pass for the counts.
    {
        std::size_t k = 0;
        std::size_t i = 0;
        while (i < session.records.size()) {
            std::size_t j = i;
            while (j < session.records.size() && session.records[j].soc == session.records[i].soc)
                ++j;
            points[k].second /= static_cast<double>(j - i);
            ++k;
            i = j;
        }
    }
    if (points.size() < 2) {
        throw DataError("session '" + session.session_id + "': degenerate SoC span");
    }

    const double soc_lo = points.front().first;
    const double soc_hi = points.back().first;
    SocGridProfile grid;
    std::size_t seg = 0;
    for (int s = 0; s < kSocGridSize; ++s) {
        const double x = static_cast<double>(s);
        if (x <= soc_lo) {
            grid[s] = points.front().second;
        } else if (x >= soc_hi) {
            grid[s] = points.back().second;
        } else {
            while (seg + 2 < points.size() && points[seg + 1].first < x) ++seg;
            const auto& [x0, y0] = points[seg];
            const auto& [x1, y1] = points[seg + 1];
            if (x == x1) {
                grid[s] = y1;
            } else {
                grid[s] = y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
    }
    return grid;
}

// ---------------------------------------------------------------------------
// split_dataset / filter_uncontrolled
// ---------------------------------------------------------------------------

inline DatasetSplit split_dataset(std::vector<ChargingSession> sessions, double ratio,
                                  SplitMode mode, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0,1)");
    if (sessions.size() < 2) throw DataError("need at least 2 sessions to split");

    if (mode == SplitMode::chronological) {
        std::stable_sort(sessions.begin(), sessions.end(),
                         [](const ChargingSession& a, const ChargingSession& b) {
                             if (a.t_a != b.t_a) return a.t_a < b.t_a;
                             return a.session_id < b.session_id;
                         });
    } else {
        Rng rng(seed);
        rng.shuffle(sessions);
    }
    // Floor on the train side; the epsilon keeps exact products like 0.7*10
    // from landing one short of the intended integer.
    const std::size_t n_train =
        static_cast<std::size_t>(std::floor(ratio * static_cast<double>(sessions.size()) + 1e-9));
    DatasetSplit split;
    split.split_ratio = ratio;
    split.split_mode = mode;
    split.train.assign(sessions.begin(), sessions.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.assign(sessions.begin() + static_cast<std::ptrdiff_t>(n_train), sessions.end());
    return split;
}

inline std::vector<ChargingSession> filter_uncontrolled(
    const std::vector<ChargingSession>& sessions) {
    std::vector<ChargingSession> out;
    for (const auto& s : sessions) {
        if (!s.controlled) out.push_back(s);
    }
    return out;
}

}  // namespace evprof
