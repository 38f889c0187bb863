#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "evprof/core.hpp"

namespace evprof {

// ---------------------------------------------------------------------------
// ISO-8601 timestamps (UTC, second resolution)
// ---------------------------------------------------------------------------

namespace detail {

// Civil-date <-> day-count conversions, Gregorian calendar.
inline std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = static_cast<unsigned>((153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1);
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

}  // namespace detail

// Accepts "YYYY-MM-DD[T ]HH:MM[:SS]" with an optional trailing "Z" or
// "+HH:MM"/"-HH:MM" offset (applied towards UTC).
inline Timestamp parse_iso8601(std::string_view text) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    std::size_t n = text.size();
    if (n < 16) throw DataError("bad timestamp '" + std::string(text) + "'");
    auto digits = [&](std::size_t pos, std::size_t len, int& out) {
        out = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            char c = i < n ? text[i] : '\0';
            if (c < '0' || c > '9') return false;
            out = out * 10 + (c - '0');
        }
        return true;
    };
    if (!digits(0, 4, y) || text[4] != '-' || !digits(5, 2, mo) || text[7] != '-' ||
        !digits(8, 2, d) || (text[10] != 'T' && text[10] != ' ') || !digits(11, 2, h) ||
        text[13] != ':' || !digits(14, 2, mi)) {
        throw DataError("bad timestamp '" + std::string(text) + "'");
    }
    std::size_t pos = 16;
    if (pos < n && text[pos] == ':') {
        if (!digits(pos + 1, 2, s)) throw DataError("bad timestamp '" + std::string(text) + "'");
        pos += 3;
    }
    std::int64_t offset = 0;
    if (pos < n) {
        char c = text[pos];
        if (c == 'Z') {
            pos += 1;
        } else if (c == '+' || c == '-') {
            int oh = 0, om = 0;
            if (!digits(pos + 1, 2, oh) || pos + 3 >= n || text[pos + 3] != ':' ||
                !digits(pos + 4, 2, om)) {
                throw DataError("bad timestamp offset '" + std::string(text) + "'");
            }
            offset = static_cast<std::int64_t>(oh) * 3600 + om * 60;
            if (c == '-') offset = -offset;
            pos += 6;
        }
    }
    if (pos != n) throw DataError("bad timestamp '" + std::string(text) + "'");
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h > 23 || mi > 59 || s > 60) {
        throw DataError("bad timestamp '" + std::string(text) + "'");
    }
    return detail::days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + s - offset;
}

inline std::string format_iso8601(Timestamp ts) {
    std::int64_t days = ts / 86400;
    std::int64_t rem = ts % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    int y, m, d;
    detail::civil_from_days(days, y, m, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", y, m, d,
                  static_cast<int>(rem / 3600), static_cast<int>((rem % 3600) / 60),
                  static_cast<int>(rem % 60));
    return buf;
}

inline int hour_of_day(Timestamp ts) {
    std::int64_t rem = ts % 86400;
    if (rem < 0) rem += 86400;
    return static_cast<int>(rem / 3600);
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line per row

    // -1 when absent.
    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (table.header.empty()) {
            table.header = detail::split_csv_line(line);
        } else {
            table.rows.push_back(detail::split_csv_line(line));
            table.line_numbers.push_back(line_no);
        }
    }
    if (table.header.empty()) throw DataError("empty file '" + path + "'");
    return table;
}

inline double parse_double_field(const std::string& field, const std::string& what,
                                 std::size_t line_no) {
    double value = 0.0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + field + "'");
    }
    return value;
}

inline long long parse_int_field(const std::string& field, const std::string& what,
                                 std::size_t line_no) {
    long long value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last) {
        throw DataError("line " + std::to_string(line_no) + ": bad " + what + " '" + field + "'");
    }
    return value;
}

// Fixed formatting for CSV output; %.10g keeps files stable across runs.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace evprof
