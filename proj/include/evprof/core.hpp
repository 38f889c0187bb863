#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace evprof {

// SoC grid: one power value per integer SoC in [0, 100] %.
inline constexpr int kSocGridSize = 101;

// Seconds since the Unix epoch, minute resolution in session logs.
using Timestamp = std::int64_t;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad or unresolvable configuration / parameters. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or insufficient input data. CLI exit code 3.
struct DataError : Error {
    using Error::Error;
};

// Model fitting / loading failures. CLI exit code 4.
struct ModelError : Error {
    using Error::Error;
};

// Power (kW) indexed by integer SoC percent.
struct SocGridProfile {
    std::array<double, kSocGridSize> powers{};

    double& operator[](int soc) { return powers[static_cast<std::size_t>(soc)]; }
    double operator[](int soc) const { return powers[static_cast<std::size_t>(soc)]; }

    bool is_valid() const {
        for (double p : powers) {
            if (!std::isfinite(p) || p < 0.0) return false;
        }
        return true;
    }

    // Values at integer SoCs in [soc_lo, soc_hi], inclusive.
    std::vector<double> slice(int soc_lo, int soc_hi) const {
        std::vector<double> out;
        if (soc_hi < soc_lo) return out;
        out.reserve(static_cast<std::size_t>(soc_hi - soc_lo + 1));
        for (int s = soc_lo; s <= soc_hi; ++s) out.push_back(powers[static_cast<std::size_t>(s)]);
        return out;
    }

    friend bool operator==(const SocGridProfile& a, const SocGridProfile& b) {
        return a.powers == b.powers;
    }
};

inline int clamp_soc_index(int soc) {
    if (soc < 0) return 0;
    if (soc >= kSocGridSize) return kSocGridSize - 1;
    return soc;
}

// First integer SoC >= value / last integer SoC <= value, with a small
// tolerance so that 22.000000001 still maps to 22.
inline int soc_ceil(double value) { return clamp_soc_index(static_cast<int>(std::ceil(value - 1e-9))); }
inline int soc_floor(double value) { return clamp_soc_index(static_cast<int>(std::floor(value + 1e-9))); }

// Runs fn(i) for i in [0, n). Work items must be independent; results must be
// written to disjoint slots so the outcome does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn, unsigned max_threads = 0) {
    unsigned hw = max_threads != 0 ? max_threads : std::thread::hardware_concurrency();
    if (hw <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    unsigned n_workers = static_cast<unsigned>(std::min<std::size_t>(hw, n));
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    if (!failed.exchange(true)) first_error = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto& t : workers) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace evprof
