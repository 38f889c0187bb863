#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "evprof/core.hpp"
#include "evprof/dataset.hpp"
#include "evprof/io.hpp"
#include "evprof/rng.hpp"

namespace evprof {

enum class TargetKind { capacity, arrival_soc, departure_soc };

inline std::string to_string(TargetKind k) {
    switch (k) {
        case TargetKind::capacity: return "capacity";
        case TargetKind::arrival_soc: return "arrival_soc";
        case TargetKind::departure_soc: return "departure_soc";
    }
    return "capacity";
}

struct GmmComponent {
    double weight = 1.0;
    double mean = 0.0;
    double variance = 1.0;
};

struct EmConfig {
    int max_iter = 200;
    double tol = 1e-6;         // stop when |delta log-likelihood| < tol
    double var_floor = 1e-6;   // target units squared
};

struct GmmModel {
    std::vector<GmmComponent> components;
    TargetKind target_kind = TargetKind::capacity;
    std::vector<double> loglik_trace;  // per EM iteration; not serialized

    int n_components() const { return static_cast<int>(components.size()); }

    double expected_value() const {
        double e = 0.0;
        for (const auto& c : components) e += c.weight * c.mean;
        return e;
    }

    double pdf(double x) const {
        double p = 0.0;
        for (const auto& c : components) {
            const double z = x - c.mean;
            p += c.weight * std::exp(-0.5 * z * z / c.variance) /
                 std::sqrt(2.0 * M_PI * c.variance);
        }
        return p;
    }

    double log_pdf(double x) const {
        double best = -std::numeric_limits<double>::infinity();
        std::vector<double> terms;
        terms.reserve(components.size());
        for (const auto& c : components) {
            const double z = x - c.mean;
            const double t = std::log(c.weight) - 0.5 * std::log(2.0 * M_PI * c.variance) -
                             0.5 * z * z / c.variance;
            terms.push_back(t);
            best = std::max(best, t);
        }
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - best);
        return best + std::log(acc);
    }

    double cdf(double x) const {
        double p = 0.0;
        for (const auto& c : components) {
            p += c.weight * 0.5 * std::erfc(-(x - c.mean) / std::sqrt(2.0 * c.variance));
        }
        return p;
    }

    // Component by weight, then a normal draw from it.
    double sample(Rng& rng) const {
        const double u = rng.u01();
        double acc = 0.0;
        std::size_t pick = components.size() - 1;
        for (std::size_t k = 0; k < components.size(); ++k) {
            acc += components[k].weight;
            if (u < acc) {
                pick = k;
                break;
            }
        }
        const auto& c = components[pick];
        return rng.normal(c.mean, std::sqrt(c.variance));
    }
};

// ---------------------------------------------------------------------------
// EM fitting
// ---------------------------------------------------------------------------

namespace detail {

// k-means++-style seeding: first mean uniform, the rest proportional to the
// squared distance from the nearest chosen mean.
inline std::vector<double> seed_means(std::span<const double> samples, int k, Rng& rng) {
    std::vector<double> means;
    means.reserve(static_cast<std::size_t>(k));
    means.push_back(samples[rng.bounded(samples.size())]);
    std::vector<double> d2(samples.size());
    while (static_cast<int>(means.size()) < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (double m : means) best = std::min(best, (samples[i] - m) * (samples[i] - m));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            means.push_back(samples[rng.bounded(samples.size())]);
            continue;
        }
        double u = rng.u01() * total;
        std::size_t pick = samples.size() - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            acc += d2[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        means.push_back(samples[pick]);
    }
    return means;
}

}  // namespace detail

inline GmmModel fit_gmm_em(std::span<const double> samples, int n_components, std::uint64_t seed,
                           const EmConfig& cfg = {}) {
    const std::size_t n = samples.size();
    if (n_components < 1) throw ConfigError("n_components must be >= 1");
    if (n < static_cast<std::size_t>(n_components)) {
        throw ModelError("insufficient data: " + std::to_string(n) + " samples for " +
                         std::to_string(n_components) + " components");
    }
    for (double x : samples) {
        if (!std::isfinite(x)) throw DataError("non-finite sample");
    }

    double mean = 0.0;
    for (double x : samples) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : samples) var += (x - mean) * (x - mean);
    var = std::max(var / static_cast<double>(n), cfg.var_floor);

    Rng rng(seed);
    GmmModel model;
    model.components.resize(static_cast<std::size_t>(n_components));
    {
        auto means = detail::seed_means(samples, n_components, rng);
        for (int k = 0; k < n_components; ++k) {
            model.components[static_cast<std::size_t>(k)] = {1.0 / n_components, means[static_cast<std::size_t>(k)], var};
        }
    }

    const std::size_t kc = static_cast<std::size_t>(n_components);
    std::vector<double> log_terms(kc);
    std::vector<double> resp(n * kc);
    double prev_ll = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < cfg.max_iter; ++iter) {
        // E step, log-sum-exp for stability.
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < kc; ++k) {
                const auto& c = model.components[k];
                const double z = samples[i] - c.mean;
                double t = -0.5 * z * z / c.variance -
                           0.5 * std::log(2.0 * M_PI * c.variance);
                t += c.weight > 0.0 ? std::log(c.weight)
                                    : -std::numeric_limits<double>::infinity();
                log_terms[k] = t;
                best = std::max(best, t);
            }
            double acc = 0.0;
            for (std::size_t k = 0; k < kc; ++k) acc += std::exp(log_terms[k] - best);
            const double lse = best + std::log(acc);
            ll += lse;
            for (std::size_t k = 0; k < kc; ++k) resp[i * kc + k] = std::exp(log_terms[k] - lse);
        }
        model.loglik_trace.push_back(ll);

        // M step; variance floored, which keeps the constrained M step optimal.
        for (std::size_t k = 0; k < kc; ++k) {
            double nk = 0.0, mk = 0.0;
            for (std::size_t i = 0; i < n; ++i) nk += resp[i * kc + k];
            if (nk > 0.0) {
                for (std::size_t i = 0; i < n; ++i) mk += resp[i * kc + k] * samples[i];
                mk /= nk;
                double vk = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double z = samples[i] - mk;
                    vk += resp[i * kc + k] * z * z;
                }
                vk /= nk;
                model.components[k].mean = mk;
                model.components[k].variance = std::max(vk, cfg.var_floor);
            } else {
                model.components[k].variance = cfg.var_floor;
            }
            model.components[k].weight = nk / static_cast<double>(n);
        }
        double wsum = 0.0;
        for (auto& c : model.components) wsum += c.weight;
        for (auto& c : model.components) c.weight /= wsum;

        if (std::abs(ll - prev_ll) < cfg.tol) break;
        prev_ll = ll;
    }

    std::sort(model.components.begin(), model.components.end(),
              [](const GmmComponent& a, const GmmComponent& b) { return a.mean < b.mean; });
    return model;
}

inline double sample_gmm(const GmmModel& model, Rng& rng) { return model.sample(rng); }

// ---------------------------------------------------------------------------
// K-fold CV model selection
// ---------------------------------------------------------------------------

enum class CvScore {
    expectation_mae,  // MAE of held-out samples vs the mixture expectation
    heldout_loglik,   // negative mean held-out log-likelihood
};

struct CvConfig {
    int mc_max = 11;
    int k_folds = 5;
    std::uint64_t seed = 1;
    CvScore score = CvScore::expectation_mae;
    EmConfig em{};
};

// Fold id per sample index: seeded shuffle, then K contiguous chunks.
inline std::vector<int> make_cv_folds(std::size_t n, int k_folds, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<int> fold(n, 0);
    for (int f = 0; f < k_folds; ++f) {
        const std::size_t lo = n * static_cast<std::size_t>(f) / static_cast<std::size_t>(k_folds);
        const std::size_t hi =
            n * static_cast<std::size_t>(f + 1) / static_cast<std::size_t>(k_folds);
        for (std::size_t i = lo; i < hi; ++i) fold[order[i]] = f;
    }
    return fold;
}

struct GmmCvCandidate {
    int n_components = 0;
    double score = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
};

struct GmmCvResult {
    GmmModel model;
    std::vector<GmmCvCandidate> candidates;
};

inline GmmCvResult select_gmm_by_cv_detailed(std::span<const double> samples, const CvConfig& cv,
                                             TargetKind target_kind) {
    const std::size_t n = samples.size();
    if (cv.k_folds < 2) throw ConfigError("k_folds must be >= 2");
    if (cv.mc_max < 1) throw ConfigError("mc_max must be >= 1");
    if (n < static_cast<std::size_t>(cv.k_folds)) {
        throw ModelError("need at least k_folds samples for CV");
    }

    const auto fold_of = make_cv_folds(n, cv.k_folds, Rng::derive(cv.seed, 0xF01D5));

    GmmCvResult result;
    int best_mc = -1;
    double best_score = std::numeric_limits<double>::infinity();
    for (int mc = 1; mc <= cv.mc_max; ++mc) {
        GmmCvCandidate cand;
        cand.n_components = mc;
        double score_sum = 0.0;
        bool ok = true;
        for (int f = 0; f < cv.k_folds && ok; ++f) {
            std::vector<double> train, held;
            for (std::size_t i = 0; i < n; ++i) {
                (fold_of[i] == f ? held : train).push_back(samples[i]);
            }
            if (train.size() < static_cast<std::size_t>(mc) || held.empty()) {
                ok = false;
                break;
            }
            GmmModel m = fit_gmm_em(train, mc,
                                    Rng::derive(cv.seed, static_cast<std::uint64_t>(mc) * 64 +
                                                             static_cast<std::uint64_t>(f)),
                                    cv.em);
            double fold_score = 0.0;
            if (cv.score == CvScore::expectation_mae) {
                const double e = m.expected_value();
                for (double x : held) fold_score += std::abs(x - e);
                fold_score /= static_cast<double>(held.size());
            } else {
                for (double x : held) fold_score -= m.log_pdf(x);
                fold_score /= static_cast<double>(held.size());
            }
            score_sum += fold_score;
        }
        if (ok) {
            cand.score = score_sum / static_cast<double>(cv.k_folds);
            cand.ok = true;
            if (cand.score < best_score) {  // strict <: ties keep the smaller MC
                best_score = cand.score;
                best_mc = mc;
            }
        }
        result.candidates.push_back(cand);
    }
    if (best_mc < 0) throw ModelError("GMM CV selection failed for every candidate MC");

    result.model = fit_gmm_em(samples, best_mc,
                              Rng::derive(cv.seed, 0x8EF17 + static_cast<std::uint64_t>(best_mc)),
                              cv.em);
    result.model.target_kind = target_kind;
    return result;
}

inline GmmModel select_gmm_by_cv(std::span<const double> samples, const CvConfig& cv,
                                 TargetKind target_kind = TargetKind::capacity) {
    return select_gmm_by_cv_detailed(samples, cv, target_kind).model;
}

// ---------------------------------------------------------------------------
// Hourly SoC models and the sampling front-ends
// ---------------------------------------------------------------------------

struct HourlySocModels {
    std::array<std::optional<GmmModel>, 24> arrival;
    std::array<std::optional<GmmModel>, 24> departure;
    GmmModel arrival_fallback;
    GmmModel departure_fallback;

    const GmmModel& model_for(TargetKind kind, int hour) const {
        if (kind == TargetKind::arrival_soc) {
            const auto& slot = arrival[static_cast<std::size_t>(hour)];
            return slot ? *slot : arrival_fallback;
        }
        const auto& slot = departure[static_cast<std::size_t>(hour)];
        return slot ? *slot : departure_fallback;
    }
};

// Hours with fewer than max(k_folds, 10) samples fall back to the global
// model, which is always fitted over all samples of the target.
inline HourlySocModels fit_hourly_soc_models(const std::vector<ChargingSession>& train,
                                             const CvConfig& cv) {
    if (train.empty()) throw DataError("no training sessions for hourly SoC models");

    std::array<std::vector<double>, 24> arrival_by_hour, departure_by_hour;
    std::vector<double> arrival_all, departure_all;
    arrival_all.reserve(train.size());
    departure_all.reserve(train.size());
    for (const auto& s : train) {
        arrival_by_hour[static_cast<std::size_t>(hour_of_day(s.t_a))].push_back(s.soc_a);
        departure_by_hour[static_cast<std::size_t>(hour_of_day(s.t_d))].push_back(s.soc_d);
        arrival_all.push_back(s.soc_a);
        departure_all.push_back(s.soc_d);
    }

    const std::size_t min_group =
        static_cast<std::size_t>(std::max(cv.k_folds, 10));

    HourlySocModels models;
    CvConfig cv_arr = cv;
    cv_arr.seed = Rng::derive(cv.seed, 0xA11);
    models.arrival_fallback = select_gmm_by_cv(arrival_all, cv_arr, TargetKind::arrival_soc);
    CvConfig cv_dep = cv;
    cv_dep.seed = Rng::derive(cv.seed, 0xD11);
    models.departure_fallback = select_gmm_by_cv(departure_all, cv_dep, TargetKind::departure_soc);

    for (int h = 0; h < 24; ++h) {
        const auto idx = static_cast<std::size_t>(h);
        if (arrival_by_hour[idx].size() >= min_group) {
            CvConfig c = cv;
            c.seed = Rng::derive(cv.seed, 0xA00 + static_cast<std::uint64_t>(h));
            models.arrival[idx] = select_gmm_by_cv(arrival_by_hour[idx], c, TargetKind::arrival_soc);
        }
        if (departure_by_hour[idx].size() >= min_group) {
            CvConfig c = cv;
            c.seed = Rng::derive(cv.seed, 0xD00 + static_cast<std::uint64_t>(h));
            models.departure[idx] =
                select_gmm_by_cv(departure_by_hour[idx], c, TargetKind::departure_soc);
        }
    }
    return models;
}

inline double estimate_soc(const HourlySocModels& models, TargetKind kind, int hour, Rng& rng) {
    if (hour < 0 || hour > 23) throw ConfigError("hour must be in [0,23]");
    const double value = models.model_for(kind, hour).sample(rng);
    return std::clamp(value, 0.0, 100.0);
}

inline double estimate_capacity(const GmmModel& capacity_model, Rng& rng) {
    return std::clamp(capacity_model.sample(rng), 5.0, 200.0);
}

}  // namespace evprof
