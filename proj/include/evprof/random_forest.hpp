#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "evprof/core.hpp"
#include "evprof/gmm.hpp"  // make_cv_folds
#include "evprof/rng.hpp"

namespace evprof {

inline constexpr int kNumRfFeatures = 2;  // (temp_at_arrival, capacity_kwh)

enum class MaxFeatures { sqrt_features, log2_features };
enum class SplitCriterion { squared, absolute };

inline std::string to_string(MaxFeatures m) {
    return m == MaxFeatures::sqrt_features ? "sqrt" : "log2";
}
inline std::string to_string(SplitCriterion c) {
    return c == SplitCriterion::squared ? "squared" : "absolute";
}

// Defaults are the tuned operating point.
struct RfHyperparams {
    int n_estimators = 600;
    int max_depth = 47;
    int min_samples_split = 2;
    int min_samples_leaf = 18;
    MaxFeatures max_features = MaxFeatures::sqrt_features;
    bool bootstrap = true;
    SplitCriterion criterion = SplitCriterion::squared;

    void validate() const {
        if (n_estimators < 1) throw ConfigError("n_estimators must be >= 1");
        if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
        if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
        if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
    }
};

struct RfTrainingSet {
    std::vector<std::array<double, kNumRfFeatures>> features;
    std::vector<SocGridProfile> targets;

    std::size_t size() const { return features.size(); }
};

struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf = -1;  // index into leaf_values when >= 0
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    std::vector<std::vector<double>> leaf_values;  // kSocGridSize each
    int depth = 0;

    const std::vector<double>& predict(const std::array<double, kNumRfFeatures>& x) const {
        std::int32_t cur = 0;
        for (;;) {
            const TreeNode& node = nodes[static_cast<std::size_t>(cur)];
            if (node.leaf >= 0) return leaf_values[static_cast<std::size_t>(node.leaf)];
            cur = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                              : node.right;
        }
    }
};

namespace detail {

// Running sum of |v - median| with O(log n) insert/erase; the two-multiset
// median trick with per-half sums.
class RunningMad {
public:
    void insert(double v) {
        if (lo_.empty() || v <= *lo_.rbegin()) {
            lo_.insert(v);
            lo_sum_ += v;
        } else {
            hi_.insert(v);
            hi_sum_ += v;
        }
        rebalance();
    }

    void erase(double v) {
        if (!lo_.empty() && v <= *lo_.rbegin()) {
            auto it = lo_.find(v);
            lo_.erase(it);
            lo_sum_ -= v;
        } else {
            auto it = hi_.find(v);
            hi_.erase(it);
            hi_sum_ -= v;
        }
        rebalance();
    }

    double cost() const {
        if (lo_.empty()) return 0.0;
        const double med = *lo_.rbegin();
        return (hi_sum_ - med * static_cast<double>(hi_.size())) +
               (med * static_cast<double>(lo_.size()) - lo_sum_);
    }

private:
    void rebalance() {
        while (lo_.size() > hi_.size() + 1) {
            auto it = std::prev(lo_.end());
            const double v = *it;
            lo_.erase(it);
            lo_sum_ -= v;
            hi_.insert(v);
            hi_sum_ += v;
        }
        while (hi_.size() > lo_.size()) {
            auto it = hi_.begin();
            const double v = *it;
            hi_.erase(it);
            hi_sum_ -= v;
            lo_.insert(v);
            lo_sum_ += v;
        }
    }

    std::multiset<double> lo_, hi_;
    double lo_sum_ = 0.0, hi_sum_ = 0.0;
};

struct TreeBuilder {
    const RfTrainingSet& data;
    const RfHyperparams& hp;
    Rng& rng;
    RegressionTree tree;

    struct Split {
        bool found = false;
        int feature = -1;
        double threshold = 0.0;
        double score = std::numeric_limits<double>::infinity();
    };

    static int feature_subset_size(MaxFeatures mode) {
        // ceil(sqrt(2)) = 2, ceil(log2(2)) = 1
        return mode == MaxFeatures::sqrt_features ? 2 : 1;
    }

    bool node_is_pure(const std::vector<std::size_t>& idx) const {
        const auto& first = data.targets[idx[0]].powers;
        for (std::size_t i = 1; i < idx.size(); ++i) {
            if (data.targets[idx[i]].powers != first) return false;
        }
        return true;
    }

    // Exact scan over midpoints of consecutive distinct feature values.
    // Candidates are visited feature-ascending then threshold-ascending and
    // accepted only on strict improvement, so equal-score ties resolve to the
    // lowest feature index, then the lowest threshold.
    Split find_best_split(const std::vector<std::size_t>& idx, const std::vector<int>& features) {
        const std::size_t n = idx.size();
        const std::size_t msl = static_cast<std::size_t>(hp.min_samples_leaf);
        Split best;

        std::vector<std::pair<double, std::size_t>> order(n);
        for (int f : features) {
            for (std::size_t i = 0; i < n; ++i) {
                order[i] = {data.features[idx[i]][static_cast<std::size_t>(f)], idx[i]};
            }
            std::stable_sort(order.begin(), order.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            if (order.front().first == order.back().first) continue;

            if (hp.criterion == SplitCriterion::squared) {
                scan_squared(order, f, msl, best);
            } else {
                scan_absolute(order, f, msl, best);
            }
        }
        return best;
    }

    void scan_squared(const std::vector<std::pair<double, std::size_t>>& order, int f,
                      std::size_t msl, Split& best) {
        const std::size_t n = order.size();
        std::array<double, kSocGridSize> tot_sum{}, tot_sq{}, left_sum{}, left_sq{};
        for (const auto& [v, row] : order) {
            const auto& y = data.targets[row].powers;
            for (int o = 0; o < kSocGridSize; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                tot_sum[oo] += y[oo];
                tot_sq[oo] += y[oo] * y[oo];
            }
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto& y = data.targets[order[i].second].powers;
            for (int o = 0; o < kSocGridSize; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                left_sum[oo] += y[oo];
                left_sq[oo] += y[oo] * y[oo];
            }
            if (order[i].first == order[i + 1].first) continue;
            const std::size_t nl = i + 1;
            const std::size_t nr = n - nl;
            if (nl < msl || nr < msl) continue;
            double score = 0.0;
            for (int o = 0; o < kSocGridSize; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                const double rs = tot_sum[oo] - left_sum[oo];
                const double rq = tot_sq[oo] - left_sq[oo];
                score += left_sq[oo] - left_sum[oo] * left_sum[oo] / static_cast<double>(nl);
                score += rq - rs * rs / static_cast<double>(nr);
            }
            if (score < best.score) {
                best = {true, f, 0.5 * (order[i].first + order[i + 1].first), score};
            }
        }
    }

    void scan_absolute(const std::vector<std::pair<double, std::size_t>>& order, int f,
                       std::size_t msl, Split& best) {
        const std::size_t n = order.size();
        std::vector<RunningMad> left(kSocGridSize), right(kSocGridSize);
        for (const auto& [v, row] : order) {
            const auto& y = data.targets[row].powers;
            for (int o = 0; o < kSocGridSize; ++o) right[static_cast<std::size_t>(o)].insert(y[static_cast<std::size_t>(o)]);
        }
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto& y = data.targets[order[i].second].powers;
            for (int o = 0; o < kSocGridSize; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                right[oo].erase(y[oo]);
                left[oo].insert(y[oo]);
            }
            if (order[i].first == order[i + 1].first) continue;
            const std::size_t nl = i + 1;
            const std::size_t nr = n - nl;
            if (nl < msl || nr < msl) continue;
            double score = 0.0;
            for (int o = 0; o < kSocGridSize; ++o) {
                const auto oo = static_cast<std::size_t>(o);
                score += left[oo].cost() + right[oo].cost();
            }
            if (score < best.score) {
                best = {true, f, 0.5 * (order[i].first + order[i + 1].first), score};
            }
        }
    }

    std::int32_t make_leaf(const std::vector<std::size_t>& idx) {
        std::vector<double> mean(kSocGridSize, 0.0);
        for (std::size_t i : idx) {
            const auto& y = data.targets[i].powers;
            for (int o = 0; o < kSocGridSize; ++o) mean[static_cast<std::size_t>(o)] += y[static_cast<std::size_t>(o)];
        }
        for (double& m : mean) m /= static_cast<double>(idx.size());
        tree.leaf_values.push_back(std::move(mean));
        TreeNode node;
        node.leaf = static_cast<std::int32_t>(tree.leaf_values.size() - 1);
        tree.nodes.push_back(node);
        return static_cast<std::int32_t>(tree.nodes.size() - 1);
    }

    std::int32_t build(const std::vector<std::size_t>& idx, int depth) {
        tree.depth = std::max(tree.depth, depth);
        if (depth >= hp.max_depth || idx.size() < static_cast<std::size_t>(hp.min_samples_split) ||
            node_is_pure(idx)) {
            return make_leaf(idx);
        }

        std::vector<int> features;
        const int m = feature_subset_size(hp.max_features);
        if (m >= kNumRfFeatures) {
            features = {0, 1};
        } else {
            features = {static_cast<int>(rng.bounded(kNumRfFeatures))};
        }

        const Split split = find_best_split(idx, features);
        if (!split.found) return make_leaf(idx);

        std::vector<std::size_t> left_idx, right_idx;
        left_idx.reserve(idx.size());
        right_idx.reserve(idx.size());
        for (std::size_t i : idx) {
            if (data.features[i][static_cast<std::size_t>(split.feature)] <= split.threshold) {
                left_idx.push_back(i);
            } else {
                right_idx.push_back(i);
            }
        }

        TreeNode node;
        node.feature = split.feature;
        node.threshold = split.threshold;
        tree.nodes.push_back(node);
        const auto self = static_cast<std::int32_t>(tree.nodes.size() - 1);
        const std::int32_t l = build(left_idx, depth + 1);
        const std::int32_t r = build(right_idx, depth + 1);
        tree.nodes[static_cast<std::size_t>(self)].left = l;
        tree.nodes[static_cast<std::size_t>(self)].right = r;
        return self;
    }
};

}  // namespace detail

struct RfModel {
    std::vector<RegressionTree> trees;
    RfHyperparams hyperparams;
    std::array<std::string, kNumRfFeatures> feature_names{"temp_at_arrival", "capacity_kwh"};
    std::vector<double> target_min;  // per-SoC bounds over the training targets
    std::vector<double> target_max;

    SocGridProfile predict(double temp_at_arrival, double capacity_kwh) const {
        if (trees.empty()) throw ModelError("random forest is not trained");
        const std::array<double, kNumRfFeatures> x{temp_at_arrival, capacity_kwh};
        std::array<double, kSocGridSize> acc{};
        for (const auto& tree : trees) {
            const auto& leaf = tree.predict(x);
            for (int o = 0; o < kSocGridSize; ++o) acc[static_cast<std::size_t>(o)] += leaf[static_cast<std::size_t>(o)];
        }
        SocGridProfile out;
        for (int o = 0; o < kSocGridSize; ++o) {
            out[o] = std::max(acc[static_cast<std::size_t>(o)] / static_cast<double>(trees.size()), 0.0);
        }
        return out;
    }
};

inline RfModel train_unconnected_rf(const RfTrainingSet& data, const RfHyperparams& hp,
                                    std::uint64_t seed, unsigned max_threads = 0) {
    hp.validate();
    const std::size_t n = data.size();
    if (n == 0) throw DataError("empty training set");
    if (data.targets.size() != n) throw DataError("feature/target row count mismatch");
    for (const auto& x : data.features) {
        if (!std::isfinite(x[0]) || !std::isfinite(x[1])) throw DataError("non-finite feature");
    }

    RfModel model;
    model.hyperparams = hp;
    model.target_min.assign(kSocGridSize, std::numeric_limits<double>::infinity());
    model.target_max.assign(kSocGridSize, -std::numeric_limits<double>::infinity());
    for (const auto& t : data.targets) {
        for (int o = 0; o < kSocGridSize; ++o) {
            const auto oo = static_cast<std::size_t>(o);
            model.target_min[oo] = std::min(model.target_min[oo], t.powers[oo]);
            model.target_max[oo] = std::max(model.target_max[oo], t.powers[oo]);
        }
    }

    model.trees.resize(static_cast<std::size_t>(hp.n_estimators));
    parallel_for(
        static_cast<std::size_t>(hp.n_estimators),
        [&](std::size_t t) {
            Rng rng(Rng::derive(seed, t));
            std::vector<std::size_t> idx(n);
            if (hp.bootstrap) {
                for (std::size_t i = 0; i < n; ++i) idx[i] = rng.bounded(n);
            } else {
                for (std::size_t i = 0; i < n; ++i) idx[i] = i;
            }
            detail::TreeBuilder builder{data, hp, rng, {}};
            builder.build(idx, 0);
            model.trees[t] = std::move(builder.tree);
        },
        max_threads);
    return model;
}

inline SocGridProfile predict_unconnected(const RfModel& model, double temp_at_arrival,
                                          double capacity_kwh) {
    return model.predict(temp_at_arrival, capacity_kwh);
}

// ---------------------------------------------------------------------------
// Seeded random-search tuning with fold-level pruning
// ---------------------------------------------------------------------------

struct RfSearchSpace {
    int estimators_lo = 100, estimators_hi = 1000, estimators_step = 50;
    int depth_lo = 2, depth_hi = 50;
    int min_split_lo = 2, min_split_hi = 20;
    int min_leaf_lo = 1, min_leaf_hi = 20;

    RfHyperparams sample(Rng& rng) const {
        RfHyperparams hp;
        const int n_steps = (estimators_hi - estimators_lo) / estimators_step + 1;
        hp.n_estimators = estimators_lo + estimators_step * rng.uniform_int(0, n_steps - 1);
        hp.max_depth = rng.uniform_int(depth_lo, depth_hi);
        hp.min_samples_split = rng.uniform_int(min_split_lo, min_split_hi);
        hp.min_samples_leaf = rng.uniform_int(min_leaf_lo, min_leaf_hi);
        hp.max_features = rng.uniform_int(0, 1) == 0 ? MaxFeatures::sqrt_features
                                                     : MaxFeatures::log2_features;
        hp.bootstrap = rng.uniform_int(0, 1) == 1;
        hp.criterion =
            rng.uniform_int(0, 1) == 0 ? SplitCriterion::squared : SplitCriterion::absolute;
        return hp;
    }
};

struct RfTrialRecord {
    int trial = 0;
    RfHyperparams hp;
    double score = std::numeric_limits<double>::quiet_NaN();  // partial mean when pruned
    bool pruned = false;
    int folds_completed = 0;
};

struct RfTuneResult {
    RfHyperparams best;
    double best_score = std::numeric_limits<double>::quiet_NaN();
    int best_trial = -1;
    std::vector<RfTrialRecord> trials;
};

// Uniform random configurations; a trial is abandoned when its mean over the
// folds completed so far exceeds the best full score by more than 20 %.
inline RfTuneResult tune_rf(const RfTrainingSet& data, const RfSearchSpace& space, int n_trials,
                            int k_folds, std::uint64_t seed, unsigned max_threads = 0) {
    if (n_trials < 1) throw ConfigError("n_trials must be >= 1");
    if (k_folds < 2) throw ConfigError("k_folds must be >= 2");
    const std::size_t n = data.size();
    if (n < static_cast<std::size_t>(k_folds)) throw DataError("need at least k_folds samples");

    const auto fold_of = make_cv_folds(n, k_folds, Rng::derive(seed, 0xCF01D));

    RfTuneResult result;
    double best_full = std::numeric_limits<double>::infinity();
    for (int trial = 0; trial < n_trials; ++trial) {
        Rng sampler(Rng::derive(seed, 0x300000 + static_cast<std::uint64_t>(trial)));
        RfTrialRecord rec;
        rec.trial = trial;
        rec.hp = space.sample(sampler);

        double score_sum = 0.0;
        bool pruned = false;
        int folds_done = 0;
        for (int f = 0; f < k_folds; ++f) {
            RfTrainingSet train;
            std::vector<std::size_t> held;
            for (std::size_t i = 0; i < n; ++i) {
                if (fold_of[i] == f) {
                    held.push_back(i);
                } else {
                    train.features.push_back(data.features[i]);
                    train.targets.push_back(data.targets[i]);
                }
            }
            const RfModel model = train_unconnected_rf(
                train, rec.hp,
                Rng::derive(seed, 0x400000 + static_cast<std::uint64_t>(trial) * 64 +
                                      static_cast<std::uint64_t>(f)),
                max_threads);
            double fold_mae = 0.0;
            for (std::size_t i : held) {
                const SocGridProfile pred = model.predict(data.features[i][0], data.features[i][1]);
                double mae = 0.0;
                for (int o = 0; o < kSocGridSize; ++o) {
                    mae += std::abs(pred[o] - data.targets[i][o]);
                }
                fold_mae += mae / kSocGridSize;
            }
            fold_mae /= static_cast<double>(held.size());
            score_sum += fold_mae;
            ++folds_done;
            const double partial_mean = score_sum / folds_done;
            if (std::isfinite(best_full) && partial_mean > 1.2 * best_full &&
                folds_done < k_folds) {
                pruned = true;
                break;
            }
        }
        rec.folds_completed = folds_done;
        rec.pruned = pruned;
        rec.score = score_sum / folds_done;
        if (!pruned && rec.score < best_full) {
            best_full = rec.score;
            result.best = rec.hp;
            result.best_score = rec.score;
            result.best_trial = trial;
        }
        result.trials.push_back(rec);
    }
    return result;
}

}  // namespace evprof
