#pragma once

#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "evprof/core.hpp"
#include "evprof/gmm.hpp"
#include "evprof/random_forest.hpp"
#include "evprof/refiner.hpp"

namespace evprof {

using Json = nlohmann::json;

inline void save_json(const std::string& path, const Json& j, int indent = -1) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << j.dump(indent) << '\n';
}

inline Json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    Json j;
    try {
        in >> j;
    } catch (const Json::parse_error& e) {
        throw DataError("bad JSON in '" + path + "': " + e.what());
    }
    return j;
}

// ---------------------------------------------------------------------------
// GMM
// ---------------------------------------------------------------------------

inline TargetKind target_kind_from_string(const std::string& s) {
    if (s == "capacity") return TargetKind::capacity;
    if (s == "arrival_soc") return TargetKind::arrival_soc;
    if (s == "departure_soc") return TargetKind::departure_soc;
    throw ModelError("unknown target_kind '" + s + "'");
}

inline Json gmm_to_json(const GmmModel& model) {
    Json components = Json::array();
    for (const auto& c : model.components) {
        components.push_back({{"weight", c.weight}, {"mean", c.mean}, {"variance", c.variance}});
    }
    return {{"target_kind", to_string(model.target_kind)}, {"components", components}};
}

inline GmmModel gmm_from_json(const Json& j) {
    GmmModel model;
    model.target_kind = target_kind_from_string(j.at("target_kind").get<std::string>());
    for (const auto& c : j.at("components")) {
        model.components.push_back(
            {c.at("weight").get<double>(), c.at("mean").get<double>(),
             c.at("variance").get<double>()});
    }
    if (model.components.empty()) throw ModelError("GMM with no components");
    return model;
}

inline Json hourly_soc_to_json(const HourlySocModels& models) {
    auto side = [](const std::array<std::optional<GmmModel>, 24>& hourly,
                   const GmmModel& fallback) {
        Json arr = Json::array();
        for (const auto& slot : hourly) {
            arr.push_back(slot ? gmm_to_json(*slot) : Json());
        }
        return Json{{"hourly", arr}, {"fallback", gmm_to_json(fallback)}};
    };
    return {{"arrival", side(models.arrival, models.arrival_fallback)},
            {"departure", side(models.departure, models.departure_fallback)}};
}

inline HourlySocModels hourly_soc_from_json(const Json& j) {
    HourlySocModels models;
    auto side = [](const Json& sj, std::array<std::optional<GmmModel>, 24>& hourly,
                   GmmModel& fallback) {
        fallback = gmm_from_json(sj.at("fallback"));
        const auto& arr = sj.at("hourly");
        if (arr.size() != 24) throw ModelError("hourly model array must have 24 entries");
        for (std::size_t h = 0; h < 24; ++h) {
            if (!arr[h].is_null()) hourly[h] = gmm_from_json(arr[h]);
        }
    };
    side(j.at("arrival"), models.arrival, models.arrival_fallback);
    side(j.at("departure"), models.departure, models.departure_fallback);
    return models;
}

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

inline Json rf_hyperparams_to_json(const RfHyperparams& hp) {
    return {{"n_estimators", hp.n_estimators},
            {"max_depth", hp.max_depth},
            {"min_samples_split", hp.min_samples_split},
            {"min_samples_leaf", hp.min_samples_leaf},
            {"max_features", to_string(hp.max_features)},
            {"bootstrap", hp.bootstrap},
            {"criterion", to_string(hp.criterion)}};
}

inline RfHyperparams rf_hyperparams_from_json(const Json& j) {
    RfHyperparams hp;
    hp.n_estimators = j.at("n_estimators").get<int>();
    hp.max_depth = j.at("max_depth").get<int>();
    hp.min_samples_split = j.at("min_samples_split").get<int>();
    hp.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    const auto mf = j.at("max_features").get<std::string>();
    if (mf == "sqrt") {
        hp.max_features = MaxFeatures::sqrt_features;
    } else if (mf == "log2") {
        hp.max_features = MaxFeatures::log2_features;
    } else {
        throw ModelError("unknown max_features '" + mf + "'");
    }
    hp.bootstrap = j.at("bootstrap").get<bool>();
    const auto cr = j.at("criterion").get<std::string>();
    if (cr == "squared") {
        hp.criterion = SplitCriterion::squared;
    } else if (cr == "absolute") {
        hp.criterion = SplitCriterion::absolute;
    } else {
        throw ModelError("unknown criterion '" + cr + "'");
    }
    return hp;
}

inline Json rf_to_json(const RfModel& model) {
    Json trees = Json::array();
    for (const auto& tree : model.trees) {
        Json nodes = Json::array();
        for (const auto& n : tree.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.leaf});
        }
        trees.push_back({{"nodes", nodes}, {"leaves", tree.leaf_values}, {"depth", tree.depth}});
    }
    return {{"format_version", 1},
            {"hyperparams", rf_hyperparams_to_json(model.hyperparams)},
            {"feature_names", model.feature_names},
            {"target_min", model.target_min},
            {"target_max", model.target_max},
            {"trees", trees}};
}

inline RfModel rf_from_json(const Json& j) {
    if (j.at("format_version").get<int>() != 1) throw ModelError("unsupported RF model version");
    RfModel model;
    model.hyperparams = rf_hyperparams_from_json(j.at("hyperparams"));
    const auto names = j.at("feature_names").get<std::vector<std::string>>();
    if (names.size() == model.feature_names.size()) {
        for (std::size_t i = 0; i < names.size(); ++i) model.feature_names[i] = names[i];
    }
    model.target_min = j.at("target_min").get<std::vector<double>>();
    model.target_max = j.at("target_max").get<std::vector<double>>();
    for (const auto& tj : j.at("trees")) {
        RegressionTree tree;
        for (const auto& nj : tj.at("nodes")) {
            TreeNode n;
            n.feature = nj.at(0).get<int>();
            n.threshold = nj.at(1).get<double>();
            n.left = nj.at(2).get<std::int32_t>();
            n.right = nj.at(3).get<std::int32_t>();
            n.leaf = nj.at(4).get<std::int32_t>();
            tree.nodes.push_back(n);
        }
        tree.leaf_values = tj.at("leaves").get<std::vector<std::vector<double>>>();
        tree.depth = tj.at("depth").get<int>();
        if (tree.nodes.empty()) throw ModelError("tree with no nodes");
        model.trees.push_back(std::move(tree));
    }
    if (model.trees.empty()) throw ModelError("RF model with no trees");
    return model;
}

// ---------------------------------------------------------------------------
// History matrix
// ---------------------------------------------------------------------------

inline Json history_matrix_to_json(const HistoryMatrix& matrix) {
    Json rows = Json::array();
    for (const auto& row : matrix.rows) {
        rows.push_back({{"session_id", row.session_id},
                        {"capacity_kwh", row.capacity_kwh},
                        {"profile", row.profile.powers}});
    }
    return {{"rows", rows}, {"skipped", matrix.skipped}};
}

inline HistoryMatrix history_matrix_from_json(const Json& j) {
    HistoryMatrix matrix;
    matrix.skipped = j.value("skipped", std::size_t{0});
    for (const auto& rj : j.at("rows")) {
        HistoryRow row;
        row.session_id = rj.at("session_id").get<std::string>();
        row.capacity_kwh = rj.at("capacity_kwh").get<double>();
        const auto powers = rj.at("profile").get<std::vector<double>>();
        if (powers.size() != static_cast<std::size_t>(kSocGridSize)) {
            throw ModelError("history row profile must have 101 values");
        }
        for (int s = 0; s < kSocGridSize; ++s) row.profile[s] = powers[static_cast<std::size_t>(s)];
        matrix.rows.push_back(std::move(row));
    }
    if (matrix.rows.empty()) throw ModelError("history matrix with no rows");
    return matrix;
}

}  // namespace evprof
