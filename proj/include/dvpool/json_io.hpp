#pragma once

// JSON schemas for configs, specs, manifests and reports. Every reader
// rejects unknown keys.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "dvpool/error.hpp"
#include "dvpool/metrics.hpp"
#include "dvpool/pooling.hpp"
#include "dvpool/probe.hpp"
#include "dvpool/synth.hpp"

namespace dvpool {

using Json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                                std::string_view what) {
    require(j.is_object(), std::string(what) + ": expected a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto k : allowed) known = known || item.key() == k;
        require(known, std::string(what) + ": unknown key '" + item.key() + "'");
    }
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback, std::string_view what) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ContractViolation(std::string(what) + ": bad value for '" + key + "'");
    }
}

inline PyramidLevels levels_from_json(const Json& j, const char* key) {
    if (!j.contains(key)) return {};
    const auto& v = j.at(key);
    require(v.is_array(), std::string("dvpp config: '") + key + "' must be an array of integers");
    std::vector<int> levels;
    for (const auto& e : v) {
        require(e.is_number_integer(), std::string("dvpp config: '") + key + "' must hold integers");
        levels.push_back(e.get<int>());
    }
    return PyramidLevels(std::move(levels));
}

}  // namespace detail

inline Variant variant_from_string(std::string_view s) {
    for (auto v : kAllVariants)
        if (to_string(v) == s) return v;
    throw ContractViolation("unknown dvpp variant '" + std::string(s) + "'");
}

inline Reduction reduction_from_string(std::string_view s) {
    if (s == "avg") return Reduction::average;
    if (s == "max") return Reduction::max;
    throw ContractViolation("unknown reduction '" + std::string(s) + "' (expected avg or max)");
}

/// {"variant": "sc-c-ser", "sp": [4], "ccp": [2], "aux": [3], "reduction": "avg"}
inline Json to_json(const DvppConfig& c) {
    return Json{{"variant", std::string(to_string(c.variant))},
                {"sp", c.sp_levels.values()},
                {"ccp", c.ccp_levels.values()},
                {"aux", c.aux_levels.values()},
                {"reduction", std::string(to_string(c.reduction))}};
}

inline DvppConfig dvpp_config_from_json(const Json& j) {
    detail::reject_unknown_keys(j, {"variant", "sp", "ccp", "aux", "reduction"}, "dvpp config");
    detail::require(j.contains("variant") && j.at("variant").is_string(),
                    "dvpp config: 'variant' (string) is required");
    DvppConfig c;
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.sp_levels = detail::levels_from_json(j, "sp");
    c.ccp_levels = detail::levels_from_json(j, "ccp");
    c.aux_levels = detail::levels_from_json(j, "aux");
    c.reduction = reduction_from_string(detail::get_or<std::string>(j, "reduction", "avg", "dvpp config"));
    c.validate();
    return c;
}

inline Json to_json(const TrainSpec& s) {
    return Json{{"learning_rate", s.learning_rate}, {"epochs", s.epochs},
                {"batch_size", s.batch_size},       {"l2", s.l2},
                {"seed", s.seed},                   {"standardize", s.standardize}};
}

inline TrainSpec train_spec_from_json(const Json& j) {
    constexpr std::string_view what = "train spec";
    detail::reject_unknown_keys(j, {"learning_rate", "epochs", "batch_size", "l2", "seed", "standardize"},
                                what);
    TrainSpec d;
    TrainSpec s;
    s.learning_rate = detail::get_or(j, "learning_rate", d.learning_rate, what);
    s.epochs = detail::get_or(j, "epochs", d.epochs, what);
    s.batch_size = detail::get_or(j, "batch_size", d.batch_size, what);
    s.l2 = detail::get_or(j, "l2", d.l2, what);
    s.seed = detail::get_or(j, "seed", d.seed, what);
    s.standardize = detail::get_or(j, "standardize", d.standardize, what);
    s.validate();
    return s;
}

inline Json to_json(const SynthSpec& s) {
    return Json{{"classes", s.classes}, {"channels", s.channels},
                {"spatial", s.spatial}, {"samples_per_class", s.samples_per_class},
                {"alpha", s.alpha},     {"beta", s.beta},
                {"sigma", s.sigma},     {"seed", s.seed}};
}

inline SynthSpec synth_spec_from_json(const Json& j) {
    constexpr std::string_view what = "synth spec";
    detail::reject_unknown_keys(
        j, {"classes", "channels", "spatial", "samples_per_class", "alpha", "beta", "sigma", "seed"}, what);
    SynthSpec d;
    SynthSpec s;
    s.classes = detail::get_or(j, "classes", d.classes, what);
    s.channels = detail::get_or(j, "channels", d.channels, what);
    s.spatial = detail::get_or(j, "spatial", d.spatial, what);
    s.samples_per_class = detail::get_or(j, "samples_per_class", d.samples_per_class, what);
    s.alpha = detail::get_or(j, "alpha", d.alpha, what);
    s.beta = detail::get_or(j, "beta", d.beta, what);
    s.sigma = detail::get_or(j, "sigma", d.sigma, what);
    s.seed = detail::get_or(j, "seed", d.seed, what);
    s.validate();
    return s;
}

inline Json to_json(const SynthManifest& m) {
    return Json{{"spec", to_json(m.spec)},
                {"signatures", m.signatures},
                {"templates", m.templates}};
}

/// Probe sidecar: dimensions, standardization statistics, training spec.
inline Json probe_sidecar(const LinearProbe& p, const TrainSpec& spec) {
    return Json{{"D", p.dims()},
                {"K", p.classes()},
                {"standardize", !p.standardizer.empty()},
                {"mean", p.standardizer.mean},
                {"scale", p.standardizer.scale},
                {"spec", to_json(spec)},
                {"seed", spec.seed}};
}

inline Json to_json(const ReliabilityTable& t) {
    Json bins = Json::array();
    for (const auto& b : t.bins)
        bins.push_back(Json{{"lower", b.lower},
                            {"upper", b.upper},
                            {"count", b.count},
                            {"confidence", b.mean_confidence},
                            {"accuracy", b.accuracy}});
    return bins;
}

/// x * 100 rounded to two decimals, the table format of reports.
inline double percent(double x) { return std::round(x * 10000.0) / 100.0; }

inline std::string_view to_string(KappaWeighting w) {
    return w == KappaWeighting::quadratic ? "quadratic" : "unweighted";
}

inline KappaWeighting kappa_weighting_from_string(std::string_view s) {
    if (s == "unweighted") return KappaWeighting::unweighted;
    if (s == "quadratic") return KappaWeighting::quadratic;
    throw ContractViolation("unknown kappa weighting '" + std::string(s) + "'");
}

/// Percent-formatted metric report; unrounded [0, 1] values go under "raw".
inline Json metrics_report(const PredictionSet& p, std::size_t bins, KappaWeighting weighting) {
    const auto table = ece(p, bins);
    const auto kappa = cohen_kappa(p, weighting);
    const Json raw{{"acc", accuracy(p)},   {"bacc", balanced_accuracy(p)},
                   {"mf1", macro_f1(p)},   {"kappa", kappa.value},
                   {"ece", table.ece},     {"brier", brier(p)}};
    Json report;
    for (const auto& item : raw.items()) report[item.key()] = percent(item.value().get<double>());
    report["bins"] = to_json(table);
    report["ece_bins"] = bins;
    report["kappa_weighting"] = std::string(to_string(weighting));
    report["kappa_degenerate"] = kappa.degenerate;
    report["samples"] = p.samples();
    report["classes"] = p.classes();
    report["raw"] = raw;
    return report;
}

}  // namespace dvpool
