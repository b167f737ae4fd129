#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "netsight/adapt.hpp"
#include "netsight/checkpoint.hpp"
#include "netsight/metrics.hpp"
#include "netsight/shift_detect.hpp"
#include "netsight/shift_explain.hpp"

namespace netsight {

using Json = nlohmann::ordered_json;

inline void to_json(Json& j, const ShiftReport& r) {
    j = Json{{"kind", "shift_report"},
             {"kl_statistic", r.kl_statistic},
             {"p_value", r.p_value},
             {"shifted", r.shifted},
             {"n_perm", r.permutations},
             {"alpha", r.alpha},
             {"bins", r.bins},
             {"n_old", r.n_old},
             {"n_new", r.n_new},
             {"seed", r.seed}};
}

inline void from_json(const Json& j, ShiftReport& r) {
    j.at("kl_statistic").get_to(r.kl_statistic);
    j.at("p_value").get_to(r.p_value);
    j.at("shifted").get_to(r.shifted);
    j.at("n_perm").get_to(r.permutations);
    j.at("alpha").get_to(r.alpha);
    j.at("bins").get_to(r.bins);
    j.at("n_old").get_to(r.n_old);
    j.at("n_new").get_to(r.n_new);
    j.at("seed").get_to(r.seed);
}

inline void to_json(Json& j, const ExplainLosses& l) {
    j = Json{{"accuracy", l.accuracy},
             {"mass", l.mass},
             {"computation", l.computation},
             {"determinism", l.determinism},
             {"objective", l.objective}};
}

inline void from_json(const Json& j, ExplainLosses& l) {
    j.at("accuracy").get_to(l.accuracy);
    j.at("mass").get_to(l.mass);
    j.at("computation").get_to(l.computation);
    j.at("determinism").get_to(l.determinism);
    j.at("objective").get_to(l.objective);
}

inline void to_json(Json& j, const ExplainConfig& c) {
    j = Json{{"lambda1", c.lambda1},
             {"lambda2", c.lambda2},
             {"iterations", c.iterations},
             {"learning_rate", c.learning_rate},
             {"rounding_threshold", c.rounding_threshold},
             {"bins", c.bins},
             {"init_jitter", c.init_jitter},
             {"seed", c.seed}};
}

inline void to_json(Json& j, const ExplanationResult& r) {
    j = Json{{"kind", "explanation"},
             {"selected_old", r.selected_old},
             {"selected_new", r.selected_new},
             {"relaxed", r.relaxed},
             {"rounded", r.rounded},
             {"iterations_run", r.iterations_run},
             {"coverage_repairs", r.coverage_repairs},
             {"mean_new_mask", r.mean_new_mask}};
}

inline void from_json(const Json& j, ExplanationResult& r) {
    j.at("selected_old").get_to(r.selected_old);
    j.at("selected_new").get_to(r.selected_new);
    j.at("relaxed").get_to(r.relaxed);
    j.at("rounded").get_to(r.rounded);
    j.at("iterations_run").get_to(r.iterations_run);
    j.at("coverage_repairs").get_to(r.coverage_repairs);
    j.at("mean_new_mask").get_to(r.mean_new_mask);
}

inline void to_json(Json& j, const AdaptReport& r) {
    j = Json{{"kind", "adapt_report"},
             {"epochs_run", r.epochs_run},
             {"contrastive_trace", r.contrastive_trace},
             {"kd_trace", r.kd_trace},
             {"gamma", r.gamma},
             {"kd_share", r.kd_share},
             {"samples", r.samples},
             {"skipped_contrastive", r.skipped_contrastive}};
}

inline void to_json(Json& j, const ConfusionMatrix& c) {
    j = Json{{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}};
}

inline void from_json(const Json& j, ConfusionMatrix& c) {
    j.at("tp").get_to(c.tp);
    j.at("fp").get_to(c.fp);
    j.at("tn").get_to(c.tn);
    j.at("fn").get_to(c.fn);
}

inline void to_json(Json& j, const MetricsReport& m) {
    j = Json{{"f1", m.f1},     {"accuracy", m.accuracy}, {"bacc", m.bacc}, {"mcc", m.mcc},
             {"tpr", m.tpr},   {"tnr", m.tnr},           {"fpr", m.fpr}};
}

inline void from_json(const Json& j, MetricsReport& m) {
    j.at("f1").get_to(m.f1);
    j.at("accuracy").get_to(m.accuracy);
    j.at("bacc").get_to(m.bacc);
    j.at("mcc").get_to(m.mcc);
    j.at("tpr").get_to(m.tpr);
    j.at("tnr").get_to(m.tnr);
    j.at("fpr").get_to(m.fpr);
}

/// One pretty-printed document per file, newline terminated.
[[nodiscard]] inline std::string render(const Json& j) { return j.dump(2) + "\n"; }

inline void write_report(const std::filesystem::path& path, const Json& j) { write_file_atomic(path, render(j)); }

[[nodiscard]] inline Json read_report(const std::filesystem::path& path) {
    try {
        return Json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": not a valid report: " + e.what());
    }
}

}  // namespace netsight
