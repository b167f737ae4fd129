#pragma once

#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "netsight/adapt.hpp"
#include "netsight/checkpoint.hpp"
#include "netsight/config.hpp"
#include "netsight/contrastive.hpp"
#include "netsight/drift_sim.hpp"
#include "netsight/hash.hpp"
#include "netsight/log.hpp"
#include "netsight/metrics.hpp"
#include "netsight/nn.hpp"
#include "netsight/pseudo_label.hpp"
#include "netsight/report.hpp"
#include "netsight/shift_detect.hpp"
#include "netsight/shift_explain.hpp"

namespace netsight {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "1.0.0";

/// UTC time in ISO-8601. SOURCE_DATE_EPOCH, when set, pins it for reproducible runs.
[[nodiscard]] inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH"); e && *e) {
        try {
            t = static_cast<std::time_t>(std::stoll(e));
        } catch (const std::exception&) {
            throw ConfigError("SOURCE_DATE_EPOCH is not an integer");
        }
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Record of one command invocation: config echo, hashed inputs, stage
/// timestamps and every produced file with its content hash.
class RunManifest {
public:
    RunManifest(std::string command, Json config) : command_(std::move(command)), config_(std::move(config)) {}

    void input(const std::string& role, const fs::path& path) {
        inputs_.push_back({{"role", role}, {"path", path.string()}, {"sha256", sha256_file(path)}});
    }

    void stage(const std::string& name) { stages_.push_back({{"stage", name}, {"time", utc_timestamp()}}); }

    void artifact(const fs::path& dir, const fs::path& file, const std::string& kind) {
        artifacts_.push_back(
            {{"kind", kind}, {"path", fs::relative(file, dir).generic_string()}, {"sha256", sha256_file(file)}});
    }

    void link(const std::string& key, Json value) { links_[key] = std::move(value); }

    [[nodiscard]] Json json() const {
        return Json{{"kind", "run_manifest"},
                    {"command", command_},
                    {"versions", {{"netsight", kVersion}, {"checkpoint_format", kCheckpointVersion}}},
                    {"config", config_},
                    {"inputs", inputs_},
                    {"stages", stages_},
                    {"artifacts", artifacts_},
                    {"links", links_}};
    }

    fs::path write(const fs::path& dir) const {
        const auto path = dir / ("manifest." + command_ + ".json");
        write_report(path, json());
        return path;
    }

private:
    std::string command_;
    Json config_;
    Json inputs_ = Json::array();
    Json stages_ = Json::array();
    Json artifacts_ = Json::array();
    Json links_ = Json::object();
};

struct CommandResult {
    std::vector<fs::path> artifacts;
    Json summary;
};

namespace detail {

inline fs::path require_file(const std::string& key, const std::string& value) {
    if (value.empty()) throw ConfigError("missing required config key '" + key + "'");
    const fs::path p(value);
    if (!fs::is_regular_file(p)) throw DataError(key + ": no such file '" + value + "'");
    return p;
}

inline fs::path prepare_out(const PipelineConfig& cfg) {
    const fs::path out(cfg.out);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
    return out;
}

inline void check_dim(const Dataset& d, const AutoencoderModel& m, const std::string& what) {
    if (d.dim != m.input_dim()) {
        throw DataError(what + " has " + std::to_string(d.dim) + " features, checkpoint expects " +
                        std::to_string(m.input_dim()));
    }
}

inline const LabelerState& require_labeler(const Checkpoint& ck) {
    if (!ck.labeler) throw DataError("checkpoint carries no fitted labeler");
    return *ck.labeler;
}

inline Json labeler_summary(const LabelerState& st) {
    auto comp = [](const ComponentDistributions& d) {
        return Json{{"normal", {{"mu", d.normal.mu}, {"sigma", d.normal.sigma}}},
                    {"abnormal", {{"mu", d.abnormal.mu}, {"sigma", d.abnormal.sigma}}},
                    {"kl_score", d.kl_score}};
    };
    return Json{{"selected", to_string(st.selected)},
                {"prior_normal", st.prior_normal},
                {"encoder", comp(st.encoder)},
                {"decoder", comp(st.decoder)}};
}

inline Dataset concat(const Dataset& a, const Dataset& b) {
    Dataset out = a;
    out.samples.insert(out.samples.end(), b.samples.begin(), b.samples.end());
    return out;
}

}  // namespace detail

struct SavedCheckpoint {
    fs::path path;
    std::string sha256;
};

/// Writes `ck` as <dir>/<stem>-<first 12 hex of its SHA-256>.nsck. An existing
/// file with that name already holds identical bytes and is left alone.
inline SavedCheckpoint save_versioned_checkpoint(const Checkpoint& ck, const fs::path& dir,
                                                 const std::string& stem = "model") {
    const auto bytes = serialize_checkpoint(ck);
    const auto h = sha256_hex(bytes);
    const auto path = dir / (stem + "-" + h.substr(0, 12) + ".nsck");
    if (!fs::exists(path)) write_file_atomic(path, bytes);
    return {path, h};
}

struct Evaluation {
    ConfusionMatrix confusion;
    MetricsReport metrics;
};

[[nodiscard]] inline Evaluation evaluate(const AutoencoderModel& model, const LabelerState& st, const Dataset& d) {
    const auto pred = pseudo_label_batch(d, model, st);
    const auto cm = confusion(pred, d.labels());
    return {cm, compute_metrics(cm)};
}

/// Trains an autoencoder and fits the labeler on a labeled window.
struct TrainedModel {
    Checkpoint checkpoint;
    Vec loss_trace;
};

[[nodiscard]] inline TrainedModel train_model(const PipelineConfig& cfg, const Dataset& train_set) {
    auto model = make_autoencoder(cfg.architecture(train_set.dim), cfg.seed);
    auto res = train(std::move(model), train_set, cfg.contrastive);
    auto st = fit_labeler(res.model, train_set);
    return {{std::move(res.model), std::move(st)}, std::move(res.loss_trace)};
}

// Commands ------------------------------------------------------------------

inline CommandResult cmd_train(const PipelineConfig& cfg) {
    const auto path = detail::require_file("data.train", cfg.data.train);
    const auto data = read_csv_table(path, true).data;
    data.validate();
    const auto out = detail::prepare_out(cfg);
    RunManifest man("train", config_echo(cfg));
    man.input("train", path);
    man.stage("train:start");
    const auto tm = train_model(cfg, data);
    man.stage("train:done");
    const auto saved = save_versioned_checkpoint(tm.checkpoint, out);
    const Json rep{{"kind", "train_report"},
                   {"checkpoint", saved.path.filename().string()},
                   {"checkpoint_sha256", saved.sha256},
                   {"samples", data.size()},
                   {"loss_trace", tm.loss_trace},
                   {"labeler", detail::labeler_summary(*tm.checkpoint.labeler)}};
    const auto rp = out / "train_report.json";
    write_report(rp, rep);
    man.artifact(out, saved.path, "checkpoint");
    man.artifact(out, rp, "train_report");
    const auto mp = man.write(out);
    return {{saved.path, rp, mp}, rep};
}

inline CommandResult cmd_label(const PipelineConfig& cfg) {
    const auto ckp = detail::require_file("data.checkpoint", cfg.data.checkpoint);
    const auto inp = detail::require_file("data.input", cfg.data.input);
    const auto ck = read_checkpoint(ckp);
    const auto& st = detail::require_labeler(ck);
    const auto table = read_csv_table(inp, false);
    detail::check_dim(table.data, ck.model, "input");
    if (table.data.empty()) warn("label: input has no data rows");
    const auto out = detail::prepare_out(cfg);
    RunManifest man("label", config_echo(cfg));
    man.input("checkpoint", ckp);
    man.input("input", inp);
    man.stage("label:start");
    std::string text = table.header + ",pseudo_label\n";
    std::size_t abnormal = 0;
    for (std::size_t i = 0; i < table.data.size(); ++i) {
        const auto y = pseudo_label(table.data.samples[i].features, ck.model, st);
        abnormal += y == Label::abnormal;
        text += table.lines[i] + "," + std::to_string(to_int(y)) + "\n";
    }
    const auto op = out / "labeled.csv";
    write_file_atomic(op, text);
    man.stage("label:done");
    man.artifact(out, op, "labeled_csv");
    const auto mp = man.write(out);
    return {{op, mp}, Json{{"rows", table.data.size()}, {"abnormal", abnormal}}};
}

inline CommandResult cmd_detect(const PipelineConfig& cfg) {
    const auto ckp = detail::require_file("data.checkpoint", cfg.data.checkpoint);
    const auto oldp = detail::require_file("data.old", cfg.data.old_window);
    const auto newp = detail::require_file("data.new", cfg.data.new_window);
    const auto ck = read_checkpoint(ckp);
    const auto& st = detail::require_labeler(ck);
    const auto old_w = read_csv_table(oldp, false).data;
    const auto new_w = read_csv_table(newp, false).data;
    detail::check_dim(old_w, ck.model, "old window");
    detail::check_dim(new_w, ck.model, "new window");
    const auto out = detail::prepare_out(cfg);
    RunManifest man("detect", config_echo(cfg));
    man.input("checkpoint", ckp);
    man.input("old", oldp);
    man.input("new", newp);
    man.stage("detect:start");
    const auto rep = permutation_test(posteriors(old_w, ck.model, st), posteriors(new_w, ck.model, st), cfg.shift);
    man.stage("detect:done");
    const auto rp = out / "shift_report.json";
    write_report(rp, Json(rep));
    man.artifact(out, rp, "shift_report");
    const auto mp = man.write(out);
    return {{rp, mp}, Json(rep)};
}

inline CommandResult cmd_explain(const PipelineConfig& cfg) {
    const auto ckp = detail::require_file("data.checkpoint", cfg.data.checkpoint);
    const auto oldp = detail::require_file("data.old", cfg.data.old_window);
    const auto newp = detail::require_file("data.new", cfg.data.new_window);
    std::optional<fs::path> trigger;
    if (!cfg.force) {
        trigger = detail::require_file("data.shift_report", cfg.data.shift_report);
        ShiftReport sr;
        try {
            from_json(read_report(*trigger), sr);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(trigger->string() + ": malformed shift report: " + e.what());
        }
        if (!sr.shifted) throw ConfigError("explain: shift report says no shift; pass --force to explain anyway");
    } else if (!cfg.data.shift_report.empty()) {
        trigger = detail::require_file("data.shift_report", cfg.data.shift_report);
    }
    const auto ck = read_checkpoint(ckp);
    const auto& st = detail::require_labeler(ck);
    const auto old_w = read_csv_table(oldp, false).data;
    const auto new_w = read_csv_table(newp, false).data;
    detail::check_dim(old_w, ck.model, "old window");
    detail::check_dim(new_w, ck.model, "new window");
    const auto out = detail::prepare_out(cfg);
    RunManifest man("explain", config_echo(cfg));
    man.input("checkpoint", ckp);
    man.input("old", oldp);
    man.input("new", newp);
    if (trigger) man.input("shift_report", *trigger);
    man.stage("explain:start");
    const auto ex = explain(posteriors(old_w, ck.model, st), posteriors(new_w, ck.model, st), cfg.explain);
    man.stage("explain:done");

    Json rep = ex;
    rep["config"] = cfg.explain;
    rep["seed"] = cfg.explain.seed;
    rep["old_sha256"] = sha256_file(oldp);
    rep["new_sha256"] = sha256_file(newp);
    rep["trigger"] = trigger ? Json{{"path", trigger->string()}, {"sha256", sha256_file(*trigger)}} : Json(nullptr);
    const auto rp = out / "explanation.json";
    write_report(rp, rep);
    const auto so = out / "selected_old.csv";
    const auto sn = out / "selected_new.csv";
    export_csv(with_pseudo_labels(old_w.subset(ex.selected_old), ck.model, st), so);
    export_csv(with_pseudo_labels(new_w.subset(ex.selected_new), ck.model, st), sn);
    man.artifact(out, rp, "explanation");
    man.artifact(out, so, "selected_old_csv");
    man.artifact(out, sn, "selected_new_csv");
    if (trigger) man.link("explanation_trigger", rep["trigger"]);
    const auto mp = man.write(out);
    return {{rp, so, sn, mp}, Json{{"selected_old", ex.selected_old.size()},
                                   {"selected_new", ex.selected_new.size()},
                                   {"rounded_kl", ex.rounded.accuracy}}};
}

/// Result of one adaptation step: new model and labeler plus the reference
/// window the labeler was refit on.
struct AdaptationOutcome {
    Checkpoint checkpoint;
    AdaptReport report;
    Dataset reference;
    std::size_t selected_old = 0;
    std::size_t selected_new = 0;
};

/// Pseudo-labels the explanation-selected samples with the current model,
/// fine-tunes, and refits the labeler on the retained old subset plus the
/// whole new window (pseudo-labeled by the pre-adaptation model).
[[nodiscard]] inline AdaptationOutcome adapt_step(const Checkpoint& current, const Dataset& old_w, const Dataset& new_w,
                                                  const ExplanationResult& ex, const AdaptConfig& cfg) {
    const auto& st = detail::require_labeler(current);
    if (ex.selected_count() == 0) throw DataError("adapt: explanation selected no samples");
    const auto old_sel = old_w.subset(ex.selected_old);
    const auto new_sel = new_w.subset(ex.selected_new);
    const auto selected = with_pseudo_labels(detail::concat(old_sel, new_sel), current.model, st);
    auto res = adapt(current.model, selected, cfg);
    auto reference = with_pseudo_labels(detail::concat(old_sel, new_w), current.model, st);
    auto labeler = fit_labeler(res.model, reference);
    return {{std::move(res.model), std::move(labeler)},
            std::move(res.report),
            std::move(reference),
            old_sel.size(),
            new_sel.size()};
}

inline Json adapt_report_json(const AdaptationOutcome& a) {
    Json j = a.report;
    j["selected_old"] = a.selected_old;
    j["selected_new"] = a.selected_new;
    j["reference_size"] = a.reference.size();
    j["labeler"] = detail::labeler_summary(*a.checkpoint.labeler);
    return j;
}

inline CommandResult cmd_adapt(const PipelineConfig& cfg) {
    const auto ckp = detail::require_file("data.checkpoint", cfg.data.checkpoint);
    const auto exp = detail::require_file("data.explanation", cfg.data.explanation);
    const auto oldp = detail::require_file("data.old", cfg.data.old_window);
    const auto newp = detail::require_file("data.new", cfg.data.new_window);
    const auto ck = read_checkpoint(ckp);
    const auto ej = read_report(exp);
    ExplanationResult ex;
    try {
        from_json(ej, ex);
        if (ej.at("old_sha256").get<std::string>() != sha256_file(oldp) ||
            ej.at("new_sha256").get<std::string>() != sha256_file(newp)) {
            throw DataError("adapt: old/new windows differ from the ones the explanation was computed on");
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(exp.string() + ": malformed explanation: " + e.what());
    }
    if (ex.selected_count() == 0) throw DataError("adapt: explanation selected no samples");
    const auto old_w = read_csv_table(oldp, false).data;
    const auto new_w = read_csv_table(newp, false).data;
    detail::check_dim(old_w, ck.model, "old window");
    detail::check_dim(new_w, ck.model, "new window");
    for (std::size_t i : ex.selected_old) {
        if (i >= old_w.size()) throw DataError("adapt: explanation index out of range for old window");
    }
    for (std::size_t i : ex.selected_new) {
        if (i >= new_w.size()) throw DataError("adapt: explanation index out of range for new window");
    }
    const auto out = detail::prepare_out(cfg);
    RunManifest man("adapt", config_echo(cfg));
    man.input("teacher_checkpoint", ckp);
    man.input("explanation", exp);
    man.input("old", oldp);
    man.input("new", newp);
    man.stage("adapt:start");
    const auto a = adapt_step(ck, old_w, new_w, ex, cfg.adapt);
    man.stage("adapt:done");
    const auto saved = save_versioned_checkpoint(a.checkpoint, out);
    if (fs::exists(ckp) && fs::equivalent(saved.path, ckp)) {
        warn("adapt: adapted checkpoint is byte-identical to the teacher");
    }
    Json rep = adapt_report_json(a);
    rep["teacher_sha256"] = sha256_file(ckp);
    rep["checkpoint"] = saved.path.filename().string();
    rep["checkpoint_sha256"] = saved.sha256;
    const auto rp = out / "adapt_report.json";
    write_report(rp, rep);
    man.artifact(out, saved.path, "checkpoint");
    man.artifact(out, rp, "adapt_report");
    const auto mp = man.write(out);
    return {{saved.path, rp, mp}, rep};
}

inline CommandResult cmd_eval(const PipelineConfig& cfg) {
    const auto ckp = detail::require_file("data.checkpoint", cfg.data.checkpoint);
    const auto tp = detail::require_file("data.test", cfg.data.test);
    const auto ck = read_checkpoint(ckp);
    const auto& st = detail::require_labeler(ck);
    const auto test = read_csv_table(tp, true).data;
    detail::check_dim(test, ck.model, "test set");
    const auto out = detail::prepare_out(cfg);
    RunManifest man("eval", config_echo(cfg));
    man.input("checkpoint", ckp);
    man.input("test", tp);
    man.stage("eval:start");
    const auto ev = evaluate(ck.model, st, test);
    man.stage("eval:done");
    const Json rep{{"kind", "metrics_report"},
                   {"samples", test.size()},
                   {"confusion", ev.confusion},
                   {"metrics", ev.metrics}};
    const auto rp = out / "metrics.json";
    write_report(rp, rep);
    man.artifact(out, rp, "metrics_report");
    const auto mp = man.write(out);
    return {{rp, mp}, rep};
}

inline CommandResult cmd_simulate(const PipelineConfig& cfg) {
    const auto sc = make_scenario(cfg.scenario_kind, cfg.scenario);
    const auto windows = generate(sc);
    const auto out = detail::prepare_out(cfg);
    RunManifest man("simulate", config_echo(cfg));
    man.stage("simulate:start");
    std::vector<fs::path> files;
    Json roles = Json::array();
    for (std::size_t k = 0; k < windows.size(); ++k) {
        const auto p = out / ("window_" + std::to_string(k) + ".csv");
        export_csv(windows[k], p);
        man.artifact(out, p, "window_csv");
        files.push_back(p);
        roles.push_back(to_string(sc.segments[k].role));
    }
    man.stage("simulate:done");
    files.push_back(man.write(out));
    return {files, Json{{"kind", to_string(sc.kind)}, {"windows", windows.size()}, {"roles", roles}}};
}

// Lifecycle -----------------------------------------------------------------

struct LifecycleWindow {
    Dataset data;
    WindowRole role = WindowRole::eval;
    bool labeled = true;
};

struct WindowMetrics {
    std::size_t index = 0;
    WindowRole role = WindowRole::eval;
    std::size_t samples = 0;
    std::optional<MetricsReport> before;  // initial model
    std::optional<MetricsReport> after;   // model after the last adaptation
};

struct LifecycleStage {
    std::size_t window = 0;
    ShiftReport shift;
    bool adapted = false;
    std::size_t selected_old = 0;
    std::size_t selected_new = 0;
    double rounded_kl = 0.0;
    std::string checkpoint;
};

struct LifecycleResult {
    std::vector<WindowMetrics> windows;
    std::vector<LifecycleStage> stages;
    std::string initial_checkpoint;
    std::string final_checkpoint;
    Json report;
};

inline Json metrics_or_null(const std::optional<MetricsReport>& m) { return m ? Json(*m) : Json(nullptr); }

/// train -> (for each stream window: detect -> explain -> adapt) -> evaluate.
/// Adaptation runs only after a positive shift report unless `force` is set.
/// After adapting, the reference window becomes the retained old subset plus
/// the stream window.
[[nodiscard]] inline LifecycleResult run_lifecycle(const PipelineConfig& cfg, const std::vector<LifecycleWindow>& ws,
                                                   const fs::path& out, RunManifest* man = nullptr) {
    std::optional<std::size_t> train_idx;
    for (std::size_t k = 0; k < ws.size(); ++k) {
        if (ws[k].role != WindowRole::train) continue;
        if (train_idx) throw ConfigError("lifecycle: exactly one train window is allowed");
        train_idx = k;
    }
    if (!train_idx) throw ConfigError("lifecycle: no window has role 'train'");
    const auto& train_w = ws[*train_idx];
    if (!train_w.labeled) throw DataError("lifecycle: the train window needs labels");
    for (const auto& w : ws) {
        w.data.validate();
        if (w.data.dim != train_w.data.dim) throw DataError("lifecycle: windows differ in feature dimension");
    }

    LifecycleResult res;
    if (man) man->stage("lifecycle:train");
    const auto initial = train_model(cfg, train_w.data).checkpoint;
    const auto saved0 = save_versioned_checkpoint(initial, out);
    if (man) man->artifact(out, saved0.path, "checkpoint");
    res.initial_checkpoint = saved0.path.filename().string();

    Checkpoint current = initial;
    std::string current_name = res.initial_checkpoint;
    Dataset reference = train_w.data;
    Json stages = Json::array();
    for (std::size_t k = 0; k < ws.size(); ++k) {
        if (ws[k].role != WindowRole::stream) continue;
        const auto& w = ws[k].data;
        const auto& st = *current.labeler;
        if (man) man->stage("lifecycle:detect:" + std::to_string(k));
        auto scfg = cfg.shift;
        scfg.seed = cfg.shift.seed + k;
        const auto old_post = posteriors(reference, current.model, st);
        const auto new_post = posteriors(w, current.model, st);
        LifecycleStage stage;
        stage.window = k;
        stage.shift = permutation_test(old_post, new_post, scfg);
        const std::string tag = "_w" + std::to_string(k);
        const auto sp = out / ("shift_report" + tag + ".json");
        write_report(sp, Json(stage.shift));
        if (man) man->artifact(out, sp, "shift_report");
        Json sj{{"window", k}, {"shift_report", sp.filename().string()}, {"shifted", stage.shift.shifted}};
        if (!stage.shift.shifted && !cfg.force) {
            info("lifecycle: window {} shows no shift (p={}), adaptation skipped", k, stage.shift.p_value);
            sj["adapted"] = false;
            sj["skip_reason"] = "no shift detected";
            stages.push_back(sj);
            res.stages.push_back(stage);
            continue;
        }
        if (man) man->stage("lifecycle:explain:" + std::to_string(k));
        auto ecfg = cfg.explain;
        ecfg.seed = cfg.explain.seed + k;
        const auto ex = explain(old_post, new_post, ecfg);
        Json ej = ex;
        ej["config"] = ecfg;
        ej["trigger"] = sp.filename().string();
        const auto ep = out / ("explanation" + tag + ".json");
        write_report(ep, ej);
        if (man) man->artifact(out, ep, "explanation");

        if (man) man->stage("lifecycle:adapt:" + std::to_string(k));
        auto acfg = cfg.adapt;
        acfg.seed = cfg.adapt.seed + k;
        auto a = adapt_step(current, reference, w, ex, acfg);
        const auto saved = save_versioned_checkpoint(a.checkpoint, out);
        Json aj = adapt_report_json(a);
        aj["teacher_checkpoint"] = current_name;
        aj["checkpoint"] = saved.path.filename().string();
        aj["checkpoint_sha256"] = saved.sha256;
        const auto ap = out / ("adapt_report" + tag + ".json");
        write_report(ap, aj);
        if (man) {
            man->artifact(out, saved.path, "checkpoint");
            man->artifact(out, ap, "adapt_report");
        }
        stage.adapted = true;
        stage.selected_old = a.selected_old;
        stage.selected_new = a.selected_new;
        stage.rounded_kl = ex.rounded.accuracy;
        stage.checkpoint = saved.path.filename().string();
        sj["adapted"] = true;
        sj["explanation"] = ep.filename().string();
        sj["adapt_report"] = ap.filename().string();
        sj["checkpoint"] = stage.checkpoint;
        stages.push_back(sj);
        res.stages.push_back(stage);
        current = std::move(a.checkpoint);
        current_name = stage.checkpoint;
        reference = std::move(a.reference);
    }
    res.final_checkpoint = current_name;

    if (man) man->stage("lifecycle:evaluate");
    Json table = Json::array();
    for (std::size_t k = 0; k < ws.size(); ++k) {
        WindowMetrics wm{k, ws[k].role, ws[k].data.size(), std::nullopt, std::nullopt};
        if (ws[k].labeled) {
            wm.before = evaluate(initial.model, *initial.labeler, ws[k].data).metrics;
            wm.after = evaluate(current.model, *current.labeler, ws[k].data).metrics;
        }
        table.push_back({{"window", k},
                         {"role", to_string(wm.role)},
                         {"samples", wm.samples},
                         {"before", metrics_or_null(wm.before)},
                         {"after", metrics_or_null(wm.after)}});
        res.windows.push_back(wm);
    }
    res.report = Json{{"kind", "lifecycle_report"},
                      {"initial_checkpoint", res.initial_checkpoint},
                      {"final_checkpoint", res.final_checkpoint},
                      {"stages", stages},
                      {"windows", table}};
    const auto rp = out / "lifecycle_report.json";
    write_report(rp, res.report);
    if (man) man->artifact(out, rp, "lifecycle_report");
    return res;
}

/// Windows come from data.windows/data.roles when given, otherwise from the
/// configured synthetic scenario.
[[nodiscard]] inline std::vector<LifecycleWindow> lifecycle_windows(const PipelineConfig& cfg,
                                                                    RunManifest* man = nullptr) {
    std::vector<LifecycleWindow> ws;
    if (cfg.data.windows.empty()) {
        const auto sc = make_scenario(cfg.scenario_kind, cfg.scenario);
        auto data = generate(sc);
        for (std::size_t k = 0; k < data.size(); ++k) ws.push_back({std::move(data[k]), sc.segments[k].role, true});
        return ws;
    }
    if (cfg.data.roles.size() != cfg.data.windows.size()) {
        throw ConfigError("data.roles must list one role per entry of data.windows");
    }
    for (std::size_t k = 0; k < cfg.data.windows.size(); ++k) {
        const auto p = detail::require_file("data.windows[" + std::to_string(k) + "]", cfg.data.windows[k]);
        const auto role = window_role_from_string(cfg.data.roles[k]);
        auto t = read_csv_table(p, role == WindowRole::train);
        if (man) man->input("window_" + std::to_string(k), p);
        ws.push_back({std::move(t.data), role, t.has_label});
    }
    return ws;
}

inline CommandResult cmd_lifecycle(const PipelineConfig& cfg) {
    RunManifest man("lifecycle", config_echo(cfg));
    auto ws = lifecycle_windows(cfg, &man);
    const auto out = detail::prepare_out(cfg);
    const auto res = run_lifecycle(cfg, ws, out, &man);
    man.stage("lifecycle:done");
    const auto mp = man.write(out);
    return {{out / "lifecycle_report.json", mp}, res.report};
}

}  // namespace netsight
