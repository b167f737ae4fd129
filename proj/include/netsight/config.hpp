#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "netsight/adapt.hpp"
#include "netsight/contrastive.hpp"
#include "netsight/drift_sim.hpp"
#include "netsight/error.hpp"
#include "netsight/report.hpp"
#include "netsight/shift_detect.hpp"
#include "netsight/shift_explain.hpp"

namespace netsight {

struct DataPaths {
    std::string train;
    std::string old_window;
    std::string new_window;
    std::string test;
    std::string input;
    std::string checkpoint;
    std::string shift_report;
    std::string explanation;
    std::vector<std::string> windows;
    std::vector<std::string> roles;
};

/// Every knob of a run. Module seeds are derived from `seed` by apply_seed().
struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string out = "netsight-out";
    std::size_t hidden = 128;
    std::size_t latent = 32;
    ContrastiveConfig contrastive;
    ShiftConfig shift;
    ExplainConfig explain;
    AdaptConfig adapt;
    DataPaths data;
    DriftKind scenario_kind = DriftKind::mean_shift;
    ScenarioParams scenario;
    bool force = false;

    void apply_seed() {
        contrastive.seed = seed + 1;
        shift.seed = seed + 2;
        explain.seed = seed + 3;
        adapt.seed = seed + 4;
        scenario.seed = seed + 5;
        explain.bins = shift.bins;
    }

    void validate() const {
        if (hidden == 0 || latent == 0) throw ConfigError("model.hidden and model.latent must be positive");
        contrastive.validate();
        shift.validate();
        explain.validate();
        adapt.validate();
        if (out.empty()) throw ConfigError("output directory must not be empty");
    }

    [[nodiscard]] Architecture architecture(std::size_t input_dim) const {
        return {input_dim, {hidden}, latent, {hidden}};
    }
};

namespace detail {

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
    T v{};
    const auto r = std::from_chars(raw.data(), raw.data() + raw.size(), v);
    if (r.ec != std::errc{} || r.ptr != raw.data() + raw.size()) {
        throw ConfigError("config key '" + key + "': cannot parse '" + raw + "' as a number");
    }
    return v;
}

inline bool parse_bool(const std::string& key, const std::string& raw) {
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    throw ConfigError("config key '" + key + "': expected true or false, got '" + raw + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::vector<std::string>&)>;

inline const std::string& single(const std::string& key, const std::vector<std::string>& in) {
    if (in.size() != 1) throw ConfigError("config key '" + key + "' expects a single value");
    return in.front();
}

inline std::map<std::string, Setter> config_setters() {
    std::map<std::string, Setter> s;
    auto num = [&s](const std::string& key, auto accessor) {
        s[key] = [key, accessor](PipelineConfig& c, const std::vector<std::string>& in) {
            auto& ref = accessor(c);
            ref = parse_number<std::remove_reference_t<decltype(ref)>>(key, single(key, in));
        };
    };
    auto str = [&s](const std::string& key, auto accessor) {
        s[key] = [key, accessor](PipelineConfig& c, const std::vector<std::string>& in) {
            accessor(c) = single(key, in);
        };
    };
    auto list = [&s](const std::string& key, auto accessor) {
        s[key] = [accessor](PipelineConfig& c, const std::vector<std::string>& in) { accessor(c) = in; };
    };

    num("seed", [](PipelineConfig& c) -> auto& { return c.seed; });
    str("out", [](PipelineConfig& c) -> auto& { return c.out; });

    num("model.hidden", [](PipelineConfig& c) -> auto& { return c.hidden; });
    num("model.latent", [](PipelineConfig& c) -> auto& { return c.latent; });

    num("contrastive.temperature", [](PipelineConfig& c) -> auto& { return c.contrastive.temperature; });
    num("contrastive.epochs", [](PipelineConfig& c) -> auto& { return c.contrastive.epochs; });
    num("contrastive.learning_rate", [](PipelineConfig& c) -> auto& { return c.contrastive.learning_rate; });
    num("contrastive.batch_size", [](PipelineConfig& c) -> auto& { return c.contrastive.batch_size; });
    num("contrastive.batch_normals", [](PipelineConfig& c) -> auto& { return c.contrastive.batch_normals; });
    num("contrastive.batch_abnormals", [](PipelineConfig& c) -> auto& { return c.contrastive.batch_abnormals; });

    num("shift_detect.bins", [](PipelineConfig& c) -> auto& { return c.shift.bins; });
    num("shift_detect.permutations", [](PipelineConfig& c) -> auto& { return c.shift.permutations; });
    num("shift_detect.alpha", [](PipelineConfig& c) -> auto& { return c.shift.alpha; });

    num("explain.lambda1", [](PipelineConfig& c) -> auto& { return c.explain.lambda1; });
    num("explain.lambda2", [](PipelineConfig& c) -> auto& { return c.explain.lambda2; });
    num("explain.iterations", [](PipelineConfig& c) -> auto& { return c.explain.iterations; });
    num("explain.learning_rate", [](PipelineConfig& c) -> auto& { return c.explain.learning_rate; });
    num("explain.rounding_threshold", [](PipelineConfig& c) -> auto& { return c.explain.rounding_threshold; });
    num("explain.init_jitter", [](PipelineConfig& c) -> auto& { return c.explain.init_jitter; });

    num("adapt.gamma", [](PipelineConfig& c) -> auto& { return c.adapt.gamma; });
    num("adapt.epochs", [](PipelineConfig& c) -> auto& { return c.adapt.epochs; });
    num("adapt.learning_rate", [](PipelineConfig& c) -> auto& { return c.adapt.learning_rate; });
    num("adapt.temperature", [](PipelineConfig& c) -> auto& { return c.adapt.temperature; });
    num("adapt.anchor_batch", [](PipelineConfig& c) -> auto& { return c.adapt.anchor_batch; });

    str("data.train", [](PipelineConfig& c) -> auto& { return c.data.train; });
    str("data.old", [](PipelineConfig& c) -> auto& { return c.data.old_window; });
    str("data.new", [](PipelineConfig& c) -> auto& { return c.data.new_window; });
    str("data.test", [](PipelineConfig& c) -> auto& { return c.data.test; });
    str("data.input", [](PipelineConfig& c) -> auto& { return c.data.input; });
    str("data.checkpoint", [](PipelineConfig& c) -> auto& { return c.data.checkpoint; });
    str("data.shift_report", [](PipelineConfig& c) -> auto& { return c.data.shift_report; });
    str("data.explanation", [](PipelineConfig& c) -> auto& { return c.data.explanation; });
    list("data.windows", [](PipelineConfig& c) -> auto& { return c.data.windows; });
    list("data.roles", [](PipelineConfig& c) -> auto& { return c.data.roles; });

    s["scenario.kind"] = [](PipelineConfig& c, const std::vector<std::string>& in) {
        c.scenario_kind = drift_kind_from_string(single("scenario.kind", in));
    };
    num("scenario.dim", [](PipelineConfig& c) -> auto& { return c.scenario.dim; });
    num("scenario.window", [](PipelineConfig& c) -> auto& { return c.scenario.window; });
    num("scenario.normal_prior", [](PipelineConfig& c) -> auto& { return c.scenario.normal_prior; });
    num("scenario.separation", [](PipelineConfig& c) -> auto& { return c.scenario.separation; });
    num("scenario.abnormal_scale", [](PipelineConfig& c) -> auto& { return c.scenario.abnormal_scale; });
    num("scenario.shift", [](PipelineConfig& c) -> auto& { return c.scenario.shift; });
    num("scenario.stream_fraction", [](PipelineConfig& c) -> auto& { return c.scenario.stream_fraction; });

    s["force"] = [](PipelineConfig& c, const std::vector<std::string>& in) {
        c.force = parse_bool("force", single("force", in));
    };
    return s;
}

}  // namespace detail

/// Parses a flat, sectioned key/value document:
///
///   seed = 7
///   [contrastive]
///   temperature = 0.02
///
/// Keys are addressed as section.key; unknown keys are rejected.
[[nodiscard]] inline PipelineConfig parse_config(std::istream& is, const std::string& source) {
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigTOML().from_config(is);
    } catch (const CLI::Error& e) {
        throw ConfigError(source + ": " + e.what());
    }
    PipelineConfig cfg;
    const auto setters = detail::config_setters();
    for (const auto& it : items) {
        if (it.name == "++" || it.name == "--") continue;  // section markers
        const auto key = it.fullname();
        const auto f = setters.find(key);
        if (f == setters.end()) throw ConfigError(source + ": unknown config key '" + key + "'");
        try {
            f->second(cfg, it.inputs);
        } catch (const ConfigError& e) {
            throw ConfigError(source + ": " + e.what());
        }
    }
    cfg.apply_seed();
    cfg.validate();
    return cfg;
}

[[nodiscard]] inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    return parse_config(is, path.string());
}

/// Echo of the effective configuration for reports and manifests.
[[nodiscard]] inline Json config_echo(const PipelineConfig& c) {
    return Json{
        {"seed", c.seed},
        {"model", {{"hidden", c.hidden}, {"latent", c.latent}}},
        {"contrastive",
         {{"temperature", c.contrastive.temperature},
          {"epochs", c.contrastive.epochs},
          {"learning_rate", c.contrastive.learning_rate},
          {"batch_size", c.contrastive.batch_size},
          {"batch_normals", c.contrastive.batch_normals},
          {"batch_abnormals", c.contrastive.batch_abnormals}}},
        {"shift_detect", {{"bins", c.shift.bins}, {"permutations", c.shift.permutations}, {"alpha", c.shift.alpha}}},
        {"explain", c.explain},
        {"adapt",
         {{"gamma", c.adapt.gamma},
          {"epochs", c.adapt.epochs},
          {"learning_rate", c.adapt.learning_rate},
          {"temperature", c.adapt.temperature},
          {"anchor_batch", c.adapt.anchor_batch}}},
        {"scenario",
         {{"kind", to_string(c.scenario_kind)},
          {"dim", c.scenario.dim},
          {"window", c.scenario.window},
          {"normal_prior", c.scenario.normal_prior},
          {"separation", c.scenario.separation},
          {"abnormal_scale", c.scenario.abnormal_scale},
          {"shift", c.scenario.shift},
          {"stream_fraction", c.scenario.stream_fraction}}},
        {"force", c.force},
    };
}

}  // namespace netsight
