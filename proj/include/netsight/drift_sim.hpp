#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "netsight/dataset.hpp"
#include "netsight/error.hpp"

namespace netsight {

enum class DriftKind : std::uint8_t { none, mean_shift, scale_shift, prior_shift, bimodal };

[[nodiscard]] inline const char* to_string(DriftKind k) noexcept {
    switch (k) {
        case DriftKind::none: return "none";
        case DriftKind::mean_shift: return "mean_shift";
        case DriftKind::scale_shift: return "scale_shift";
        case DriftKind::prior_shift: return "prior_shift";
        case DriftKind::bimodal: return "bimodal";
    }
    return "none";
}

[[nodiscard]] inline DriftKind drift_kind_from_string(std::string_view s) {
    for (auto k : {DriftKind::none, DriftKind::mean_shift, DriftKind::scale_shift, DriftKind::prior_shift,
                   DriftKind::bimodal}) {
        if (s == to_string(k)) return k;
    }
    throw ConfigError("unknown drift kind '" + std::string(s) + "'");
}

/// How the lifecycle treats a window: fit on it, only score it, or run
/// detection/explanation/adaptation on it.
enum class WindowRole : std::uint8_t { train, eval, stream };

[[nodiscard]] inline const char* to_string(WindowRole r) noexcept {
    switch (r) {
        case WindowRole::train: return "train";
        case WindowRole::eval: return "eval";
        case WindowRole::stream: return "stream";
    }
    return "eval";
}

[[nodiscard]] inline WindowRole window_role_from_string(std::string_view s) {
    for (auto r : {WindowRole::train, WindowRole::eval, WindowRole::stream}) {
        if (s == to_string(r)) return r;
    }
    throw ConfigError("unknown window role '" + std::string(s) + "'");
}

/// One window. Normals are split as evenly as possible across `normal_modes`
/// (earlier modes take the remainder); abnormals share one mean.
struct Segment {
    std::size_t n_normal = 0;
    std::size_t n_abnormal = 0;
    std::vector<Vec> normal_modes;
    Vec abnormal_mean;
    double normal_scale = 1.0;
    double abnormal_scale = 1.0;
    WindowRole role = WindowRole::eval;
};

struct DriftScenario {
    std::size_t dim = 0;
    std::vector<Segment> segments;
    DriftKind kind = DriftKind::none;
    std::uint64_t seed = 0;

    void validate() const {
        if (dim == 0) throw ConfigError("scenario dimension must be positive");
        if (segments.empty()) throw ConfigError("scenario needs at least one segment");
        for (std::size_t k = 0; k < segments.size(); ++k) {
            const auto& s = segments[k];
            const std::string at = "segment " + std::to_string(k);
            if (s.n_normal == 0 || s.n_abnormal == 0) throw ConfigError(at + ": class counts must be positive");
            if (!(s.normal_scale > 0.0) || !(s.abnormal_scale > 0.0)) throw ConfigError(at + ": scales must be > 0");
            if (s.normal_modes.empty()) throw ConfigError(at + ": needs at least one normal mode");
            for (const auto& m : s.normal_modes) {
                if (m.size() != dim) throw ConfigError(at + ": normal mean has wrong dimension");
            }
            if (s.abnormal_mean.size() != dim) throw ConfigError(at + ": abnormal mean has wrong dimension");
        }
    }
};

/// Class-conditional isotropic Gaussians per segment, normals first.
[[nodiscard]] inline std::vector<Dataset> generate(const DriftScenario& sc) {
    sc.validate();
    std::mt19937_64 rng(sc.seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Dataset> out;
    for (const auto& seg : sc.segments) {
        Dataset d{sc.dim, {}};
        d.samples.reserve(seg.n_normal + seg.n_abnormal);
        const std::size_t modes = seg.normal_modes.size();
        for (std::size_t m = 0; m < modes; ++m) {
            const std::size_t count = seg.n_normal / modes + (m < seg.n_normal % modes ? 1 : 0);
            for (std::size_t i = 0; i < count; ++i) {
                Vec x(sc.dim);
                for (std::size_t k = 0; k < sc.dim; ++k) x[k] = seg.normal_modes[m][k] + seg.normal_scale * z(rng);
                d.samples.push_back({std::move(x), Label::normal});
            }
        }
        for (std::size_t i = 0; i < seg.n_abnormal; ++i) {
            Vec x(sc.dim);
            for (std::size_t k = 0; k < sc.dim; ++k) x[k] = seg.abnormal_mean[k] + seg.abnormal_scale * z(rng);
            d.samples.push_back({std::move(x), Label::abnormal});
        }
        out.push_back(std::move(d));
    }
    return out;
}

/// Knobs for the built-in scenarios. Normals sit at the origin with unit
/// scale; abnormals are offset by `separation` on the first half of the
/// features. Drift moves along the normalized all-ones direction.
struct ScenarioParams {
    std::size_t dim = 20;
    std::size_t window = 2000;
    double normal_prior = 0.7;
    double separation = 2.0;
    double abnormal_scale = 1.5;
    double shift = 3.0;
    double stream_fraction = 0.67;  // drift reached by the stream window, as a fraction of `shift`
    std::uint64_t seed = 0;
};

/// Four windows: train, eval (original distribution), stream (partial drift),
/// eval (full drift). The bimodal kind has two windows: train, then a stream
/// window whose normals split into modes at +shift and -shift.
[[nodiscard]] inline DriftScenario make_scenario(DriftKind kind, const ScenarioParams& p) {
    if (p.dim == 0 || p.window < 4) throw ConfigError("scenario needs dim > 0 and window >= 4");
    if (!(p.normal_prior > 0.0 && p.normal_prior < 1.0)) throw ConfigError("scenario normal_prior must be in (0,1)");
    const Vec origin(p.dim, 0.0);
    Vec abnormal(p.dim, 0.0);
    for (std::size_t k = 0; k < p.dim / 2; ++k) abnormal[k] = p.separation;
    const Vec dir(p.dim, 1.0 / std::sqrt(static_cast<double>(p.dim)));
    auto along = [&](double t) {
        Vec v(p.dim);
        for (std::size_t k = 0; k < p.dim; ++k) v[k] = t * dir[k];
        return v;
    };
    auto counts = [&](double prior) {
        auto nn = static_cast<std::size_t>(std::llround(static_cast<double>(p.window) * prior));
        nn = std::clamp<std::size_t>(nn, 1, p.window - 1);
        return std::pair{nn, p.window - nn};
    };
    auto seg = [&](double prior, std::vector<Vec> modes, double nscale, WindowRole role) {
        const auto [nn, na] = counts(prior);
        return Segment{nn, na, std::move(modes), abnormal, nscale, p.abnormal_scale, role};
    };

    DriftScenario sc{p.dim, {}, kind, p.seed};
    const double f = p.stream_fraction;
    const double pr = p.normal_prior;
    switch (kind) {
        case DriftKind::none:
            for (auto r : {WindowRole::train, WindowRole::eval, WindowRole::stream, WindowRole::eval}) {
                sc.segments.push_back(seg(pr, {origin}, 1.0, r));
            }
            break;
        case DriftKind::mean_shift:
            sc.segments.push_back(seg(pr, {origin}, 1.0, WindowRole::train));
            sc.segments.push_back(seg(pr, {origin}, 1.0, WindowRole::eval));
            sc.segments.push_back(seg(pr, {along(f * p.shift)}, 1.0, WindowRole::stream));
            sc.segments.push_back(seg(pr, {along(p.shift)}, 1.0, WindowRole::eval));
            break;
        case DriftKind::scale_shift:
            sc.segments.push_back(seg(pr, {origin}, 1.0, WindowRole::train));
            sc.segments.push_back(seg(pr, {origin}, 1.0, WindowRole::eval));
            sc.segments.push_back(seg(pr, {origin}, 1.0 + 0.5 * f * p.shift, WindowRole::stream));
            sc.segments.push_back(seg(pr, {origin}, 1.0 + 0.5 * p.shift, WindowRole::eval));
            break;
        case DriftKind::prior_shift: {
            const double end = 1.0 - pr;
            sc.segments.push_back(seg(pr, {origin}, 1.0, WindowRole::train));
            sc.segments.push_back(seg(pr, {origin}, 1.0, WindowRole::eval));
            sc.segments.push_back(seg(pr + f * (end - pr), {origin}, 1.0, WindowRole::stream));
            sc.segments.push_back(seg(end, {origin}, 1.0, WindowRole::eval));
            break;
        }
        case DriftKind::bimodal:
            sc.segments.push_back(seg(pr, {origin}, 1.0, WindowRole::train));
            sc.segments.push_back(seg(pr, {along(p.shift), along(-p.shift)}, 1.0, WindowRole::stream));
            break;
    }
    return sc;
}

// CSV ---------------------------------------------------------------------

[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, r.ptr};
}

[[nodiscard]] inline std::string csv_header(std::size_t dim, bool with_label = true) {
    std::string h;
    for (std::size_t k = 0; k < dim; ++k) {
        if (k) h += ',';
        h += 'f' + std::to_string(k);
    }
    if (with_label) h += ",label";
    return h;
}

inline void write_csv(std::ostream& os, const Dataset& d) {
    os << csv_header(d.dim) << '\n';
    for (const auto& s : d.samples) {
        for (double v : s.features) os << format_double(v) << ',';
        os << to_int(s.label) << '\n';
    }
}

/// Writes to a temporary sibling and renames, so readers never see a partial file.
inline void export_csv(const Dataset& d, const std::filesystem::path& path) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw DataError("cannot write " + path.string());
        write_csv(os, d);
        if (!os) throw DataError("write failed for " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

/// Rows of a CSV with `f0..f{d-1}` columns and an optional trailing `label`.
struct CsvTable {
    Dataset data;
    bool has_label = false;
    std::string header;
    std::vector<std::string> lines;  // raw data lines, for pass-through output
};

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace detail

[[nodiscard]] inline CsvTable parse_csv(std::istream& is, const std::string& source, bool require_label) {
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw DataError(source + ": missing header row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    t.header = line;
    const auto cols = detail::split_commas(line);
    std::size_t dim = 0;
    for (const auto c : cols) {
        const auto name = detail::trim(c);
        if (name == "f" + std::to_string(dim)) {
            ++dim;
        } else if (name == "label" && dim + 1 == cols.size()) {
            t.has_label = true;
        } else {
            throw DataError(source + ":1: unexpected column '" + std::string(name) + "'");
        }
    }
    if (dim == 0) throw DataError(source + ":1: no feature columns");
    if (require_label && !t.has_label) throw DataError(source + ":1: missing label column");
    t.data.dim = dim;
    const std::size_t width = dim + (t.has_label ? 1 : 0);

    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_commas(line);
        const std::string at = source + ":" + std::to_string(lineno) + ": ";
        if (cells.size() != width) {
            throw DataError(at + "expected " + std::to_string(width) + " cells, found " + std::to_string(cells.size()));
        }
        LabeledSample s;
        s.features.resize(dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const auto cell = detail::trim(cells[k]);
            const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), s.features[k]);
            if (r.ec != std::errc{} || r.ptr != cell.data() + cell.size() || !std::isfinite(s.features[k])) {
                throw DataError(at + "column f" + std::to_string(k) + " is not a finite number: '" +
                                std::string(cell) + "'");
            }
        }
        if (t.has_label) {
            const auto cell = detail::trim(cells[dim]);
            long v = -1;
            const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (r.ec != std::errc{} || r.ptr != cell.data() + cell.size() || (v != 0 && v != 1)) {
                throw DataError(at + "label must be 0 or 1, got '" + std::string(cell) + "'");
            }
            s.label = label_from_int(v);
        }
        t.data.samples.push_back(std::move(s));
        t.lines.push_back(line);
    }
    return t;
}

[[nodiscard]] inline CsvTable read_csv_table(const std::filesystem::path& path, bool require_label) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    return parse_csv(is, path.string(), require_label);
}

[[nodiscard]] inline Dataset import_csv(const std::filesystem::path& path) {
    return read_csv_table(path, true).data;
}

}  // namespace netsight
