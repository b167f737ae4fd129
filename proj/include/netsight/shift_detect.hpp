#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "netsight/dataset.hpp"
#include "netsight/error.hpp"
#include "netsight/log.hpp"
#include "netsight/pseudo_label.hpp"

namespace netsight {

inline constexpr double kHistogramSmoothing = 1e-10;

/// P(normal | s) under the selected component's Gaussians and class priors.
[[nodiscard]] inline double posterior_normal(double s, const LabelerState& st) {
    if (!std::isfinite(s)) throw DataError("posterior_normal: non-finite score");
    const auto& d = st.active();
    const double ln = log_pdf(s, d.normal) + std::log(st.prior_normal);
    const double la = log_pdf(s, d.abnormal) + std::log(st.prior_abnormal());
    if (!std::isfinite(ln) && !std::isfinite(la)) {
        warn("posterior_normal: both likelihoods vanish at s={}, returning the prior", s);
        return st.prior_normal;
    }
    const double m = std::max(ln, la);
    const double en = std::exp(ln - m);
    const double ea = std::exp(la - m);
    return std::clamp(en / (en + ea), 0.0, 1.0);
}

[[nodiscard]] inline Vec posteriors(const Dataset& data, const AutoencoderModel& model, const LabelerState& st) {
    Vec out;
    out.reserve(data.size());
    for (const auto& smp : data.samples) {
        const auto e = forward(model, smp.features);
        out.push_back(posterior_normal(prototype_score(pick(e, st.selected), st.active()), st));
    }
    return out;
}

/// Equal-width bin of a value in [0,1]; the last bin is right-closed.
[[nodiscard]] inline std::size_t bin_index(double v, std::size_t bins) {
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("histogram value outside [0,1]: " + std::to_string(v));
    return std::min(static_cast<std::size_t>(v * static_cast<double>(bins)), bins - 1);
}

struct ScoreHistogram {
    Vec edges;
    Vec mass;
    std::size_t count = 0;

    [[nodiscard]] std::size_t bins() const noexcept { return mass.size(); }
};

[[nodiscard]] inline Vec uniform_edges(std::size_t bins) {
    Vec e(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) e[b] = static_cast<double>(b) / static_cast<double>(bins);
    return e;
}

[[nodiscard]] inline ScoreHistogram build_histogram(std::span<const double> values, std::size_t bins) {
    if (bins < 2) throw ContractError("build_histogram: need at least 2 bins");
    if (values.empty()) throw DataError("build_histogram: empty input");
    ScoreHistogram h{uniform_edges(bins), Vec(bins, 0.0), values.size()};
    for (double v : values) h.mass[bin_index(v, bins)] += 1.0;
    for (double& m : h.mass) m /= static_cast<double>(values.size());
    return h;
}

namespace detail {

inline double smoothed_kl(std::span<const double> p, std::span<const double> q) {
    const double z = 1.0 + static_cast<double>(p.size()) * kHistogramSmoothing;
    double kl = 0.0;
    for (std::size_t b = 0; b < p.size(); ++b) {
        const double pb = (p[b] + kHistogramSmoothing) / z;
        const double qb = (q[b] + kHistogramSmoothing) / z;
        kl += pb * std::log(pb / qb);
    }
    return std::max(kl, 0.0);
}

}  // namespace detail

/// KL(p || q) after additive smoothing and renormalization of both.
[[nodiscard]] inline double histogram_kl(const ScoreHistogram& p, const ScoreHistogram& q) {
    if (p.edges != q.edges) throw ContractError("histogram_kl: histograms use different bins");
    return detail::smoothed_kl(p.mass, q.mass);
}

struct ShiftConfig {
    std::size_t bins = 50;
    std::size_t permutations = 1000;
    double alpha = 0.05;
    std::uint64_t seed = 0;

    void validate() const {
        if (bins < 2) throw ConfigError("shift_detect.bins must be >= 2");
        if (permutations < 100) throw ConfigError("shift_detect.permutations must be >= 100");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("shift_detect.alpha must be in (0, 1)");
    }
};

struct ShiftReport {
    double kl_statistic = 0.0;
    double p_value = 1.0;
    bool shifted = false;
    std::size_t permutations = 0;
    double alpha = 0.05;
    std::size_t bins = 0;
    std::size_t n_old = 0;
    std::size_t n_new = 0;
    std::uint64_t seed = 0;

    bool operator==(const ShiftReport&) const = default;
};

/// One-sided permutation test of KL(new || old) over pooled, reshuffled windows.
[[nodiscard]] inline ShiftReport permutation_test(std::span<const double> old_post, std::span<const double> new_post,
                                                  const ShiftConfig& cfg) {
    cfg.validate();
    if (old_post.empty() || new_post.empty()) throw DataError("permutation_test: empty window");
    const std::size_t B = cfg.bins;
    std::vector<std::uint32_t> pooled;
    pooled.reserve(old_post.size() + new_post.size());
    for (double v : old_post) pooled.push_back(static_cast<std::uint32_t>(bin_index(v, B)));
    for (double v : new_post) pooled.push_back(static_cast<std::uint32_t>(bin_index(v, B)));
    const std::size_t n_old = old_post.size();
    const std::size_t n_new = new_post.size();

    Vec p(B), q(B);
    auto stat = [&](std::span<const std::uint32_t> bins_of) {
        std::fill(p.begin(), p.end(), 0.0);
        std::fill(q.begin(), q.end(), 0.0);
        for (std::size_t i = 0; i < n_old; ++i) q[bins_of[i]] += 1.0;
        for (std::size_t i = n_old; i < bins_of.size(); ++i) p[bins_of[i]] += 1.0;
        for (std::size_t b = 0; b < B; ++b) {
            q[b] /= static_cast<double>(n_old);
            p[b] /= static_cast<double>(n_new);
        }
        return detail::smoothed_kl(p, q);
    };

    ShiftReport r;
    r.kl_statistic = stat(pooled);
    r.permutations = cfg.permutations;
    r.alpha = cfg.alpha;
    r.bins = B;
    r.n_old = n_old;
    r.n_new = n_new;
    r.seed = cfg.seed;

    std::mt19937_64 rng(cfg.seed);
    std::size_t exceed = 0;
    auto perm = pooled;
    for (std::size_t k = 0; k < cfg.permutations; ++k) {
        std::shuffle(perm.begin(), perm.end(), rng);
        if (stat(perm) >= r.kl_statistic) ++exceed;
    }
    r.p_value = static_cast<double>(1 + exceed) / static_cast<double>(1 + cfg.permutations);
    r.shifted = r.p_value < cfg.alpha;
    return r;
}

}  // namespace netsight
