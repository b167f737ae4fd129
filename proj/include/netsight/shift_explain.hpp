#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "netsight/error.hpp"
#include "netsight/optim.hpp"
#include "netsight/shift_detect.hpp"

namespace netsight {

inline constexpr double kMaskClamp = 1e-7;

enum class Origin : std::uint8_t { old_window = 0, new_window = 1 };

[[nodiscard]] inline double logistic(double z) noexcept {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

struct MaskVector {
    Vec logits;
    Origin origin = Origin::new_window;

    [[nodiscard]] Vec values() const {
        Vec v(logits.size());
        std::transform(logits.begin(), logits.end(), v.begin(), logistic);
        return v;
    }
};

/// Histogram where sample i adds weight w_i to its bin, normalized by the total weight.
[[nodiscard]] inline ScoreHistogram weighted_histogram(std::span<const double> posteriors,
                                                       std::span<const double> weights, std::size_t bins) {
    if (posteriors.size() != weights.size()) throw ContractError("weighted_histogram: length mismatch");
    if (bins < 2) throw ContractError("weighted_histogram: need at least 2 bins");
    ScoreHistogram h{uniform_edges(bins), Vec(bins, 0.0), posteriors.size()};
    double total = 0.0;
    for (std::size_t i = 0; i < posteriors.size(); ++i) {
        if (!(weights[i] >= 0.0 && weights[i] <= 1.0)) throw ContractError("weighted_histogram: weight outside [0,1]");
        h.mass[bin_index(posteriors[i], bins)] += weights[i];
        total += weights[i];
    }
    if (!(total > 0.0)) throw DataError("weighted_histogram: all weights are zero (degenerate mask)");
    for (double& m : h.mass) m /= total;
    return h;
}

namespace detail {

inline Vec concat(std::span<const double> a, std::span<const double> b) {
    Vec out(a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

inline double binary_entropy(double m) {
    const double c = std::clamp(m, kMaskClamp, 1.0 - kMaskClamp);
    return -c * std::log(c) - (1.0 - c) * std::log(1.0 - c);
}

}  // namespace detail

/// KL(P^n || histogram of old+new posteriors weighted by the concatenated masks).
[[nodiscard]] inline double accuracy_loss(std::span<const double> m_old, std::span<const double> m_new,
                                          std::span<const double> old_post, std::span<const double> new_post,
                                          std::size_t bins) {
    if (m_old.size() != old_post.size() || m_new.size() != new_post.size()) {
        throw ContractError("accuracy_loss: mask and window sizes differ");
    }
    const auto target = build_histogram(new_post, bins);
    const auto recon = weighted_histogram(detail::concat(old_post, new_post), detail::concat(m_old, m_new), bins);
    return histogram_kl(target, recon);
}

/// L1 norm of the concatenated mask values.
[[nodiscard]] inline double computation_loss(std::span<const double> m_old, std::span<const double> m_new) {
    double s = 0.0;
    for (double v : m_old) s += v;
    for (double v : m_new) s += v;
    return s;
}

/// Mean binary entropy of the concatenated masks, entries clamped to [1e-7, 1-1e-7].
[[nodiscard]] inline double determinism_loss(std::span<const double> m_old, std::span<const double> m_new) {
    const std::size_t n = m_old.size() + m_new.size();
    if (n == 0) return 0.0;
    double s = 0.0;
    for (double v : m_old) s += detail::binary_entropy(v);
    for (double v : m_new) s += detail::binary_entropy(v);
    return s / static_cast<double>(n);
}

struct ExplainConfig {
    double lambda1 = 10.0;
    double lambda2 = 1.0;
    int iterations = 1000;
    double learning_rate = 0.1;
    double rounding_threshold = 0.5;
    std::size_t bins = 50;
    double init_jitter = 0.01;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) throw ConfigError("explain.lambda1/lambda2 must be >= 0");
        if (iterations < 1) throw ConfigError("explain.iterations must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("explain.learning_rate must be > 0");
        if (!(rounding_threshold > 0.0 && rounding_threshold < 1.0)) {
            throw ConfigError("explain.rounding_threshold must be in (0, 1)");
        }
        if (bins < 2) throw ConfigError("explain.bins must be >= 2");
        if (!(init_jitter >= 0.0)) throw ConfigError("explain.init_jitter must be >= 0");
    }
};

struct ExplainLosses {
    double accuracy = 0.0;     // normalized histogram KL
    double mass = 0.0;         // s - 1 - ln s, s = selected mass / new-window size
    double computation = 0.0;  // L1 norm of the mask
    double determinism = 0.0;  // mean binary entropy
    double objective = 0.0;    // value minimized during optimization

    bool operator==(const ExplainLosses&) const = default;
};

/// The optimized objective over mask logits for a pooled old+new window:
///   KL(P^n || Q) + (s - 1 - ln s) + lambda1 * mean(m) + lambda2 * mean H(m)
/// where Q is the mask-weighted histogram and s = sum(m) / n_new. The first two
/// terms together equal the generalized KL between the unnormalized new-window
/// counts and the weighted counts divided by n_new.
class ExplainObjective {
public:
    ExplainObjective(std::span<const double> old_post, std::span<const double> new_post, std::size_t bins,
                     double lambda1, double lambda2)
        : bins_(bins), n_old_(old_post.size()), n_new_(new_post.size()), lambda1_(lambda1), lambda2_(lambda2) {
        if (old_post.empty() || new_post.empty()) throw DataError("explain: both windows must be non-empty");
        bin_of_.reserve(n_old_ + n_new_);
        for (double v : old_post) bin_of_.push_back(bin_index(v, bins));
        for (double v : new_post) bin_of_.push_back(bin_index(v, bins));
        target_ = build_histogram(new_post, bins).mass;
    }

    [[nodiscard]] std::size_t size() const noexcept { return bin_of_.size(); }
    [[nodiscard]] std::size_t n_old() const noexcept { return n_old_; }
    [[nodiscard]] std::size_t bin_of(std::size_t i) const noexcept { return bin_of_[i]; }
    [[nodiscard]] const Vec& target() const noexcept { return target_; }

    /// Loss terms at mask values `m`; if `grad_logits` is non-null, also the
    /// gradient of the objective w.r.t. the logits that produced `m`.
    ExplainLosses evaluate(std::span<const double> m, Vec* grad_logits = nullptr) const {
        const std::size_t N = size();
        const double z = 1.0 + static_cast<double>(bins_) * kHistogramSmoothing;
        Vec r(bins_, 0.0);
        double W = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            r[bin_of_[i]] += m[i];
            W += m[i];
        }
        if (!(W > 0.0) || !std::isfinite(W)) throw NumericalError("explain: selected mass collapsed to zero");

        ExplainLosses L;
        Vec g(bins_);
        double gq = 0.0;
        for (std::size_t b = 0; b < bins_; ++b) {
            const double q = r[b] / W;
            const double pe = (target_[b] + kHistogramSmoothing) / z;
            const double qe = (q + kHistogramSmoothing) / z;
            L.accuracy += pe * std::log(pe / qe);
            g[b] = -pe / qe / z;
            gq += g[b] * q;
        }
        const double s = W / static_cast<double>(n_new_);
        L.mass = s - 1.0 - std::log(s);
        L.computation = W;
        double H = 0.0;
        for (std::size_t i = 0; i < N; ++i) H += detail::binary_entropy(m[i]);
        L.determinism = H / static_cast<double>(N);
        L.objective = L.accuracy + L.mass + lambda1_ * W / static_cast<double>(N) + lambda2_ * L.determinism;

        if (grad_logits) {
            grad_logits->resize(N);
            const double dmass = (1.0 - 1.0 / s) / static_cast<double>(n_new_);
            const double dcomp = lambda1_ / static_cast<double>(N);
            for (std::size_t i = 0; i < N; ++i) {
                double dm = (g[bin_of_[i]] - gq) / W + dmass + dcomp;
                if (m[i] > kMaskClamp && m[i] < 1.0 - kMaskClamp) {
                    dm += lambda2_ * std::log((1.0 - m[i]) / m[i]) / static_cast<double>(N);
                }
                (*grad_logits)[i] = dm * m[i] * (1.0 - m[i]);
            }
        }
        return L;
    }

private:
    std::size_t bins_;
    std::size_t n_old_;
    std::size_t n_new_;
    double lambda1_;
    double lambda2_;
    std::vector<std::size_t> bin_of_;
    Vec target_;
};

struct ExplanationResult {
    std::vector<std::size_t> selected_old;
    std::vector<std::size_t> selected_new;
    ExplainLosses relaxed;  // at the final relaxed mask
    ExplainLosses rounded;  // at the rounded binary mask; this is what consumers act on
    int iterations_run = 0;
    std::size_t coverage_repairs = 0;  // samples promoted so every occupied new-window bin is represented
    double mean_new_mask = 0.0;        // mean relaxed value over the new window

    [[nodiscard]] std::size_t selected_count() const noexcept { return selected_old.size() + selected_new.size(); }
};

/// Optimizes relaxed masks with Adam on the logits, rounds at the threshold,
/// then makes sure every bin holding new-window mass keeps at least one
/// selected sample (its highest-valued one). An all-zero result keeps the
/// single highest entry.
[[nodiscard]] inline ExplanationResult explain(std::span<const double> old_post, std::span<const double> new_post,
                                               const ExplainConfig& cfg) {
    cfg.validate();
    const ExplainObjective obj(old_post, new_post, cfg.bins, cfg.lambda1, cfg.lambda2);
    const std::size_t N = obj.size();

    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> jitter(0.0, 1.0);
    Vec logits(N);
    for (double& l : logits) l = cfg.init_jitter * jitter(rng);

    AdamMoments mom;
    Vec m(N), grad;
    ExplanationResult res;
    for (int it = 0; it < cfg.iterations; ++it) {
        std::transform(logits.begin(), logits.end(), m.begin(), logistic);
        const auto L = obj.evaluate(m, &grad);
        if (!std::isfinite(L.objective) || !all_finite(grad)) {
            throw NumericalError("explain: non-finite objective at iteration " + std::to_string(it));
        }
        adam_update(logits, grad, mom, static_cast<std::uint64_t>(it + 1), cfg.learning_rate);
        res.iterations_run = it + 1;
    }
    std::transform(logits.begin(), logits.end(), m.begin(), logistic);
    res.relaxed = obj.evaluate(m);
    double mean_new = 0.0;
    for (std::size_t i = obj.n_old(); i < N; ++i) mean_new += m[i];
    res.mean_new_mask = mean_new / static_cast<double>(N - obj.n_old());

    std::vector<char> keep(N);
    for (std::size_t i = 0; i < N; ++i) keep[i] = m[i] >= cfg.rounding_threshold;

    const auto& target = obj.target();
    std::vector<char> covered(cfg.bins, 0);
    std::vector<std::size_t> best(cfg.bins, N);
    for (std::size_t i = 0; i < N; ++i) {
        const std::size_t b = obj.bin_of(i);
        if (keep[i]) covered[b] = 1;
        if (best[b] == N || m[i] > m[best[b]]) best[b] = i;
    }
    for (std::size_t b = 0; b < cfg.bins; ++b) {
        if (target[b] > 0.0 && !covered[b]) {
            keep[best[b]] = 1;
            ++res.coverage_repairs;
        }
    }
    if (std::none_of(keep.begin(), keep.end(), [](char k) { return k != 0; })) {
        keep[static_cast<std::size_t>(std::max_element(m.begin(), m.end()) - m.begin())] = 1;
    }

    Vec rounded(N);
    for (std::size_t i = 0; i < N; ++i) {
        rounded[i] = keep[i] ? 1.0 : 0.0;
        if (!keep[i]) continue;
        if (i < obj.n_old()) {
            res.selected_old.push_back(i);
        } else {
            res.selected_new.push_back(i - obj.n_old());
        }
    }
    res.rounded = obj.evaluate(rounded);
    return res;
}

}  // namespace netsight
