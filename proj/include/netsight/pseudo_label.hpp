#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "netsight/dataset.hpp"
#include "netsight/error.hpp"
#include "netsight/log.hpp"
#include "netsight/nn.hpp"

namespace netsight {

inline constexpr double kSigmaFloor = 1e-6;

struct GaussianParams {
    double mu = 0.0;
    double sigma = 1.0;

    bool operator==(const GaussianParams&) const = default;
};

[[nodiscard]] inline double log_pdf(double x, const GaussianParams& g) {
    const double z = (x - g.mu) / g.sigma;
    return -0.5 * z * z - std::log(g.sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

[[nodiscard]] inline double pdf(double x, const GaussianParams& g) { return std::exp(log_pdf(x, g)); }

/// MLE fit (population variance), sigma clamped to the floor.
[[nodiscard]] inline GaussianParams fit_gaussian(std::span<const double> xs) {
    if (xs.size() < 2) throw DataError("fit_gaussian: need at least 2 scores per class");
    double mu = 0.0;
    for (double x : xs) mu += x;
    mu /= static_cast<double>(xs.size());
    double var = 0.0;
    for (double x : xs) var += (x - mu) * (x - mu);
    var /= static_cast<double>(xs.size());
    return {mu, std::max(std::sqrt(var), kSigmaFloor)};
}

/// Per-class fits: first is the normal class, second the abnormal class.
[[nodiscard]] inline std::pair<GaussianParams, GaussianParams> fit_gaussians(std::span<const double> scores,
                                                                             std::span<const Label> labels) {
    if (scores.size() != labels.size()) throw ContractError("fit_gaussians: scores and labels differ in length");
    Vec n, a;
    for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] == Label::normal ? n : a).push_back(scores[i]);
    return {fit_gaussian(n), fit_gaussian(a)};
}

/// Closed-form KL(a || b) between univariate Gaussians.
[[nodiscard]] inline double gaussian_kl(const GaussianParams& a, const GaussianParams& b) {
    const double d = a.mu - b.mu;
    const double kl =
        std::log(b.sigma / a.sigma) + (a.sigma * a.sigma + d * d) / (2.0 * b.sigma * b.sigma) - 0.5;
    return std::max(kl, 0.0);
}

struct ComponentDistributions {
    Vec prototype;
    GaussianParams normal;
    GaussianParams abnormal;
    double kl_score = 0.0;

    bool operator==(const ComponentDistributions&) const = default;
};

/// KL-weighted choice between the two components; ties go to the decoder.
[[nodiscard]] inline Component select_component(double kl_encoder, double kl_decoder) noexcept {
    return kl_encoder > kl_decoder ? Component::encoder : Component::decoder;
}

struct LabelerState {
    ComponentDistributions encoder;
    ComponentDistributions decoder;
    Component selected = Component::decoder;
    double prior_normal = 0.5;

    [[nodiscard]] double prior_abnormal() const noexcept { return 1.0 - prior_normal; }

    [[nodiscard]] const ComponentDistributions& component(Component c) const noexcept {
        return c == Component::encoder ? encoder : decoder;
    }
    [[nodiscard]] const ComponentDistributions& active() const noexcept { return component(selected); }

    bool operator==(const LabelerState&) const = default;
};

/// Similarity of one embedding to a component's normal prototype.
[[nodiscard]] inline double prototype_score(std::span<const double> embedding, const ComponentDistributions& d) {
    return cosine_similarity(embedding, d.prototype);
}

/// 0 iff the normal density is strictly higher at `s`; compared in log space.
[[nodiscard]] inline Label component_label(double s, const ComponentDistributions& d) {
    if (!std::isfinite(s)) throw DataError("component_label: non-finite score");
    return log_pdf(s, d.normal) > log_pdf(s, d.abnormal) ? Label::normal : Label::abnormal;
}

/// Fits prototypes, per-class Gaussians and KL scores for both components from
/// precomputed embeddings. Zero-norm embeddings are left out with a warning.
[[nodiscard]] inline ComponentDistributions fit_component(std::span<const Vec> embeddings,
                                                          std::span<const Label> labels) {
    if (embeddings.size() != labels.size()) throw ContractError("fit_component: embeddings and labels differ");
    if (embeddings.empty()) throw DataError("fit_component: no embeddings");
    ComponentDistributions d;
    d.prototype.assign(embeddings[0].size(), 0.0);
    std::size_t n_normal = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (labels[i] != Label::normal) continue;
        for (std::size_t k = 0; k < d.prototype.size(); ++k) d.prototype[k] += embeddings[i][k];
        ++n_normal;
    }
    if (n_normal == 0) throw DataError("fit_component: no normal samples for the prototype");
    for (double& v : d.prototype) v /= static_cast<double>(n_normal);
    if (norm(d.prototype) == 0.0) throw SimilarityError("fit_component: zero-norm prototype");

    Vec scores;
    std::vector<Label> kept;
    std::size_t dropped = 0;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        if (norm(embeddings[i]) == 0.0) {
            ++dropped;
            continue;
        }
        scores.push_back(prototype_score(embeddings[i], d));
        kept.push_back(labels[i]);
    }
    if (dropped) warn("fit_component: excluded {} zero-norm embeddings", dropped);
    std::tie(d.normal, d.abnormal) = fit_gaussians(scores, kept);
    d.kl_score = gaussian_kl(d.abnormal, d.normal);
    return d;
}

[[nodiscard]] inline LabelerState fit_labeler_embeddings(std::span<const EmbeddingPair> embeddings,
                                                         std::span<const Label> labels) {
    std::vector<Vec> en, de;
    for (const auto& e : embeddings) {
        en.push_back(e.encoder);
        de.push_back(e.decoder);
    }
    LabelerState st;
    st.encoder = fit_component(en, labels);
    st.decoder = fit_component(de, labels);
    st.selected = select_component(st.encoder.kl_score, st.decoder.kl_score);
    std::size_t n_normal = 0;
    for (Label l : labels) n_normal += (l == Label::normal);
    st.prior_normal = static_cast<double>(n_normal) / static_cast<double>(labels.size());
    return st;
}

[[nodiscard]] inline LabelerState fit_labeler(const AutoencoderModel& model, const Dataset& data) {
    data.validate();
    if (data.count(Label::normal) < 2 || data.count(Label::abnormal) < 2) {
        throw DataError("fit_labeler: each class needs at least 2 samples");
    }
    std::vector<EmbeddingPair> e;
    e.reserve(data.size());
    for (const auto& s : data.samples) e.push_back(forward(model, s.features));
    return fit_labeler_embeddings(e, data.labels());
}

/// Label from the selected component only.
[[nodiscard]] inline Label label_embeddings(const EmbeddingPair& e, const LabelerState& st) {
    const auto& d = st.active();
    return component_label(prototype_score(pick(e, st.selected), d), d);
}

[[nodiscard]] inline Label pseudo_label(std::span<const double> x, const AutoencoderModel& model,
                                        const LabelerState& st) {
    return label_embeddings(forward(model, x), st);
}

[[nodiscard]] inline std::vector<Label> pseudo_label_batch(const Dataset& data, const AutoencoderModel& model,
                                                           const LabelerState& st) {
    std::vector<Label> out;
    out.reserve(data.size());
    for (const auto& s : data.samples) out.push_back(pseudo_label(s.features, model, st));
    return out;
}

/// Copy of `data` with labels replaced by pseudo-labels.
[[nodiscard]] inline Dataset with_pseudo_labels(const Dataset& data, const AutoencoderModel& model,
                                                const LabelerState& st) {
    Dataset out = data;
    const auto y = pseudo_label_batch(data, model, st);
    for (std::size_t i = 0; i < y.size(); ++i) out.samples[i].label = y[i];
    return out;
}

/// Per-sample alternative: use whichever component has the larger absolute
/// density gap at this sample's score. Equal gaps go to the decoder.
[[nodiscard]] inline Label pointwise_label_embeddings(const EmbeddingPair& e, const LabelerState& st) {
    auto gap = [&](Component c, double& s) {
        const auto& d = st.component(c);
        s = prototype_score(pick(e, c), d);
        return std::abs(pdf(s, d.normal) - pdf(s, d.abnormal));
    };
    double s_en = 0.0, s_de = 0.0;
    const double g_en = gap(Component::encoder, s_en);
    const double g_de = gap(Component::decoder, s_de);
    return g_en > g_de ? component_label(s_en, st.encoder) : component_label(s_de, st.decoder);
}

[[nodiscard]] inline Label pointwise_label(std::span<const double> x, const AutoencoderModel& model,
                                           const LabelerState& st) {
    return pointwise_label_embeddings(forward(model, x), st);
}

}  // namespace netsight
