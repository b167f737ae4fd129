#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "netsight/dataset.hpp"
#include "netsight/error.hpp"
#include "netsight/log.hpp"
#include "netsight/nn.hpp"
#include "netsight/optim.hpp"

namespace netsight {

struct ContrastiveConfig {
    double temperature = 0.02;
    int epochs = 10;
    double learning_rate = 1e-3;
    std::size_t batch_size = 64;
    // 0 means derive from batch_size and the training-set class prior.
    std::size_t batch_normals = 0;
    std::size_t batch_abnormals = 0;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(temperature > 0.0 && temperature <= 1.0)) throw ConfigError("contrastive.temperature must be in (0, 1]");
        if (epochs < 0) throw ConfigError("contrastive.epochs must be >= 0");
        if (!(learning_rate >= 0.0)) throw ConfigError("contrastive.learning_rate must be >= 0");
        if (batch_normals != 0 && batch_normals < 2) throw ConfigError("contrastive.batch_normals must be >= 2");
        if (batch_size < 3 && (batch_normals == 0 || batch_abnormals == 0)) {
            throw ConfigError("contrastive.batch_size must be >= 3");
        }
    }
};

/// -log(exp(a/t) / (exp(a/t) + sum_k exp(n_k/t))), evaluated with log-sum-exp.
[[nodiscard]] inline double infonce_pair_loss(double anchor_sim, std::span<const double> negative_sims, double tau) {
    if (!(tau > 0.0)) throw ContractError("infonce_pair_loss: temperature must be positive");
    if (negative_sims.empty()) throw ContractError("infonce_pair_loss: empty negative set");
    Vec z;
    z.reserve(negative_sims.size() + 1);
    z.push_back(anchor_sim / tau);
    for (double s : negative_sims) z.push_back(s / tau);
    return log_sum_exp(z) - z.front();
}

namespace detail {

/// Unit vectors, norms and the full cosine matrix for one set of embeddings.
struct CosineTable {
    std::vector<Vec> unit;
    Vec length;
    std::vector<Vec> cos;

    explicit CosineTable(std::span<const Vec> e) {
        const std::size_t n = e.size();
        unit.reserve(n);
        length.reserve(n);
        for (const auto& v : e) {
            auto nv = normalized(v);
            unit.push_back(std::move(nv.unit));
            length.push_back(nv.length);
        }
        cos.assign(n, Vec(n, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            cos[i][i] = 1.0;
            for (std::size_t j = i + 1; j < n; ++j) {
                const double c = std::clamp(dot(unit[i], unit[j]), -1.0, 1.0);
                cos[i][j] = c;
                cos[j][i] = c;
            }
        }
    }

    /// Back-propagates dL/dcos (a non-symmetric n x n table; entry (i, j) is
    /// the gradient w.r.t. cos(e_i, e_j) as used in row i) into dL/de.
    [[nodiscard]] std::vector<Vec> embedding_grads(const std::vector<Vec>& dcos) const {
        const std::size_t n = unit.size();
        std::vector<Vec> g(n, Vec(n ? unit[0].size() : 0, 0.0));
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                const double c = dcos[i][j] + dcos[j][i];
                if (c == 0.0) continue;
                add_cosine_grad(unit[i], unit[j], cos[i][j], length[i], c, g[i]);
            }
        }
        return g;
    }
};

inline std::vector<std::size_t> nonzero_indices(std::span<const Vec> e, const char* what) {
    std::vector<std::size_t> keep;
    keep.reserve(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
        if (norm(e[i]) > 0.0) keep.push_back(i);
    }
    if (keep.size() != e.size()) {
        warn("{}: excluded {} zero-norm embeddings from similarity computations", what, e.size() - keep.size());
    }
    return keep;
}

}  // namespace detail

/// Value and gradient of the averaged contrastive loss for one component.
struct ComponentLoss {
    double value = 0.0;
    std::vector<Vec> grad;  // dL/de per input embedding (zero for excluded ones)
};

/// Mean of the pair loss over ordered normal anchor-positive pairs, with all
/// abnormals of the batch as negatives. Returns nullopt when the batch holds
/// fewer than two normals or no abnormal, which callers treat as "skip".
[[nodiscard]] inline std::optional<ComponentLoss> contrastive_component(std::span<const Vec> embeddings,
                                                                        std::span<const Label> labels, double tau,
                                                                        bool want_grad = true) {
    if (embeddings.size() != labels.size()) throw ContractError("contrastive: embeddings and labels differ in length");
    if (!(tau > 0.0)) throw ContractError("contrastive: temperature must be positive");
    const auto keep = detail::nonzero_indices(embeddings, "contrastive");
    std::vector<Vec> e;
    std::vector<std::size_t> normals, abnormals;
    for (std::size_t k = 0; k < keep.size(); ++k) {
        e.push_back(embeddings[keep[k]]);
        (labels[keep[k]] == Label::normal ? normals : abnormals).push_back(k);
    }
    if (normals.size() < 2 || abnormals.empty()) return std::nullopt;

    const detail::CosineTable t(e);
    const std::size_t ln = normals.size();
    const double scale = 1.0 / static_cast<double>(ln * (ln - 1));
    std::vector<Vec> dcos;
    if (want_grad) dcos.assign(e.size(), Vec(e.size(), 0.0));

    double total = 0.0;
    Vec z(abnormals.size() + 1);
    for (std::size_t i : normals) {
        for (std::size_t a = 0; a < abnormals.size(); ++a) z[a + 1] = t.cos[i][abnormals[a]] / tau;
        for (std::size_t j : normals) {
            if (j == i) continue;
            z[0] = t.cos[i][j] / tau;
            const double lse = log_sum_exp(z);
            total += lse - z[0];
            if (!want_grad) continue;
            dcos[i][j] += scale * (std::exp(z[0] - lse) - 1.0) / tau;
            for (std::size_t a = 0; a < abnormals.size(); ++a) {
                dcos[i][abnormals[a]] += scale * std::exp(z[a + 1] - lse) / tau;
            }
        }
    }
    ComponentLoss out;
    out.value = total * scale;
    if (want_grad) {
        auto g = t.embedding_grads(dcos);
        out.grad.assign(embeddings.size(), Vec(embeddings.empty() ? 0 : embeddings[0].size(), 0.0));
        for (std::size_t k = 0; k < keep.size(); ++k) out.grad[keep[k]] = std::move(g[k]);
    }
    return out;
}

[[nodiscard]] inline std::optional<double> average_contrastive_loss(std::span<const EmbeddingPair> embeddings,
                                                                    std::span<const Label> labels, double tau,
                                                                    Component component) {
    std::vector<Vec> e;
    e.reserve(embeddings.size());
    for (const auto& p : embeddings) e.push_back(pick(p, component));
    auto r = contrastive_component(e, labels, tau, false);
    if (!r) return std::nullopt;
    return r->value;
}

namespace detail {

inline std::vector<Vec> component_of(const std::vector<EmbeddingPair>& e, Component c) {
    std::vector<Vec> out;
    out.reserve(e.size());
    for (const auto& p : e) out.push_back(pick(p, c));
    return out;
}

inline std::vector<Vec> batch_features(const Dataset& data, std::span<const std::size_t> idx) {
    std::vector<Vec> x;
    x.reserve(idx.size());
    for (std::size_t i : idx) x.push_back(data.samples[i].features);
    return x;
}

}  // namespace detail

/// Encoder plus decoder contrastive loss on one batch. When `tape` is given the
/// gradient of the sum is accumulated into it. nullopt means the batch was skipped.
inline std::optional<double> total_loss(const AutoencoderModel& model, std::span<const Vec> inputs,
                                        std::span<const Label> labels, double tau, GradientTape* tape = nullptr) {
    if (inputs.size() != labels.size()) throw ContractError("total_loss: inputs and labels differ in length");
    const auto rec = record_forward(model, inputs);
    const auto en = contrastive_component(detail::component_of(rec.embeddings(), Component::encoder), labels, tau,
                                          tape != nullptr);
    const auto de = contrastive_component(detail::component_of(rec.embeddings(), Component::decoder), labels, tau,
                                          tape != nullptr);
    if (!en || !de) return std::nullopt;
    if (tape) {
        std::vector<EmbeddingGrad> up(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) up[i] = {en->grad[i], de->grad[i]};
        backward(model, rec, up, *tape);
    }
    return en->value + de->value;
}

/// Per-class batch sizes: explicit values when set, else a batch of
/// `batch_size` split by the normal prior with at least 2 normals and 1 abnormal.
[[nodiscard]] inline std::pair<std::size_t, std::size_t> batch_composition(const ContrastiveConfig& cfg,
                                                                           std::size_t n_normal,
                                                                           std::size_t n_abnormal) {
    if (cfg.batch_normals != 0 && cfg.batch_abnormals != 0) return {cfg.batch_normals, cfg.batch_abnormals};
    const double prior = static_cast<double>(n_normal) / static_cast<double>(n_normal + n_abnormal);
    const auto bs = static_cast<double>(cfg.batch_size);
    std::size_t bn = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(bs * prior)));
    if (bn + 1 > cfg.batch_size) bn = cfg.batch_size - 1;
    const std::size_t ba = std::max<std::size_t>(1, cfg.batch_size - bn);
    return {std::max<std::size_t>(bn, 2), ba};
}

struct TrainResult {
    AutoencoderModel model;
    Vec loss_trace;  // mean batch loss per epoch
    std::size_t batches_per_epoch = 0;
};

/// Stratified mini-batch training of the summed contrastive loss with Adam.
/// Batches are re-drawn each epoch from seeded shuffles of each class; the
/// last partial batch is dropped.
[[nodiscard]] inline TrainResult train(AutoencoderModel model, const Dataset& data, const ContrastiveConfig& cfg) {
    cfg.validate();
    data.validate();
    std::vector<std::size_t> normals, abnormals;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (data.samples[i].label == Label::normal ? normals : abnormals).push_back(i);
    }
    if (normals.size() < 2 || abnormals.empty()) {
        throw DataError("training needs at least 2 normal and 1 abnormal samples");
    }
    const auto [bn, ba] = batch_composition(cfg, normals.size(), abnormals.size());
    const std::size_t nb = std::min(normals.size() / bn, abnormals.size() / ba);
    if (nb == 0) throw DataError("training set too small for one stratified batch");

    TrainResult res{std::move(model), {}, nb};
    std::mt19937_64 rng(cfg.seed);
    auto opt = OptimizerState::adam(cfg.learning_rate);
    auto tape = GradientTape::zeros_like(res.model);
    for (int ep = 0; ep < cfg.epochs; ++ep) {
        std::shuffle(normals.begin(), normals.end(), rng);
        std::shuffle(abnormals.begin(), abnormals.end(), rng);
        double sum = 0.0;
        std::size_t used = 0;
        for (std::size_t b = 0; b < nb; ++b) {
            std::vector<std::size_t> idx(normals.begin() + static_cast<std::ptrdiff_t>(b * bn),
                                         normals.begin() + static_cast<std::ptrdiff_t>((b + 1) * bn));
            idx.insert(idx.end(), abnormals.begin() + static_cast<std::ptrdiff_t>(b * ba),
                       abnormals.begin() + static_cast<std::ptrdiff_t>((b + 1) * ba));
            const auto x = detail::batch_features(data, idx);
            std::vector<Label> y;
            for (std::size_t i : idx) y.push_back(data.samples[i].label);
            tape.zero();
            const auto loss = total_loss(res.model, x, y, cfg.temperature, &tape);
            if (!loss) continue;
            if (!std::isfinite(*loss)) throw NumericalError("non-finite contrastive loss in epoch " + std::to_string(ep));
            step(res.model, tape, opt);
            sum += *loss;
            ++used;
        }
        res.loss_trace.push_back(used ? sum / static_cast<double>(used) : 0.0);
    }
    return res;
}

}  // namespace netsight
