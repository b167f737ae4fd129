#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "netsight/contrastive.hpp"
#include "netsight/dataset.hpp"
#include "netsight/error.hpp"
#include "netsight/log.hpp"
#include "netsight/nn.hpp"
#include "netsight/optim.hpp"

namespace netsight {

/// Softmax over j != anchor of cos(e_anchor, e_j), without temperature.
[[nodiscard]] inline Vec similarity_distribution(std::span<const Vec> embeddings, std::size_t anchor) {
    const std::size_t n = embeddings.size();
    if (n < 2) throw ContractError("similarity_distribution: need at least 2 embeddings");
    if (anchor >= n) throw ContractError("similarity_distribution: anchor out of range");
    Vec h;
    h.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
        if (j != anchor) h.push_back(cosine_similarity(embeddings[anchor], embeddings[j]));
    }
    const double lse = log_sum_exp(h);
    for (double& v : h) v = std::exp(v - lse);
    return h;
}

namespace detail {

/// Row-wise log-softmax of a cosine table with the diagonal excluded.
inline std::vector<Vec> log_similarity_rows(const CosineTable& t) {
    const std::size_t n = t.cos.size();
    std::vector<Vec> out(n, Vec(n, 0.0));
    Vec row;
    for (std::size_t i = 0; i < n; ++i) {
        row.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) row.push_back(t.cos[i][j]);
        }
        const double lse = log_sum_exp(row);
        for (std::size_t j = 0; j < n; ++j) out[i][j] = j == i ? 0.0 : t.cos[i][j] - lse;
    }
    return out;
}

inline void require_nonzero(std::span<const Vec> e, const char* what) {
    for (const auto& v : e) {
        if (norm(v) == 0.0) throw SimilarityError(std::string(what) + ": zero-norm embedding");
    }
}

}  // namespace detail

/// Mean over anchors of KL(P_teacher(.|i) || P_student(.|i)), plus the
/// gradient w.r.t. the student embeddings when requested.
struct KdLoss {
    double value = 0.0;
    std::vector<Vec> grad;
};

[[nodiscard]] inline KdLoss kd_loss_with_grad(std::span<const Vec> teacher, std::span<const Vec> student,
                                              bool want_grad = true) {
    if (teacher.size() != student.size()) throw ContractError("kd_loss: teacher and student sets differ in size");
    if (teacher.size() < 2) throw ContractError("kd_loss: need at least 2 samples");
    detail::require_nonzero(teacher, "kd_loss");
    detail::require_nonzero(student, "kd_loss");
    const std::size_t n = teacher.size();
    const detail::CosineTable tt(teacher), ts(student);
    const auto lt = detail::log_similarity_rows(tt);
    const auto ls = detail::log_similarity_rows(ts);
    KdLoss out;
    std::vector<Vec> dcos;
    if (want_grad) dcos.assign(n, Vec(n, 0.0));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double pt = std::exp(lt[i][j]);
            out.value += pt * (lt[i][j] - ls[i][j]);
            if (want_grad) dcos[i][j] = inv_n * (std::exp(ls[i][j]) - pt);
        }
    }
    out.value = std::max(out.value * inv_n, 0.0);
    if (want_grad) out.grad = ts.embedding_grads(dcos);
    return out;
}

[[nodiscard]] inline double kd_loss(std::span<const Vec> teacher, std::span<const Vec> student) {
    return kd_loss_with_grad(teacher, student, false).value;
}

struct AdaptConfig {
    double gamma = 0.1;
    int epochs = 10;
    double learning_rate = 0.1;
    double temperature = 0.02;
    std::size_t anchor_batch = 64;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("adapt.gamma must be in [0, 1]");
        if (epochs < 0) throw ConfigError("adapt.epochs must be >= 0");
        if (!(learning_rate >= 0.0)) throw ConfigError("adapt.learning_rate must be >= 0");
        if (!(temperature > 0.0 && temperature <= 1.0)) throw ConfigError("adapt.temperature must be in (0, 1]");
        if (anchor_batch < 2) throw ConfigError("adapt.anchor_batch must be >= 2");
    }
};

struct AdaptationLoss {
    std::optional<double> contrastive;  // nullopt when the batch is single-class
    double kd_encoder = 0.0;
    double kd_decoder = 0.0;
    double gamma = 0.0;

    [[nodiscard]] double kd() const noexcept { return kd_encoder + kd_decoder; }
    [[nodiscard]] double total() const noexcept { return contrastive.value_or(0.0) + gamma * kd(); }
};

/// Contrastive loss of the student plus gamma times the encoder and decoder KD
/// terms against the frozen teacher. Gradients, when requested, go to the student only.
inline AdaptationLoss adaptation_loss(const AutoencoderModel& teacher, const AutoencoderModel& student,
                                      std::span<const Vec> inputs, std::span<const Label> labels, double tau,
                                      double gamma, GradientTape* tape = nullptr) {
    if (inputs.size() != labels.size()) throw ContractError("adaptation_loss: inputs and labels differ in length");
    if (inputs.size() < 2) throw ContractError("adaptation_loss: need at least 2 samples");
    const bool want = tape != nullptr;
    const auto rec = record_forward(student, inputs);
    const auto s_en = detail::component_of(rec.embeddings(), Component::encoder);
    const auto s_de = detail::component_of(rec.embeddings(), Component::decoder);
    std::vector<Vec> t_en, t_de;
    for (const auto& x : inputs) {
        auto e = forward(teacher, x);
        t_en.push_back(std::move(e.encoder));
        t_de.push_back(std::move(e.decoder));
    }
    AdaptationLoss L;
    L.gamma = gamma;
    const auto c_en = contrastive_component(s_en, labels, tau, want);
    const auto c_de = contrastive_component(s_de, labels, tau, want);
    if (c_en && c_de) L.contrastive = c_en->value + c_de->value;
    const auto k_en = kd_loss_with_grad(t_en, s_en, want);
    const auto k_de = kd_loss_with_grad(t_de, s_de, want);
    L.kd_encoder = k_en.value;
    L.kd_decoder = k_de.value;
    if (want) {
        std::vector<EmbeddingGrad> up(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            Vec ge = k_en.grad[i], gd = k_de.grad[i];
            for (double& v : ge) v *= gamma;
            for (double& v : gd) v *= gamma;
            if (L.contrastive) {
                for (std::size_t k = 0; k < ge.size(); ++k) ge[k] += c_en->grad[i][k];
                for (std::size_t k = 0; k < gd.size(); ++k) gd[k] += c_de->grad[i][k];
            }
            up[i] = {std::move(ge), std::move(gd)};
        }
        backward(student, rec, up, *tape);
    }
    return L;
}

struct AdaptReport {
    int epochs_run = 0;
    Vec contrastive_trace;  // per-epoch mean over batches with a contrastive term
    Vec kd_trace;           // per-epoch mean of kd_en + kd_de
    double gamma = 0.0;
    double kd_share = 0.0;  // gamma*KD / total, averaged over all batches
    std::size_t samples = 0;
    std::size_t skipped_contrastive = 0;
};

struct AdaptResult {
    AutoencoderModel model;
    AdaptReport report;
};

/// Fine-tunes a copy of `teacher` on pseudo-labeled `selected` samples with
/// SGD. Batches of `anchor_batch` samples are drawn from a seeded shuffle each
/// epoch; batches with fewer than two samples are skipped.
[[nodiscard]] inline AdaptResult adapt(const AutoencoderModel& teacher, const Dataset& selected,
                                       const AdaptConfig& cfg) {
    cfg.validate();
    if (selected.empty()) throw DataError("adapt: empty selection");
    selected.validate();
    AdaptResult res{teacher, {}};
    res.report.gamma = cfg.gamma;
    res.report.samples = selected.size();
    std::vector<std::size_t> idx(selected.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(cfg.seed);
    auto opt = OptimizerState::sgd(cfg.learning_rate);
    auto tape = GradientTape::zeros_like(res.model);
    double share_sum = 0.0;
    std::size_t share_n = 0;
    for (int ep = 0; ep < cfg.epochs; ++ep) {
        std::shuffle(idx.begin(), idx.end(), rng);
        double c_sum = 0.0, k_sum = 0.0;
        std::size_t c_n = 0, k_n = 0;
        for (std::size_t b = 0; b < idx.size(); b += cfg.anchor_batch) {
            const std::size_t e = std::min(idx.size(), b + cfg.anchor_batch);
            if (e - b < 2) continue;
            std::span<const std::size_t> part(idx.data() + b, e - b);
            const auto x = detail::batch_features(selected, part);
            std::vector<Label> y;
            for (std::size_t i : part) y.push_back(selected.samples[i].label);
            tape.zero();
            const auto L = adaptation_loss(teacher, res.model, x, y, cfg.temperature, cfg.gamma, &tape);
            if (!std::isfinite(L.total())) throw NumericalError("adapt: non-finite loss in epoch " + std::to_string(ep));
            if (!L.contrastive) {
                ++res.report.skipped_contrastive;
                warn("adapt: single-class batch, contrastive term skipped");
            } else {
                c_sum += *L.contrastive;
                ++c_n;
            }
            k_sum += L.kd();
            ++k_n;
            if (L.total() > 0.0) {
                share_sum += cfg.gamma * L.kd() / L.total();
                ++share_n;
            }
            step(res.model, tape, opt);
        }
        res.report.contrastive_trace.push_back(c_n ? c_sum / static_cast<double>(c_n) : 0.0);
        res.report.kd_trace.push_back(k_n ? k_sum / static_cast<double>(k_n) : 0.0);
        res.report.epochs_run = ep + 1;
    }
    res.report.kd_share = share_n ? share_sum / static_cast<double>(share_n) : 0.0;
    return res;
}

}  // namespace netsight
