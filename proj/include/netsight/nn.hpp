#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "netsight/error.hpp"
#include "netsight/tensor.hpp"

namespace netsight {

enum class Activation : std::uint8_t { linear = 0, relu = 1 };

[[nodiscard]] inline const char* to_string(Activation a) noexcept {
    return a == Activation::relu ? "relu" : "linear";
}

struct DenseLayer {
    Matrix weight;  // out x in
    Vec bias;       // out
    Activation activation = Activation::linear;

    [[nodiscard]] std::size_t in_dim() const noexcept { return weight.cols; }
    [[nodiscard]] std::size_t out_dim() const noexcept { return weight.rows; }

    bool operator==(const DenseLayer&) const = default;
};

/// Layer sizes of the autoencoder. Hidden layers use ReLU; the latent layer and
/// the reconstruction layer are linear.
struct Architecture {
    std::size_t input_dim = 0;
    std::vector<std::size_t> encoder_hidden{128};
    std::size_t latent_dim = 32;
    std::vector<std::size_t> decoder_hidden{128};
};

/// Feed-forward autoencoder. The encoder embedding is the latent vector and the
/// decoder embedding is the reconstruction.
struct AutoencoderModel {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;

    [[nodiscard]] std::size_t input_dim() const { return encoder.empty() ? 0 : encoder.front().in_dim(); }
    [[nodiscard]] std::size_t latent_dim() const { return encoder.empty() ? 0 : encoder.back().out_dim(); }
    [[nodiscard]] std::size_t output_dim() const { return decoder.empty() ? 0 : decoder.back().out_dim(); }

    /// Shape chain, decoder output = input dim, finite parameters.
    void validate() const {
        auto chain = [](const std::vector<DenseLayer>& layers, std::size_t in, const char* part) {
            for (std::size_t k = 0; k < layers.size(); ++k) {
                const auto& l = layers[k];
                if (l.in_dim() != in || l.bias.size() != l.out_dim() || l.weight.data.size() != l.in_dim() * l.out_dim()) {
                    throw DataError(std::string(part) + " layer " + std::to_string(k) + " has inconsistent shape");
                }
                if (!all_finite(l.weight.data) || !all_finite(l.bias)) {
                    throw NumericalError(std::string(part) + " layer " + std::to_string(k) + " has non-finite parameters");
                }
                in = l.out_dim();
            }
            return in;
        };
        if (encoder.empty() || decoder.empty()) throw DataError("autoencoder needs encoder and decoder layers");
        const std::size_t latent = chain(encoder, input_dim(), "encoder");
        const std::size_t out = chain(decoder, latent, "decoder");
        if (out != input_dim()) throw DataError("decoder output dim differs from input dim");
    }

    bool operator==(const AutoencoderModel&) const = default;
};

namespace detail {

inline DenseLayer make_layer(std::size_t in, std::size_t out, Activation act, std::mt19937_64& rng) {
    DenseLayer l{Matrix(out, in), Vec(out), act};
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : l.weight.data) w = dist(rng);
    for (double& b : l.bias) b = dist(rng);
    return l;
}

inline std::vector<DenseLayer> make_stack(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                                          std::mt19937_64& rng) {
    std::vector<DenseLayer> layers;
    for (std::size_t h : hidden) {
        layers.push_back(make_layer(in, h, Activation::relu, rng));
        in = h;
    }
    layers.push_back(make_layer(in, out, Activation::linear, rng));
    return layers;
}

}  // namespace detail

/// Seeded uniform init in [-sqrt(1/fan_in), +sqrt(1/fan_in)] for weights and biases.
[[nodiscard]] inline AutoencoderModel make_autoencoder(const Architecture& arch, std::uint64_t seed) {
    if (arch.input_dim == 0 || arch.latent_dim == 0) throw ConfigError("architecture dims must be positive");
    std::mt19937_64 rng(seed);
    AutoencoderModel m;
    m.encoder = detail::make_stack(arch.input_dim, arch.encoder_hidden, arch.latent_dim, rng);
    m.decoder = detail::make_stack(arch.latent_dim, arch.decoder_hidden, arch.input_dim, rng);
    return m;
}

struct EmbeddingPair {
    Vec encoder;
    Vec decoder;
};

enum class Component : std::uint8_t { encoder = 0, decoder = 1 };

[[nodiscard]] inline const char* to_string(Component c) noexcept { return c == Component::encoder ? "en" : "de"; }

[[nodiscard]] inline const Vec& pick(const EmbeddingPair& e, Component c) noexcept {
    return c == Component::encoder ? e.encoder : e.decoder;
}
[[nodiscard]] inline Vec& pick(EmbeddingPair& e, Component c) noexcept {
    return c == Component::encoder ? e.encoder : e.decoder;
}

namespace detail {

inline Vec apply_layer(const DenseLayer& l, std::span<const double> x) {
    Vec y(l.out_dim());
    affine(l.weight, l.bias, x, y);
    if (l.activation == Activation::relu) {
        for (double& v : y) v = v > 0.0 ? v : 0.0;
    }
    return y;
}

inline void check_input(const AutoencoderModel& m, std::span<const double> x) {
    if (x.size() != m.input_dim()) {
        throw DataError("input has " + std::to_string(x.size()) + " features, model expects " +
                        std::to_string(m.input_dim()));
    }
}

}  // namespace detail

/// Pure forward pass.
[[nodiscard]] inline EmbeddingPair forward(const AutoencoderModel& m, std::span<const double> x) {
    detail::check_input(m, x);
    Vec h(x.begin(), x.end());
    for (const auto& l : m.encoder) h = detail::apply_layer(l, h);
    EmbeddingPair out;
    out.encoder = h;
    for (const auto& l : m.decoder) h = detail::apply_layer(l, h);
    out.decoder = std::move(h);
    return out;
}

[[nodiscard]] inline std::vector<EmbeddingPair> forward_batch(const AutoencoderModel& m,
                                                              std::span<const Vec> inputs) {
    std::vector<EmbeddingPair> out;
    out.reserve(inputs.size());
    for (const auto& x : inputs) out.push_back(forward(m, x));
    return out;
}

/// Activations kept from a forward pass so that backward can run. For each
/// sample: the input followed by the output of every encoder then decoder layer.
class ForwardRecord {
public:
    ForwardRecord() = default;

    [[nodiscard]] std::size_t size() const noexcept { return acts_.size(); }
    [[nodiscard]] bool empty() const noexcept { return acts_.empty(); }
    [[nodiscard]] const std::vector<EmbeddingPair>& embeddings() const noexcept { return embeddings_; }

private:
    friend ForwardRecord record_forward(const AutoencoderModel&, std::span<const Vec>);
    friend class BackwardPass;

    std::vector<std::vector<Vec>> acts_;
    std::vector<EmbeddingPair> embeddings_;
    std::size_t encoder_layers_ = 0;
};

[[nodiscard]] inline ForwardRecord record_forward(const AutoencoderModel& m, std::span<const Vec> inputs) {
    ForwardRecord rec;
    rec.encoder_layers_ = m.encoder.size();
    rec.acts_.reserve(inputs.size());
    rec.embeddings_.reserve(inputs.size());
    for (const auto& x : inputs) {
        detail::check_input(m, x);
        std::vector<Vec> acts;
        acts.reserve(m.encoder.size() + m.decoder.size() + 1);
        acts.emplace_back(x.begin(), x.end());
        for (const auto& l : m.encoder) acts.push_back(detail::apply_layer(l, acts.back()));
        const Vec latent = acts.back();
        for (const auto& l : m.decoder) acts.push_back(detail::apply_layer(l, acts.back()));
        rec.embeddings_.push_back({latent, acts.back()});
        rec.acts_.push_back(std::move(acts));
    }
    return rec;
}

/// Per-parameter gradient buffers shaped like the model.
struct GradientTape {
    std::vector<DenseLayer> encoder;
    std::vector<DenseLayer> decoder;

    [[nodiscard]] static GradientTape zeros_like(const AutoencoderModel& m) {
        GradientTape t;
        auto zero = [](const std::vector<DenseLayer>& src) {
            std::vector<DenseLayer> out;
            for (const auto& l : src) out.push_back({Matrix(l.out_dim(), l.in_dim()), Vec(l.out_dim()), l.activation});
            return out;
        };
        t.encoder = zero(m.encoder);
        t.decoder = zero(m.decoder);
        return t;
    }

    void zero() {
        for (auto* stack : {&encoder, &decoder}) {
            for (auto& l : *stack) {
                std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
                std::fill(l.bias.begin(), l.bias.end(), 0.0);
            }
        }
    }
};

/// Upstream gradient of the loss with respect to each embedding of a sample.
/// An empty vector means "no gradient" for that component.
struct EmbeddingGrad {
    Vec encoder;
    Vec decoder;
};

class BackwardPass {
public:
    /// Accumulates dLoss/dtheta into `tape` for every sample of `rec`.
    static void run(const AutoencoderModel& m, const ForwardRecord& rec, std::span<const EmbeddingGrad> upstream,
                    GradientTape& tape) {
        if (rec.empty()) throw StateError("backward called without a recorded forward pass");
        if (upstream.size() != rec.size()) {
            throw StateError("backward: " + std::to_string(upstream.size()) + " upstream gradients for " +
                             std::to_string(rec.size()) + " recorded samples");
        }
        if (rec.encoder_layers_ != m.encoder.size()) throw StateError("backward: record belongs to another model");
        const std::size_t ne = m.encoder.size();
        for (std::size_t s = 0; s < rec.size(); ++s) {
            const auto& acts = rec.acts_[s];
            const auto& up = upstream[s];
            Vec g = up.decoder.empty() ? Vec(m.output_dim(), 0.0) : up.decoder;
            for (std::size_t k = m.decoder.size(); k-- > 0;) {
                g = layer_backward(m.decoder[k], acts[ne + k], acts[ne + k + 1], g, tape.decoder[k]);
            }
            if (!up.encoder.empty()) {
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += up.encoder[i];
            }
            for (std::size_t k = ne; k-- > 0;) {
                g = layer_backward(m.encoder[k], acts[k], acts[k + 1], g, tape.encoder[k]);
            }
        }
    }

private:
    // Returns dL/d(input of layer) and accumulates parameter gradients.
    static Vec layer_backward(const DenseLayer& l, const Vec& in, const Vec& out, Vec g_out, DenseLayer& grad) {
        if (l.activation == Activation::relu) {
            for (std::size_t i = 0; i < g_out.size(); ++i) {
                if (out[i] <= 0.0) g_out[i] = 0.0;
            }
        }
        Vec g_in(l.in_dim(), 0.0);
        for (std::size_t r = 0; r < l.out_dim(); ++r) {
            const double go = g_out[r];
            if (go == 0.0) continue;
            grad.bias[r] += go;
            auto grow = grad.weight.row(r);
            auto wrow = l.weight.row(r);
            for (std::size_t c = 0; c < l.in_dim(); ++c) {
                grow[c] += go * in[c];
                g_in[c] += go * wrow[c];
            }
        }
        return g_in;
    }
};

inline void backward(const AutoencoderModel& m, const ForwardRecord& rec, std::span<const EmbeddingGrad> upstream,
                     GradientTape& tape) {
    BackwardPass::run(m, rec, upstream, tape);
}

/// Visits every parameter array of `model` (and the matching tape buffer when
/// given) with a dotted path such as "encoder.1.weight".
template <class Model, class Fn>
void visit_parameters(Model& model, Fn&& fn) {
    auto walk = [&](auto& stack, const char* part) {
        for (std::size_t k = 0; k < stack.size(); ++k) {
            const std::string base = std::string(part) + "." + std::to_string(k);
            fn(base + ".weight", std::span(stack[k].weight.data));
            fn(base + ".bias", std::span(stack[k].bias));
        }
    };
    walk(model.encoder, "encoder");
    walk(model.decoder, "decoder");
}

template <class Fn>
void visit_parameters(AutoencoderModel& model, const GradientTape& tape, Fn&& fn) {
    auto walk = [&](auto& stack, const auto& gstack, const char* part) {
        for (std::size_t k = 0; k < stack.size(); ++k) {
            const std::string base = std::string(part) + "." + std::to_string(k);
            fn(base + ".weight", std::span(stack[k].weight.data), std::span(gstack[k].weight.data));
            fn(base + ".bias", std::span(stack[k].bias), std::span(gstack[k].bias));
        }
    };
    walk(model.encoder, tape.encoder, "encoder");
    walk(model.decoder, tape.decoder, "decoder");
}

}  // namespace netsight
