#include <catch_amalgamated.hpp>

#include <cmath>

#include "netsight/checkpoint.hpp"
#include "netsight/nn.hpp"
#include "netsight/optim.hpp"
#include "oracles.hpp"

using namespace netsight;
using Catch::Approx;

namespace {

AutoencoderModel single_linear(std::size_t d) {
    AutoencoderModel m;
    DenseLayer id{Matrix(d, d), Vec(d, 0.0), Activation::linear};
    for (std::size_t i = 0; i < d; ++i) id.weight(i, i) = 1.0;
    m.encoder = {id};
    m.decoder = {id};
    return m;
}

std::vector<Vec> random_inputs(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<Vec> xs(n, Vec(d));
    for (auto& x : xs) {
        for (double& v : x) v = z(rng);
    }
    return xs;
}

// sum_k w_k * (encoder_k + decoder_k^2): a smooth loss touching both embeddings.
double probe_loss(const AutoencoderModel& m, const std::vector<Vec>& xs, GradientTape* tape) {
    const auto rec = record_forward(m, xs);
    double L = 0.0;
    std::vector<EmbeddingGrad> up;
    for (const auto& e : rec.embeddings()) {
        EmbeddingGrad g{Vec(e.encoder.size()), Vec(e.decoder.size())};
        for (std::size_t k = 0; k < e.encoder.size(); ++k) {
            const double w = 0.1 * static_cast<double>(k + 1);
            L += w * e.encoder[k];
            g.encoder[k] = w;
        }
        for (std::size_t k = 0; k < e.decoder.size(); ++k) {
            L += 0.5 * e.decoder[k] * e.decoder[k];
            g.decoder[k] = e.decoder[k];
        }
        up.push_back(std::move(g));
    }
    if (tape) backward(m, rec, up, *tape);
    return L;
}

}  // namespace

TEST_CASE("identity layer passes the input through", "[nn]") {
    const auto m = single_linear(2);
    const auto e = forward(m, Vec{1.0, 2.0});
    CHECK(e.encoder == Vec{1.0, 2.0});
    CHECK(e.decoder == Vec{1.0, 2.0});
}

TEST_CASE("all-zero parameters give all-zero embeddings", "[nn]") {
    auto m = make_autoencoder({5, {8}, 3, {8}}, 1);
    visit_parameters(m, [](const std::string&, std::span<double> p) { std::fill(p.begin(), p.end(), 0.0); });
    const auto e = forward(m, Vec{1, -2, 3, 4, 5});
    CHECK(norm(e.encoder) == 0.0);
    CHECK(norm(e.decoder) == 0.0);
}

TEST_CASE("forward matches a hand-rolled matmul", "[nn]") {
    const auto m = make_autoencoder({20, {128}, 32, {128}}, 42);
    for (const auto& x : random_inputs(5, 20, 3)) {
        const auto e = forward(m, x);
        const auto ref = oracle::naive_forward(m, x);
        for (std::size_t k = 0; k < e.encoder.size(); ++k) CHECK(std::abs(e.encoder[k] - ref.latent[k]) < 1e-12);
        for (std::size_t k = 0; k < e.decoder.size(); ++k) CHECK(std::abs(e.decoder[k] - ref.output[k]) < 1e-12);
    }
}

TEST_CASE("forward is pure and rejects wrong dimensions", "[nn]") {
    const auto m = make_autoencoder({4, {6}, 2, {6}}, 9);
    const Vec x{0.3, -1.0, 2.0, 0.5};
    const auto a = forward(m, x);
    const auto b = forward(m, x);
    CHECK(a.encoder == b.encoder);
    CHECK(a.decoder == b.decoder);
    CHECK_THROWS_AS(forward(m, Vec{1.0, 2.0}), DataError);
}

TEST_CASE("initialization is seeded and bounded by sqrt(1/fan_in)", "[nn]") {
    const auto a = make_autoencoder({10, {16}, 4, {16}}, 5);
    const auto b = make_autoencoder({10, {16}, 4, {16}}, 5);
    const auto c = make_autoencoder({10, {16}, 4, {16}}, 6);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    for (const auto* stack : {&a.encoder, &a.decoder}) {
        for (const auto& l : *stack) {
            const double bound = std::sqrt(1.0 / static_cast<double>(l.in_dim()));
            for (double w : l.weight.data) CHECK(std::abs(w) <= bound);
        }
    }
    CHECK(a.encoder.front().activation == Activation::relu);
    CHECK(a.encoder.back().activation == Activation::linear);
    CHECK(a.decoder.back().out_dim() == 10);
}

TEST_CASE("linear layer gradient of summed outputs is outer(1, x)", "[nn]") {
    AutoencoderModel m = single_linear(3);
    const std::vector<Vec> xs{{1.0, -2.0, 0.5}};
    const auto rec = record_forward(m, xs);
    auto tape = GradientTape::zeros_like(m);
    const std::vector<EmbeddingGrad> up{{Vec(3, 1.0), {}}};
    backward(m, rec, up, tape);
    for (std::size_t r = 0; r < 3; ++r) {
        for (std::size_t c = 0; c < 3; ++c) CHECK(tape.encoder[0].weight(r, c) == xs[0][c]);
        CHECK(tape.encoder[0].bias[r] == 1.0);
    }
}

TEST_CASE("constant loss leaves every gradient at zero", "[nn]") {
    const auto m = make_autoencoder({4, {6}, 2, {6}}, 2);
    const auto xs = random_inputs(3, 4, 1);
    const auto rec = record_forward(m, xs);
    auto tape = GradientTape::zeros_like(m);
    backward(m, rec, std::vector<EmbeddingGrad>(3), tape);
    visit_parameters(tape, [](const std::string&, std::span<double> g) {
        for (double v : g) CHECK(v == 0.0);
    });
}

TEST_CASE("backward without a recorded forward is a state error", "[nn]") {
    const auto m = make_autoencoder({4, {6}, 2, {6}}, 2);
    auto tape = GradientTape::zeros_like(m);
    ForwardRecord empty;
    CHECK_THROWS_AS(backward(m, empty, {}, tape), StateError);
    const auto rec = record_forward(m, random_inputs(2, 4, 0));
    CHECK_THROWS_AS(backward(m, rec, std::vector<EmbeddingGrad>(1), tape), StateError);
}

TEST_CASE("backward matches central finite differences", "[nn]") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto m = make_autoencoder({5, {12}, 3, {12}}, seed);
        const auto xs = random_inputs(4, 5, seed + 10);
        auto tape = GradientTape::zeros_like(m);
        probe_loss(m, xs, &tape);
        const auto r = oracle::finite_difference(
            m, tape, [&](const AutoencoderModel& mm) { return probe_loss(mm, xs, nullptr); }, xs, 1e-5);
        INFO(r.worst);
        CHECK(r.checked > 0);
        CHECK(r.max_rel_error < 1e-4);
    }
}

TEST_CASE("SGD step moves theta by lr * g", "[nn]") {
    AutoencoderModel m = single_linear(1);
    m.encoder[0].weight(0, 0) = 1.0;
    auto tape = GradientTape::zeros_like(m);
    tape.encoder[0].weight(0, 0) = 2.0;
    auto opt = OptimizerState::sgd(0.1);
    step(m, tape, opt);
    CHECK(m.encoder[0].weight(0, 0) == Approx(0.8).margin(1e-15));
    CHECK(opt.steps == 1);
}

TEST_CASE("first Adam step has magnitude lr whatever the gradient scale", "[nn]") {
    for (double g : {1e-6, 1.0, 1e4}) {
        AutoencoderModel m = single_linear(2);
        auto tape = GradientTape::zeros_like(m);
        tape.encoder[0].weight(0, 1) = g;
        tape.encoder[0].bias[0] = -g;
        auto opt = OptimizerState::adam(0.01);
        step(m, tape, opt);
        // first step: m_hat = g, sqrt(v_hat) = |g|, so the update is lr * g / (|g| + eps)
        const double expected = 0.01 * g / (g + 1e-8);
        CHECK(m.encoder[0].weight(0, 1) == Approx(-expected).epsilon(1e-12));
        CHECK(m.encoder[0].bias[0] == Approx(expected).epsilon(1e-12));
        if (g >= 1.0) CHECK(std::abs(m.encoder[0].bias[0]) == Approx(0.01).epsilon(1e-6));
        CHECK(m.encoder[0].weight(0, 0) == 1.0);
    }
}

TEST_CASE("zero gradient leaves parameters unchanged", "[nn]") {
    auto m = make_autoencoder({3, {4}, 2, {4}}, 8);
    const auto before = m;
    auto tape = GradientTape::zeros_like(m);
    auto sgd = OptimizerState::sgd(0.5);
    auto adam = OptimizerState::adam(0.5);
    step(m, tape, sgd);
    step(m, tape, adam);
    CHECK(m == before);
}

TEST_CASE("non-finite gradient aborts the step and names the parameter", "[nn]") {
    auto m = make_autoencoder({3, {4}, 2, {4}}, 8);
    const auto before = m;
    auto tape = GradientTape::zeros_like(m);
    tape.encoder[0].weight(0, 0) = 1.0;
    tape.decoder[1].bias[2] = std::nan("");
    auto opt = OptimizerState::adam(0.1);
    try {
        step(m, tape, opt);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("decoder.1.bias") != std::string::npos);
    }
    CHECK(m == before);
    CHECK(opt.steps == 0);
}

TEST_CASE("cosine similarity basics", "[nn]") {
    CHECK(cosine_similarity(Vec{3, 4}, Vec{3, 4}) == Approx(1.0));
    CHECK(cosine_similarity(Vec{1, 0}, Vec{0, 1}) == Approx(0.0).margin(1e-15));
    CHECK(cosine_similarity(Vec{1, 2, 3}, Vec{-1, -2, -3}) == Approx(-1.0));
    CHECK_THROWS_AS(cosine_similarity(Vec{0, 0}, Vec{1, 0}), SimilarityError);
    CHECK_THROWS_AS(cosine_similarity(Vec{1}, Vec{1, 0}), ContractError);
}

TEST_CASE("identical seeds and inputs give bit-identical training steps", "[nn]") {
    auto run = [] {
        auto m = make_autoencoder({5, {12}, 3, {12}}, 77);
        auto opt = OptimizerState::adam(1e-2);
        const auto xs = random_inputs(6, 5, 4);
        for (int k = 0; k < 5; ++k) {
            auto tape = GradientTape::zeros_like(m);
            probe_loss(m, xs, &tape);
            step(m, tape, opt);
        }
        return m;
    };
    CHECK(run() == run());
}

TEST_CASE("checkpoint round trip is bit-exact", "[nn]") {
    const auto m = make_autoencoder({7, {9}, 3, {9}}, 123);
    LabelerState st;
    st.encoder = {Vec{0.1, 0.2, 1.0 / 3.0}, {0.9, 0.05}, {0.2, 0.1}, 4.2};
    st.decoder = {Vec(7, std::nextafter(1.0, 2.0)), {0.7, 0.01}, {0.1, 0.3}, 0.8};
    st.selected = Component::encoder;
    st.prior_normal = 0.7;
    const Checkpoint ck{m, st};
    const auto bytes = serialize_checkpoint(ck);
    const auto back = deserialize_checkpoint(bytes);
    CHECK(back == ck);
    CHECK(serialize_checkpoint(back) == bytes);
    CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
    CHECK_THROWS_AS(deserialize_checkpoint("garbage"), DataError);
    const Checkpoint bare{m, std::nullopt};
    CHECK(deserialize_checkpoint(serialize_checkpoint(bare)) == bare);
}
