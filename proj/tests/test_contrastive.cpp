#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "netsight/contrastive.hpp"
#include "netsight/drift_sim.hpp"
#include "oracles.hpp"

using namespace netsight;
using Catch::Approx;

namespace {

struct Batch {
    std::vector<Vec> x;
    std::vector<Label> y;
};

Batch random_batch(std::size_t normals, std::size_t abnormals, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    Batch b;
    for (std::size_t i = 0; i < normals + abnormals; ++i) {
        Vec x(d);
        for (double& v : x) v = z(rng) + (i >= normals ? 1.5 : 0.0);
        b.x.push_back(x);
        b.y.push_back(i >= normals ? Label::abnormal : Label::normal);
    }
    return b;
}

double mean_normal_cosine(const AutoencoderModel& m, const Dataset& d) {
    std::vector<Vec> e;
    for (const auto& s : d.samples) {
        if (s.label == Label::normal) e.push_back(forward(m, s.features).encoder);
        if (e.size() == 200) break;
    }
    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        for (std::size_t j = i + 1; j < e.size(); ++j) {
            sum += cosine_similarity(e[i], e[j]);
            ++n;
        }
    }
    return sum / static_cast<double>(n);
}

}  // namespace

TEST_CASE("pair loss: equal anchor and negative give ln 2", "[contrastive]") {
    for (double tau : {0.02, 0.5, 1.0}) {
        const Vec negs{0.3};
        CHECK(infonce_pair_loss(0.3, negs, tau) == Approx(std::numbers::ln2).epsilon(1e-12));
    }
}

TEST_CASE("pair loss: scalar evaluation and extreme temperature", "[contrastive]") {
    const Vec negs{-1.0};
    CHECK(infonce_pair_loss(1.0, negs, 1.0) == Approx(std::log1p(std::exp(-2.0))).epsilon(1e-12));
    CHECK(infonce_pair_loss(1.0, negs, 1.0) == Approx(0.1269).margin(1e-4));
    CHECK(infonce_pair_loss(1.0, negs, 0.02) == Approx(0.0).margin(1e-12));
    CHECK(std::isfinite(infonce_pair_loss(1.0, negs, 0.02)));
    CHECK_THROWS_AS(infonce_pair_loss(1.0, Vec{}, 1.0), ContractError);
    CHECK_THROWS_AS(infonce_pair_loss(1.0, negs, 0.0), ContractError);
}

TEST_CASE("pair loss agrees with the unstabilized formula at moderate temperature", "[contrastive]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        Vec negs(1 + t % 5);
        for (double& v : negs) v = u(rng);
        const double a = u(rng);
        CHECK(infonce_pair_loss(a, negs, 0.5) == Approx(oracle::infonce_naive(a, negs, 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("pair loss properties", "[contrastive]") {
    const Vec negs{0.1, -0.4, 0.7};
    // positive, and monotone in the anchor and in each negative
    double prev = INFINITY;
    for (double a = -1.0; a <= 1.0; a += 0.1) {
        const double l = infonce_pair_loss(a, negs, 0.1);
        CHECK(l > 0.0);
        CHECK(l < prev);
        prev = l;
    }
    Vec n2 = negs;
    prev = -INFINITY;
    for (double v = -1.0; v <= 1.0; v += 0.1) {
        n2[1] = v;
        const double l = infonce_pair_loss(0.2, n2, 0.1);
        CHECK(l > prev);
        prev = l;
    }
    // all similarities equal: ln(1 + l_a)
    CHECK(infonce_pair_loss(0.4, Vec(4, 0.4), 0.02) == Approx(std::log(5.0)).epsilon(1e-12));
    // decreasing in 1/tau when the anchor beats the single negative
    prev = INFINITY;
    for (double inv = 1.0; inv <= 100.0; inv += 3.0) {
        const double l = infonce_pair_loss(0.5, Vec{0.3}, 1.0 / inv);
        CHECK(l < prev);
        prev = l;
    }
    // permutation invariance over negatives
    const Vec perm{0.7, 0.1, -0.4};
    CHECK(std::abs(infonce_pair_loss(0.2, negs, 0.05) - infonce_pair_loss(0.2, perm, 0.05)) < 1e-12);
}

TEST_CASE("average loss on constructed embeddings", "[contrastive]") {
    const std::vector<EmbeddingPair> e{{{1, 0}, {1, 0}}, {{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}};
    const std::vector<Label> y{Label::normal, Label::normal, Label::abnormal};
    const auto l = average_contrastive_loss(e, y, 1.0, Component::encoder);
    REQUIRE(l);
    CHECK(*l == Approx(std::log1p(std::exp(-1.0))).epsilon(1e-12));
    CHECK(*l == Approx(0.3133).margin(1e-4));

    const std::vector<EmbeddingPair> same(4, {{1, 2}, {3, 4}});
    const std::vector<Label> y2{Label::normal, Label::normal, Label::normal, Label::abnormal};
    CHECK(*average_contrastive_loss(same, y2, 0.02, Component::decoder) == Approx(std::numbers::ln2));
}

TEST_CASE("average loss signals skip instead of returning zero", "[contrastive]") {
    const std::vector<EmbeddingPair> e{{{1, 0}, {1, 0}}, {{0, 1}, {0, 1}}, {{1, 1}, {1, 1}}};
    CHECK_FALSE(average_contrastive_loss(e, std::vector<Label>{Label::normal, Label::abnormal, Label::abnormal}, 0.1,
                                         Component::encoder));
    CHECK_FALSE(average_contrastive_loss(e, std::vector<Label>(3, Label::normal), 0.1, Component::encoder));
}

TEST_CASE("average loss matches the definition summed pair by pair", "[contrastive]") {
    const auto b = random_batch(7, 4, 6, 3);
    std::vector<Vec> e = b.x;
    std::vector<int> yi;
    for (auto l : b.y) yi.push_back(to_int(l));
    const auto got = contrastive_component(e, b.y, 0.5, false);
    REQUIRE(got);
    CHECK(got->value == Approx(oracle::contrastive_naive(e, yi, 0.5)).epsilon(1e-12));
}

TEST_CASE("total loss is the sum of both components", "[contrastive]") {
    const auto m = make_autoencoder({6, {16}, 4, {16}}, 3);
    const auto b = random_batch(5, 3, 6, 8);
    const auto rec = record_forward(m, b.x);
    const auto en = average_contrastive_loss(rec.embeddings(), b.y, 0.02, Component::encoder);
    const auto de = average_contrastive_loss(rec.embeddings(), b.y, 0.02, Component::decoder);
    CHECK(*total_loss(m, b.x, b.y, 0.02) == Approx(*en + *de).epsilon(1e-14));
}

TEST_CASE("degenerate model mapping everything to one vector gives 2 ln 2", "[contrastive]") {
    auto m = make_autoencoder({3, {4}, 2, {4}}, 1);
    visit_parameters(m, [](const std::string& path, std::span<double> p) {
        const bool bias = path.ends_with("bias");
        std::fill(p.begin(), p.end(), bias ? 1.0 : 0.0);
    });
    const std::vector<Vec> x{{1, 2, 3}, {-1, 0, 2}, {5, 5, 5}};
    const std::vector<Label> y{Label::normal, Label::normal, Label::abnormal};
    CHECK(*total_loss(m, x, y, 0.02) == Approx(2.0 * std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("contrastive gradient matches finite differences", "[contrastive]") {
    for (std::uint64_t seed = 0; seed < 2; ++seed) {
        const auto m = make_autoencoder({6, {16}, 4, {16}}, seed);
        const auto b = random_batch(10, 6, 6, seed + 100);
        for (double tau : {0.5, 0.02}) {
            auto tape = GradientTape::zeros_like(m);
            total_loss(m, b.x, b.y, tau, &tape);
            const auto r = oracle::finite_difference(
                m, tape, [&](const AutoencoderModel& mm) { return *total_loss(mm, b.x, b.y, tau); }, b.x,
                tau < 0.1 ? 1e-6 : 1e-5);
            INFO("tau=" << tau << " worst " << r.worst);
            CHECK(r.checked > 100);
            CHECK(r.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("zero-norm embeddings are excluded from similarity terms", "[contrastive]") {
    std::vector<Vec> e{{1, 0}, {0.9, 0.1}, {0, 0}, {0, 1}};
    const std::vector<Label> y{Label::normal, Label::normal, Label::normal, Label::abnormal};
    const auto with = contrastive_component(e, y, 0.5, true);
    e.erase(e.begin() + 2);
    const std::vector<Label> y2{Label::normal, Label::normal, Label::abnormal};
    const auto without = contrastive_component(e, y2, 0.5, false);
    REQUIRE(with);
    CHECK(with->value == Approx(without->value).epsilon(1e-14));
    CHECK(norm(with->grad[2]) == 0.0);
}

TEST_CASE("batch composition follows the class prior with minimums", "[contrastive]") {
    ContrastiveConfig c;
    CHECK(batch_composition(c, 700, 300) == std::pair<std::size_t, std::size_t>{45, 19});
    CHECK(batch_composition(c, 1, 999).first == 2);
    CHECK(batch_composition(c, 999, 1).second == 1);
    c.batch_normals = 8;
    c.batch_abnormals = 3;
    CHECK(batch_composition(c, 10, 10) == std::pair<std::size_t, std::size_t>{8, 3});
}

TEST_CASE("training tightens normal clusters in encoder space", "[contrastive]") {
    ScenarioParams p;
    p.dim = 10;
    p.window = 1000;
    p.separation = 3.0;
    p.seed = 11;
    const auto w = generate(make_scenario(DriftKind::none, p));
    auto m = make_autoencoder({10, {128}, 32, {128}}, 4);
    const double before = mean_normal_cosine(m, w[0]);
    ContrastiveConfig c;
    c.epochs = 5;
    c.seed = 2;
    const auto r = train(m, w[0], c);
    CHECK(r.loss_trace.size() == 5);
    CHECK(mean_normal_cosine(r.model, w[0]) > before);
    CHECK(r.loss_trace.back() < r.loss_trace.front());
}

TEST_CASE("zero learning rate or zero epochs leave the model unchanged", "[contrastive]") {
    const auto b = random_batch(6, 3, 5, 1);
    Dataset d{5, {}};
    for (std::size_t i = 0; i < b.x.size(); ++i) d.samples.push_back({b.x[i], b.y[i]});
    const auto m = make_autoencoder({5, {8}, 3, {8}}, 3);
    ContrastiveConfig c;
    c.batch_normals = 6;
    c.batch_abnormals = 3;
    c.epochs = 4;
    c.learning_rate = 0.0;
    const auto r = train(m, d, c);
    CHECK(r.model == m);
    for (double l : r.loss_trace) CHECK(l == Approx(r.loss_trace.front()).epsilon(1e-12));
    c.epochs = 0;
    c.learning_rate = 1e-3;
    const auto r0 = train(m, d, c);
    CHECK(r0.model == m);
    CHECK(r0.loss_trace.empty());
}

TEST_CASE("single-class training data is rejected", "[contrastive]") {
    Dataset d{2, {{{1, 2}, Label::normal}, {{2, 1}, Label::normal}, {{0, 1}, Label::normal}}};
    CHECK_THROWS_AS(train(make_autoencoder({2, {4}, 2, {4}}, 0), d, ContrastiveConfig{}), DataError);
}
