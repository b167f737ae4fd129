#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "netsight/contrastive.hpp"
#include "netsight/drift_sim.hpp"
#include "netsight/shift_detect.hpp"

using namespace netsight;

namespace {

std::filesystem::path scratch(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "netsight_drift_sim_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string csv_text(const Dataset& d) {
    std::ostringstream os;
    write_csv(os, d);
    return os.str();
}

double squared_mean_gap(const std::vector<const Vec*>& pool, std::size_t split) {
    const std::size_t d = pool.front()->size();
    Vec a(d, 0.0), b(d, 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        Vec& acc = i < split ? a : b;
        for (std::size_t k = 0; k < d; ++k) acc[k] += (*pool[i])[k];
    }
    double s = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        const double g = a[k] / static_cast<double>(split) - b[k] / static_cast<double>(pool.size() - split);
        s += g * g;
    }
    return s;
}

}  // namespace

TEST_CASE("window counts match the scenario exactly", "[drift_sim]") {
    ScenarioParams p;
    p.dim = 6;
    p.window = 501;
    p.normal_prior = 0.7;
    for (auto kind : {DriftKind::none, DriftKind::mean_shift, DriftKind::scale_shift, DriftKind::prior_shift,
                      DriftKind::bimodal}) {
        const auto sc = make_scenario(kind, p);
        const auto w = generate(sc);
        REQUIRE(w.size() == sc.segments.size());
        for (std::size_t k = 0; k < w.size(); ++k) {
            CHECK(w[k].count(Label::normal) == sc.segments[k].n_normal);
            CHECK(w[k].count(Label::abnormal) == sc.segments[k].n_abnormal);
            CHECK(w[k].size() == 501);
            CHECK(w[k].dim == 6);
        }
    }
    const auto w = generate(make_scenario(DriftKind::mean_shift, p));
    CHECK(w.size() == 4);
    CHECK(w[0].count(Label::normal) == 351);
    const auto prior = generate(make_scenario(DriftKind::prior_shift, p));
    CHECK(prior.back().count(Label::normal) == 150);
}

TEST_CASE("generation is deterministic per seed", "[drift_sim]") {
    ScenarioParams p;
    p.dim = 5;
    p.window = 100;
    p.seed = 42;
    const auto a = generate(make_scenario(DriftKind::mean_shift, p));
    const auto b = generate(make_scenario(DriftKind::mean_shift, p));
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(csv_text(a[k]) == csv_text(b[k]));
    p.seed = 43;
    CHECK(csv_text(generate(make_scenario(DriftKind::mean_shift, p))[0]) != csv_text(a[0]));
}

TEST_CASE("mean shift moves the normal class along the diagonal", "[drift_sim]") {
    ScenarioParams p;
    p.dim = 4;
    p.window = 4000;
    p.shift = 3.0;
    const auto w = generate(make_scenario(DriftKind::mean_shift, p));
    auto normal_mean_norm = [](const Dataset& d) {
        Vec m(d.dim, 0.0);
        std::size_t n = 0;
        for (const auto& s : d.samples) {
            if (s.label != Label::normal) continue;
            for (std::size_t k = 0; k < d.dim; ++k) m[k] += s.features[k];
            ++n;
        }
        for (double& v : m) v /= static_cast<double>(n);
        return norm(m);
    };
    CHECK(normal_mean_norm(w[0]) < 0.1);
    CHECK(std::abs(normal_mean_norm(w[2]) - 0.67 * 3.0) < 0.1);
    CHECK(std::abs(normal_mean_norm(w[3]) - 3.0) < 0.1);
}

TEST_CASE("invalid scenarios are configuration errors", "[drift_sim]") {
    ScenarioParams p;
    p.dim = 0;
    CHECK_THROWS_AS(make_scenario(DriftKind::none, p), ConfigError);
    DriftScenario sc{3, {Segment{0, 5, {Vec(3, 0.0)}, Vec(3, 1.0)}}, DriftKind::none, 0};
    CHECK_THROWS_AS(generate(sc), ConfigError);
    sc.segments[0].n_normal = 5;
    sc.segments[0].abnormal_mean = Vec(2, 1.0);
    CHECK_THROWS_AS(generate(sc), ConfigError);
    CHECK_THROWS_AS(drift_kind_from_string("sideways"), ConfigError);
}

TEST_CASE("no-drift windows pass a permutation test on feature means", "[drift_sim]") {
    int rejections = 0;
    for (std::uint64_t t = 0; t < 100; ++t) {
        ScenarioParams p;
        p.dim = 5;
        p.window = 200;
        p.seed = 500 + t;
        const auto w = generate(make_scenario(DriftKind::none, p));
        std::vector<const Vec*> pool;
        for (const auto* d : {&w[0], &w[1]}) {
            for (const auto& s : d->samples) pool.push_back(&s.features);
        }
        const double observed = squared_mean_gap(pool, 200);
        std::mt19937_64 rng(t);
        std::size_t exceed = 0;
        const std::size_t perms = 200;
        for (std::size_t k = 0; k < perms; ++k) {
            std::shuffle(pool.begin(), pool.end(), rng);
            exceed += squared_mean_gap(pool, 200) >= observed;
        }
        const double pval = static_cast<double>(1 + exceed) / static_cast<double>(1 + perms);
        rejections += pval < 0.05;
    }
    INFO("rejections " << rejections);
    CHECK(rejections <= 10);
}

TEST_CASE("a 3 sigma mean shift is flagged after posterior scoring", "[drift_sim]") {
    ScenarioParams p;
    p.dim = 10;
    p.window = 1000;
    p.seed = 8;
    const auto w = generate(make_scenario(DriftKind::mean_shift, p));
    ContrastiveConfig c;
    c.epochs = 3;
    c.seed = 1;
    const auto model = train(make_autoencoder({10, {64}, 16, {64}}, 3), w[0], c).model;
    const auto st = fit_labeler(model, w[0]);
    ShiftConfig sc;
    sc.seed = 4;
    const auto r = permutation_test(posteriors(w[1], model, st), posteriors(w[3], model, st), sc);
    CHECK(r.p_value < 0.01);
    CHECK(r.shifted);
}

TEST_CASE("CSV export then import round-trips exactly", "[drift_sim]") {
    ScenarioParams p;
    p.dim = 7;
    p.window = 50;
    p.seed = 3;
    auto d = generate(make_scenario(DriftKind::bimodal, p))[1];
    d.samples[0].features[0] = 1.0 / 3.0;
    d.samples[1].features[1] = -1e-300;
    d.samples[2].features[2] = 123456789.123456789;
    const auto path = scratch("round.csv");
    export_csv(d, path);
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    const auto back = import_csv(path);
    CHECK(back == d);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "f0,f1,f2,f3,f4,f5,f6,label");
}

TEST_CASE("CSV parse errors name the line", "[drift_sim]") {
    auto parse = [](const std::string& text, bool need_label = true) {
        std::istringstream is(text);
        return parse_csv(is, "in.csv", need_label);
    };
    CHECK_THROWS_WITH(parse("f0,f1\n1,2\n"), Catch::Matchers::ContainsSubstring("missing label"));
    CHECK_NOTHROW(parse("f0,f1\n1,2\n", false));
    CHECK_THROWS_WITH(parse("f0,f1,label\n1,2,0\n3,x,1\n"), Catch::Matchers::ContainsSubstring("in.csv:3"));
    CHECK_THROWS_WITH(parse("f0,f1,label\n1,2,0\n3,4\n"), Catch::Matchers::ContainsSubstring("in.csv:3"));
    CHECK_THROWS_WITH(parse("f0,f1,label\n1,2,7\n"), Catch::Matchers::ContainsSubstring("in.csv:2"));
    CHECK_THROWS_WITH(parse("f0,f1,label\n1,nan,0\n"), Catch::Matchers::ContainsSubstring("in.csv:2"));
    CHECK_THROWS_AS(parse("a,b,label\n"), DataError);
    CHECK_THROWS_AS(parse(""), DataError);
    const auto t = parse("f0,f1,label\r\n1,2,0\r\n\r\n3,4,1\r\n");
    CHECK(t.data.size() == 2);
    CHECK(t.lines[1] == "3,4,1");
    CHECK_THROWS_AS(import_csv(scratch("does_not_exist.csv")), DataError);
}
