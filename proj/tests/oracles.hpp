#pragma once

// Independent reference implementations used to check the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "netsight/nn.hpp"

namespace oracle {

using netsight::AutoencoderModel;
using netsight::Vec;

/// Naive forward pass, written against the raw parameter arrays.
struct NaiveForward {
    Vec latent;
    Vec output;
    std::vector<bool> relu_active;  // every hidden unit, in layer order
};

inline NaiveForward naive_forward(const AutoencoderModel& m, const Vec& x) {
    NaiveForward r;
    Vec h = x;
    auto run = [&](const std::vector<netsight::DenseLayer>& layers) {
        for (const auto& l : layers) {
            Vec y(l.weight.rows, 0.0);
            for (std::size_t i = 0; i < l.weight.rows; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < l.weight.cols; ++j) s += l.weight.data[i * l.weight.cols + j] * h[j];
                y[i] = s + l.bias[i];
                if (l.activation == netsight::Activation::relu) {
                    r.relu_active.push_back(y[i] > 0.0);
                    y[i] = std::max(0.0, y[i]);
                }
            }
            h = y;
        }
    };
    run(m.encoder);
    r.latent = h;
    run(m.decoder);
    r.output = h;
    return r;
}

inline std::vector<bool> relu_pattern(const AutoencoderModel& m, const std::vector<Vec>& xs) {
    std::vector<bool> all;
    for (const auto& x : xs) {
        const auto p = naive_forward(m, x).relu_active;
        all.insert(all.end(), p.begin(), p.end());
    }
    return all;
}

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped_kinks = 0;
    std::string worst;
};

inline double rel_error(double a, double n) {
    return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5});
}

/// Central differences (step h) on model parameters against an analytic
/// gradient laid out like the model (a GradientTape). Coordinates whose
/// perturbation flips a ReLU somewhere in `inputs` are skipped: the loss is
/// not differentiable across the kink. With `max_coords` > 0 a seeded random
/// subset of coordinates is checked.
inline GradCheck finite_difference(AutoencoderModel model, const netsight::GradientTape& analytic,
                                   const std::function<double(const AutoencoderModel&)>& loss,
                                   const std::vector<Vec>& inputs, double h = 1e-5, std::size_t max_coords = 0,
                                   std::uint64_t seed = 0) {
    struct Coord {
        std::string path;
        std::span<double> p;
        std::span<const double> g;
        std::size_t i;
    };
    std::vector<Coord> coords;
    netsight::visit_parameters(model, analytic,
                               [&](const std::string& path, std::span<double> p, std::span<const double> g) {
                                   for (std::size_t i = 0; i < p.size(); ++i) coords.push_back({path, p, g, i});
                               });
    if (max_coords > 0 && coords.size() > max_coords) {
        std::mt19937_64 rng(seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(max_coords);
    }
    const auto base = relu_pattern(model, inputs);
    GradCheck out;
    for (auto& c : coords) {
        const double orig = c.p[c.i];
        c.p[c.i] = orig + h;
        const bool kink_hi = relu_pattern(model, inputs) != base;
        const double fp = loss(model);
        c.p[c.i] = orig - h;
        const bool kink_lo = relu_pattern(model, inputs) != base;
        const double fm = loss(model);
        c.p[c.i] = orig;
        if (kink_hi || kink_lo) {
            ++out.skipped_kinks;
            continue;
        }
        const double num = (fp - fm) / (2.0 * h);
        const double err = rel_error(c.g[c.i], num);
        ++out.checked;
        if (err > out.max_rel_error) {
            out.max_rel_error = err;
            out.worst = c.path + "[" + std::to_string(c.i) + "] analytic=" + std::to_string(c.g[c.i]) +
                        " numeric=" + std::to_string(num);
        }
    }
    return out;
}

/// Central differences of a scalar function of a flat vector.
inline double vector_fd_max_rel_error(const std::function<double(const Vec&)>& f, Vec x, const Vec& analytic,
                                      double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double o = x[i];
        x[i] = o + h;
        const double fp = f(x);
        x[i] = o - h;
        const double fm = f(x);
        x[i] = o;
        worst = std::max(worst, rel_error(analytic[i], (fp - fm) / (2.0 * h)));
    }
    return worst;
}

inline double normal_log_pdf(double x, double mu, double sigma) {
    const double z = (x - mu) / sigma;
    return -0.5 * z * z - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Composite Simpson quadrature of p ln(p/q) over mu_a +- 14 sigma_a.
inline double kl_by_quadrature(double mu_a, double s_a, double mu_b, double s_b, int intervals = 40000) {
    const double lo = mu_a - 14.0 * s_a;
    const double hi = mu_a + 14.0 * s_a;
    const double step = (hi - lo) / intervals;
    auto f = [&](double x) {
        const double lp = normal_log_pdf(x, mu_a, s_a);
        return std::exp(lp) * (lp - normal_log_pdf(x, mu_b, s_b));
    };
    double s = f(lo) + f(hi);
    for (int k = 1; k < intervals; ++k) s += (k % 2 ? 4.0 : 2.0) * f(lo + k * step);
    return s * step / 3.0;
}

/// Direct summation of smoothed histogram KL from raw counts.
inline double histogram_kl_direct(const Vec& p_mass, const Vec& q_mass, double eps = 1e-10) {
    const double z = 1.0 + eps * static_cast<double>(p_mass.size());
    double kl = 0.0;
    for (std::size_t b = 0; b < p_mass.size(); ++b) {
        const double p = (p_mass[b] + eps) / z;
        const double q = (q_mass[b] + eps) / z;
        kl += p * std::log(p / q);
    }
    return kl;
}

/// Textbook InfoNCE term without any stabilization, for moderate temperatures.
inline double infonce_naive(double anchor, const Vec& negs, double tau) {
    double den = std::exp(anchor / tau);
    for (double n : negs) den += std::exp(n / tau);
    return -std::log(std::exp(anchor / tau) / den);
}

inline double cosine_naive(const Vec& a, const Vec& b) {
    double ab = 0, aa = 0, bb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

/// Contrastive average over ordered normal pairs, straight from the definition.
inline double contrastive_naive(const std::vector<Vec>& e, const std::vector<int>& y, double tau) {
    std::vector<std::size_t> n, a;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] == 0 ? n : a).push_back(i);
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i : n) {
        Vec negs;
        for (std::size_t k : a) negs.push_back(cosine_naive(e[i], e[k]));
        for (std::size_t j : n) {
            if (i == j) continue;
            total += infonce_naive(cosine_naive(e[i], e[j]), negs, tau);
            ++pairs;
        }
    }
    return total / static_cast<double>(pairs);
}

/// Similarity-distribution KD loss straight from the definition.
inline double kd_naive(const std::vector<Vec>& t, const std::vector<Vec>& s) {
    const std::size_t n = t.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double zt = 0.0, zs = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            zt += std::exp(cosine_naive(t[i], t[j]));
            zs += std::exp(cosine_naive(s[i], s[j]));
        }
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double pt = std::exp(cosine_naive(t[i], t[j])) / zt;
            const double ps = std::exp(cosine_naive(s[i], s[j])) / zs;
            total += pt * std::log(pt / ps);
        }
    }
    return total / static_cast<double>(n);
}

}  // namespace oracle
