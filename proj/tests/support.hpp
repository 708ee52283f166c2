#pragma once

// Shared helpers for the unit and acceptance tests: random tensors, a
// central-difference gradient checker and closed-form geometry oracles.

#include "nsm/autodiff.hpp"
#include "nsm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace nsm::test {

inline Tensor<double> random_tensor(const Dims& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<double> t(shape);
    for (auto& v : t.vec()) v = u(rng);
    return t;
}

inline Tensor<float> random_tensor_f(const Dims& shape, std::mt19937_64& rng, float lo = -1.0f, float hi = 1.0f)
{
    std::uniform_real_distribution<float> u(lo, hi);
    Tensor<float> t(shape);
    for (auto& v : t.vec()) v = u(rng);
    return t;
}

/// Builds the op under test from its inputs and returns any-shaped output.
using GraphFn = std::function<Var(Graph<double>&, const std::vector<Var>&)>;

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t refined = 0; // entries that needed a smaller step (ReLU kinks)
};

/// Projects the output onto fixed random weights so it reduces to a smooth
/// scalar: mean(|y * r - c|) with c below every entry, i.e. mean(y * r) - c.
/// `floor` must stay fixed across the perturbed evaluations.
inline Var project(Graph<double>& g, Var y, std::uint64_t seed, double floor)
{
    std::mt19937_64 rng(seed);
    const Tensor<double> r = random_tensor(g.value(y).shape(), rng, 0.5, 1.5);
    const Var yr = g.mul(y, g.constant(r));
    return g.mean_abs_diff(yr, g.constant(Tensor<double>(g.value(yr).shape(), floor)));
}

/// Compares analytic gradients of project(f(inputs)) against central
/// differences. Entries whose difference disagrees at step h are retried at
/// h/10 and h/100 before counting as failures; that only rescues entries where
/// a ReLU kink sits inside the stencil. `max_per_input` limits checked entries
/// per input (0 checks everything).
inline GradCheck grad_check(const GraphFn& f, const std::vector<Tensor<double>>& inputs, double h = 1e-5,
                            std::size_t max_per_input = 0, std::uint64_t seed = 7)
{
    Graph<double> g;
    std::vector<Var> vars;
    for (const auto& x : inputs) vars.push_back(g.parameter(x));
    const Var y = f(g, vars);
    double lo = 0.0;
    for (double v : g.value(y).vec()) lo = std::min(lo, -1.5 * std::abs(v));
    const double floor = lo - 1.0;
    const Var loss = project(g, y, seed, floor);
    auto eval = [&](const std::vector<Tensor<double>>& xs) {
        Graph<double> e;
        std::vector<Var> vs;
        for (const auto& x : xs) vs.push_back(e.constant(x));
        return e.value(project(e, f(e, vs), seed, floor))[0];
    };
    g.backward(loss);

    GradCheck out;
    std::mt19937_64 pick(seed);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        const Tensor<double> analytic = g.grad(vars[k]);
        std::vector<std::size_t> idx(inputs[k].size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        if (max_per_input > 0 && idx.size() > max_per_input) {
            std::shuffle(idx.begin(), idx.end(), pick);
            idx.resize(max_per_input);
        }
        for (std::size_t i : idx) {
            auto rel_at = [&](double step) {
                auto xs = inputs;
                xs[k][i] += step;
                const double up = eval(xs);
                xs[k][i] -= 2 * step;
                const double down = eval(xs);
                const double numeric = (up - down) / (2 * step);
                const double a = analytic[i];
                const double diff = std::abs(a - numeric);
                if (diff < 1e-10) return 0.0;
                return diff / std::max(std::abs(a), std::abs(numeric));
            };
            double rel = rel_at(h);
            if (rel > 1e-4) {
                ++out.refined;
                rel = std::min({rel, rel_at(h / 10), rel_at(h / 100)});
            }
            out.max_rel_error = std::max(out.max_rel_error, rel);
            ++out.checked;
        }
    }
    return out;
}

/// Solid angle of the intersection of two cones (caps on the unit sphere) with
/// half-angles a and b whose axes are gamma apart.
inline double cap_intersection(double a, double b, double gamma)
{
    const double pi = std::numbers::pi;
    if (gamma >= a + b) return 0.0;
    if (gamma <= std::abs(a - b)) return 2 * pi * (1 - std::cos(std::min(a, b)));
    const double ca = std::cos(a), cb = std::cos(b), cg = std::cos(gamma);
    const double sa = std::sin(a), sb = std::sin(b), sg = std::sin(gamma);
    auto acos_c = [](double x) { return std::acos(std::clamp(x, -1.0, 1.0)); };
    return 2 * (pi - acos_c((cg - ca * cb) / (sa * sb)) - ca * acos_c((cb - cg * ca) / (sg * sa)) -
                cb * acos_c((ca - cg * cb) / (sg * sb)));
}

/// Same quantity by midpoint quadrature over the first cap in polar coordinates.
inline double cap_intersection_quadrature(double a, double b, double gamma, int n = 2000)
{
    const double pi = std::numbers::pi;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) * a / n;
        const double dt = a / n;
        for (int j = 0; j < n; ++j) {
            const double phi = (j + 0.5) * 2 * pi / n;
            // direction at polar angle t around axis z, tilted toward x by phi
            const double x = std::sin(t) * std::cos(phi), z = std::cos(t);
            // second axis sits in the x-z plane at angle gamma from z
            const double dot = x * std::sin(gamma) + z * std::cos(gamma);
            if (dot >= std::cos(b)) total += std::sin(t) * dt * (2 * pi / n);
        }
    }
    return total;
}

/// Fraction of a spherical emitter (radius r_e at distance d_e) left visible
/// behind a sphere (radius r_o at distance d_o, axis angle gamma from the
/// emitter) that lies wholly in front of the emitter.
inline double two_cap_visibility(double r_e, double d_e, double r_o, double d_o, double gamma)
{
    const double a = std::asin(r_e / d_e);
    const double b = std::asin(r_o / d_o);
    const double cap = 2 * std::numbers::pi * (1 - std::cos(a));
    return 1.0 - cap_intersection(a, b, gamma) / cap;
}

} // namespace nsm::test
