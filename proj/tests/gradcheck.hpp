#pragma once

// Finite-difference helpers shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "naturalcl/model.hpp"

namespace naturalcl::testing {

/// Central differences of `loss` at `x` with step h, one coordinate at a time.
template <typename Loss>
Vector<double> central_difference(Loss&& loss, Vector<double> x, double h = 1e-4) {
    Vector<double> grad(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double up = loss(x);
        x[i] = saved - h;
        const double down = loss(x);
        x[i] = saved;
        grad[i] = (up - down) / (2 * h);
    }
    return grad;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(const Vector<double>& a, const Vector<double>& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale == 0.0 ? 0.0 : (a - b).norm() / scale;
}

struct RandomProblem {
    Mlp<double> net;
    Matrix<double> inputs;
    std::vector<int> labels;
    ClassMask active;
};

/// Smallest |pre-activation| over the hidden layers. Central differences are
/// only meaningful when no ReLU sits closer to its kink than the step reaches.
inline double hidden_margin(const Mlp<double>& net, const Matrix<double>& inputs) {
    const auto pass = net.forward(inputs);
    double margin = std::numeric_limits<double>::infinity();
    for (int l = 0; l + 1 < net.layer_count(); ++l) {
        const Matrix<double>& a = pass.activations[static_cast<std::size_t>(l)];
        const auto w = net.weights(l);
        const auto b = net.bias(l);
        for (Index i = 0; i < a.rows(); ++i) {
            for (Index o = 0; o < w.cols(); ++o) {
                margin = std::min(margin, std::abs(a.row(i).dot(w.col(o)) + b[o]));
            }
        }
    }
    return margin;
}

inline constexpr double kKinkMargin = 1e-2;

/// Small random network with a random batch, labels inside a random
/// non-empty active set, redrawn until every hidden pre-activation clears
/// kKinkMargin.
inline RandomProblem random_problem(std::mt19937_64& rng);

inline RandomProblem random_problem_once(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> width(2, 7);
    std::uniform_int_distribution<int> depth(1, 3);
    std::uniform_int_distribution<int> rows(1, 6);

    std::vector<int> sizes{width(rng)};
    const int hidden = depth(rng);
    for (int l = 0; l < hidden; ++l) sizes.push_back(width(rng));
    const int outputs = width(rng);
    sizes.push_back(outputs);

    RandomProblem p{Mlp<double>::glorot(sizes, rng()), {}, {}, {}};
    std::normal_distribution<double> normal(0.0, 0.3);
    for (Index i = 0; i < p.net.parameter_count(); ++i) p.net.parameters()[i] += normal(rng);

    std::vector<int> ids;
    std::bernoulli_distribution keep(0.6);
    for (int c = 0; c < outputs; ++c) {
        if (keep(rng)) ids.push_back(c);
    }
    if (ids.empty()) ids.push_back(outputs - 1);
    p.active = ClassMask(ids, outputs);

    const int n = rows(rng);
    p.inputs = Matrix<double>(n, sizes.front());
    std::normal_distribution<double> unit(0.0, 1.0);
    for (Index i = 0; i < p.inputs.size(); ++i) p.inputs.data()[i] = unit(rng);
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    for (int i = 0; i < n; ++i) p.labels.push_back(ids[pick(rng)]);
    return p;
}

inline RandomProblem random_problem(std::mt19937_64& rng) {
    for (;;) {
        RandomProblem p = random_problem_once(rng);
        if (hidden_margin(p.net, p.inputs) >= kKinkMargin) return p;
    }
}

}  // namespace naturalcl::testing
