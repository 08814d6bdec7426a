#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "gradcheck.hpp"
#include "naturalcl/data.hpp"
#include "naturalcl/model.hpp"

using namespace naturalcl;
using namespace naturalcl::testing;

namespace {

// Plain loops: ReLU hidden layers, linear output.
Matrix<double> naive_logits(const Mlp<double>& net, const Matrix<double>& x) {
    Matrix<double> a = x;
    for (int l = 0; l < net.layer_count(); ++l) {
        const auto w = net.weights(l);
        const auto b = net.bias(l);
        Matrix<double> z(a.rows(), w.cols());
        for (Index i = 0; i < a.rows(); ++i) {
            for (Index o = 0; o < w.cols(); ++o) {
                double s = b[o];
                for (Index k = 0; k < w.rows(); ++k) s += a(i, k) * w(k, o);
                z(i, o) = (l + 1 < net.layer_count()) ? std::max(0.0, s) : s;
            }
        }
        a = z;
    }
    return a;
}

double naive_bce(const Matrix<double>& logits, const std::vector<int>& labels, const ClassMask& active) {
    double total = 0.0;
    for (Index i = 0; i < logits.rows(); ++i) {
        for (int c : active.ids()) {
            const double p = 1.0 / (1.0 + std::exp(-logits(i, c)));
            const double y = labels[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0;
            total -= y * std::log(p) + (1 - y) * std::log(1 - p);
        }
    }
    return total / (static_cast<double>(logits.rows()) * active.count());
}

}  // namespace

TEST_CASE("layout and construction") {
    const Mlp<float> net({4, 3, 2});
    CHECK(net.parameter_count() == 4 * 3 + 3 + 3 * 2 + 2);
    CHECK(net.layer_count() == 2);
    CHECK(net.weights(0).rows() == 4);
    CHECK(net.weights(0).cols() == 3);
    CHECK(net.bias(1).size() == 2);
    CHECK_THROWS_AS(Mlp<float>({4, 2}), std::invalid_argument);
    CHECK_THROWS_AS(Mlp<float>({4, 0, 2}), std::invalid_argument);
}

TEST_CASE("glorot initialisation") {
    const auto net = Mlp<double>::glorot({300, 200, 10}, 4);
    const double limit = std::sqrt(6.0 / 500.0);
    const auto w = net.weights(0);
    CHECK(w.cwiseAbs().maxCoeff() <= limit);
    CHECK(w.array().square().mean() == doctest::Approx(limit * limit / 3).epsilon(0.02));
    CHECK(net.bias(0).cwiseAbs().maxCoeff() == 0.0);
    CHECK(Mlp<double>::glorot({300, 200, 10}, 4).parameters() == net.parameters());
    CHECK(Mlp<double>::glorot({300, 200, 10}, 5).parameters() != net.parameters());
}

TEST_CASE("forward pass matches a loop implementation") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = random_problem(rng);
        const Matrix<double> expected = naive_logits(p.net, p.inputs);
        CHECK((p.net.logits(p.inputs) - expected).cwiseAbs().maxCoeff() < 1e-12);
        const auto pass = p.net.forward(p.inputs);
        CHECK(pass.activations.size() == static_cast<std::size_t>(p.net.layer_count() + 1));
        CHECK(pass.activations.front() == p.inputs);
    }
    const Mlp<float> net({3, 2, 2});
    CHECK_THROWS_AS(net.logits(Matrix<float>::Zero(1, 4)), std::invalid_argument);
}

TEST_CASE("masked BCE value and logit gradient") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_problem(rng);
        const Matrix<double> z = p.net.logits(p.inputs) * 3.0;
        const auto r = masked_bce<double>(z, p.labels, p.active);
        CHECK(r.loss == doctest::Approx(naive_bce(z, p.labels, p.active)).epsilon(1e-10));
        const double norm = 1.0 / (static_cast<double>(z.rows()) * p.active.count());
        for (Index i = 0; i < z.rows(); ++i) {
            for (Index c = 0; c < z.cols(); ++c) {
                const double y = p.labels[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0;
                const double expected = p.active.contains(static_cast<int>(c)) ? (1 / (1 + std::exp(-z(i, c))) - y) * norm : 0.0;
                CHECK(r.logit_grad(i, c) == doctest::Approx(expected).epsilon(1e-10));
            }
        }
    }
}

TEST_CASE("BCE is finite for extreme logits") {
    Matrix<double> z(1, 2);
    z << 800.0, -800.0;
    const std::vector<int> labels{1};
    const auto r = masked_bce<double>(z, labels, ClassMask::all(2));
    CHECK(std::isfinite(r.loss));
    CHECK(r.loss == doctest::Approx(800.0));
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) >= 0.0);
}

TEST_CASE("loss errors") {
    Matrix<double> z = Matrix<double>::Zero(2, 3);
    const std::vector<int> labels{0, 1};
    CHECK_THROWS_AS(masked_bce<double>(z, labels, ClassMask()), std::invalid_argument);
    CHECK_THROWS_AS(masked_bce<double>(z, labels, ClassMask::all(4)), std::invalid_argument);
    const std::vector<int> short_labels{0};
    CHECK_THROWS_AS(masked_bce<double>(z, short_labels, ClassMask::all(3)), std::invalid_argument);
    CHECK_THROWS_AS(ClassMask({0, 3}, 3), std::invalid_argument);
}

TEST_CASE("parameter gradients match central differences") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_problem(rng);
        const auto analytic = bce_loss_and_grads(p.net, p.inputs, p.labels, p.active);
        Mlp<double> probe = p.net;
        const auto numeric = central_difference(
            [&](const Vector<double>& theta) {
                probe.parameters() = theta;
                return masked_bce<double>(probe.logits(p.inputs), p.labels, p.active).loss;
            },
            p.net.parameters());
        CHECK(relative_error(analytic.grad, numeric) <= 1e-4);
    }
}

TEST_CASE("squared per-sample gradients match one backward pass per row") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 30; ++trial) {
        auto p = random_problem(rng);
        const auto pass = p.net.forward(p.inputs);
        const Matrix<double> g = per_sample_bce_logit_grad<double>(pass.logits(), p.labels, p.active);
        Vector<double> fast = Vector<double>::Zero(p.net.parameter_count());
        p.net.accumulate_squared_sample_gradients(pass, g, fast);

        Vector<double> slow = Vector<double>::Zero(p.net.parameter_count());
        for (Index i = 0; i < p.inputs.rows(); ++i) {
            const Matrix<double> row = p.inputs.row(i);
            const std::vector<int> label{p.labels[static_cast<std::size_t>(i)]};
            slow += bce_loss_and_grads(p.net, row, label, p.active).grad.cwiseAbs2();
        }
        CHECK(relative_error(fast, slow) < 1e-10);
    }
}

TEST_CASE("Adam follows the bias-corrected update") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = 5;
    Vector<double> params = Vector<double>::Zero(n);
    Adam<double> adam(n, 0.01);
    std::vector<double> p(n, 0.0), m(n, 0.0), v(n, 0.0);
    for (int t = 1; t <= 20; ++t) {
        Vector<double> g(n);
        for (int i = 0; i < n; ++i) g[i] = normal(rng);
        adam.step(params, g);
        for (int i = 0; i < n; ++i) {
            m[i] = 0.9 * m[i] + 0.1 * g[i];
            v[i] = 0.999 * v[i] + 0.001 * g[i] * g[i];
            const double mhat = m[i] / (1 - std::pow(0.9, t));
            const double vhat = v[i] / (1 - std::pow(0.999, t));
            p[i] -= 0.01 * mhat / (std::sqrt(vhat) + 1e-8);
        }
    }
    for (int i = 0; i < n; ++i) CHECK(params[i] == doctest::Approx(p[i]).epsilon(1e-10));
    CHECK(adam.steps() == 20);
    Vector<double> wrong(3);
    CHECK_THROWS_AS(adam.step(params, wrong), std::invalid_argument);
    CHECK_THROWS_AS(Adam<double>(3, 0.0), std::invalid_argument);
}

TEST_CASE("prediction respects the mask and breaks ties low") {
    Matrix<float> z(3, 4);
    z << 1, 5, 2, 9,   //
        3, 3, 1, 0,    //
        0, 0, 0, 0;
    const ClassMask mask({0, 1, 2}, 4);
    CHECK(predict_from_logits(z, mask) == std::vector<int>{1, 0, 0});
    CHECK(predict_from_logits(z, ClassMask({2, 3}, 4)) == std::vector<int>{3, 2, 2});
}

TEST_CASE("training separates blobs") {
    const Dataset ds = synth_gaussian(3, 6, 100, 4.0, 2);
    auto net = init_mlp({6, 16, 3}, 1);
    Adam<float> adam(net.parameter_count(), 0.01);
    const ClassMask all = ClassMask::all(3);
    for (int step = 0; step < 300; ++step) {
        const auto r = bce_loss_and_grads(net, ds.features, ds.labels, all);
        adam.step(net.parameters(), r.grad);
    }
    const auto predicted = predict(net, ds.features, all);
    int correct = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) correct += predicted[i] == ds.labels[i];
    CHECK(correct >= 290);
}

TEST_CASE("checkpoints round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "naturalcl_ckpt_test";
    std::filesystem::create_directories(dir);
    const auto net = init_mlp({5, 4, 3}, 9);
    save_checkpoint(net, dir / "net.bin");
    const auto back = load_checkpoint(dir / "net.bin");
    CHECK(back.layer_sizes() == net.layer_sizes());
    CHECK(back.parameters() == net.parameters());
    CHECK(std::filesystem::file_size(dir / "net.bin") == static_cast<std::uintmax_t>(net.parameter_count() * 4));

    { std::ofstream(dir / "net.bin", std::ios::app) << 'x'; }
    CHECK_THROWS_AS(load_checkpoint(dir / "net.bin"), std::runtime_error);
    std::filesystem::remove(dir / "net.bin.txt");
    CHECK_THROWS_AS(load_checkpoint(dir / "net.bin"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("precision casts keep the function") {
    const auto net = init_mlp({4, 5, 3}, 3);
    const Mlp<double> wide = net.cast<double>();
    Matrix<float> x = Matrix<float>::Random(2, 4);
    CHECK((wide.logits(x.cast<double>()).cast<float>() - net.logits(x)).cwiseAbs().maxCoeff() < 1e-5f);
}
