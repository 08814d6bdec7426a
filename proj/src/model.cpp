#include "naturalcl/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace naturalcl {

ClassMask::ClassMask(std::vector<int> ids, int num_outputs) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    mask_.assign(static_cast<std::size_t>(num_outputs), 0);
    for (int id : ids_) {
        if (id < 0 || id >= num_outputs) throw std::invalid_argument("active class outside the output layer");
        mask_[static_cast<std::size_t>(id)] = 1;
    }
}

ClassMask ClassMask::all(int num_outputs) {
    std::vector<int> ids(static_cast<std::size_t>(num_outputs));
    for (int i = 0; i < num_outputs; ++i) ids[static_cast<std::size_t>(i)] = i;
    return ClassMask(std::move(ids), num_outputs);
}

// ---------------------------------------------------------------------------
// Mlp

template <typename Scalar>
Mlp<Scalar>::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 3) throw std::invalid_argument("an MLP needs at least one hidden layer");
    for (int s : sizes_) {
        if (s < 1) throw std::invalid_argument("layer sizes must be >= 1");
    }
    Index offset = 0;
    for (int l = 0; l < layer_count(); ++l) {
        weight_offset_.push_back(offset);
        offset += static_cast<Index>(sizes_[l]) * sizes_[l + 1];
        bias_offset_.push_back(offset);
        offset += sizes_[l + 1];
    }
    params_ = Vector<Scalar>::Zero(offset);
}

template <typename Scalar>
Mlp<Scalar> Mlp<Scalar>::glorot(std::vector<int> layer_sizes, std::uint64_t seed) {
    Mlp model(std::move(layer_sizes));
    std::mt19937_64 rng(seed);
    for (int l = 0; l < model.layer_count(); ++l) {
        const double fan_in = model.sizes_[l];
        const double fan_out = model.sizes_[l + 1];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        auto w = model.weights(l);
        for (Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
    }
    return model;
}

template <typename Scalar>
typename Mlp<Scalar>::WeightMap Mlp<Scalar>::weights(int layer) {
    return WeightMap(params_.data() + weight_offset_.at(layer), sizes_[layer], sizes_[layer + 1]);
}

template <typename Scalar>
typename Mlp<Scalar>::ConstWeightMap Mlp<Scalar>::weights(int layer) const {
    return ConstWeightMap(params_.data() + weight_offset_.at(layer), sizes_[layer], sizes_[layer + 1]);
}

template <typename Scalar>
typename Mlp<Scalar>::BiasMap Mlp<Scalar>::bias(int layer) {
    return BiasMap(params_.data() + bias_offset_.at(layer), sizes_[layer + 1]);
}

template <typename Scalar>
typename Mlp<Scalar>::ConstBiasMap Mlp<Scalar>::bias(int layer) const {
    return ConstBiasMap(params_.data() + bias_offset_.at(layer), sizes_[layer + 1]);
}

template <typename Scalar>
ForwardPass<Scalar> Mlp<Scalar>::forward(const Matrix<Scalar>& batch) const {
    if (batch.cols() != input_size()) {
        throw std::invalid_argument("batch width " + std::to_string(batch.cols()) + " != input size " +
                                    std::to_string(input_size()));
    }
    ForwardPass<Scalar> pass;
    pass.activations.reserve(sizes_.size());
    pass.activations.push_back(batch);
    for (int l = 0; l < layer_count(); ++l) {
        Matrix<Scalar> z(batch.rows(), sizes_[l + 1]);
        z.noalias() = pass.activations.back() * weights(l);
        z.rowwise() += bias(l);
        if (l + 1 < layer_count()) z = z.cwiseMax(Scalar(0));
        pass.activations.push_back(std::move(z));
    }
    return pass;
}

template <typename Scalar>
Matrix<Scalar> Mlp<Scalar>::logits(const Matrix<Scalar>& batch) const {
    if (batch.cols() != input_size()) throw std::invalid_argument("batch width does not match input size");
    Matrix<Scalar> a = batch;
    for (int l = 0; l < layer_count(); ++l) {
        Matrix<Scalar> z(a.rows(), sizes_[l + 1]);
        z.noalias() = a * weights(l);
        z.rowwise() += bias(l);
        if (l + 1 < layer_count()) z = z.cwiseMax(Scalar(0));
        a = std::move(z);
    }
    return a;
}

template <typename Scalar>
Vector<Scalar> Mlp<Scalar>::backward(const ForwardPass<Scalar>& pass, const Matrix<Scalar>& logit_grad) const {
    if (logit_grad.rows() != pass.logits().rows() || logit_grad.cols() != output_size()) {
        throw std::invalid_argument("logit gradient shape does not match the forward pass");
    }
    Vector<Scalar> grad(params_.size());
    Matrix<Scalar> delta = logit_grad;
    for (int l = layer_count() - 1; l >= 0; --l) {
        const auto& input = pass.activations[static_cast<std::size_t>(l)];
        Eigen::Map<Matrix<Scalar>> gw(grad.data() + weight_offset_[l], sizes_[l], sizes_[l + 1]);
        Eigen::Map<RowVector<Scalar>> gb(grad.data() + bias_offset_[l], sizes_[l + 1]);
        gw.noalias() = input.transpose() * delta;
        gb = delta.colwise().sum();
        if (l > 0) {
            Matrix<Scalar> upstream(delta.rows(), sizes_[l]);
            upstream.noalias() = delta * weights(l).transpose();
            delta = upstream.cwiseProduct((input.array() > Scalar(0)).template cast<Scalar>().matrix());
        }
    }
    return grad;
}

template <typename Scalar>
void Mlp<Scalar>::accumulate_squared_sample_gradients(const ForwardPass<Scalar>& pass,
                                                      const Matrix<Scalar>& logit_grad, Vector<Scalar>& out) const {
    if (out.size() != params_.size()) throw std::invalid_argument("accumulator size does not match parameters");
    // Row i's gradient for layer weights is the outer product a_i delta_i^T, so
    // its square is (a_i^2)(delta_i^2)^T and the sum over rows is a product.
    Matrix<Scalar> delta = logit_grad;
    for (int l = layer_count() - 1; l >= 0; --l) {
        const auto& input = pass.activations[static_cast<std::size_t>(l)];
        Eigen::Map<Matrix<Scalar>> gw(out.data() + weight_offset_[l], sizes_[l], sizes_[l + 1]);
        Eigen::Map<RowVector<Scalar>> gb(out.data() + bias_offset_[l], sizes_[l + 1]);
        const Matrix<Scalar> delta_sq = delta.array().square().matrix();
        gw.noalias() += input.array().square().matrix().transpose() * delta_sq;
        gb += delta_sq.colwise().sum();
        if (l > 0) {
            Matrix<Scalar> upstream(delta.rows(), sizes_[l]);
            upstream.noalias() = delta * weights(l).transpose();
            delta = upstream.cwiseProduct((input.array() > Scalar(0)).template cast<Scalar>().matrix());
        }
    }
}

Mlp<float> init_mlp(std::vector<int> layer_sizes, std::uint64_t seed) {
    return Mlp<float>::glorot(std::move(layer_sizes), seed);
}

// ---------------------------------------------------------------------------
// Loss

template <typename Scalar>
Scalar sigmoid(Scalar z) {
    if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
    const Scalar e = std::exp(z);
    return e / (Scalar(1) + e);
}

namespace {

// max(z, 0) - z y + log(1 + e^-|z|)
template <typename Scalar>
Scalar bce_with_logit(Scalar z, Scalar y) {
    return std::max(z, Scalar(0)) - z * y + std::log1p(std::exp(-std::abs(z)));
}

template <typename Scalar>
void check_loss_inputs(const Matrix<Scalar>& logits, std::span<const int> labels, const ClassMask& active) {
    if (active.empty()) throw std::invalid_argument("loss needs at least one active class");
    if (active.num_outputs() != logits.cols()) throw std::invalid_argument("class mask width != logit width");
    if (static_cast<Index>(labels.size()) != logits.rows()) throw std::invalid_argument("one label per row needed");
}

}  // namespace

template <typename Scalar>
LossResult<Scalar> masked_bce(const Matrix<Scalar>& logits, std::span<const int> labels, const ClassMask& active) {
    check_loss_inputs(logits, labels, active);
    const Scalar norm = Scalar(1) / (static_cast<Scalar>(logits.rows()) * static_cast<Scalar>(active.count()));
    LossResult<Scalar> result{Scalar(0), Matrix<Scalar>::Zero(logits.rows(), logits.cols())};
    for (Index i = 0; i < logits.rows(); ++i) {
        for (int c : active.ids()) {
            const Scalar z = logits(i, c);
            const Scalar y = labels[static_cast<std::size_t>(i)] == c ? Scalar(1) : Scalar(0);
            result.loss += bce_with_logit(z, y);
            result.logit_grad(i, c) = (sigmoid(z) - y) * norm;
        }
    }
    result.loss *= norm;
    return result;
}

template <typename Scalar>
Matrix<Scalar> per_sample_bce_logit_grad(const Matrix<Scalar>& logits, std::span<const int> labels,
                                         const ClassMask& active) {
    check_loss_inputs(logits, labels, active);
    const Scalar norm = Scalar(1) / static_cast<Scalar>(active.count());
    Matrix<Scalar> grad = Matrix<Scalar>::Zero(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        for (int c : active.ids()) {
            const Scalar y = labels[static_cast<std::size_t>(i)] == c ? Scalar(1) : Scalar(0);
            grad(i, c) = (sigmoid(logits(i, c)) - y) * norm;
        }
    }
    return grad;
}

template <typename Scalar>
LossAndGrad<Scalar> bce_loss_and_grads(const Mlp<Scalar>& model, const Matrix<Scalar>& batch,
                                       std::span<const int> labels, const ClassMask& active) {
    const auto pass = model.forward(batch);
    auto loss = masked_bce(pass.logits(), labels, active);
    return {loss.loss, model.backward(pass, loss.logit_grad)};
}

// ---------------------------------------------------------------------------
// Adam

template <typename Scalar>
Adam<Scalar>::Adam(Index parameter_count, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(Vector<Scalar>::Zero(parameter_count)),
      v_(Vector<Scalar>::Zero(parameter_count)) {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
}

template <typename Scalar>
void Adam<Scalar>::step(Vector<Scalar>& params, const Vector<Scalar>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw std::invalid_argument("Adam: parameter/gradient size mismatch");
    }
    ++steps_;
    const auto b1 = static_cast<Scalar>(beta1_);
    const auto b2 = static_cast<Scalar>(beta2_);
    m_ = b1 * m_ + (Scalar(1) - b1) * grad;
    v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseAbs2();
    const auto step_size =
        static_cast<Scalar>(lr_ / (1.0 - std::pow(beta1_, static_cast<double>(steps_))));
    const auto v_correction = static_cast<Scalar>(1.0 / (1.0 - std::pow(beta2_, static_cast<double>(steps_))));
    const auto eps = static_cast<Scalar>(eps_);
    params.array() -= step_size * m_.array() / ((v_.array() * v_correction).sqrt() + eps);
}

// ---------------------------------------------------------------------------
// Prediction

template <typename Scalar>
std::vector<int> predict_from_logits(const Matrix<Scalar>& logits, const ClassMask& active) {
    if (active.empty()) throw std::invalid_argument("prediction needs at least one active class");
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Index i = 0; i < logits.rows(); ++i) {
        int best = active.ids().front();
        for (int c : active.ids()) {
            if (logits(i, c) > logits(i, best)) best = c;
        }
        out[static_cast<std::size_t>(i)] = best;
    }
    return out;
}

template <typename Scalar>
std::vector<int> predict(const Mlp<Scalar>& model, const Matrix<Scalar>& batch, const ClassMask& active) {
    return predict_from_logits<Scalar>(model.logits(batch), active);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const Mlp<float>& model, const std::filesystem::path& path) {
    std::ofstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write checkpoint " + path.string());
    const auto& params = model.parameters();
    for (Index i = 0; i < params.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(params[i]);
        const char bytes[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8), static_cast<char>(bits >> 16),
                               static_cast<char>(bits >> 24)};
        bin.write(bytes, 4);
    }
    std::ofstream sidecar(path.string() + ".txt");
    sidecar << "layer_sizes =";
    for (int s : model.layer_sizes()) sidecar << ' ' << s;
    sidecar << "\nparameters = " << params.size() << '\n';
    if (!bin || !sidecar) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Mlp<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream sidecar(path.string() + ".txt");
    if (!sidecar) throw std::runtime_error("missing checkpoint sidecar " + path.string() + ".txt");
    std::vector<int> sizes;
    std::string line;
    while (std::getline(sidecar, line)) {
        if (line.rfind("layer_sizes", 0) != 0) continue;
        std::istringstream fields(line.substr(line.find('=') + 1));
        for (int s; fields >> s;) sizes.push_back(s);
    }
    Mlp<float> model(sizes);

    std::ifstream bin(path, std::ios::binary);
    if (!bin) throw std::runtime_error("cannot open checkpoint " + path.string());
    auto& params = model.parameters();
    for (Index i = 0; i < params.size(); ++i) {
        unsigned char b[4];
        if (!bin.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("truncated checkpoint " + path.string());
        const std::uint32_t bits = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
                                   (std::uint32_t{b[3]} << 24);
        params[i] = std::bit_cast<float>(bits);
    }
    if (bin.peek() != std::char_traits<char>::eof()) throw std::runtime_error("checkpoint has trailing bytes");
    return model;
}

// ---------------------------------------------------------------------------

template class Mlp<float>;
template class Mlp<double>;
template class Adam<float>;
template class Adam<double>;

#define NATURALCL_INSTANTIATE(S)                                                                              \
    template S sigmoid<S>(S);                                                                                \
    template LossResult<S> masked_bce<S>(const Matrix<S>&, std::span<const int>, const ClassMask&);           \
    template Matrix<S> per_sample_bce_logit_grad<S>(const Matrix<S>&, std::span<const int>, const ClassMask&); \
    template LossAndGrad<S> bce_loss_and_grads<S>(const Mlp<S>&, const Matrix<S>&, std::span<const int>,      \
                                                  const ClassMask&);                                          \
    template std::vector<int> predict<S>(const Mlp<S>&, const Matrix<S>&, const ClassMask&);                  \
    template std::vector<int> predict_from_logits<S>(const Matrix<S>&, const ClassMask&);

NATURALCL_INSTANTIATE(float)
NATURALCL_INSTANTIATE(double)

#undef NATURALCL_INSTANTIATE

}  // namespace naturalcl
