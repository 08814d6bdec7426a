#pragma once

// Dense feed-forward classifier with ReLU hidden layers, per-class sigmoid
// outputs and masked binary cross-entropy, trained with Adam.
//
// All parameters live in one flat vector so that optimizers and regularizers
// operate on plain vectors. Layer l contributes a row-major (in x out) weight
// block followed by its bias.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "naturalcl/linalg.hpp"

namespace naturalcl {

/// The subset of output units that take part in loss and prediction.
class ClassMask {
public:
    ClassMask() = default;
    ClassMask(std::vector<int> ids, int num_outputs);

    static ClassMask all(int num_outputs);

    [[nodiscard]] const std::vector<int>& ids() const { return ids_; }
    [[nodiscard]] bool contains(int unit) const { return mask_[static_cast<std::size_t>(unit)] != 0; }
    [[nodiscard]] int count() const { return static_cast<int>(ids_.size()); }
    [[nodiscard]] int num_outputs() const { return static_cast<int>(mask_.size()); }
    [[nodiscard]] bool empty() const { return ids_.empty(); }

private:
    std::vector<int> ids_;  // ascending, unique
    std::vector<char> mask_;
};

template <typename Scalar>
struct ForwardPass {
    /// activations[0] is the input, activations[l] the ReLU output of hidden
    /// layer l, and activations.back() the raw logits.
    std::vector<Matrix<Scalar>> activations;

    [[nodiscard]] const Matrix<Scalar>& logits() const { return activations.back(); }
};

template <typename Scalar>
class Mlp {
public:
    using WeightMap = Eigen::Map<Matrix<Scalar>>;
    using ConstWeightMap = Eigen::Map<const Matrix<Scalar>>;
    using BiasMap = Eigen::Map<RowVector<Scalar>>;
    using ConstBiasMap = Eigen::Map<const RowVector<Scalar>>;

    /// Zero-initialised network; sizes are (input, hidden..., output) and need
    /// at least one hidden layer.
    explicit Mlp(std::vector<int> layer_sizes);

    /// Glorot-uniform weights, zero biases.
    static Mlp glorot(std::vector<int> layer_sizes, std::uint64_t seed);

    [[nodiscard]] const std::vector<int>& layer_sizes() const { return sizes_; }
    [[nodiscard]] int layer_count() const { return static_cast<int>(sizes_.size()) - 1; }
    [[nodiscard]] int input_size() const { return sizes_.front(); }
    [[nodiscard]] int output_size() const { return sizes_.back(); }
    [[nodiscard]] Index parameter_count() const { return params_.size(); }

    [[nodiscard]] Vector<Scalar>& parameters() { return params_; }
    [[nodiscard]] const Vector<Scalar>& parameters() const { return params_; }

    WeightMap weights(int layer);
    [[nodiscard]] ConstWeightMap weights(int layer) const;
    BiasMap bias(int layer);
    [[nodiscard]] ConstBiasMap bias(int layer) const;

    [[nodiscard]] ForwardPass<Scalar> forward(const Matrix<Scalar>& batch) const;
    [[nodiscard]] Matrix<Scalar> logits(const Matrix<Scalar>& batch) const;

    /// Parameter gradient given dLoss/dLogits for the pass.
    [[nodiscard]] Vector<Scalar> backward(const ForwardPass<Scalar>& pass, const Matrix<Scalar>& logit_grad) const;

    /// Adds, for every row i, the elementwise square of the parameter gradient
    /// that row i alone would produce with dLoss/dLogits = logit_grad.row(i).
    void accumulate_squared_sample_gradients(const ForwardPass<Scalar>& pass, const Matrix<Scalar>& logit_grad,
                                             Vector<Scalar>& out) const;

    template <typename Other>
    [[nodiscard]] Mlp<Other> cast() const {
        Mlp<Other> other(sizes_);
        other.parameters() = params_.template cast<Other>();
        return other;
    }

private:
    std::vector<int> sizes_;
    std::vector<Index> weight_offset_;
    std::vector<Index> bias_offset_;
    Vector<Scalar> params_;
};

/// Glorot-initialised float network, the form used for training runs.
Mlp<float> init_mlp(std::vector<int> layer_sizes, std::uint64_t seed);

/// Numerically stable logistic function.
template <typename Scalar>
Scalar sigmoid(Scalar z);

template <typename Scalar>
struct LossResult {
    Scalar loss;
    Matrix<Scalar> logit_grad;
};

/// Mean over batch rows and active units of the logit-form binary
/// cross-entropy against one-hot targets. Inactive units contribute nothing.
template <typename Scalar>
LossResult<Scalar> masked_bce(const Matrix<Scalar>& logits, std::span<const int> labels, const ClassMask& active);

/// dLoss/dLogits of masked_bce for each row taken as its own batch of one.
template <typename Scalar>
Matrix<Scalar> per_sample_bce_logit_grad(const Matrix<Scalar>& logits, std::span<const int> labels,
                                         const ClassMask& active);

template <typename Scalar>
struct LossAndGrad {
    Scalar loss;
    Vector<Scalar> grad;
};

template <typename Scalar>
LossAndGrad<Scalar> bce_loss_and_grads(const Mlp<Scalar>& model, const Matrix<Scalar>& batch,
                                       std::span<const int> labels, const ClassMask& active);

/// Adam with bias correction.
template <typename Scalar>
class Adam {
public:
    explicit Adam(Index parameter_count, double learning_rate = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    /// One update of `params` in place from `grad`.
    void step(Vector<Scalar>& params, const Vector<Scalar>& grad);

    [[nodiscard]] long steps() const { return steps_; }
    [[nodiscard]] double learning_rate() const { return lr_; }
    [[nodiscard]] const Vector<Scalar>& first_moment() const { return m_; }
    [[nodiscard]] const Vector<Scalar>& second_moment() const { return v_; }

private:
    double lr_;
    double beta1_;
    double beta2_;
    double eps_;
    long steps_ = 0;
    Vector<Scalar> m_;
    Vector<Scalar> v_;
};

/// Argmax of the logits over the active units; ties go to the lowest id.
template <typename Scalar>
std::vector<int> predict(const Mlp<Scalar>& model, const Matrix<Scalar>& batch, const ClassMask& active);

template <typename Scalar>
std::vector<int> predict_from_logits(const Matrix<Scalar>& logits, const ClassMask& active);

/// Flat little-endian float32 parameters at `path`, layer sizes in `path.txt`.
void save_checkpoint(const Mlp<float>& model, const std::filesystem::path& path);
Mlp<float> load_checkpoint(const std::filesystem::path& path);

extern template class Mlp<float>;
extern template class Mlp<double>;
extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace naturalcl
