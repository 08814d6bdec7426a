#include "naturalcl/mitigation.hpp"

#include <stdexcept>

namespace naturalcl {

std::string mitigation_name(MitigationKind kind) {
    switch (kind) {
        case MitigationKind::None: return "none";
        case MitigationKind::Ewc: return "ewc";
        case MitigationKind::Si: return "si";
        case MitigationKind::Lwf: return "lwf";
        case MitigationKind::Agem: return "agem";
    }
    return "none";
}

MitigationKind parse_mitigation(const std::string& name) {
    if (name == "none" || name.empty()) return MitigationKind::None;
    if (name == "ewc") return MitigationKind::Ewc;
    if (name == "si") return MitigationKind::Si;
    if (name == "lwf") return MitigationKind::Lwf;
    if (name == "agem" || name == "a-gem") return MitigationKind::Agem;
    throw std::invalid_argument("unknown mitigation kind '" + name + "'");
}

// ---------------------------------------------------------------------------
// EWC

template <typename Scalar>
void FisherAccumulator<Scalar>::add(const Mlp<Scalar>& model, const Matrix<Scalar>& inputs,
                                    std::span<const int> labels, const ClassMask& active) {
    if (inputs.rows() == 0) return;
    const auto pass = model.forward(inputs);
    const auto logit_grad = per_sample_bce_logit_grad<Scalar>(pass.logits(), labels, active);
    model.accumulate_squared_sample_gradients(pass, logit_grad, sum_);
    samples_ += static_cast<std::size_t>(inputs.rows());
}

template <typename Scalar>
Vector<Scalar> FisherAccumulator<Scalar>::mean() const {
    if (samples_ == 0) throw std::invalid_argument("Fisher estimate needs at least one sample");
    return sum_ / static_cast<Scalar>(samples_);
}

template <typename Scalar>
void ewc_consolidate(const Mlp<Scalar>& model, const Vector<Scalar>& fisher, EwcState<Scalar>& state) {
    if (fisher.size() != model.parameter_count()) throw std::invalid_argument("Fisher size != parameter count");
    state.tasks.push_back({model.parameters(), fisher});
}

template <typename Scalar>
void ewc_consolidate(const Mlp<Scalar>& model, const Matrix<Scalar>& inputs, std::span<const int> labels,
                     const ClassMask& active, EwcState<Scalar>& state) {
    if (inputs.rows() == 0) throw std::invalid_argument("EWC consolidation needs phase data");
    FisherAccumulator<Scalar> fisher(model.parameter_count());
    fisher.add(model, inputs, labels, active);
    ewc_consolidate(model, fisher.mean(), state);
}

template <typename Scalar>
PenaltyAndGrad<Scalar> ewc_penalty_and_grad(const Vector<Scalar>& params, const EwcState<Scalar>& state) {
    PenaltyAndGrad<Scalar> out{Scalar(0), Vector<Scalar>::Zero(params.size())};
    double penalty = 0.0;
    for (const auto& task : state.tasks) {
        if (task.anchor.size() != params.size()) throw std::invalid_argument("EWC record shape mismatch");
        const Vector<Scalar> diff = params - task.anchor;
        penalty += task.fisher.cwiseProduct(diff.cwiseAbs2()).template cast<double>().sum();
        out.grad += task.fisher.cwiseProduct(diff);
    }
    out.penalty = static_cast<Scalar>(0.5 * state.lambda * penalty);
    out.grad *= static_cast<Scalar>(state.lambda);
    return out;
}

// ---------------------------------------------------------------------------
// SI

template <typename Scalar>
SiState<Scalar> SiState<Scalar>::start(const Vector<Scalar>& params, double c, double xi) {
    SiState state;
    state.c = c;
    state.xi = xi;
    state.path = Vector<Scalar>::Zero(params.size());
    state.importance = Vector<Scalar>::Zero(params.size());
    state.anchor = params;
    return state;
}

template <typename Scalar>
void si_accumulate(SiState<Scalar>& state, const Vector<Scalar>& grad, const Vector<Scalar>& param_delta) {
    if (grad.size() != state.path.size() || param_delta.size() != state.path.size()) {
        throw std::invalid_argument("SI accumulate shape mismatch");
    }
    state.path -= grad.cwiseProduct(param_delta);
}

template <typename Scalar>
void si_consolidate(const Vector<Scalar>& params, SiState<Scalar>& state) {
    if (params.size() != state.anchor.size()) throw std::invalid_argument("SI consolidate shape mismatch");
    const auto xi = static_cast<Scalar>(state.xi);
    state.importance.array() += state.path.array() / ((params - state.anchor).array().square() + xi);
    state.importance = state.importance.cwiseMax(Scalar(0));
    state.anchor = params;
    state.path.setZero();
}

template <typename Scalar>
PenaltyAndGrad<Scalar> si_penalty_and_grad(const Vector<Scalar>& params, const SiState<Scalar>& state) {
    if (params.size() != state.anchor.size()) throw std::invalid_argument("SI penalty shape mismatch");
    const Vector<Scalar> diff = params - state.anchor;
    const double penalty = state.importance.cwiseProduct(diff.cwiseAbs2()).template cast<double>().sum();
    return {static_cast<Scalar>(state.c * penalty),
            static_cast<Scalar>(2.0 * state.c) * state.importance.cwiseProduct(diff)};
}

// ---------------------------------------------------------------------------
// LwF

template <typename Scalar>
void lwf_snapshot(const Mlp<Scalar>& model, const ClassMask& active, LwfState<Scalar>& state) {
    state.snapshot = model;
    state.previous_active = active;
}

template <typename Scalar>
LossResult<Scalar> soft_bce(const Matrix<Scalar>& logits, const Matrix<Scalar>& teacher_logits, const ClassMask& mask,
                            double tau) {
    if (mask.empty()) throw std::invalid_argument("distillation needs at least one unit");
    if (logits.rows() != teacher_logits.rows() || logits.cols() != teacher_logits.cols()) {
        throw std::invalid_argument("student and teacher logits differ in shape");
    }
    const auto t = static_cast<Scalar>(tau);
    const Scalar norm = Scalar(1) / (static_cast<Scalar>(logits.rows()) * static_cast<Scalar>(mask.count()));
    LossResult<Scalar> out{Scalar(0), Matrix<Scalar>::Zero(logits.rows(), logits.cols())};
    for (Index i = 0; i < logits.rows(); ++i) {
        for (int c : mask.ids()) {
            const Scalar z = logits(i, c) / t;
            const Scalar q = sigmoid(teacher_logits(i, c) / t);
            out.loss += std::max(z, Scalar(0)) - z * q + std::log1p(std::exp(-std::abs(z)));
            out.logit_grad(i, c) = (sigmoid(z) - q) * norm / t;
        }
    }
    out.loss *= norm;
    return out;
}

template <typename Scalar>
LossAndGrad<Scalar> lwf_loss_and_grads(const Mlp<Scalar>& model, const LwfState<Scalar>& state, int phase,
                                       const Matrix<Scalar>& batch, std::span<const int> labels,
                                       const ClassMask& active) {
    const auto pass = model.forward(batch);
    auto loss = masked_bce(pass.logits(), labels, active);
    if (phase >= 2) {
        if (!state.snapshot) throw std::logic_error("LwF needs a snapshot of the previous phase");
        const Matrix<Scalar> teacher = state.snapshot->logits(batch);
        const auto distill = soft_bce(pass.logits(), teacher, state.previous_active, state.tau);
        const auto alpha = static_cast<Scalar>(state.alpha);
        loss.loss += alpha * distill.loss;
        loss.logit_grad += alpha * distill.logit_grad;
    }
    return {loss.loss, model.backward(pass, loss.logit_grad)};
}

// ---------------------------------------------------------------------------
// A-GEM

template <typename Scalar>
Vector<Scalar> agem_project(const Vector<Scalar>& grad, const Vector<Scalar>& reference) {
    if (grad.size() != reference.size()) throw std::invalid_argument("A-GEM gradient size mismatch");
    const double dot = grad.template cast<double>().dot(reference.template cast<double>());
    const double ref_sq = reference.template cast<double>().squaredNorm();
    if (dot >= 0.0 || ref_sq == 0.0) return grad;
    return grad - static_cast<Scalar>(dot / ref_sq) * reference;
}

// ---------------------------------------------------------------------------

#define NATURALCL_INSTANTIATE(S)                                                                                   \
    template class FisherAccumulator<S>;                                                                          \
    template struct SiState<S>;                                                                                   \
    template void ewc_consolidate<S>(const Mlp<S>&, const Vector<S>&, EwcState<S>&);                             \
    template void ewc_consolidate<S>(const Mlp<S>&, const Matrix<S>&, std::span<const int>, const ClassMask&,     \
                                     EwcState<S>&);                                                               \
    template PenaltyAndGrad<S> ewc_penalty_and_grad<S>(const Vector<S>&, const EwcState<S>&);                     \
    template void si_accumulate<S>(SiState<S>&, const Vector<S>&, const Vector<S>&);                              \
    template void si_consolidate<S>(const Vector<S>&, SiState<S>&);                                               \
    template PenaltyAndGrad<S> si_penalty_and_grad<S>(const Vector<S>&, const SiState<S>&);                       \
    template void lwf_snapshot<S>(const Mlp<S>&, const ClassMask&, LwfState<S>&);                                 \
    template LossResult<S> soft_bce<S>(const Matrix<S>&, const Matrix<S>&, const ClassMask&, double);             \
    template LossAndGrad<S> lwf_loss_and_grads<S>(const Mlp<S>&, const LwfState<S>&, int, const Matrix<S>&,       \
                                                  std::span<const int>, const ClassMask&);                        \
    template Vector<S> agem_project<S>(const Vector<S>&, const Vector<S>&);

NATURALCL_INSTANTIATE(float)
NATURALCL_INSTANTIATE(double)

#undef NATURALCL_INSTANTIATE

}  // namespace naturalcl
