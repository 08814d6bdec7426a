#pragma once

// Regularization and gradient-projection strategies that compose with any
// rehearsal schedule: EWC and SI add a quadratic parameter penalty, LwF adds
// a distillation term against the previous phase's model, and A-GEM projects
// the training gradient away from directions that raise the rehearsal loss.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "naturalcl/model.hpp"

namespace naturalcl {

enum class MitigationKind { None, Ewc, Si, Lwf, Agem };

std::string mitigation_name(MitigationKind kind);
MitigationKind parse_mitigation(const std::string& name);

struct MitigationConfig {
    MitigationKind kind = MitigationKind::None;
    double lambda = 100.0;  // EWC strength
    double c = 0.5;         // SI strength
    double xi = 0.1;        // SI damping
    double alpha = 1.0;     // LwF distillation weight
    double tau = 2.0;       // LwF temperature
};

template <typename Scalar>
struct PenaltyAndGrad {
    Scalar penalty;
    Vector<Scalar> grad;
};

// ---------------------------------------------------------------------------
// EWC

template <typename Scalar>
struct EwcTask {
    Vector<Scalar> anchor;
    Vector<Scalar> fisher;
};

template <typename Scalar>
struct EwcState {
    double lambda = 100.0;
    std::vector<EwcTask<Scalar>> tasks;
};

/// Running mean of squared single-sample loss gradients (empirical Fisher).
template <typename Scalar>
class FisherAccumulator {
public:
    explicit FisherAccumulator(Index parameter_count) : sum_(Vector<Scalar>::Zero(parameter_count)) {}

    void add(const Mlp<Scalar>& model, const Matrix<Scalar>& inputs, std::span<const int> labels,
             const ClassMask& active);

    [[nodiscard]] std::size_t samples() const { return samples_; }

    /// Throws std::invalid_argument when no sample was added.
    [[nodiscard]] Vector<Scalar> mean() const;

private:
    Vector<Scalar> sum_;
    std::size_t samples_ = 0;
};

/// Appends (current parameters, Fisher) as a new task record.
template <typename Scalar>
void ewc_consolidate(const Mlp<Scalar>& model, const Vector<Scalar>& fisher, EwcState<Scalar>& state);

/// Fisher estimated on `inputs`, then consolidated.
template <typename Scalar>
void ewc_consolidate(const Mlp<Scalar>& model, const Matrix<Scalar>& inputs, std::span<const int> labels,
                     const ClassMask& active, EwcState<Scalar>& state);

/// (lambda / 2) sum_tasks sum_i F_i (theta_i - anchor_i)^2 and its gradient.
template <typename Scalar>
PenaltyAndGrad<Scalar> ewc_penalty_and_grad(const Vector<Scalar>& params, const EwcState<Scalar>& state);

// ---------------------------------------------------------------------------
// SI

template <typename Scalar>
struct SiState {
    double c = 0.5;
    double xi = 0.1;
    Vector<Scalar> path;        // running -g . delta since the last consolidation
    Vector<Scalar> importance;  // consolidated, >= 0
    Vector<Scalar> anchor;      // parameters at the last consolidation

    static SiState start(const Vector<Scalar>& params, double c, double xi);
};

/// path_i -= g_i * delta_i
template <typename Scalar>
void si_accumulate(SiState<Scalar>& state, const Vector<Scalar>& grad, const Vector<Scalar>& param_delta);

/// importance += path / ((theta - anchor)^2 + xi), clamped at 0; then the
/// anchor moves to theta and the path restarts.
template <typename Scalar>
void si_consolidate(const Vector<Scalar>& params, SiState<Scalar>& state);

/// c sum_i importance_i (theta_i - anchor_i)^2 and its gradient.
template <typename Scalar>
PenaltyAndGrad<Scalar> si_penalty_and_grad(const Vector<Scalar>& params, const SiState<Scalar>& state);

// ---------------------------------------------------------------------------
// LwF

template <typename Scalar>
struct LwfState {
    double alpha = 1.0;
    double tau = 2.0;
    std::optional<Mlp<Scalar>> snapshot;
    ClassMask previous_active;
};

/// Freezes a copy of `model`; distillation later applies to `active` units.
template <typename Scalar>
void lwf_snapshot(const Mlp<Scalar>& model, const ClassMask& active, LwfState<Scalar>& state);

/// Mean over rows and masked units of BCE between soft targets
/// sigmoid(teacher / tau) and outputs sigmoid(logits / tau).
template <typename Scalar>
LossResult<Scalar> soft_bce(const Matrix<Scalar>& logits, const Matrix<Scalar>& teacher_logits, const ClassMask& mask,
                            double tau);

/// BCE on the active units plus alpha * soft_bce against the snapshot on the
/// previous phase's units. Phase 1 is plain BCE; later phases without a
/// snapshot throw std::logic_error.
template <typename Scalar>
LossAndGrad<Scalar> lwf_loss_and_grads(const Mlp<Scalar>& model, const LwfState<Scalar>& state, int phase,
                                       const Matrix<Scalar>& batch, std::span<const int> labels,
                                       const ClassMask& active);

// ---------------------------------------------------------------------------
// A-GEM

/// g when <g, g_ref> >= 0 or g_ref = 0, else g - (<g, g_ref> / <g_ref, g_ref>) g_ref.
template <typename Scalar>
Vector<Scalar> agem_project(const Vector<Scalar>& grad, const Vector<Scalar>& reference);

}  // namespace naturalcl
