#pragma once

// Rehearsal schedules: how many samples of each previously introduced class
// group appear in every later phase, and how the schedule constants are fitted.
//
// Offsets are 1-based: x = 1 is the phase in which a group is introduced,
// x = 2 the first phase after it, and so on. A group introduced in phase 1 of a
// T-phase run therefore reaches offset T in the final phase.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace naturalcl {

using SampleCount = std::int64_t;

/// f(x) = scale * x^(-exponent)
struct PowerLaw {
    double scale;
    double exponent;
};

/// f(x) = scale * exp(-rate * x)
struct Exponential {
    double scale;
    double rate;
};

/// Constant count per group in every rehearsal cell (experience replay).
struct Uniform {
    SampleCount per_group;
};

/// Lower baseline: a group is only seen in its introduction phase.
struct NoRehearsal {};

/// Upper baseline: every group is present in full from phase 1.
struct Joint {};

using ScheduleKind = std::variant<PowerLaw, Exponential, Uniform, NoRehearsal, Joint>;

/// Short lowercase name ("powerlaw", "exponential", "uniform", "none", "joint").
std::string schedule_name(const ScheduleKind& kind);

/// Parses a schedule name; accepts the names above plus "pl", "exp", "er",
/// "lower", "upper". Throws std::invalid_argument for anything else.
std::string canonical_schedule_name(const std::string& name);

/// High-level constraints from which schedule constants are fitted.
struct FitSpec {
    int phases = 0;                 // T >= 2
    SampleCount max_samples = 0;    // N >= 1, group count at introduction
    double min_proportion = 0.0;    // p in (0, 1], f(T) / f(1)

    /// Throws std::invalid_argument when an invariant is violated.
    void validate() const;
};

/// b = ln(1/p) / ln(T), so that T^(-b) = p.
double fit_powerlaw_exponent(const FitSpec& spec);

/// Integer count at offset x >= 1, truncated toward zero.
///
/// Defined for PowerLaw, Exponential, Uniform (constant) and NoRehearsal
/// (always 0). Joint has no rehearsal schedule and throws std::invalid_argument,
/// as does x < 1.
SampleCount schedule_count(const ScheduleKind& kind, int offset);

/// Real-valued count before truncation. Same domain as schedule_count.
double schedule_value(const ScheduleKind& kind, int offset);

/// Total rehearsed samples over a T-phase run with one group per phase,
/// excluding the introduction cells: sum over x = 2..T of (T - x + 1) * count(x).
SampleCount rehearsal_budget(const ScheduleKind& kind, int phases);

/// The same sum over the untruncated values.
double continuous_rehearsal_budget(const ScheduleKind& kind, int phases);

/// Number of rehearsal cells in a T-phase run, T(T-1)/2.
SampleCount rehearsal_cell_count(int phases);

/// Exponential schedule with scale * e^(-rate) = N whose continuous rehearsal
/// budget equals that of PowerLaw{N, powerlaw_exponent}. The rate is found by
/// bisection over [0, 50]; throws std::runtime_error when no root is bracketed.
Exponential fit_budget_matched_exponential(const FitSpec& spec, double powerlaw_exponent);

/// Uniform schedule spreading the truncated power-law budget evenly over all
/// rehearsal cells (floored).
Uniform fit_budget_matched_uniform(const FitSpec& spec, double powerlaw_exponent);

/// Per-group sample counts for every phase of a run.
///
/// Phases and groups are 1-based. Group g is introduced in phase g, except
/// under Joint where every group is introduced in phase 1.
class PhasePlan {
public:
    PhasePlan() = default;
    PhasePlan(int phases, int groups, std::vector<int> intro_phase);

    [[nodiscard]] int phases() const { return phases_; }
    [[nodiscard]] int groups() const { return groups_; }
    [[nodiscard]] int intro_phase(int group) const;

    [[nodiscard]] SampleCount count(int phase, int group) const;
    void set_count(int phase, int group, SampleCount value);

    [[nodiscard]] std::vector<SampleCount> row(int phase) const;
    [[nodiscard]] SampleCount row_sum(int phase) const;

    /// Sum of all cells after each group's introduction phase.
    [[nodiscard]] SampleCount rehearsed_total() const;

    /// Throws std::logic_error when the zero-before-intro, full-at-intro or
    /// non-increasing invariants fail.
    void check_invariants(SampleCount max_samples) const;

    /// `phase,group_1,...,group_G` followed by one integer row per phase.
    void write_csv(std::ostream& out) const;
    static PhasePlan read_csv(std::istream& in);

    friend bool operator==(const PhasePlan&, const PhasePlan&) = default;

private:
    [[nodiscard]] std::size_t offset(int phase, int group) const;

    int phases_ = 0;
    int groups_ = 0;
    std::vector<int> intro_phase_;
    std::vector<SampleCount> counts_;
};

/// Builds the T x T plan for one group per phase and N samples per group.
PhasePlan build_phase_plan(const ScheduleKind& kind, int phases, SampleCount max_samples);

/// Schedule constants fitted from one FitSpec, as printed by `naturalcl fit`.
struct FittedSchedules {
    FitSpec spec;
    PowerLaw powerlaw;
    Exponential exponential;
    Uniform uniform;
};

FittedSchedules fit_all(const FitSpec& spec);

/// Schedule for a named kind fitted against `spec`.
ScheduleKind fitted_schedule(const std::string& name, const FitSpec& spec);

}  // namespace naturalcl
