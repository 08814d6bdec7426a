#include "naturalcl/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace naturalcl {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Truncation that does not lose a whole sample to round-off when the exact
// value is an integer (5000 * 10^-1.30103 should give 250, not 249).
SampleCount truncate_count(double value) {
    if (!(value >= 0.0)) return 0;
    return static_cast<SampleCount>(std::floor(value + 1e-9 * std::max(1.0, value)));
}

void require_offset(int offset) {
    if (offset < 1) {
        throw std::invalid_argument("schedule offset must be >= 1, got " + std::to_string(offset));
    }
}

constexpr double kMaxRate = 50.0;
constexpr double kRateTolerance = 1e-6;
constexpr int kMaxBisections = 200;

}  // namespace

std::string schedule_name(const ScheduleKind& kind) {
    return std::visit(Overloaded{
                          [](const PowerLaw&) { return std::string("powerlaw"); },
                          [](const Exponential&) { return std::string("exponential"); },
                          [](const Uniform&) { return std::string("uniform"); },
                          [](const NoRehearsal&) { return std::string("none"); },
                          [](const Joint&) { return std::string("joint"); },
                      },
                      kind);
}

std::string canonical_schedule_name(const std::string& name) {
    if (name == "powerlaw" || name == "pl" || name == "power-law") return "powerlaw";
    if (name == "exponential" || name == "exp") return "exponential";
    if (name == "uniform" || name == "er") return "uniform";
    if (name == "none" || name == "lower" || name == "lb") return "none";
    if (name == "joint" || name == "upper" || name == "ub") return "joint";
    throw std::invalid_argument("unknown schedule kind '" + name + "'");
}

void FitSpec::validate() const {
    if (phases < 2) {
        throw std::invalid_argument("fit spec needs at least 2 phases, got " + std::to_string(phases));
    }
    if (max_samples < 1) {
        throw std::invalid_argument("fit spec max_samples must be >= 1");
    }
    if (!(min_proportion > 0.0 && min_proportion <= 1.0)) {
        throw std::invalid_argument("fit spec min_proportion must lie in (0, 1]");
    }
}

double fit_powerlaw_exponent(const FitSpec& spec) {
    spec.validate();
    return std::log(1.0 / spec.min_proportion) / std::log(static_cast<double>(spec.phases));
}

double schedule_value(const ScheduleKind& kind, int offset) {
    require_offset(offset);
    const double x = offset;
    return std::visit(Overloaded{
                          [x](const PowerLaw& k) { return k.scale * std::pow(x, -k.exponent); },
                          [x](const Exponential& k) { return k.scale * std::exp(-k.rate * x); },
                          [](const Uniform& k) { return static_cast<double>(k.per_group); },
                          [](const NoRehearsal&) { return 0.0; },
                          [](const Joint&) -> double {
                              throw std::invalid_argument("joint training has no rehearsal schedule");
                          },
                      },
                      kind);
}

SampleCount schedule_count(const ScheduleKind& kind, int offset) {
    if (const auto* uniform = std::get_if<Uniform>(&kind)) {
        require_offset(offset);
        return uniform->per_group;
    }
    return truncate_count(schedule_value(kind, offset));
}

SampleCount rehearsal_cell_count(int phases) {
    return phases < 2 ? 0 : static_cast<SampleCount>(phases) * (phases - 1) / 2;
}

SampleCount rehearsal_budget(const ScheduleKind& kind, int phases) {
    SampleCount total = 0;
    for (int x = 2; x <= phases; ++x) {
        total += static_cast<SampleCount>(phases - x + 1) * schedule_count(kind, x);
    }
    return total;
}

double continuous_rehearsal_budget(const ScheduleKind& kind, int phases) {
    double total = 0.0;
    for (int x = 2; x <= phases; ++x) {
        total += static_cast<double>(phases - x + 1) * schedule_value(kind, x);
    }
    return total;
}

Exponential fit_budget_matched_exponential(const FitSpec& spec, double powerlaw_exponent) {
    spec.validate();
    const double n = static_cast<double>(spec.max_samples);
    const double target = continuous_rehearsal_budget(PowerLaw{n, powerlaw_exponent}, spec.phases);

    // With scale = N e^rate the count at offset x is N e^(-rate (x - 1)), which
    // makes the budget strictly decreasing in rate.
    auto residual = [&](double rate) {
        double total = 0.0;
        for (int x = 2; x <= spec.phases; ++x) {
            total += static_cast<double>(spec.phases - x + 1) * n * std::exp(-rate * (x - 1));
        }
        return total - target;
    };

    double lo = 0.0;
    double hi = kMaxRate;
    const double r_lo = residual(lo);
    const double r_hi = residual(hi);
    if (r_lo < 0.0 || r_hi > 0.0) {
        std::ostringstream msg;
        msg << "exponential budget residual does not bracket a root in [0, " << kMaxRate
            << "] (r(0)=" << r_lo << ", r(" << kMaxRate << ")=" << r_hi << ")";
        throw std::runtime_error(msg.str());
    }
    if (r_lo == 0.0) return Exponential{n, 0.0};

    for (int i = 0; i < kMaxBisections && (hi - lo) > kRateTolerance; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (residual(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double rate = 0.5 * (lo + hi);
    return Exponential{n * std::exp(rate), rate};
}

Uniform fit_budget_matched_uniform(const FitSpec& spec, double powerlaw_exponent) {
    spec.validate();
    const SampleCount budget =
        rehearsal_budget(PowerLaw{static_cast<double>(spec.max_samples), powerlaw_exponent}, spec.phases);
    return Uniform{budget / rehearsal_cell_count(spec.phases)};
}

FittedSchedules fit_all(const FitSpec& spec) {
    const double b = fit_powerlaw_exponent(spec);
    return FittedSchedules{
        spec,
        PowerLaw{static_cast<double>(spec.max_samples), b},
        fit_budget_matched_exponential(spec, b),
        fit_budget_matched_uniform(spec, b),
    };
}

ScheduleKind fitted_schedule(const std::string& name, const FitSpec& spec) {
    const std::string kind = canonical_schedule_name(name);
    if (kind == "none") return NoRehearsal{};
    if (kind == "joint") return Joint{};
    const FittedSchedules fitted = fit_all(spec);
    if (kind == "powerlaw") return fitted.powerlaw;
    if (kind == "exponential") return fitted.exponential;
    return fitted.uniform;
}

// ---------------------------------------------------------------------------
// PhasePlan

PhasePlan::PhasePlan(int phases, int groups, std::vector<int> intro_phase)
    : phases_(phases), groups_(groups), intro_phase_(std::move(intro_phase)) {
    if (phases < 1 || groups < 1) throw std::invalid_argument("phase plan needs >= 1 phase and group");
    if (static_cast<int>(intro_phase_.size()) != groups) {
        throw std::invalid_argument("phase plan intro list length differs from group count");
    }
    for (int intro : intro_phase_) {
        if (intro < 1 || intro > phases) throw std::invalid_argument("group intro phase out of range");
    }
    counts_.assign(static_cast<std::size_t>(phases) * groups, 0);
}

std::size_t PhasePlan::offset(int phase, int group) const {
    if (phase < 1 || phase > phases_ || group < 1 || group > groups_) {
        throw std::out_of_range("phase plan cell (" + std::to_string(phase) + ", " + std::to_string(group) +
                                ") out of range");
    }
    return static_cast<std::size_t>(phase - 1) * groups_ + (group - 1);
}

int PhasePlan::intro_phase(int group) const {
    if (group < 1 || group > groups_) throw std::out_of_range("group out of range");
    return intro_phase_[group - 1];
}

SampleCount PhasePlan::count(int phase, int group) const { return counts_[offset(phase, group)]; }

void PhasePlan::set_count(int phase, int group, SampleCount value) {
    if (value < 0) throw std::invalid_argument("negative sample count");
    counts_[offset(phase, group)] = value;
}

std::vector<SampleCount> PhasePlan::row(int phase) const {
    const auto begin = counts_.begin() + static_cast<std::ptrdiff_t>(offset(phase, 1));
    return {begin, begin + groups_};
}

SampleCount PhasePlan::row_sum(int phase) const {
    const auto r = row(phase);
    return std::accumulate(r.begin(), r.end(), SampleCount{0});
}

SampleCount PhasePlan::rehearsed_total() const {
    SampleCount total = 0;
    for (int g = 1; g <= groups_; ++g) {
        for (int t = intro_phase(g) + 1; t <= phases_; ++t) total += count(t, g);
    }
    return total;
}

void PhasePlan::check_invariants(SampleCount max_samples) const {
    for (int g = 1; g <= groups_; ++g) {
        const int intro = intro_phase(g);
        for (int t = 1; t < intro; ++t) {
            if (count(t, g) != 0) throw std::logic_error("plan has samples before group introduction");
        }
        if (count(intro, g) != max_samples) throw std::logic_error("plan group not full at introduction");
        for (int t = intro + 1; t <= phases_; ++t) {
            if (count(t, g) > count(t - 1, g)) throw std::logic_error("plan count increases over phases");
        }
    }
}

void PhasePlan::write_csv(std::ostream& out) const {
    out << "phase";
    for (int g = 1; g <= groups_; ++g) out << ",group_" << g;
    out << '\n';
    for (int t = 1; t <= phases_; ++t) {
        out << t;
        for (int g = 1; g <= groups_; ++g) out << ',' << count(t, g);
        out << '\n';
    }
}

PhasePlan PhasePlan::read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("phase", 0) != 0) {
        throw std::runtime_error("plan CSV must start with a 'phase,group_1,...' header");
    }
    const int groups = static_cast<int>(std::count(line.begin(), line.end(), ','));
    if (groups < 1) throw std::runtime_error("plan CSV header has no group columns");

    std::vector<std::vector<SampleCount>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream fields(line);
        std::string cell;
        std::vector<SampleCount> values;
        while (std::getline(fields, cell, ',')) values.push_back(std::stoll(cell));
        if (static_cast<int>(values.size()) != groups + 1) {
            throw std::runtime_error("plan CSV row has " + std::to_string(values.size()) + " cells, expected " +
                                     std::to_string(groups + 1));
        }
        if (values[0] != static_cast<SampleCount>(rows.size() + 1)) {
            throw std::runtime_error("plan CSV phases must be consecutive from 1");
        }
        rows.emplace_back(values.begin() + 1, values.end());
    }
    if (rows.empty()) throw std::runtime_error("plan CSV has no rows");

    std::vector<int> intro(groups, static_cast<int>(rows.size()));
    for (int g = 0; g < groups; ++g) {
        for (std::size_t t = 0; t < rows.size(); ++t) {
            if (rows[t][g] > 0) {
                intro[g] = static_cast<int>(t) + 1;
                break;
            }
        }
    }
    PhasePlan plan(static_cast<int>(rows.size()), groups, std::move(intro));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        for (int g = 0; g < groups; ++g) plan.set_count(static_cast<int>(t) + 1, g + 1, rows[t][g]);
    }
    return plan;
}

PhasePlan build_phase_plan(const ScheduleKind& kind, int phases, SampleCount max_samples) {
    if (phases < 1) throw std::invalid_argument("phase plan needs at least one phase");
    if (max_samples < 1) throw std::invalid_argument("phase plan max_samples must be >= 1");

    const bool joint = std::holds_alternative<Joint>(kind);
    std::vector<int> intro(phases);
    for (int g = 1; g <= phases; ++g) intro[g - 1] = joint ? 1 : g;
    PhasePlan plan(phases, phases, intro);

    for (int g = 1; g <= phases; ++g) {
        const int start = plan.intro_phase(g);
        plan.set_count(start, g, max_samples);
        for (int t = start + 1; t <= phases; ++t) {
            const SampleCount scheduled = joint ? max_samples : schedule_count(kind, t - start + 1);
            plan.set_count(t, g, std::min(scheduled, plan.count(t - 1, g)));
        }
    }
    return plan;
}

}  // namespace naturalcl
