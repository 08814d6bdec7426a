#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "naturalcl/schedule.hpp"

using namespace naturalcl;

namespace {

// Rehearsed samples of a plan by walking every cell after its group's intro.
SampleCount count_rehearsed_cells(const PhasePlan& plan) {
    SampleCount total = 0;
    for (int t = 1; t <= plan.phases(); ++t) {
        for (int g = 1; g <= plan.groups(); ++g) {
            if (t > plan.intro_phase(g)) total += plan.count(t, g);
        }
    }
    return total;
}

// Solves sum_{x=2..T} (T-x+1) N e^{-r(x-1)} = target by Newton from r = 1,
// falling back to halving steps when Newton overshoots into r < 0.
double solve_rate_newton(int T, double n, double target) {
    double r = 1.0;
    for (int it = 0; it < 200; ++it) {
        double f = -target, df = 0.0;
        for (int x = 2; x <= T; ++x) {
            const double w = (T - x + 1) * n * std::exp(-r * (x - 1));
            f += w;
            df -= (x - 1) * w;
        }
        double next = r - f / df;
        if (next < 0.0) next = r / 2;
        if (std::abs(next - r) < 1e-13) return next;
        r = next;
    }
    return r;
}

}  // namespace

TEST_CASE("power-law exponent sends the last offset to the minimum proportion") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> phases(2, 40);
    std::uniform_real_distribution<double> prop(0.001, 1.0);
    for (int i = 0; i < 200; ++i) {
        const FitSpec spec{phases(rng), 1000, prop(rng)};
        const double b = fit_powerlaw_exponent(spec);
        CHECK(std::pow(spec.phases, -b) == doctest::Approx(spec.min_proportion).epsilon(1e-12));
    }
    CHECK(fit_powerlaw_exponent({10, 5000, 0.10}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit_powerlaw_exponent({10, 5000, 1.0}) == doctest::Approx(0.0));
}

TEST_CASE("fit spec rejects bad inputs") {
    CHECK_THROWS_AS(fit_powerlaw_exponent({1, 5000, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(fit_powerlaw_exponent({10, 0, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(fit_powerlaw_exponent({10, 5000, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(fit_powerlaw_exponent({10, 5000, 1.5}), std::invalid_argument);
}

TEST_CASE("schedule counts") {
    SUBCASE("power-law halves at offset 2") {
        const PowerLaw pl{5000, 1.0};
        CHECK(schedule_count(pl, 1) == 5000);
        CHECK(schedule_count(pl, 2) == 2500);
        CHECK(schedule_count(pl, 3) == 1666);
        CHECK(schedule_count(pl, 10) == 500);
    }
    SUBCASE("exact integers survive round-off") {
        const double b = fit_powerlaw_exponent({10, 5000, 0.05});
        CHECK(schedule_count(PowerLaw{5000, b}, 10) == 250);
        const double b2 = fit_powerlaw_exponent({10, 5000, 0.02});
        CHECK(schedule_count(PowerLaw{5000, b2}, 10) == 100);
    }
    SUBCASE("uniform, none and joint") {
        CHECK(schedule_count(Uniform{1357}, 7) == 1357);
        CHECK(schedule_count(NoRehearsal{}, 2) == 0);
        CHECK_THROWS_AS(schedule_count(Joint{}, 2), std::invalid_argument);
    }
    SUBCASE("offset below one") {
        CHECK_THROWS_AS(schedule_count(PowerLaw{5000, 1.0}, 0), std::invalid_argument);
        CHECK_THROWS_AS(schedule_count(Uniform{5}, 0), std::invalid_argument);
    }
}

TEST_CASE("schedule names") {
    CHECK(canonical_schedule_name("pl") == "powerlaw");
    CHECK(canonical_schedule_name("exp") == "exponential");
    CHECK(canonical_schedule_name("er") == "uniform");
    CHECK(canonical_schedule_name("lower") == "none");
    CHECK(canonical_schedule_name("upper") == "joint");
    CHECK_THROWS_AS(canonical_schedule_name("cosine"), std::invalid_argument);
    CHECK(schedule_name(Exponential{1, 1}) == "exponential");
}

TEST_CASE("exponential fit matches the power-law budget") {
    for (double p : {0.02, 0.05, 0.10, 0.5}) {
        for (int T : {2, 3, 5, 10, 20}) {
            CAPTURE(p);
            CAPTURE(T);
            const FitSpec spec{T, 5000, p};
            const double b = fit_powerlaw_exponent(spec);
            const Exponential e = fit_budget_matched_exponential(spec, b);

            double target = 0.0;
            for (int x = 2; x <= T; ++x) target += (T - x + 1) * 5000.0 * std::pow(x, -b);

            CHECK(e.scale * std::exp(-e.rate) == doctest::Approx(5000.0).epsilon(1e-9));
            CHECK(continuous_rehearsal_budget(e, T) == doctest::Approx(target).epsilon(1e-5));
            CHECK(e.rate == doctest::Approx(solve_rate_newton(T, 5000.0, target)).epsilon(1e-5));
        }
    }
}

TEST_CASE("exponential fit with no decay") {
    const Exponential e = fit_budget_matched_exponential({10, 100, 1.0}, 0.0);
    CHECK(e.rate == doctest::Approx(0.0));
    CHECK(e.scale == doctest::Approx(100.0));
}

TEST_CASE("uniform fit spreads the truncated budget") {
    for (int T : {2, 5, 10, 20}) {
        const FitSpec spec{T, 5000, 0.1};
        const double b = fit_powerlaw_exponent(spec);
        SampleCount budget = 0;
        for (int x = 2; x <= T; ++x) budget += (T - x + 1) * static_cast<SampleCount>(std::floor(5000.0 * std::pow(x, -b) + 1e-6));
        CHECK(fit_budget_matched_uniform(spec, b).per_group == budget / (T * (T - 1) / 2));
    }
}

TEST_CASE("rehearsal budget equals the sum over plan cells") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> phases(2, 25);
    std::uniform_int_distribution<SampleCount> max_samples(1, 20000);
    std::uniform_real_distribution<double> prop(0.01, 1.0);
    for (int i = 0; i < 100; ++i) {
        const FitSpec spec{phases(rng), max_samples(rng), prop(rng)};
        const auto fitted = fit_all(spec);
        for (const ScheduleKind& kind : std::vector<ScheduleKind>{fitted.powerlaw, fitted.exponential, fitted.uniform,
                                                                  NoRehearsal{}}) {
            const PhasePlan plan = build_phase_plan(kind, spec.phases, spec.max_samples);
            CHECK(plan.rehearsed_total() == count_rehearsed_cells(plan));
        }
        CHECK(rehearsal_budget(fitted.powerlaw, spec.phases) ==
              count_rehearsed_cells(build_phase_plan(fitted.powerlaw, spec.phases, spec.max_samples)));
    }
}

TEST_CASE("plan invariants hold for random fits") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> phases(2, 25);
    std::uniform_int_distribution<SampleCount> max_samples(1, 20000);
    std::uniform_real_distribution<double> prop(0.005, 1.0);
    for (int i = 0; i < 200; ++i) {
        const FitSpec spec{phases(rng), max_samples(rng), prop(rng)};
        const int T = spec.phases;
        const SampleCount N = spec.max_samples;
        const auto fitted = fit_all(spec);
        for (const ScheduleKind& kind : std::vector<ScheduleKind>{fitted.powerlaw, fitted.exponential, fitted.uniform,
                                                                  NoRehearsal{}, Joint{}}) {
            CAPTURE(schedule_name(kind));
            const PhasePlan plan = build_phase_plan(kind, T, N);
            REQUIRE_NOTHROW(plan.check_invariants(N));
            for (int g = 1; g <= T; ++g) {
                const int intro = plan.intro_phase(g);
                for (int t = 1; t <= T; ++t) {
                    const SampleCount c = plan.count(t, g);
                    CHECK(c >= 0);
                    CHECK(c <= N);
                    if (t < intro) CHECK(c == 0);
                    if (t == intro) CHECK(c == N);
                    if (t > intro) CHECK(c <= plan.count(t - 1, g));
                }
            }
            // Every group follows the same curve shifted by its intro phase.
            if (!std::holds_alternative<Joint>(kind)) {
                for (int g = 2; g <= T; ++g) {
                    for (int t = g; t <= T; ++t) CHECK(plan.count(t, g) == plan.count(t - g + 1, 1));
                }
            }
        }
    }
}

TEST_CASE("joint and no-rehearsal plans") {
    const PhasePlan joint = build_phase_plan(Joint{}, 4, 50);
    for (int t = 1; t <= 4; ++t) {
        for (int g = 1; g <= 4; ++g) CHECK(joint.count(t, g) == 50);
    }
    const PhasePlan lb = build_phase_plan(NoRehearsal{}, 4, 50);
    CHECK(lb.rehearsed_total() == 0);
    CHECK(lb.row_sum(3) == 50);
}

TEST_CASE("plans clamp a schedule that would exceed the previous count") {
    // Uniform above N never rises above the introduction count.
    const PhasePlan plan = build_phase_plan(Uniform{80}, 3, 50);
    CHECK(plan.count(2, 1) == 50);
    CHECK_NOTHROW(plan.check_invariants(50));
}

TEST_CASE("plan invariant checker catches violations") {
    PhasePlan plan = build_phase_plan(PowerLaw{100, 1.0}, 3, 100);
    plan.set_count(3, 1, 60);
    CHECK_THROWS_AS(plan.check_invariants(100), std::logic_error);
    plan = build_phase_plan(PowerLaw{100, 1.0}, 3, 100);
    plan.set_count(1, 2, 1);
    CHECK_THROWS_AS(plan.check_invariants(100), std::logic_error);
    CHECK_THROWS_AS(plan.count(4, 1), std::out_of_range);
}

TEST_CASE("plan CSV round trip") {
    const auto fitted = fit_all({7, 1234, 0.07});
    const PhasePlan plan = build_phase_plan(fitted.exponential, 7, 1234);
    std::stringstream csv;
    plan.write_csv(csv);
    CHECK(csv.str().rfind("phase,group_1,group_2,group_3,group_4,group_5,group_6,group_7\n", 0) == 0);
    const PhasePlan back = PhasePlan::read_csv(csv);
    CHECK(back == plan);

    std::istringstream bad("phase,group_1\n1,abc\n");
    CHECK_THROWS(PhasePlan::read_csv(bad));
}
