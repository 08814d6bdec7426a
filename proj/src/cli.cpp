#include "naturalcl/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "naturalcl/config.hpp"
#include "naturalcl/runner.hpp"

namespace naturalcl {

namespace {

struct Parser {
    CLI::App app{"Rehearsal schedules and continual-learning experiments", "naturalcl"};
    CLI::App* fit = nullptr;
    CLI::App* plan = nullptr;
    CLI::App* run = nullptr;
    CLI::App* report = nullptr;

    FitCommand fit_cmd;
    PlanCommand plan_cmd;
    RunCommand run_cmd;
    ReportCommand report_cmd;
    std::string seed_list;

    Parser() {
        app.require_subcommand(1);

        fit = app.add_subcommand("fit", "Fit power-law, exponential and uniform schedule constants");
        fit->add_option("--phases", fit_cmd.spec.phases, "Number of phases T")->required();
        fit->add_option("--max", fit_cmd.spec.max_samples, "Samples per group at introduction N")->required();
        fit->add_option("--min-prop", fit_cmd.spec.min_proportion, "Retained proportion at the last offset p")
            ->required();

        plan = app.add_subcommand("plan", "Print the phase-by-group sample plan as CSV");
        plan->add_option("--kind", plan_cmd.kind, "powerlaw | exponential | uniform | none | joint")->required();
        plan->add_option("--phases", plan_cmd.phases, "Number of phases T")->required();
        plan->add_option("--max", plan_cmd.max_samples, "Samples per group at introduction N")->required();
        plan->add_option("--min-prop", plan_cmd.min_proportion, "Retained proportion p (default 0.10)");
        plan->add_option("--out", plan_cmd.out, "Write the CSV here instead of stdout");

        run = app.add_subcommand("run", "Run a multi-seed experiment from a config file");
        run->add_option("--config", run_cmd.config, "Experiment config (section.key = value)")
            ->required()
            ->check(CLI::ExistingFile);
        run->add_option("--out", run_cmd.out, "Output directory (default: results)");
        run->add_option("--seed-list", seed_list, "Comma-separated seeds, overriding run.seeds");
        run->add_option("--set", run_cmd.overrides, "Override a config key: key=value (repeatable)");
        run->add_flag("--quiet", run_cmd.quiet, "No per-phase progress lines");

        report = app.add_subcommand("report", "Summarize a results CSV or print a plan CSV");
        report->add_option("csv", report_cmd.csv, "results.csv or plan.csv")->required()->check(CLI::ExistingFile);
    }
};

void print_fit(const FitSpec& spec, std::ostream& out) {
    const FittedSchedules f = fit_all(spec);
    out << std::fixed;
    out << "phases " << spec.phases << ", max samples " << spec.max_samples << ", min proportion "
        << std::setprecision(4) << spec.min_proportion << "\n";
    out << "powerlaw     f(x) = " << std::setprecision(3) << f.powerlaw.scale << " * x^(-" << std::setprecision(6)
        << f.powerlaw.exponent << ")\n";
    out << "exponential  f(x) = " << std::setprecision(3) << f.exponential.scale << " * exp(-" << std::setprecision(6)
        << f.exponential.rate << " * x)\n";
    out << "uniform      f(x) = " << f.uniform.per_group << "\n";
    out << "rehearsed    powerlaw " << rehearsal_budget(f.powerlaw, spec.phases) << ", exponential "
        << rehearsal_budget(f.exponential, spec.phases) << ", uniform " << rehearsal_budget(f.uniform, spec.phases)
        << "\n";
}

int print_plan_report(std::istream& in, std::ostream& out) {
    const PhasePlan plan = PhasePlan::read_csv(in);
    out << std::left << std::setw(7) << "phase";
    for (int g = 1; g <= plan.groups(); ++g) out << std::setw(9) << ("g" + std::to_string(g));
    out << "total\n";
    for (int t = 1; t <= plan.phases(); ++t) {
        out << std::setw(7) << t;
        for (int g = 1; g <= plan.groups(); ++g) out << std::setw(9) << plan.count(t, g);
        out << plan.row_sum(t) << '\n';
    }
    out << std::right << "rehearsed samples: " << plan.rehearsed_total() << '\n';
    return 0;
}

int print_results_report(std::istream& in, std::ostream& out) {
    const auto rows = read_results_csv(in);
    if (rows.empty()) throw std::invalid_argument("results CSV has no rows");

    std::vector<std::string> methods;
    std::map<std::string, std::map<int, std::vector<const ResultRow*>>> grouped;
    for (const auto& r : rows) {
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
        grouped[r.method][r.phase].push_back(&r);
    }

    std::vector<std::pair<std::string, PhaseSummary>> finals;
    for (const auto& method : methods) {
        std::vector<PhaseSummary> summary;
        for (const auto& [phase, entries] : grouped[method]) {
            std::vector<double> all, old, fresh;
            for (const ResultRow* r : entries) {
                if (r->all) all.push_back(*r->all);
                if (r->old) old.push_back(*r->old);
                if (r->fresh) fresh.push_back(*r->fresh);
            }
            PhaseSummary s;
            s.phase = phase;
            if (!all.empty()) s.all = mean_sd(all);
            if (!old.empty()) s.old = mean_sd(old);
            if (!fresh.empty()) s.fresh = mean_sd(fresh);
            summary.push_back(s);
        }
        write_summary_table(method, summary, out);
        out << '\n';
        finals.emplace_back(method, summary.back());
    }

    if (methods.size() > 1) {
        out << "final phase\n" << std::left << std::setw(12) << "method" << std::setw(20) << "all" << "old\n";
        for (const auto& [method, s] : finals) {
            std::ostringstream all, old;
            all << std::fixed << std::setprecision(3);
            old << std::fixed << std::setprecision(3);
            if (s.all) all << s.all->mean << " (± " << s.all->sd << ")";
            if (s.old) old << s.old->mean << " (± " << s.old->sd << ")";
            out << std::setw(12) << method << std::setw(20) << (s.all ? all.str() : "-") << (s.old ? old.str() : "-")
                << '\n';
        }
        out << std::right;
    }
    return 0;
}

}  // namespace

Command parse_args(std::span<const std::string> args) {
    Parser p;
    if (args.empty()) throw UsageError("no command given", p.app.help());

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        p.app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        const auto subs = p.app.get_subcommands();
        return HelpCommand{subs.empty() ? p.app.help() : subs.front()->help()};
    } catch (const CLI::ParseError& e) {
        const auto subs = p.app.get_subcommands();
        throw UsageError(e.what(), subs.empty() ? p.app.help() : subs.front()->help());
    }

    try {
        if (p.fit->parsed()) {
            p.fit_cmd.spec.validate();
            return p.fit_cmd;
        }
        if (p.plan->parsed()) {
            p.plan_cmd.kind = canonical_schedule_name(p.plan_cmd.kind);
            if (p.plan_cmd.phases < 1) throw std::invalid_argument("--phases must be >= 1");
            if (p.plan_cmd.max_samples < 1) throw std::invalid_argument("--max must be >= 1");
            if (!(p.plan_cmd.min_proportion > 0.0 && p.plan_cmd.min_proportion <= 1.0)) {
                throw std::invalid_argument("--min-prop must be in (0, 1]");
            }
            return p.plan_cmd;
        }
        if (p.run->parsed()) {
            if (!p.seed_list.empty()) p.run_cmd.seeds = parse_seed_list(p.seed_list);
            for (const auto& o : p.run_cmd.overrides) {
                if (o.find('=') == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + o + "'");
            }
            return p.run_cmd;
        }
        return p.report_cmd;
    } catch (const std::invalid_argument& e) {
        const auto subs = p.app.get_subcommands();
        throw UsageError(e.what(), subs.empty() ? p.app.help() : subs.front()->help());
    }
}

int dispatch(const Command& command, std::ostream& out, std::ostream& err) {
    return std::visit(
        [&](const auto& cmd) -> int {
            using T = std::decay_t<decltype(cmd)>;
            if constexpr (std::is_same_v<T, HelpCommand>) {
                out << cmd.text;
                return 0;
            } else if constexpr (std::is_same_v<T, FitCommand>) {
                print_fit(cmd.spec, out);
                return 0;
            } else if constexpr (std::is_same_v<T, PlanCommand>) {
                ScheduleKind kind = NoRehearsal{};
                if (cmd.kind == "joint") {
                    kind = Joint{};
                } else if (cmd.phases >= 2) {
                    kind = fitted_schedule(cmd.kind, FitSpec{cmd.phases, cmd.max_samples, cmd.min_proportion});
                }
                const PhasePlan plan = build_phase_plan(kind, cmd.phases, cmd.max_samples);
                if (cmd.out.empty()) {
                    plan.write_csv(out);
                } else {
                    std::ofstream file(cmd.out);
                    if (!file) throw std::runtime_error("cannot write " + cmd.out.string());
                    plan.write_csv(file);
                    out << "wrote " << cmd.out.string() << '\n';
                }
                return 0;
            } else if constexpr (std::is_same_v<T, RunCommand>) {
                KeyValueConfig kv = KeyValueConfig::load(cmd.config);
                for (const auto& o : cmd.overrides) kv.apply_override(o);
                ExperimentConfig config = ExperimentConfig::from_key_values(kv);
                if (cmd.seeds) config.seeds = *cmd.seeds;
                const RunReport report = run_experiment(config, cmd.quiet ? nullptr : &err);
                emit_report(report, cmd.out);
                write_summary_table(report.method, report.summary, out);
                out << "wrote " << cmd.out.string() << '\n';
                return 0;
            } else {
                std::ifstream in(cmd.csv);
                if (!in) throw std::runtime_error("cannot open " + cmd.csv.string());
                std::string header;
                std::getline(in, header);
                in.clear();
                in.seekg(0);
                if (header.rfind("phase,", 0) == 0) return print_plan_report(in, out);
                return print_results_report(in, out);
            }
        },
        command);
}

int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    try {
        return dispatch(parse_args(args), out, err);
    } catch (const UsageError& e) {
        err << "naturalcl: " << e.what() << "\n\n" << e.usage();
        return 2;
    } catch (const std::exception& e) {
        err << "naturalcl: error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace naturalcl
