#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "naturalcl/buffer.hpp"
#include "naturalcl/config.hpp"
#include "naturalcl/data.hpp"
#include "naturalcl/mitigation.hpp"
#include "naturalcl/model.hpp"
#include "naturalcl/protocol.hpp"

namespace naturalcl {

struct Datasets {
    Dataset train;
    Dataset test;
};

/// Loads (or generates) the train/test pair described by `config.data`.
/// MNIST paths default to the standard file names under data.dir, which falls
/// back to $NATURALCL_DATA_DIR. Domain-IL image data is padded to data.pad_to.
Datasets load_datasets(const ExperimentConfig& config);

/// Builds training batches for buffer samples. In Domain-IL the stream of a
/// sample is its task index (0-based) and selects the input permutation.
class SampleSource {
public:
    SampleSource(const Dataset& data, const Scenario& scenario);

    [[nodiscard]] Matrix<float> gather(std::span<const TrainingSample> samples, std::vector<int>& labels) const;

    /// Rows [begin, end) of an evaluation set, permuted by their task.
    [[nodiscard]] Matrix<float> gather_eval(const EvalSet& eval, std::size_t begin, std::size_t end,
                                            std::vector<int>& labels) const;

private:
    [[nodiscard]] const PixelPermutation* permutation(int task) const;

    const Dataset* data_;
    const Scenario* scenario_;
};

/// Model, optimizer and strategy state of one seed's run.
struct Learner {
    Mlp<float> model;
    Adam<float> optimizer;
    MitigationConfig mitigation;
    EwcState<float> ewc;
    std::optional<SiState<float>> si;
    LwfState<float> lwf;

    Learner(Mlp<float> model, double learning_rate, const MitigationConfig& mitigation);
};

struct PhaseData {
    int phase = 1;
    std::span<const TrainingSample> train;      // the phase's training multiset
    std::span<const TrainingSample> reference;  // rehearsal part, used by A-GEM
    ClassMask active;
};

/// `steps` optimizer updates on batches drawn uniformly with replacement from
/// `data.train`, then the phase-end consolidation of the learner's strategy.
/// Throws std::invalid_argument on an empty multiset or steps < 1.
void run_phase(Learner& learner, const SampleSource& source, const PhaseData& data, int steps, int batch_size,
               std::mt19937_64& rng);

struct Accuracy {
    std::optional<double> all, old, fresh;
    std::size_t n_all = 0, n_old = 0, n_new = 0;
};

/// Phase-end accuracy over the test rows introduced up to `phase`, split by
/// whether their introduction phase is earlier (old) or equal (new).
Accuracy evaluate(const Mlp<float>& model, const SampleSource& source, const EvalSet& eval, int phase,
                  const ClassMask& active);

struct PhaseResult {
    std::uint64_t seed = 0;
    int phase = 0;
    Accuracy accuracy;
    std::size_t train_size = 0;
    SampleCount rehearsed = 0;  // samples from earlier phases in this phase's multiset
};

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<PhaseResult> phases;
    SampleCount rehearsed_total = 0;
    PhasePlan plan;
    std::vector<BufferAuditRow> buffer_audit;
    std::string scenario_manifest;
};

/// One full continual run for one seed. Pure function of (config, data, seed).
SeedRun run_seed(const ExperimentConfig& config, const Datasets& data, std::uint64_t seed,
                 std::ostream* log = nullptr);

struct Stat {
    double mean = 0.0;
    double sd = 0.0;  // sample SD; 0 for a single value
    std::size_t n = 0;
};

Stat mean_sd(std::span<const double> values);

struct PhaseSummary {
    int phase = 0;
    std::optional<Stat> all, old, fresh;
};

struct RunReport {
    std::string method;
    ExperimentConfig config;
    std::vector<SeedRun> seeds;
    std::vector<PhaseSummary> summary;

    [[nodiscard]] const PhaseSummary& final_phase() const { return summary.back(); }
};

/// Per-phase mean and SD across seeds of every available accuracy.
std::vector<PhaseSummary> summarize(std::span<const SeedRun> runs, int phases);

/// Runs every seed (in parallel up to config.threads), then aggregates.
RunReport run_experiment(const ExperimentConfig& config, const Datasets& data, std::ostream* log = nullptr);
RunReport run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

struct ResultRow {
    std::string method;
    std::uint64_t seed = 0;
    int phase = 0;
    std::optional<double> all, old, fresh;
};

std::vector<ResultRow> result_rows(const RunReport& report);

/// `method,seed,phase,acc_all,acc_old,acc_new`; missing values are `NA`.
void write_results_csv(std::span<const ResultRow> rows, std::ostream& out, bool header = true);
std::vector<ResultRow> read_results_csv(std::istream& in);

/// Plain-text table of mean (± SD) per phase.
void write_summary_table(const std::string& method, std::span<const PhaseSummary> summary, std::ostream& out);

/// Writes results.csv, summary.txt, summary.csv, report.json, and per seed
/// plan/buffer audit/scenario manifest files into `out_dir`. Throws
/// std::runtime_error when a file cannot be written.
void emit_report(const RunReport& report, const std::filesystem::path& out_dir, bool json = true);

}  // namespace naturalcl
