#include "naturalcl/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "naturalcl/seeding.hpp"

namespace naturalcl {

namespace {

// Purposes for derive_seed; each seed's run draws from independent streams.
constexpr std::uint64_t kScenarioStream = 1;
constexpr std::uint64_t kModelStream = 2;
constexpr std::uint64_t kBufferStream = 3;
constexpr std::uint64_t kBatchStream = 4;
constexpr std::uint64_t kSubsetStream = 5;

constexpr std::size_t kEvalChunk = 2048;
constexpr std::size_t kFisherChunk = 512;

std::mutex log_mutex;

void log_line(std::ostream* log, const std::string& line) {
    if (log == nullptr) return;
    std::lock_guard lock(log_mutex);
    *log << line << std::endl;
}

std::filesystem::path data_dir(const DataConfig& data) {
    if (!data.dir.empty()) return data.dir;
    if (const char* env = std::getenv("NATURALCL_DATA_DIR"); env != nullptr && *env != '\0') return env;
    return {};
}

std::filesystem::path resolve(const std::filesystem::path& explicit_path, const std::filesystem::path& dir,
                              const char* default_name) {
    if (!explicit_path.empty()) return explicit_path;
    if (dir.empty()) {
        throw std::runtime_error(std::string("no path for ") + default_name +
                                 "; set data.dir or NATURALCL_DATA_DIR");
    }
    return dir / default_name;
}

std::vector<std::size_t> random_subset(std::vector<std::size_t> rows, std::size_t k, std::mt19937_64& rng) {
    if (k > rows.size()) throw std::invalid_argument("subset larger than its population");
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
        std::swap(rows[i], rows[pick(rng)]);
    }
    rows.resize(k);
    return rows;
}

std::string format_accuracy(const std::optional<double>& v) {
    if (!v) return "NA";
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << *v;
    return out.str();
}

std::string format_stat(const std::optional<Stat>& s) {
    if (!s) return "-";
    std::ostringstream out;
    out << std::fixed << std::setprecision(3) << s->mean << " (± " << s->sd << ")";
    return out.str();
}

std::optional<double> parse_accuracy(const std::string& text) {
    if (text == "NA" || text.empty()) return std::nullopt;
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("bad accuracy '" + text + "'");
    return v;
}

void ensure_written(const std::ofstream& out, const std::filesystem::path& path) {
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

nlohmann::json stat_json(const std::optional<Stat>& s) {
    if (!s) return nullptr;
    return {{"mean", s->mean}, {"sd", s->sd}, {"n", s->n}};
}

nlohmann::json accuracy_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Data

Datasets load_datasets(const ExperimentConfig& config) {
    const DataConfig& data = config.data;
    Datasets out;
    switch (data.source) {
        case DataSource::Mnist: {
            const auto dir = data_dir(data);
            out.train = load_idx(resolve(data.train_images, dir, "train-images-idx3-ubyte"),
                                 resolve(data.train_labels, dir, "train-labels-idx1-ubyte"));
            out.test = load_idx(resolve(data.test_images, dir, "t10k-images-idx3-ubyte"),
                                resolve(data.test_labels, dir, "t10k-labels-idx1-ubyte"));
            break;
        }
        case DataSource::Synthetic: {
            const SyntheticConfig& s = config.synthetic;
            const Dataset all = synth_gaussian(s.classes, s.dim, s.train_per_class + s.test_per_class, s.separation,
                                               s.seed);
            auto [train, test] = split_per_class(all, static_cast<std::size_t>(s.test_per_class));
            out.train = std::move(train);
            out.test = std::move(test);
            break;
        }
        case DataSource::FeatureTable: {
            if (data.train_csv.empty() || data.test_csv.empty()) {
                throw std::invalid_argument("data.source = features needs data.train_csv and data.test_csv");
            }
            out.train = load_feature_csv(data.train_csv);
            out.test = load_feature_csv(data.test_csv);
            if (out.train.dim() != out.test.dim()) throw std::invalid_argument("train and test feature widths differ");
            const int classes = std::max(out.train.num_classes, out.test.num_classes);
            out.train.index_classes(classes);
            out.test.index_classes(classes);
            break;
        }
    }
    if (config.scenario == ScenarioKind::DomainIncremental && data.pad_to > 0 && out.train.image_rows > 0) {
        out.train = pad_images(out.train, data.pad_to, data.pad_to);
        out.test = pad_images(out.test, data.pad_to, data.pad_to);
    }
    out.train.validate();
    out.test.validate(false);
    return out;
}

SampleSource::SampleSource(const Dataset& data, const Scenario& scenario) : data_(&data), scenario_(&scenario) {}

const PixelPermutation* SampleSource::permutation(int task) const {
    if (scenario_->is_class_incremental()) return nullptr;
    const auto& perms = scenario_->domain_il().perms;
    if (task < 0 || task >= static_cast<int>(perms.size())) throw std::out_of_range("task index out of range");
    const PixelPermutation& perm = perms[static_cast<std::size_t>(task)];
    return perm.is_identity() ? nullptr : &perm;
}

Matrix<float> SampleSource::gather(std::span<const TrainingSample> samples, std::vector<int>& labels) const {
    Matrix<float> batch(static_cast<Index>(samples.size()), data_->dim());
    labels.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto row = static_cast<Index>(samples[i].index);
        labels[i] = data_->labels[samples[i].index];
        if (const PixelPermutation* perm = permutation(samples[i].stream)) {
            const auto& map = perm->map();
            for (Index j = 0; j < batch.cols(); ++j) batch(static_cast<Index>(i), j) = data_->features(row, map[j]);
        } else {
            batch.row(static_cast<Index>(i)) = data_->features.row(row);
        }
    }
    return batch;
}

Matrix<float> SampleSource::gather_eval(const EvalSet& eval, std::size_t begin, std::size_t end,
                                        std::vector<int>& labels) const {
    std::vector<TrainingSample> samples;
    samples.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const int task = scenario_->is_class_incremental() ? 0 : eval.intro_phase[i] - 1;
        samples.push_back({eval.rows[i], task});
    }
    return gather(samples, labels);
}

// ---------------------------------------------------------------------------
// Training

Learner::Learner(Mlp<float> net, double learning_rate, const MitigationConfig& config)
    : model(std::move(net)), optimizer(model.parameter_count(), learning_rate), mitigation(config) {
    ewc.lambda = config.lambda;
    lwf.alpha = config.alpha;
    lwf.tau = config.tau;
    if (config.kind == MitigationKind::Si) si = SiState<float>::start(model.parameters(), config.c, config.xi);
}

void run_phase(Learner& learner, const SampleSource& source, const PhaseData& data, int steps, int batch_size,
               std::mt19937_64& rng) {
    if (data.train.empty()) throw std::invalid_argument("phase " + std::to_string(data.phase) + " has no training data");
    if (steps < 1) throw std::invalid_argument("steps per phase must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");

    const MitigationKind kind = learner.mitigation.kind;
    const bool project = kind == MitigationKind::Agem && !data.reference.empty();

    std::uniform_int_distribution<std::size_t> pick_train(0, data.train.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_ref(0, data.reference.empty() ? 0 : data.reference.size() - 1);
    std::vector<TrainingSample> batch(static_cast<std::size_t>(batch_size));
    std::vector<int> labels;
    Vector<float> before;

    for (int step = 0; step < steps; ++step) {
        for (auto& s : batch) s = data.train[pick_train(rng)];
        const Matrix<float> inputs = source.gather(batch, labels);

        LossAndGrad<float> loss = kind == MitigationKind::Lwf
                                      ? lwf_loss_and_grads(learner.model, learner.lwf, data.phase, inputs, labels,
                                                           data.active)
                                      : bce_loss_and_grads(learner.model, inputs, labels, data.active);
        Vector<float> grad = loss.grad;
        if (kind == MitigationKind::Ewc && !learner.ewc.tasks.empty()) {
            grad += ewc_penalty_and_grad(learner.model.parameters(), learner.ewc).grad;
        }
        if (learner.si) grad += si_penalty_and_grad(learner.model.parameters(), *learner.si).grad;
        if (project) {
            for (auto& s : batch) s = data.reference[pick_ref(rng)];
            const Matrix<float> ref_inputs = source.gather(batch, labels);
            const auto ref = bce_loss_and_grads(learner.model, ref_inputs, labels, data.active);
            grad = agem_project(grad, ref.grad);
        }

        if (learner.si) before = learner.model.parameters();
        learner.optimizer.step(learner.model.parameters(), grad);
        if (learner.si) si_accumulate(*learner.si, loss.grad, Vector<float>(learner.model.parameters() - before));
    }

    switch (kind) {
        case MitigationKind::Ewc: {
            FisherAccumulator<float> fisher(learner.model.parameter_count());
            for (std::size_t begin = 0; begin < data.train.size(); begin += kFisherChunk) {
                const auto chunk = data.train.subspan(begin, std::min(kFisherChunk, data.train.size() - begin));
                const Matrix<float> inputs = source.gather(chunk, labels);
                fisher.add(learner.model, inputs, labels, data.active);
            }
            ewc_consolidate(learner.model, fisher.mean(), learner.ewc);
            break;
        }
        case MitigationKind::Si: si_consolidate(learner.model.parameters(), *learner.si); break;
        case MitigationKind::Lwf: lwf_snapshot(learner.model, data.active, learner.lwf); break;
        case MitigationKind::None:
        case MitigationKind::Agem: break;
    }
}

Accuracy evaluate(const Mlp<float>& model, const SampleSource& source, const EvalSet& eval, int phase,
                  const ClassMask& active) {
    std::size_t correct_old = 0, correct_new = 0;
    Accuracy acc;
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < eval.size(); begin += kEvalChunk) {
        const std::size_t end = std::min(eval.size(), begin + kEvalChunk);
        const Matrix<float> inputs = source.gather_eval(eval, begin, end, labels);
        const auto predicted = predict(model, inputs, active);
        for (std::size_t i = begin; i < end; ++i) {
            const bool hit = predicted[i - begin] == labels[i - begin];
            if (eval.intro_phase[i] < phase) {
                ++acc.n_old;
                correct_old += hit;
            } else {
                ++acc.n_new;
                correct_new += hit;
            }
        }
    }
    acc.n_all = acc.n_old + acc.n_new;
    const auto ratio = [](std::size_t k, std::size_t n) -> std::optional<double> {
        if (n == 0) return std::nullopt;
        return static_cast<double>(k) / static_cast<double>(n);
    };
    acc.all = ratio(correct_old + correct_new, acc.n_all);
    acc.old = ratio(correct_old, acc.n_old);
    acc.fresh = ratio(correct_new, acc.n_new);
    return acc;
}

// ---------------------------------------------------------------------------
// One seed

SeedRun run_seed(const ExperimentConfig& config, const Datasets& data, std::uint64_t seed, std::ostream* log) {
    config.validate();
    const int T = config.phases;
    const Dataset& train = data.train;
    const int classes = train.num_classes;
    const bool class_il = config.scenario == ScenarioKind::ClassIncremental;
    const std::string schedule = canonical_schedule_name(config.schedule);
    const bool joint = schedule == "joint";

    const Scenario scenario = class_il ? make_class_il(classes, T, derive_seed(seed, kScenarioStream))
                                       : make_domain_il(T, static_cast<int>(train.dim()), derive_seed(seed, kScenarioStream));

    // Streams and the rows each one starts with.
    StreamGroups layout;
    std::size_t per_stream = 0;
    if (class_il) {
        layout.groups = scenario.class_il().groups;
        std::size_t smallest = train.size();
        for (const auto& rows : train.class_index) smallest = std::min(smallest, rows.size());
        per_stream = static_cast<std::size_t>(std::floor(config.data.fraction * static_cast<double>(smallest)));
        if (config.max_samples > 0) {
            const auto members = static_cast<SampleCount>(layout.groups.front().size());
            if (config.max_samples % members != 0) {
                throw std::invalid_argument("schedule.max_samples must be a multiple of the classes per phase");
            }
            const auto requested = static_cast<std::size_t>(config.max_samples / members);
            if (requested > smallest) throw std::invalid_argument("schedule.max_samples exceeds the smallest class");
            per_stream = requested;
        }
    } else {
        for (int t = 0; t < T; ++t) layout.groups.push_back({t});
        per_stream = static_cast<std::size_t>(std::floor(config.data.fraction * static_cast<double>(train.size())));
        if (config.max_samples > 0) {
            if (static_cast<std::size_t>(config.max_samples) > train.size()) {
                throw std::invalid_argument("schedule.max_samples exceeds the training set");
            }
            per_stream = static_cast<std::size_t>(config.max_samples);
        }
    }
    if (per_stream == 0) throw std::invalid_argument("data.fraction leaves no training samples");
    const auto group_size = static_cast<SampleCount>(per_stream * layout.groups.front().size());

    ScheduleKind kind = NoRehearsal{};
    if (joint) {
        kind = Joint{};
    } else if (T >= 2) {
        kind = fitted_schedule(schedule, FitSpec{T, group_size, config.min_proportion});
    }
    const PhasePlan plan = build_phase_plan(kind, T, group_size);
    plan.check_invariants(group_size);

    std::mt19937_64 subset_rng(derive_seed(seed, kSubsetStream));
    std::mt19937_64 batch_rng(derive_seed(seed, kBatchStream));
    ReplayBuffer buffer(derive_seed(seed, kBufferStream));

    std::vector<int> sizes{static_cast<int>(train.dim())};
    for (int l = 0; l < config.hidden_layers; ++l) sizes.push_back(config.width);
    sizes.push_back(classes);
    Learner learner(init_mlp(sizes, derive_seed(seed, kModelStream)), config.learning_rate, config.mitigation);

    const SampleSource train_source(train, scenario);
    const SampleSource test_source(data.test, scenario);

    SeedRun run;
    run.seed = seed;
    run.plan = plan;
    std::ostringstream manifest;
    scenario.write_manifest(manifest);
    run.scenario_manifest = manifest.str();

    const std::string tag = "[" + config.method_label() + " seed " + std::to_string(seed) + "]";
    const auto started = std::chrono::steady_clock::now();

    for (int t = 1; t <= T; ++t) {
        // Streams introduced now (all of them at phase 1 under Joint).
        for (int g = 1; g <= plan.groups(); ++g) {
            if (plan.intro_phase(g) != t) continue;
            for (int stream : layout.groups[static_cast<std::size_t>(g - 1)]) {
                std::vector<std::size_t> rows;
                if (class_il) {
                    rows = train.class_index[static_cast<std::size_t>(stream)];
                } else {
                    rows.resize(train.size());
                    std::iota(rows.begin(), rows.end(), std::size_t{0});
                }
                buffer.init_class(stream, random_subset(std::move(rows), per_stream, subset_rng), t);
            }
        }
        shrink_to_plan(buffer, t, plan, layout);
        buffer.record_phase(t);

        PhaseResult result;
        result.seed = seed;
        result.phase = t;

        if (!joint || t == 1) {
            const auto multiset = training_multiset(buffer, t, plan, layout);
            std::vector<TrainingSample> current, rehearsal;
            for (const auto& s : multiset) {
                (buffer.intro_phase(s.stream) < t ? rehearsal : current).push_back(s);
            }
            result.train_size = multiset.size();
            result.rehearsed = static_cast<SampleCount>(rehearsal.size());
            run.rehearsed_total += result.rehearsed;

            const int active_upto = joint ? T : t;
            PhaseData phase_data;
            phase_data.phase = t;
            phase_data.active = ClassMask(scenario.active_classes(active_upto, classes), classes);
            phase_data.reference = rehearsal;
            // A-GEM learns from the new data and uses the rehearsal samples only
            // as a gradient constraint.
            const bool agem = config.mitigation.kind == MitigationKind::Agem && !rehearsal.empty();
            phase_data.train = agem ? std::span<const TrainingSample>(current) : std::span<const TrainingSample>(multiset);
            // Joint training gets the iteration budget of all phases at once.
            const int steps = joint ? config.steps * T : config.steps;
            run_phase(learner, train_source, phase_data, steps, config.batch_size, batch_rng);
        }

        const EvalSet eval = eval_set_upto(scenario, data.test, t);
        const ClassMask active(scenario.active_classes(t, classes), classes);
        result.accuracy = evaluate(learner.model, test_source, eval, t, active);

        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        std::ostringstream line;
        line << tag << " phase " << t << "/" << T << " train=" << result.train_size
             << " rehearsed=" << result.rehearsed << " acc_all=" << format_accuracy(result.accuracy.all)
             << " acc_old=" << format_accuracy(result.accuracy.old) << " (" << std::fixed << std::setprecision(1)
             << seconds << "s)";
        log_line(log, line.str());
        run.phases.push_back(result);
    }
    run.buffer_audit = buffer.audit();
    return run;
}

// ---------------------------------------------------------------------------
// Aggregation

Stat mean_sd(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("mean of no values");
    Stat s;
    s.n = values.size();
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

std::vector<PhaseSummary> summarize(std::span<const SeedRun> runs, int phases) {
    std::vector<PhaseSummary> out;
    for (int t = 1; t <= phases; ++t) {
        std::vector<double> all, old, fresh;
        for (const auto& run : runs) {
            const auto it = std::find_if(run.phases.begin(), run.phases.end(),
                                         [t](const PhaseResult& r) { return r.phase == t; });
            if (it == run.phases.end()) throw std::logic_error("seed run is missing phase " + std::to_string(t));
            if (it->accuracy.all) all.push_back(*it->accuracy.all);
            if (it->accuracy.old) old.push_back(*it->accuracy.old);
            if (it->accuracy.fresh) fresh.push_back(*it->accuracy.fresh);
        }
        PhaseSummary s;
        s.phase = t;
        if (!all.empty()) s.all = mean_sd(all);
        if (!old.empty()) s.old = mean_sd(old);
        if (!fresh.empty()) s.fresh = mean_sd(fresh);
        out.push_back(s);
    }
    return out;
}

RunReport run_experiment(const ExperimentConfig& config, const Datasets& data, std::ostream* log) {
    config.validate();
    const std::size_t n = config.seeds.size();
    std::size_t workers = config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                             : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);

    std::vector<SeedRun> runs(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n && !failed; i = next++) {
                    try {
                        runs[i] = run_seed(config, data, config.seeds[i], log);
                    } catch (...) {
                        errors[i] = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i]) continue;
        try {
            std::rethrow_exception(errors[i]);
        } catch (const std::exception& e) {
            throw std::runtime_error("seed " + std::to_string(config.seeds[i]) + ": " + e.what());
        }
    }

    RunReport report;
    report.method = config.method_label();
    report.config = config;
    report.seeds = std::move(runs);
    report.summary = summarize(report.seeds, config.phases);
    return report;
}

RunReport run_experiment(const ExperimentConfig& config, std::ostream* log) {
    return run_experiment(config, load_datasets(config), log);
}

// ---------------------------------------------------------------------------
// Reports

std::vector<ResultRow> result_rows(const RunReport& report) {
    std::vector<ResultRow> rows;
    for (const auto& run : report.seeds) {
        for (const auto& p : run.phases) {
            rows.push_back({report.method, run.seed, p.phase, p.accuracy.all, p.accuracy.old, p.accuracy.fresh});
        }
    }
    return rows;
}

void write_results_csv(std::span<const ResultRow> rows, std::ostream& out, bool header) {
    if (header) out << "method,seed,phase,acc_all,acc_old,acc_new\n";
    for (const auto& r : rows) {
        out << r.method << ',' << r.seed << ',' << r.phase << ',' << format_accuracy(r.all) << ','
            << format_accuracy(r.old) << ',' << format_accuracy(r.fresh) << '\n';
    }
}

std::vector<ResultRow> read_results_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "method,seed,phase,acc_all,acc_old,acc_new") {
        throw std::invalid_argument("not a results CSV: expected header method,seed,phase,acc_all,acc_old,acc_new");
    }
    std::vector<ResultRow> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.emplace_back();
        if (fields.size() != 6) throw std::invalid_argument("results CSV line " + std::to_string(line_no) + ": 6 fields expected");
        try {
            ResultRow r;
            r.method = fields[0];
            r.seed = std::stoull(fields[1]);
            r.phase = std::stoi(fields[2]);
            r.all = parse_accuracy(fields[3]);
            r.old = parse_accuracy(fields[4]);
            r.fresh = parse_accuracy(fields[5]);
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw std::invalid_argument("results CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

void write_summary_table(const std::string& method, std::span<const PhaseSummary> summary, std::ostream& out) {
    const std::size_t seeds = summary.empty() || !summary.front().all ? 0 : summary.front().all->n;
    out << method << " (" << seeds << " seeds), mean (± SD) test accuracy after each phase\n";
    out << std::left << std::setw(7) << "phase" << std::setw(20) << "all" << std::setw(20) << "old" << "new\n";
    for (const auto& s : summary) {
        out << std::left << std::setw(7) << s.phase << std::setw(20) << format_stat(s.all) << std::setw(20)
            << format_stat(s.old) << format_stat(s.fresh) << '\n';
    }
    out << std::right;
}

void emit_report(const RunReport& report, const std::filesystem::path& out_dir, bool json) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

    const auto write_file = [&](const std::string& name, const auto& body) {
        const auto path = out_dir / name;
        std::ofstream out(path);
        ensure_written(out, path);
        body(out);
        out.flush();
        ensure_written(out, path);
    };

    const auto rows = result_rows(report);
    write_file("results.csv", [&](std::ostream& out) { write_results_csv(rows, out); });
    write_file("summary.txt", [&](std::ostream& out) { write_summary_table(report.method, report.summary, out); });
    write_file("summary.csv", [&](std::ostream& out) {
        out << "method,phase,n,all_mean,all_sd,old_mean,old_sd,new_mean,new_sd\n";
        out << std::fixed << std::setprecision(6);
        const auto cell = [&](const std::optional<Stat>& s) {
            if (s) {
                out << ',' << s->mean << ',' << s->sd;
            } else {
                out << ",NA,NA";
            }
        };
        for (const auto& s : report.summary) {
            out << report.method << ',' << s.phase << ',' << (s.all ? s.all->n : 0);
            cell(s.all);
            cell(s.old);
            cell(s.fresh);
            out << '\n';
        }
    });
    write_file("rehearsal.csv", [&](std::ostream& out) {
        out << "seed,phase,train_size,rehearsed\n";
        for (const auto& run : report.seeds) {
            for (const auto& p : run.phases) out << run.seed << ',' << p.phase << ',' << p.train_size << ',' << p.rehearsed << '\n';
        }
    });
    if (!report.seeds.empty()) {
        write_file("plan.csv", [&](std::ostream& out) { report.seeds.front().plan.write_csv(out); });
    }
    for (const auto& run : report.seeds) {
        const std::string suffix = "_seed" + std::to_string(run.seed);
        write_file("buffer" + suffix + ".csv", [&](std::ostream& out) {
            out << "class_id,phase,retained_count\n";
            for (const auto& r : run.buffer_audit) out << r.stream << ',' << r.phase << ',' << r.retained << '\n';
        });
        write_file("scenario" + suffix + ".txt", [&](std::ostream& out) { out << run.scenario_manifest; });
    }
    if (!json) return;

    nlohmann::json doc;
    doc["method"] = report.method;
    doc["config"] = report.config.to_key_values().values();
    doc["summary"] = nlohmann::json::array();
    for (const auto& s : report.summary) {
        doc["summary"].push_back(
            {{"phase", s.phase}, {"acc_all", stat_json(s.all)}, {"acc_old", stat_json(s.old)}, {"acc_new", stat_json(s.fresh)}});
    }
    doc["seeds"] = nlohmann::json::array();
    for (const auto& run : report.seeds) {
        nlohmann::json phases = nlohmann::json::array();
        for (const auto& p : run.phases) {
            phases.push_back({{"phase", p.phase},
                              {"acc_all", accuracy_json(p.accuracy.all)},
                              {"acc_old", accuracy_json(p.accuracy.old)},
                              {"acc_new", accuracy_json(p.accuracy.fresh)},
                              {"train_size", p.train_size},
                              {"rehearsed", p.rehearsed}});
        }
        doc["seeds"].push_back({{"seed", run.seed}, {"rehearsed_total", run.rehearsed_total}, {"phases", phases}});
    }
    write_file("report.json", [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

}  // namespace naturalcl
