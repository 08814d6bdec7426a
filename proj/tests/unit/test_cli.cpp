#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "naturalcl/cli.hpp"

using namespace naturalcl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("naturalcl_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("parse fit") {
    const std::vector<std::string> args{"fit", "--phases", "10", "--max", "5000", "--min-prop", "0.10"};
    const Command cmd = parse_args(args);
    REQUIRE(std::holds_alternative<FitCommand>(cmd));
    const auto& spec = std::get<FitCommand>(cmd).spec;
    CHECK(spec.phases == 10);
    CHECK(spec.max_samples == 5000);
    CHECK(spec.min_proportion == 0.10);
}

TEST_CASE("usage errors") {
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{}), UsageError);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"fit", "--phases", "10"}), UsageError);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"fit", "--phases", "1", "--max", "5", "--min-prop", "0.1"}),
                    UsageError);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"plan", "--kind", "zigzag", "--phases", "3", "--max", "9"}),
                    UsageError);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"run", "--config", "/nonexistent.cfg"}), UsageError);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"report"}), UsageError);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"dance"}), UsageError);
    CHECK_THROWS_AS(parse_args(std::vector<std::string>{"fit", "--bogus"}), UsageError);

    const auto empty = cli({});
    CHECK(empty.code != 0);
    CHECK(empty.err.find("Usage") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
    const auto r = cli({"plan", "--help"});
    CHECK(r.code == 0);
    CHECK(r.out.find("--kind") != std::string::npos);
}

TEST_CASE("fit prints the fitted constants") {
    const auto r = cli({"fit", "--phases", "10", "--max", "5000", "--min-prop", "0.10"});
    CHECK(r.code == 0);
    CHECK(r.out.find("x^(-1.000000)") != std::string::npos);
    CHECK(r.out.find("exponential  f(x) = 801") != std::string::npos);
}

TEST_CASE("plan CSV is parseable by report") {
    TempDir dir;
    const auto plan = cli({"plan", "--kind", "exp", "--phases", "6", "--max", "900", "--out", (dir.path / "p.csv").string()});
    CHECK(plan.code == 0);
    const auto report = cli({"report", (dir.path / "p.csv").string()});
    CHECK(report.code == 0);
    CHECK(report.out.find("rehearsed samples:") != std::string::npos);

    const auto stdout_plan = cli({"plan", "--kind", "powerlaw", "--phases", "10", "--max", "10000"});
    CHECK(stdout_plan.out.find("10,1000,1111,1250,1428,1666,2000,2500,3333,5000,10000\n") != std::string::npos);
    const auto single = cli({"plan", "--kind", "powerlaw", "--phases", "1", "--max", "10"});
    CHECK(single.out == "phase,group_1\n1,10\n");
}

TEST_CASE("run then report") {
    TempDir dir;
    {
        std::ofstream cfg(dir.path / "tiny.cfg");
        cfg << "scenario.phases = 2\n"
               "data.source = synthetic\n"
               "synthetic.classes = 4\n"
               "synthetic.dim = 6\n"
               "synthetic.train_per_class = 40\n"
               "synthetic.test_per_class = 10\n"
               "model.hidden_layers = 1\n"
               "model.width = 8\n"
               "train.steps = 5\n"
               "train.batch_size = 8\n"
               "run.seeds = 1\n";
    }
    const auto out = dir.path / "out";
    const auto run = cli({"run", "--config", (dir.path / "tiny.cfg").string(), "--out", out.string(), "--seed-list",
                          "3,4", "--set", "schedule.kind=uniform", "--quiet"});
    CHECK(run.code == 0);
    CHECK(run.err.empty());
    CHECK(fs::exists(out / "buffer_seed4.csv"));

    const auto report = cli({"report", (out / "results.csv").string()});
    CHECK(report.code == 0);
    CHECK(report.out.find("ER (2 seeds)") != std::string::npos);

    const auto bad = cli({"run", "--config", (dir.path / "tiny.cfg").string(), "--set", "train.steps=0"});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("train.steps") != std::string::npos);
}
