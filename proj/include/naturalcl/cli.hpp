#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "naturalcl/schedule.hpp"

namespace naturalcl {

struct FitCommand {
    FitSpec spec;
};

struct PlanCommand {
    std::string kind;
    int phases = 0;
    SampleCount max_samples = 0;
    double min_proportion = 0.10;
    std::filesystem::path out;  // empty: stdout
};

struct RunCommand {
    std::filesystem::path config;
    std::filesystem::path out = "results";
    std::optional<std::vector<std::uint64_t>> seeds;
    std::vector<std::string> overrides;  // key=value
    bool quiet = false;
};

struct ReportCommand {
    std::filesystem::path csv;
};

struct HelpCommand {
    std::string text;
};

using Command = std::variant<FitCommand, PlanCommand, RunCommand, ReportCommand, HelpCommand>;

/// Bad or missing arguments; `usage` holds the text to show.
class UsageError : public std::runtime_error {
public:
    UsageError(const std::string& message, std::string usage)
        : std::runtime_error(message), usage_(std::move(usage)) {}
    [[nodiscard]] const std::string& usage() const { return usage_; }

private:
    std::string usage_;
};

/// Arguments after the program name. Throws UsageError.
Command parse_args(std::span<const std::string> args);

/// Executes a command; returns the process exit code.
int dispatch(const Command& command, std::ostream& out, std::ostream& err);

/// parse_args + dispatch with diagnostics on `err`.
int run_cli(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace naturalcl
