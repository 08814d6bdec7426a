#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "naturalcl/mitigation.hpp"
#include "naturalcl/schedule.hpp"

namespace naturalcl {

/// Flat `section.key = value` text. `#` starts a comment; blank lines are
/// ignored; later assignments override earlier ones.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>");
    static KeyValueConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    /// Applies a `key=value` override string.
    void apply_override(const std::string& assignment);

    [[nodiscard]] bool has(const std::string& key) const { return values_.count(key) != 0; }
    [[nodiscard]] std::string get(const std::string& key, const std::string& fallback = "") const;
    [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

    void write(std::ostream& out) const;

private:
    std::map<std::string, std::string> values_;
};

enum class ScenarioKind { ClassIncremental, DomainIncremental };
enum class DataSource { Mnist, Synthetic, FeatureTable };

struct DataConfig {
    DataSource source = DataSource::Mnist;
    std::filesystem::path dir;  // falls back to $NATURALCL_DATA_DIR
    std::filesystem::path train_images, train_labels, test_images, test_labels;
    std::filesystem::path train_csv, test_csv;
    double fraction = 1.0;  // share of each class's training data used
    int pad_to = 32;        // Domain-IL MNIST padding; 0 disables
};

struct SyntheticConfig {
    int classes = 10;
    int dim = 32;
    int train_per_class = 300;
    int test_per_class = 100;
    double separation = 3.0;
    std::uint64_t seed = 7;
};

struct ExperimentConfig {
    std::string name = "experiment";
    std::string method;  // report label; derived from schedule and mitigation when empty

    ScenarioKind scenario = ScenarioKind::ClassIncremental;
    int phases = 5;

    std::string schedule = "powerlaw";
    double min_proportion = 0.10;
    SampleCount max_samples = 0;  // 0: classes per group x per-class cap

    MitigationConfig mitigation;

    int hidden_layers = 2;
    int width = 400;

    int batch_size = 128;
    int steps = 2000;  // per phase; joint training runs phases x steps in one event
    double learning_rate = 1e-3;

    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    int threads = 0;  // 0: one per hardware thread

    DataConfig data;
    SyntheticConfig synthetic;

    /// Throws std::invalid_argument naming the offending key.
    void validate() const;

    [[nodiscard]] std::string method_label() const;

    static ExperimentConfig from_key_values(const KeyValueConfig& kv);
    [[nodiscard]] KeyValueConfig to_key_values() const;
};

/// "1,2,3" -> {1, 2, 3}
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace naturalcl
