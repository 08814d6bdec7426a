#include "naturalcl/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace naturalcl {

namespace {

std::string trim(const std::string& s) {
    const auto begin = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
    const auto end = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
    return begin < end ? std::string(begin, end) : std::string();
}

template <typename T>
T parse_number(const KeyValueConfig& kv, const std::string& key, T fallback) {
    if (!kv.has(key)) return fallback;
    const std::string text = kv.get(key);
    std::istringstream in(text);
    T value{};
    if (!(in >> value) || !(in >> std::ws).eof()) {
        throw std::invalid_argument("config key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
}

std::string scenario_name(ScenarioKind kind) {
    return kind == ScenarioKind::ClassIncremental ? "class_il" : "domain_il";
}

std::string source_name(DataSource source) {
    switch (source) {
        case DataSource::Mnist: return "mnist";
        case DataSource::Synthetic: return "synthetic";
        case DataSource::FeatureTable: return "features";
    }
    return "mnist";
}

std::string format_double(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& origin) {
    KeyValueConfig config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw std::invalid_argument(origin + ":" + std::to_string(line_no) + ": empty key");
        config.values_[key] = trim(line.substr(eq + 1));
    }
    return config;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    return parse(in, path.string());
}

void KeyValueConfig::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
        throw std::invalid_argument("override '" + assignment + "' is not key=value");
    }
    values_[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

std::string KeyValueConfig::get(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

void KeyValueConfig::write(std::ostream& out) const {
    for (const auto& [key, value] : values_) out << key << " = " << value << '\n';
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (!std::all_of(item.begin(), item.end(), [](unsigned char c) { return std::isdigit(c); })) {
            throw std::invalid_argument("seed '" + item + "' is not a non-negative integer");
        }
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw std::invalid_argument("seed list is empty");
    return seeds;
}

void ExperimentConfig::validate() const {
    if (phases < 1) throw std::invalid_argument("scenario.phases must be >= 1");
    if (seeds.empty()) throw std::invalid_argument("run.seeds must not be empty");
    if (steps < 1) throw std::invalid_argument("train.steps must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be > 0");
    if (hidden_layers < 1) throw std::invalid_argument("model.hidden_layers must be >= 1");
    if (width < 1) throw std::invalid_argument("model.width must be >= 1");
    if (!(data.fraction > 0.0 && data.fraction <= 1.0)) throw std::invalid_argument("data.fraction must be in (0, 1]");
    if (!(min_proportion > 0.0 && min_proportion <= 1.0)) {
        throw std::invalid_argument("schedule.min_proportion must be in (0, 1]");
    }
    if (max_samples < 0) throw std::invalid_argument("schedule.max_samples must be >= 0");
    if (threads < 0) throw std::invalid_argument("run.threads must be >= 0");
    if (mitigation.lambda < 0.0 || mitigation.c < 0.0 || mitigation.alpha < 0.0) {
        throw std::invalid_argument("mitigation strengths must be >= 0");
    }
    if (!(mitigation.xi > 0.0)) throw std::invalid_argument("mitigation.xi must be > 0");
    if (!(mitigation.tau > 0.0)) throw std::invalid_argument("mitigation.tau must be > 0");
    canonical_schedule_name(schedule);
    if (data.source == DataSource::Synthetic) {
        if (synthetic.classes < 1 || synthetic.dim < 1 || synthetic.train_per_class < 1 ||
            synthetic.test_per_class < 1 || !(synthetic.separation > 0.0)) {
            throw std::invalid_argument("synthetic.* sizes must be >= 1 and separation > 0");
        }
    }
}

std::string ExperimentConfig::method_label() const {
    if (!method.empty()) return method;
    const std::string kind = canonical_schedule_name(schedule);
    const MitigationKind mit = mitigation.kind;

    std::string rehearsal;
    if (kind == "powerlaw") rehearsal = "PL";
    if (kind == "exponential") rehearsal = "Exp";
    if (kind == "uniform") rehearsal = mit == MitigationKind::Agem ? "A-GEM" : "ER";
    if (kind == "joint") rehearsal = "UB";

    std::string regularizer;
    if (mit == MitigationKind::Ewc) regularizer = "EWC";
    if (mit == MitigationKind::Si) regularizer = "SI";
    if (mit == MitigationKind::Lwf) regularizer = "LwF";
    if (mit == MitigationKind::Agem && kind != "uniform") regularizer = "A-GEM";

    if (kind == "none") return regularizer.empty() ? "LB" : regularizer;
    return regularizer.empty() ? rehearsal : rehearsal + "+" + regularizer;
}

ExperimentConfig ExperimentConfig::from_key_values(const KeyValueConfig& kv) {
    static const std::vector<std::string> known = {
        "experiment.name",       "experiment.method",       "scenario.kind",        "scenario.phases",
        "schedule.kind",         "schedule.min_proportion", "schedule.max_samples", "mitigation.kind",
        "mitigation.lambda",     "mitigation.c",            "mitigation.xi",        "mitigation.alpha",
        "mitigation.tau",        "model.hidden_layers",     "model.width",          "train.batch_size",
        "train.steps",           "train.learning_rate",     "run.seeds",            "run.threads",
        "data.source",           "data.dir",                "data.train_images",    "data.train_labels",
        "data.test_images",      "data.test_labels",        "data.train_csv",       "data.test_csv",
        "data.fraction",         "data.pad_to",             "synthetic.classes",    "synthetic.dim",
        "synthetic.train_per_class", "synthetic.test_per_class", "synthetic.separation", "synthetic.seed",
    };
    for (const auto& [key, _] : kv.values()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("unknown config key '" + key + "'");
        }
    }

    ExperimentConfig c;
    c.name = kv.get("experiment.name", c.name);
    c.method = kv.get("experiment.method", c.method);

    const std::string scenario = kv.get("scenario.kind", "class_il");
    if (scenario == "class_il") {
        c.scenario = ScenarioKind::ClassIncremental;
    } else if (scenario == "domain_il") {
        c.scenario = ScenarioKind::DomainIncremental;
    } else {
        throw std::invalid_argument("scenario.kind must be class_il or domain_il, got '" + scenario + "'");
    }
    c.phases = parse_number(kv, "scenario.phases", c.phases);

    c.schedule = canonical_schedule_name(kv.get("schedule.kind", c.schedule));
    c.min_proportion = parse_number(kv, "schedule.min_proportion", c.min_proportion);
    c.max_samples = parse_number(kv, "schedule.max_samples", c.max_samples);

    c.mitigation.kind = parse_mitigation(kv.get("mitigation.kind", "none"));
    c.mitigation.lambda = parse_number(kv, "mitigation.lambda", c.mitigation.lambda);
    c.mitigation.c = parse_number(kv, "mitigation.c", c.mitigation.c);
    c.mitigation.xi = parse_number(kv, "mitigation.xi", c.mitigation.xi);
    c.mitigation.alpha = parse_number(kv, "mitigation.alpha", c.mitigation.alpha);
    c.mitigation.tau = parse_number(kv, "mitigation.tau", c.mitigation.tau);

    c.hidden_layers = parse_number(kv, "model.hidden_layers", c.hidden_layers);
    c.width = parse_number(kv, "model.width", c.width);

    c.batch_size = parse_number(kv, "train.batch_size", c.batch_size);
    c.steps = parse_number(kv, "train.steps", c.steps);
    c.learning_rate = parse_number(kv, "train.learning_rate", c.learning_rate);

    if (kv.has("run.seeds")) c.seeds = parse_seed_list(kv.get("run.seeds"));
    c.threads = parse_number(kv, "run.threads", c.threads);

    const std::string source = kv.get("data.source", "mnist");
    if (source == "mnist") {
        c.data.source = DataSource::Mnist;
    } else if (source == "synthetic") {
        c.data.source = DataSource::Synthetic;
    } else if (source == "features") {
        c.data.source = DataSource::FeatureTable;
    } else {
        throw std::invalid_argument("data.source must be mnist, synthetic or features, got '" + source + "'");
    }
    c.data.dir = kv.get("data.dir");
    c.data.train_images = kv.get("data.train_images");
    c.data.train_labels = kv.get("data.train_labels");
    c.data.test_images = kv.get("data.test_images");
    c.data.test_labels = kv.get("data.test_labels");
    c.data.train_csv = kv.get("data.train_csv");
    c.data.test_csv = kv.get("data.test_csv");
    c.data.fraction = parse_number(kv, "data.fraction", c.data.fraction);
    c.data.pad_to = parse_number(kv, "data.pad_to", c.data.pad_to);

    c.synthetic.classes = parse_number(kv, "synthetic.classes", c.synthetic.classes);
    c.synthetic.dim = parse_number(kv, "synthetic.dim", c.synthetic.dim);
    c.synthetic.train_per_class = parse_number(kv, "synthetic.train_per_class", c.synthetic.train_per_class);
    c.synthetic.test_per_class = parse_number(kv, "synthetic.test_per_class", c.synthetic.test_per_class);
    c.synthetic.separation = parse_number(kv, "synthetic.separation", c.synthetic.separation);
    c.synthetic.seed = parse_number(kv, "synthetic.seed", c.synthetic.seed);

    c.validate();
    return c;
}

KeyValueConfig ExperimentConfig::to_key_values() const {
    KeyValueConfig kv;
    kv.set("experiment.name", name);
    kv.set("experiment.method", method_label());
    kv.set("scenario.kind", scenario_name(scenario));
    kv.set("scenario.phases", std::to_string(phases));
    kv.set("schedule.kind", schedule);
    kv.set("schedule.min_proportion", format_double(min_proportion));
    kv.set("schedule.max_samples", std::to_string(max_samples));
    kv.set("mitigation.kind", mitigation_name(mitigation.kind));
    kv.set("mitigation.lambda", format_double(mitigation.lambda));
    kv.set("mitigation.c", format_double(mitigation.c));
    kv.set("mitigation.xi", format_double(mitigation.xi));
    kv.set("mitigation.alpha", format_double(mitigation.alpha));
    kv.set("mitigation.tau", format_double(mitigation.tau));
    kv.set("model.hidden_layers", std::to_string(hidden_layers));
    kv.set("model.width", std::to_string(width));
    kv.set("train.batch_size", std::to_string(batch_size));
    kv.set("train.steps", std::to_string(steps));
    kv.set("train.learning_rate", format_double(learning_rate));
    std::string seed_text;
    for (std::size_t i = 0; i < seeds.size(); ++i) seed_text += (i ? "," : "") + std::to_string(seeds[i]);
    kv.set("run.seeds", seed_text);
    kv.set("run.threads", std::to_string(threads));
    kv.set("data.source", source_name(data.source));
    kv.set("data.dir", data.dir.string());
    kv.set("data.fraction", format_double(data.fraction));
    kv.set("data.pad_to", std::to_string(data.pad_to));
    for (const auto& [key, path] : {std::pair{"data.train_images", &data.train_images},
                                    std::pair{"data.train_labels", &data.train_labels},
                                    std::pair{"data.test_images", &data.test_images},
                                    std::pair{"data.test_labels", &data.test_labels},
                                    std::pair{"data.train_csv", &data.train_csv},
                                    std::pair{"data.test_csv", &data.test_csv}}) {
        if (!path->empty()) kv.set(key, path->string());
    }
    if (data.source == DataSource::Synthetic) {
        kv.set("synthetic.classes", std::to_string(synthetic.classes));
        kv.set("synthetic.dim", std::to_string(synthetic.dim));
        kv.set("synthetic.train_per_class", std::to_string(synthetic.train_per_class));
        kv.set("synthetic.test_per_class", std::to_string(synthetic.test_per_class));
        kv.set("synthetic.separation", format_double(synthetic.separation));
        kv.set("synthetic.seed", std::to_string(synthetic.seed));
    }
    return kv;
}

}  // namespace naturalcl
