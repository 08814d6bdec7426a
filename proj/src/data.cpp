#include "naturalcl/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace naturalcl {

namespace {

constexpr std::uint32_t kIdxImageMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

std::uint32_t read_be32(std::istream& in, const std::filesystem::path& path) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4)) {
        throw std::runtime_error("truncated IDX header in " + path.string());
    }
    return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

void write_be32(std::ostream& out, std::uint32_t v) {
    const std::array<char, 4> b{static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                                static_cast<char>(v)};
    out.write(b.data(), 4);
}

std::ifstream open_binary(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return in;
}

}  // namespace

void Dataset::index_classes(int classes) {
    int top = 0;
    for (int label : labels) top = std::max(top, label + 1);
    num_classes = classes > 0 ? classes : top;
    class_index.assign(static_cast<std::size_t>(num_classes), {});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw std::invalid_argument("label " + std::to_string(labels[i]) + " outside [0, " +
                                        std::to_string(num_classes) + ")");
        }
        class_index[static_cast<std::size_t>(labels[i])].push_back(i);
    }
}

void Dataset::validate(bool require_all_classes) const {
    if (static_cast<std::size_t>(features.rows()) != labels.size()) {
        throw std::invalid_argument(name + ": feature rows and labels differ in count");
    }
    if (static_cast<int>(class_index.size()) != num_classes) {
        throw std::invalid_argument(name + ": class index not built");
    }
    for (int label : labels) {
        if (label < 0 || label >= num_classes) throw std::invalid_argument(name + ": label out of range");
    }
    if (require_all_classes) {
        for (int c = 0; c < num_classes; ++c) {
            if (class_index[static_cast<std::size_t>(c)].empty()) {
                throw std::invalid_argument(name + ": class " + std::to_string(c) + " has no samples");
            }
        }
    }
    if (!features.allFinite()) throw std::invalid_argument(name + ": non-finite feature value");
}

Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    auto images = open_binary(images_path);
    auto labels = open_binary(labels_path);

    if (const auto magic = read_be32(images, images_path); magic != kIdxImageMagic) {
        std::ostringstream msg;
        msg << "bad IDX image magic 0x" << std::hex << magic << " in " << images_path.string();
        throw std::runtime_error(msg.str());
    }
    const std::uint32_t n = read_be32(images, images_path);
    const std::uint32_t rows = read_be32(images, images_path);
    const std::uint32_t cols = read_be32(images, images_path);

    if (const auto magic = read_be32(labels, labels_path); magic != kIdxLabelMagic) {
        std::ostringstream msg;
        msg << "bad IDX label magic 0x" << std::hex << magic << " in " << labels_path.string();
        throw std::runtime_error(msg.str());
    }
    const std::uint32_t n_labels = read_be32(labels, labels_path);
    if (n != n_labels) {
        throw std::runtime_error("IDX count mismatch: " + std::to_string(n) + " images vs " +
                                 std::to_string(n_labels) + " labels");
    }

    const std::size_t d = static_cast<std::size_t>(rows) * cols;
    std::vector<unsigned char> pixels(static_cast<std::size_t>(n) * d);
    if (!images.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
        throw std::runtime_error("truncated IDX image data in " + images_path.string());
    }
    std::vector<unsigned char> raw_labels(n);
    if (!labels.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(n))) {
        throw std::runtime_error("truncated IDX label data in " + labels_path.string());
    }

    Dataset out;
    out.name = images_path.filename().string();
    out.image_rows = static_cast<int>(rows);
    out.image_cols = static_cast<int>(cols);
    out.features.resize(n, static_cast<Index>(d));
    float* dst = out.features.data();
    for (std::size_t i = 0; i < pixels.size(); ++i) dst[i] = static_cast<float>(pixels[i]) / 255.0f;
    out.labels.assign(raw_labels.begin(), raw_labels.end());
    out.index_classes();
    out.validate(false);
    return out;
}

void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path) {
    const auto n = static_cast<std::uint32_t>(dataset.size());
    std::uint32_t rows = static_cast<std::uint32_t>(dataset.image_rows);
    std::uint32_t cols = static_cast<std::uint32_t>(dataset.image_cols);
    if (static_cast<Index>(rows) * cols != dataset.dim()) {
        rows = 1;
        cols = static_cast<std::uint32_t>(dataset.dim());
    }

    std::ofstream images(images_path, std::ios::binary);
    std::ofstream labels(labels_path, std::ios::binary);
    if (!images || !labels) throw std::runtime_error("cannot write IDX files at " + images_path.string());

    write_be32(images, kIdxImageMagic);
    write_be32(images, n);
    write_be32(images, rows);
    write_be32(images, cols);
    const float* src = dataset.features.data();
    std::vector<char> pixels(static_cast<std::size_t>(dataset.features.size()));
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const float v = std::clamp(std::round(src[i] * 255.0f), 0.0f, 255.0f);
        pixels[i] = static_cast<char>(static_cast<unsigned char>(v));
    }
    images.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));

    write_be32(labels, kIdxLabelMagic);
    write_be32(labels, n);
    for (int label : dataset.labels) labels.put(static_cast<char>(static_cast<unsigned char>(label)));
    if (!images || !labels) throw std::runtime_error("failed writing IDX files at " + images_path.string());
}

Dataset synth_gaussian(int classes, int dim, int per_class, double separation, std::uint64_t seed) {
    if (classes < 1 || dim < 1 || per_class < 1) throw std::invalid_argument("synth_gaussian: sizes must be >= 1");
    if (!(separation > 0.0)) throw std::invalid_argument("synth_gaussian: separation must be > 0");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Axis directions while they last, then random unit vectors.
    Matrix<double> directions = Matrix<double>::Zero(classes, dim);
    for (int c = 0; c < classes; ++c) {
        if (c < dim) {
            directions(c, c) = 1.0;
        } else {
            for (int j = 0; j < dim; ++j) directions(c, j) = normal(rng);
            directions.row(c).normalize();
        }
    }

    const Index n = static_cast<Index>(classes) * per_class;
    Matrix<double> raw(n, dim);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            const Index row = static_cast<Index>(c) * per_class + i;
            for (int j = 0; j < dim; ++j) raw(row, j) = separation * directions(c, j) + normal(rng);
            labels[static_cast<std::size_t>(row)] = c;
        }
    }

    const double lo = raw.minCoeff();
    const double span = raw.maxCoeff() - lo;
    Dataset out;
    out.name = "synthetic";
    if (span > 0.0) {
        out.features = ((raw.array() - lo) / span).cast<float>().matrix();
    } else {
        out.features = Matrix<float>::Zero(n, dim);
    }
    out.labels = std::move(labels);
    out.index_classes(classes);
    out.validate();
    return out;
}

std::pair<Dataset, Dataset> split_per_class(const Dataset& dataset, std::size_t test_per_class) {
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> test_rows;
    for (const auto& rows : dataset.class_index) {
        if (rows.size() <= test_per_class) throw std::invalid_argument("split_per_class: class too small");
        test_rows.insert(test_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(test_per_class));
        train_rows.insert(train_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(test_per_class), rows.end());
    }
    std::sort(train_rows.begin(), train_rows.end());
    std::sort(test_rows.begin(), test_rows.end());
    Dataset train = subset(dataset, train_rows);
    Dataset test = subset(dataset, test_rows);
    train.name = dataset.name + "-train";
    test.name = dataset.name + "-test";
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------

PixelPermutation::PixelPermutation(std::vector<int> perm) : perm_(std::move(perm)) {
    std::vector<char> seen(perm_.size(), 0);
    for (int target : perm_) {
        if (target < 0 || static_cast<std::size_t>(target) >= perm_.size() || seen[static_cast<std::size_t>(target)]) {
            throw std::invalid_argument("pixel permutation is not a bijection");
        }
        seen[static_cast<std::size_t>(target)] = 1;
    }
}

PixelPermutation PixelPermutation::identity(int dim) {
    std::vector<int> perm(static_cast<std::size_t>(dim));
    std::iota(perm.begin(), perm.end(), 0);
    return PixelPermutation(std::move(perm));
}

PixelPermutation PixelPermutation::random(int dim, std::uint64_t seed) {
    std::vector<int> perm(static_cast<std::size_t>(dim));
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = perm.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(perm[i - 1], perm[pick(rng)]);
    }
    return PixelPermutation(std::move(perm));
}

bool PixelPermutation::is_identity() const {
    for (std::size_t j = 0; j < perm_.size(); ++j) {
        if (perm_[j] != static_cast<int>(j)) return false;
    }
    return true;
}

PixelPermutation PixelPermutation::inverse() const {
    std::vector<int> inv(perm_.size());
    for (std::size_t j = 0; j < perm_.size(); ++j) inv[static_cast<std::size_t>(perm_[j])] = static_cast<int>(j);
    return PixelPermutation(std::move(inv));
}

void PixelPermutation::apply_to_rows(Matrix<float>& rows) const {
    if (rows.cols() != size()) {
        throw std::invalid_argument("permutation length " + std::to_string(size()) + " does not match width " +
                                    std::to_string(rows.cols()));
    }
    if (is_identity()) return;
    std::vector<float> scratch(perm_.size());
    for (Index r = 0; r < rows.rows(); ++r) {
        float* row = rows.row(r).data();
        for (std::size_t j = 0; j < perm_.size(); ++j) scratch[j] = row[perm_[j]];
        std::copy(scratch.begin(), scratch.end(), row);
    }
}

Dataset apply_permutation(const Dataset& dataset, const PixelPermutation& perm) {
    if (perm.size() != dataset.dim()) {
        throw std::invalid_argument("permutation length " + std::to_string(perm.size()) +
                                    " does not match feature width " + std::to_string(dataset.dim()));
    }
    Dataset out = dataset;
    perm.apply_to_rows(out.features);
    return out;
}

Dataset pad_images(const Dataset& dataset, int target_rows, int target_cols) {
    const int rows = dataset.image_rows;
    const int cols = dataset.image_cols;
    if (rows <= 0 || cols <= 0 || static_cast<Index>(rows) * cols != dataset.dim()) {
        throw std::invalid_argument("pad_images: dataset rows are not images");
    }
    if (target_rows < rows || target_cols < cols) throw std::invalid_argument("pad_images: target smaller than image");

    const int top = (target_rows - rows) / 2;
    const int left = (target_cols - cols) / 2;
    Dataset out;
    out.name = dataset.name;
    out.labels = dataset.labels;
    out.num_classes = dataset.num_classes;
    out.class_index = dataset.class_index;
    out.image_rows = target_rows;
    out.image_cols = target_cols;
    out.features = Matrix<float>::Zero(dataset.features.rows(), static_cast<Index>(target_rows) * target_cols);
    for (Index i = 0; i < dataset.features.rows(); ++i) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                out.features(i, static_cast<Index>(r + top) * target_cols + c + left) =
                    dataset.features(i, static_cast<Index>(r) * cols + c);
            }
        }
    }
    return out;
}

Dataset load_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());

    std::vector<int> labels;
    std::vector<float> values;
    Index width = -1;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1 && line.rfind("label", 0) == 0) continue;

        std::istringstream fields(line);
        std::string cell;
        if (!std::getline(fields, cell, ',')) continue;
        labels.push_back(std::stoi(cell));
        Index count = 0;
        while (std::getline(fields, cell, ',')) {
            values.push_back(std::stof(cell));
            ++count;
        }
        if (width < 0) width = count;
        if (count != width || count == 0) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " +
                                     std::to_string(width) + " features, got " + std::to_string(count));
        }
    }
    if (labels.empty()) throw std::runtime_error("no rows in feature table " + path.string());

    Dataset out;
    out.name = path.filename().string();
    out.features = Eigen::Map<const Matrix<float>>(values.data(), static_cast<Index>(labels.size()), width);
    out.labels = std::move(labels);
    out.index_classes();
    out.validate(false);
    return out;
}

void write_feature_csv(const Dataset& dataset, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(9);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        out << dataset.labels[i];
        for (Index j = 0; j < dataset.dim(); ++j) out << ',' << dataset.features(static_cast<Index>(i), j);
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Matrix<float> gather_rows(const Dataset& dataset, std::span<const std::size_t> rows) {
    Matrix<float> batch(static_cast<Index>(rows.size()), dataset.dim());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        batch.row(static_cast<Index>(i)) = dataset.features.row(static_cast<Index>(rows[i]));
    }
    return batch;
}

Dataset subset(const Dataset& dataset, std::span<const std::size_t> rows) {
    Dataset out;
    out.name = dataset.name;
    out.image_rows = dataset.image_rows;
    out.image_cols = dataset.image_cols;
    out.features = gather_rows(dataset, rows);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) out.labels.push_back(dataset.labels.at(r));
    out.index_classes(dataset.num_classes);
    return out;
}

}  // namespace naturalcl
