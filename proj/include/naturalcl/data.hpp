#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "naturalcl/linalg.hpp"

namespace naturalcl {

/// Immutable labelled feature table. Features are n x d, row-major float32.
struct Dataset {
    std::string name;
    Matrix<float> features;
    std::vector<int> labels;
    int num_classes = 0;
    std::vector<std::vector<std::size_t>> class_index;  // rows of each class, ascending
    int image_rows = 0;  // 0 when the rows are not images
    int image_cols = 0;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
    [[nodiscard]] Index dim() const { return features.cols(); }

    /// Rebuilds class_index and num_classes from labels. When `num_classes`
    /// is 0 it becomes max(label) + 1.
    void index_classes(int num_classes = 0);

    /// Throws std::invalid_argument on out-of-range labels, empty classes,
    /// non-finite features or mismatched sizes.
    void validate(bool require_all_classes = true) const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled by 1/255. Throws std::runtime_error on bad magic,
/// truncation or count mismatch.
Dataset load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes features (multiplied by 255 and rounded) and labels as IDX files.
void write_idx(const Dataset& dataset, const std::filesystem::path& images_path,
               const std::filesystem::path& labels_path);

/// C isotropic Gaussian blobs (sigma = 1) centred at separation * u_c, with
/// u_c distinct unit directions, rescaled jointly into [0, 1].
Dataset synth_gaussian(int classes, int dim, int per_class, double separation, std::uint64_t seed);

/// Splits off the first `test_per_class` rows of each class as a test set.
std::pair<Dataset, Dataset> split_per_class(const Dataset& dataset, std::size_t test_per_class);

/// Bijection on feature positions: output[j] = input[perm[j]].
class PixelPermutation {
public:
    PixelPermutation() = default;
    explicit PixelPermutation(std::vector<int> perm);

    static PixelPermutation identity(int dim);
    static PixelPermutation random(int dim, std::uint64_t seed);

    [[nodiscard]] int size() const { return static_cast<int>(perm_.size()); }
    [[nodiscard]] bool is_identity() const;
    [[nodiscard]] const std::vector<int>& map() const { return perm_; }
    [[nodiscard]] PixelPermutation inverse() const;

    /// Reorders the columns of `rows` in place.
    void apply_to_rows(Matrix<float>& rows) const;

    friend bool operator==(const PixelPermutation&, const PixelPermutation&) = default;

private:
    std::vector<int> perm_;
};

Dataset apply_permutation(const Dataset& dataset, const PixelPermutation& perm);

/// Zero-pads image rows symmetrically to target_rows x target_cols.
Dataset pad_images(const Dataset& dataset, int target_rows, int target_cols);

/// Feature table: one row per sample, `label,f_1,...,f_d`. An optional header
/// line starting with "label" is skipped. Features must be finite.
Dataset load_feature_csv(const std::filesystem::path& path);
void write_feature_csv(const Dataset& dataset, const std::filesystem::path& path);

/// Rows of a dataset gathered into a dense batch.
Matrix<float> gather_rows(const Dataset& dataset, std::span<const std::size_t> rows);

/// Keeps `rows` (in the given order) as a new dataset.
Dataset subset(const Dataset& dataset, std::span<const std::size_t> rows);

}  // namespace naturalcl
