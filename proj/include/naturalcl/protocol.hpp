#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <variant>
#include <vector>

#include "naturalcl/data.hpp"

namespace naturalcl {

/// New classes each phase; `groups[t - 1]` are the classes introduced in phase t.
struct ClassIncremental {
    std::vector<std::vector<int>> groups;
};

/// Same label space every phase; phase t shows inputs through `perms[t - 1]`.
struct DomainIncremental {
    std::vector<PixelPermutation> perms;
    std::vector<std::uint64_t> perm_seeds;  // 0 marks the identity
};

class Scenario {
public:
    using Variant = std::variant<ClassIncremental, DomainIncremental>;

    explicit Scenario(Variant variant);

    [[nodiscard]] int phases() const;
    [[nodiscard]] bool is_class_incremental() const { return std::holds_alternative<ClassIncremental>(variant_); }
    [[nodiscard]] const ClassIncremental& class_il() const { return std::get<ClassIncremental>(variant_); }
    [[nodiscard]] const DomainIncremental& domain_il() const { return std::get<DomainIncremental>(variant_); }

    /// Output units that may be predicted after `phase` has been introduced.
    /// For Domain-IL this is every class of the dataset.
    [[nodiscard]] std::vector<int> active_classes(int phase, int num_classes) const;

    /// Text manifest, one line per phase: class ids or permutation seed.
    void write_manifest(std::ostream& out) const;

private:
    Variant variant_;
};

/// Seeded random partition of n_classes into n_phases equal groups.
Scenario make_class_il(int n_classes, int n_phases, std::uint64_t seed);

/// n_phases permutations of width dim; the first is the identity.
Scenario make_domain_il(int n_phases, int dim, std::uint64_t seed);

/// Test rows visible after a phase, each tagged with the phase that
/// introduced it (its class group, or its permutation in Domain-IL).
struct EvalSet {
    std::vector<std::size_t> rows;
    std::vector<int> intro_phase;

    [[nodiscard]] std::size_t size() const { return rows.size(); }
};

EvalSet eval_set_upto(const Scenario& scenario, const Dataset& test, int phase);

}  // namespace naturalcl
