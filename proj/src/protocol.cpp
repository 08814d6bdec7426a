#include "naturalcl/protocol.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "naturalcl/seeding.hpp"

namespace naturalcl {

Scenario::Scenario(Variant variant) : variant_(std::move(variant)) {
    if (phases() < 1) throw std::invalid_argument("scenario needs at least one phase");
    if (const auto* cil = std::get_if<ClassIncremental>(&variant_)) {
        std::vector<int> all;
        for (const auto& g : cil->groups) {
            if (g.empty() || g.size() != cil->groups.front().size()) {
                throw std::invalid_argument("class-incremental groups must be non-empty and equal-sized");
            }
            all.insert(all.end(), g.begin(), g.end());
        }
        std::sort(all.begin(), all.end());
        for (std::size_t i = 0; i < all.size(); ++i) {
            if (all[i] != static_cast<int>(i)) {
                throw std::invalid_argument("class-incremental groups must partition 0..C-1");
            }
        }
    } else {
        const auto& dil = std::get<DomainIncremental>(variant_);
        if (dil.perm_seeds.size() != dil.perms.size()) throw std::invalid_argument("one seed per permutation");
        for (const auto& p : dil.perms) {
            if (p.size() != dil.perms.front().size()) throw std::invalid_argument("permutation widths differ");
        }
    }
}

int Scenario::phases() const {
    if (const auto* cil = std::get_if<ClassIncremental>(&variant_)) return static_cast<int>(cil->groups.size());
    return static_cast<int>(std::get<DomainIncremental>(variant_).perms.size());
}

std::vector<int> Scenario::active_classes(int phase, int num_classes) const {
    if (phase < 1 || phase > phases()) throw std::out_of_range("phase out of range");
    std::vector<int> active;
    if (const auto* cil = std::get_if<ClassIncremental>(&variant_)) {
        for (int t = 0; t < phase; ++t) active.insert(active.end(), cil->groups[t].begin(), cil->groups[t].end());
        std::sort(active.begin(), active.end());
    } else {
        active.resize(static_cast<std::size_t>(num_classes));
        std::iota(active.begin(), active.end(), 0);
    }
    return active;
}

void Scenario::write_manifest(std::ostream& out) const {
    if (const auto* cil = std::get_if<ClassIncremental>(&variant_)) {
        out << "scenario class_il\nphases " << phases() << '\n';
        for (int t = 0; t < phases(); ++t) {
            out << "phase " << t + 1 << " classes";
            for (int c : cil->groups[t]) out << ' ' << c;
            out << '\n';
        }
        return;
    }
    const auto& dil = std::get<DomainIncremental>(variant_);
    out << "scenario domain_il\nphases " << phases() << "\ndim " << dil.perms.front().size() << '\n';
    for (int t = 0; t < phases(); ++t) {
        out << "phase " << t + 1 << ' ';
        if (dil.perm_seeds[t] == 0) {
            out << "identity";
        } else {
            out << "perm_seed " << dil.perm_seeds[t];
        }
        out << '\n';
    }
}

Scenario make_class_il(int n_classes, int n_phases, std::uint64_t seed) {
    if (n_classes < 1 || n_phases < 1 || n_classes % n_phases != 0) {
        throw std::invalid_argument("cannot split " + std::to_string(n_classes) + " classes into " +
                                    std::to_string(n_phases) + " equal phases");
    }
    std::vector<int> order(static_cast<std::size_t>(n_classes));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
    }

    const int per_phase = n_classes / n_phases;
    ClassIncremental cil;
    for (int t = 0; t < n_phases; ++t) {
        std::vector<int> group(order.begin() + t * per_phase, order.begin() + (t + 1) * per_phase);
        std::sort(group.begin(), group.end());
        cil.groups.push_back(std::move(group));
    }
    return Scenario(std::move(cil));
}

Scenario make_domain_il(int n_phases, int dim, std::uint64_t seed) {
    if (n_phases < 1 || dim < 1) throw std::invalid_argument("domain-IL needs phases >= 1 and dim >= 1");
    DomainIncremental dil;
    dil.perms.push_back(PixelPermutation::identity(dim));
    dil.perm_seeds.push_back(0);
    for (int t = 2; t <= n_phases; ++t) {
        std::uint64_t perm_seed = derive_seed(seed, static_cast<std::uint64_t>(t));
        if (perm_seed == 0) perm_seed = 1;
        dil.perms.push_back(PixelPermutation::random(dim, perm_seed));
        dil.perm_seeds.push_back(perm_seed);
    }
    return Scenario(std::move(dil));
}

EvalSet eval_set_upto(const Scenario& scenario, const Dataset& test, int phase) {
    if (phase < 1 || phase > scenario.phases()) {
        throw std::out_of_range("eval phase " + std::to_string(phase) + " outside [1, " +
                                std::to_string(scenario.phases()) + "]");
    }
    EvalSet set;
    if (scenario.is_class_incremental()) {
        std::vector<int> intro_of(static_cast<std::size_t>(test.num_classes), 0);
        const auto& groups = scenario.class_il().groups;
        for (int t = 0; t < phase; ++t) {
            for (int c : groups[t]) {
                if (c < test.num_classes) intro_of[static_cast<std::size_t>(c)] = t + 1;
            }
        }
        for (std::size_t i = 0; i < test.size(); ++i) {
            const int intro = intro_of[static_cast<std::size_t>(test.labels[i])];
            if (intro == 0) continue;
            set.rows.push_back(i);
            set.intro_phase.push_back(intro);
        }
        return set;
    }
    for (int t = 1; t <= phase; ++t) {
        for (std::size_t i = 0; i < test.size(); ++i) {
            set.rows.push_back(i);
            set.intro_phase.push_back(t);
        }
    }
    return set;
}

}  // namespace naturalcl
