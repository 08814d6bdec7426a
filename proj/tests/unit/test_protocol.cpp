#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "naturalcl/protocol.hpp"

using namespace naturalcl;

namespace {

Dataset labelled(std::vector<int> labels, int classes) {
    Dataset ds;
    ds.features = Matrix<float>::Zero(static_cast<Index>(labels.size()), 4);
    ds.labels = std::move(labels);
    ds.index_classes(classes);
    return ds;
}

}  // namespace

TEST_CASE("class-incremental splits partition the classes") {
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const Scenario s = make_class_il(10, 5, seed);
        REQUIRE(s.phases() == 5);
        std::set<int> seen;
        for (const auto& g : s.class_il().groups) {
            CHECK(g.size() == 2);
            CHECK(std::is_sorted(g.begin(), g.end()));
            seen.insert(g.begin(), g.end());
        }
        CHECK(seen.size() == 10);
        CHECK(*seen.begin() == 0);
        CHECK(*seen.rbegin() == 9);
    }
    CHECK(make_class_il(10, 5, 3).class_il().groups == make_class_il(10, 5, 3).class_il().groups);
    CHECK_THROWS_AS(make_class_il(10, 3, 1), std::invalid_argument);
}

TEST_CASE("class splits vary with the seed") {
    std::set<std::vector<std::vector<int>>> distinct;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) distinct.insert(make_class_il(10, 5, seed).class_il().groups);
    CHECK(distinct.size() > 15);
}

TEST_CASE("scenario validation") {
    CHECK_THROWS_AS(Scenario(ClassIncremental{{{0, 1}, {2}}}), std::invalid_argument);
    CHECK_THROWS_AS(Scenario(ClassIncremental{{{0, 1}, {1, 2}}}), std::invalid_argument);
    CHECK_THROWS_AS(Scenario(ClassIncremental{{}}), std::invalid_argument);
    CHECK_NOTHROW(Scenario(ClassIncremental{{{1, 2}, {0, 3}}}));
}

TEST_CASE("active classes accumulate") {
    const Scenario s(ClassIncremental{{{3, 5}, {0, 1}, {2, 4}}});
    CHECK(s.active_classes(1, 6) == std::vector<int>{3, 5});
    CHECK(s.active_classes(2, 6) == std::vector<int>{0, 1, 3, 5});
    CHECK(s.active_classes(3, 6).size() == 6);
    CHECK_THROWS_AS(s.active_classes(4, 6), std::out_of_range);

    const Scenario d = make_domain_il(3, 16, 1);
    CHECK(d.active_classes(1, 10).size() == 10);
}

TEST_CASE("class-incremental eval sets") {
    const Scenario s(ClassIncremental{{{2, 3}, {0, 1}}});
    const Dataset test = labelled({0, 1, 2, 3, 2, 0}, 4);
    const EvalSet e1 = eval_set_upto(s, test, 1);
    CHECK(e1.rows == std::vector<std::size_t>{2, 3, 4});
    CHECK(e1.intro_phase == std::vector<int>{1, 1, 1});
    const EvalSet e2 = eval_set_upto(s, test, 2);
    CHECK(e2.size() == 6);
    CHECK(e2.intro_phase == std::vector<int>{2, 2, 1, 1, 1, 2});
    CHECK_THROWS_AS(eval_set_upto(s, test, 3), std::out_of_range);
}

TEST_CASE("domain-incremental permutations") {
    const Scenario s = make_domain_il(10, 1024, 5);
    const auto& dil = s.domain_il();
    REQUIRE(dil.perms.size() == 10);
    CHECK(dil.perms[0].is_identity());
    CHECK(dil.perm_seeds[0] == 0);
    for (std::size_t t = 1; t < 10; ++t) {
        CHECK_FALSE(dil.perms[t].is_identity());
        CHECK(dil.perm_seeds[t] != 0);
        CHECK(dil.perms[t] == PixelPermutation::random(1024, dil.perm_seeds[t]));
        for (std::size_t u = 0; u < t; ++u) CHECK_FALSE(dil.perms[t] == dil.perms[u]);
    }
    CHECK(make_domain_il(10, 1024, 5).domain_il().perm_seeds == dil.perm_seeds);
    CHECK(make_domain_il(10, 1024, 6).domain_il().perm_seeds != dil.perm_seeds);
}

TEST_CASE("domain-incremental eval sets repeat the test set per task") {
    const Scenario s = make_domain_il(3, 4, 2);
    const Dataset test = labelled({0, 1, 1}, 2);
    const EvalSet e = eval_set_upto(s, test, 3);
    CHECK(e.size() == 9);
    CHECK(std::count(e.intro_phase.begin(), e.intro_phase.end(), 2) == 3);
    CHECK(e.rows[3] == 0);
}

TEST_CASE("manifests") {
    std::ostringstream out;
    Scenario(ClassIncremental{{{2, 3}, {0, 1}}}).write_manifest(out);
    CHECK(out.str() == "scenario class_il\nphases 2\nphase 1 classes 2 3\nphase 2 classes 0 1\n");

    std::ostringstream dout;
    make_domain_il(2, 8, 1).write_manifest(dout);
    CHECK(dout.str().find("phase 1 identity") != std::string::npos);
    CHECK(dout.str().find("phase 2 perm_seed ") != std::string::npos);
}
