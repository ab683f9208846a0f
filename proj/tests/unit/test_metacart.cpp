#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "metaselect/errors.hpp"
#include "metaselect/metacart.hpp"
#include "tree_oracles.hpp"

using namespace metaselect;

namespace {

MetaDataset subgroup_data(unsigned seed, std::size_t k = 80) {
    auto ds = testutil::random_dataset(k, 2, 1, seed, 0.05);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z(0.0, 1.0);
    for (auto& s : ds.studies) {
        s.v = 0.05;
        s.y = (s.x[0] > 0.3 ? 1.0 : 0.0) + (s.x[0] > 0.3 && s.x[2] > 0.5 ? 1.0 : 0.0) + std::sqrt(s.v) * z(rng);
    }
    return ds;
}

}  // namespace

TEST_CASE("Q_B hand cases") {
    MetaDataset ds;
    for (double y : {1.0, 1.0, 3.0, 3.0, 5.0}) ds.studies.push_back({y, 1.0, std::nullopt, {}});
    const std::vector<double> w(5, 1.0);
    CHECK(qb(ds, {{0, 1}, {2, 3}}, w) == 4.0);
    CHECK(qb(ds, {{0, 1, 2, 3}}, w) == 0.0);
    CHECK(qb(ds, {{0}, {1}, {2}, {3}}, w) == 4.0);
    // weights 1 and 3: mean 2.5; 1*(1-2.5)^2 + 3*(3-2.5)^2 = 3
    CHECK(qb(ds, {{0}, {2}}, {1.0, 1.0, 3.0, 1.0, 1.0}) == 3.0);
    CHECK_THROWS_AS(qb(ds, {{0, 1}, {}}, w), DataError);
}

TEST_CASE("greedy split equals exhaustive search") {
    std::size_t checked = 0;
    for (unsigned seed = 0; seed < 60; ++seed) {
        for (TreeMode mode : {TreeMode::FE, TreeMode::RE}) {
            const auto ds = testutil::random_dataset(16 + seed % 25, 2, 1, seed, 0.4);
            TreeControls ctl;
            ctl.minsplit = 8;
            ctl.minbucket = 3;
            Tree tree = make_root(ds, mode, ctl);
            for (int step = 0; step < 4; ++step) {
                const auto got = best_split(ds, tree);
                const auto ref = testutil::brute_best_split(ds, tree);
                REQUIRE(got.has_value() == ref.has_value());
                if (!got) break;
                ++checked;
                CHECK(got->qb == doctest::Approx(ref->qb).epsilon(1e-9));
                if (std::fabs(got->qb - ref->qb) > 1e-9 * std::fabs(ref->qb)) break;
                CHECK(got->leaf == ref->leaf);
                CHECK(got->split.covariate == ref->covariate);
                CHECK(got->split.threshold == doctest::Approx(ref->threshold).epsilon(1e-12));
                if (mode == TreeMode::RE) CHECK(got->tau2 == doctest::Approx(testutil::dl_groups(ds, [&] {
                    testutil::Partition part;
                    for (const auto& n : tree.nodes) {
                        if (!n.is_leaf()) continue;
                        if (n.id != got->leaf) {
                            part.push_back(n.members);
                            continue;
                        }
                        std::vector<std::size_t> l, r;
                        for (std::size_t i : n.members) (got->split.goes_left(ds.studies[i].x[got->split.covariate]) ? l : r).push_back(i);
                        part.push_back(l);
                        part.push_back(r);
                    }
                    return part;
                }())).epsilon(1e-9));
                apply_split(ds, tree, *got);
            }
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("grown tree recovers a planted subgroup structure") {
    const auto ds = subgroup_data(4);
    for (TreeMode mode : {TreeMode::FE, TreeMode::RE}) {
        const Tree t = grow_tree(ds, mode);
        REQUIRE(t.split_count() >= 2);
        CHECK(t.root().split->covariate == 0);
        const auto spec = tree_to_spec(t);
        CHECK(spec.mains.count(0));
        CHECK(spec.interactions.count({0, 2}));
        CHECK(spec.marginality_closed());
        if (mode == TreeMode::RE) CHECK(t.tau2_path.size() == t.split_count());
    }
}

TEST_CASE("tree controls are respected") {
    const auto ds = subgroup_data(8, 60);
    TreeControls ctl;
    ctl.maxdepth = 1;
    const Tree t = grow_tree(ds, TreeMode::FE, ctl);
    CHECK(t.split_count() == 1);
    ctl = {};
    ctl.minsplit = 61;
    CHECK(grow_tree(ds, TreeMode::FE, ctl).split_count() == 0);
    ctl = {};
    ctl.minbucket = 9;
    for (std::size_t id : grow_tree(ds, TreeMode::RE, ctl).leaves()) {
        CHECK(grow_tree(ds, TreeMode::RE, ctl).nodes[id].members.size() >= 9);
    }
}

TEST_CASE("tree_to_spec equals path enumeration") {
    for (unsigned seed = 0; seed < 40; ++seed) {
        const auto ds = testutil::random_dataset(60, 3, 2, seed, 0.6);
        TreeControls ctl;
        ctl.minsplit = 10;
        ctl.minbucket = 4;
        ctl.cp = 0.0;
        const Tree t = grow_tree(ds, seed % 2 ? TreeMode::RE : TreeMode::FE, ctl);
        CHECK(tree_to_spec(t) == testutil::paths_spec(t));
    }
}

TEST_CASE("routing and prediction") {
    const auto ds = subgroup_data(12);
    const Tree t = grow_tree(ds, TreeMode::FE);
    for (std::size_t i = 0; i < ds.k(); ++i) {
        const auto& leaf = t.route(ds.studies[i].x);
        CHECK(leaf.is_leaf());
        CHECK(std::find(leaf.members.begin(), leaf.members.end(), i) != leaf.members.end());
    }
}

TEST_CASE("pruning") {
    const auto ds = testutil::random_dataset(90, 3, 1, 77, 0.5);
    TreeControls ctl;
    ctl.cp = 0.0;
    ctl.minsplit = 10;
    ctl.minbucket = 4;
    const Tree full = grow_tree(ds, TreeMode::FE, ctl);
    REQUIRE(full.split_count() > 3);

    const Tree same = prune_tree(ds, full, {0.0, 1});
    CHECK(same.split_count() == full.split_count());

    const Tree a = prune_tree(ds, full, {1.0, 5});
    const Tree b = prune_tree(ds, full, {1.0, 5});
    CHECK(a.split_count() == b.split_count());
    CHECK(tree_to_spec(a) == tree_to_spec(b));
    CHECK(a.split_count() <= full.split_count());
    CHECK(tree_to_spec(a).subset_of(tree_to_spec(full)));

    const Tree loose = prune_tree(ds, full, {0.5, 5});
    CHECK(a.split_count() <= loose.split_count());
    CHECK_THROWS_AS(prune_tree(ds, full, {-1.0, 0}), DataError);

    CHECK(default_prune_c(TreeMode::FE, 79) == 1.0);
    CHECK(default_prune_c(TreeMode::FE, 80) == 0.5);
    CHECK(default_prune_c(TreeMode::RE, 119) == 1.0);
    CHECK(default_prune_c(TreeMode::RE, 120) == 0.5);
}

TEST_CASE("serialization") {
    const auto ds = subgroup_data(2);
    const Tree t = grow_tree(ds, TreeMode::RE);
    const auto j = tree_to_json(ds, t);
    CHECK(j.at("mode") == "RE");
    CHECK(j.at("leaves") == t.leaf_count());
    const auto text = render_tree(ds, t);
    CHECK(text.find("root") != std::string::npos);
    CHECK(text.find("m0") != std::string::npos);
}
