#include <doctest.h>

#include "helpers.hpp"
#include "metaselect/ensemble.hpp"
#include "metaselect/errors.hpp"
#include "tree_oracles.hpp"

using namespace metaselect;

namespace {

MetaDataset data(unsigned seed) {
    auto ds = testutil::random_dataset(70, 3, 1, seed, 0.2);
    for (auto& s : ds.studies) s.y += (s.x[1] > 0 && s.x[3] > 0.5) ? 0.8 : 0.0;
    return ds;
}

}  // namespace

TEST_CASE("selection matrix equals manual counts over the trees") {
    const auto ds = data(1);
    EnsembleOptions eo;
    eo.B = 40;
    eo.seed = 9;
    for (TreeMode mode : {TreeMode::FE, TreeMode::RE}) {
        const auto trees = fit_ensemble(ds, mode, eo);
        REQUIRE(trees.size() == 40);
        Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(4, 4);
        for (const auto& t : trees) {
            const auto spec = testutil::paths_spec(t);
            for (std::size_t j : spec.mains) counts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += 1;
            for (const auto& [a, b] : spec.interactions) {
                counts(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += 1;
                counts(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) += 1;
            }
        }
        const auto A = selection_matrix(trees, ds.p(), mode);
        CHECK((A.a - counts / 40.0).cwiseAbs().maxCoeff() < 1e-15);
        const auto S = stability_matrix(ds, mode, eo);
        CHECK(S.a == A.a);
        CHECK(A.a.isApprox(A.a.transpose()));
        CHECK(A.a.minCoeff() >= 0.0);
        CHECK(A.a.maxCoeff() <= 1.0);
    }
}

TEST_CASE("results do not depend on the thread count") {
    const auto ds = data(2);
    EnsembleOptions one, many;
    one.B = many.B = 30;
    one.seed = many.seed = 4;
    many.jobs = 4;
    CHECK(stability_matrix(ds, TreeMode::RE, one).a == stability_matrix(ds, TreeMode::RE, many).a);
    EnsembleOptions other = one;
    other.seed = 5;
    CHECK(stability_matrix(ds, TreeMode::RE, one).a != stability_matrix(ds, TreeMode::RE, other).a);
}

TEST_CASE("thresholding rule") {
    SelectionMatrix A;
    A.p = 3;
    A.B = 10;
    A.a.resize(3, 3);
    A.a << 0.9, 0.3, 0.0,
           0.3, 0.4, 0.0,
           0.0, 0.0, 0.6;
    // interaction (0, 1) relative to min(0.9, 0.4): 0.75
    const auto s5 = threshold_select(A, 0.5);
    CHECK(s5.mains == std::set<std::size_t>{0, 2});
    CHECK(s5.interactions.empty());  // main effect 1 below lambda
    const auto s3 = threshold_select(A, 0.3);
    CHECK(s3.mains == std::set<std::size_t>{0, 1, 2});
    CHECK(s3.interactions == std::set<Pair>{{0, 1}});
    CHECK(threshold_select(A, 0.6).mains == std::set<std::size_t>{0});  // strict inequality at 0.6
    CHECK(selection_level(A, 0, 1) == doctest::Approx(0.4));
    CHECK(selection_level(A, 0, 2) == 0.0);
    CHECK(selection_level(A, 2, 2) == 0.6);
    CHECK_THROWS_AS(threshold_select(A, 1.0), DataError);
    CHECK_THROWS_AS(threshold_select(A, 0.0), DataError);
}

TEST_CASE("selections are nested in lambda and marginality-closed") {
    for (unsigned seed = 0; seed < 10; ++seed) {
        EnsembleOptions eo;
        eo.B = 25;
        eo.seed = seed;
        const auto A = stability_matrix(data(seed + 10), seed % 2 ? TreeMode::FE : TreeMode::RE, eo);
        ModelSpec previous = threshold_select(A, 0.1);
        CHECK(previous.marginality_closed());
        for (double l : {0.3, 0.5, 0.7, 0.9}) {
            const auto s = threshold_select(A, l);
            CHECK(s.marginality_closed());
            CHECK(s.subset_of(previous));
            previous = s;
        }
    }
}

TEST_CASE("exports are deterministic and well formed") {
    const auto ds = data(3);
    EnsembleOptions eo;
    eo.B = 20;
    eo.seed = 1;
    const auto A = stability_matrix(ds, TreeMode::RE, eo);
    const auto names = covariate_names(ds);
    const auto svg = heatmap_svg(A, names);
    CHECK(svg == heatmap_svg(stability_matrix(ds, TreeMode::RE, eo), names));
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    // lower triangle including the diagonal: p (p + 1) / 2 cells plus legend swatches
    std::size_t rects = 0;
    for (auto pos = svg.find("<rect"); pos != std::string::npos; pos = svg.find("<rect", pos + 1)) ++rects;
    CHECK(rects == 10 + 6);
    const auto csv = matrix_to_csv(A, names);
    CHECK(csv.rfind("variable,m0,m1,m2,b3\n", 0) == 0);
    const auto j = matrix_to_json(A, names);
    CHECK(j.at("a").size() == 4);
    CHECK(j.at("B") == 20);
    CHECK_THROWS_AS(heatmap_svg(A, {"x"}), DataError);
}
