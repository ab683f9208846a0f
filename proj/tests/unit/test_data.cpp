#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "metaselect/data.hpp"
#include "metaselect/errors.hpp"

using namespace metaselect;

namespace {

Schema small_schema() {
    return Schema::from_json(nlohmann::json::parse(R"({
        "y": "y", "v": "v", "n": "n",
        "covariates": [{"name": "Age", "scale": "metric"},
                       {"name": "Disc", "scale": "binary", "reference": "no"}]})"));
}

DataError::Kind load_error(const std::string& csv, MissingPolicy policy = MissingPolicy::reject) {
    std::istringstream in(csv);
    try {
        load_dataset(in, small_schema(), {policy});
    } catch (const DataError& e) {
        return e.kind();
    }
    FAIL("expected a DataError");
    return DataError::Kind::InvalidArgument;
}

}  // namespace

TEST_CASE("csv ingestion with binary levels and quoting") {
    std::istringstream in("\xEF\xBB\xBFy,v,n,Age,Disc,extra\n0.5,0.1,40,61.5,yes,\"a,b\"\n-0.2,0.2,55,70,no,x\n");
    const auto ds = load_dataset(in, small_schema());
    REQUIRE(ds.k() == 2);
    REQUIRE(ds.p() == 2);
    CHECK(ds.studies[0].x[1] == 1.0);
    CHECK(ds.studies[1].x[1] == 0.0);
    CHECK(ds.covariates[1].reference_level == "no");
    CHECK(ds.covariates[1].other_level == "yes");
    CHECK(*ds.studies[1].n == 55);
    CHECK(ds.index_of("Disc") == 1);
}

TEST_CASE("ingestion errors") {
    CHECK(load_error("y,v,n,Age\n1,1,1,1\n") == DataError::Kind::MissingColumn);
    CHECK(load_error("y,v,n,Age,Disc\n1,0,10,3,no\n") == DataError::Kind::NonPositiveVariance);
    CHECK(load_error("y,v,n,Age,Disc\n1,0.1,10,abc,no\n") == DataError::Kind::NonNumericValue);
    CHECK(load_error("y,v,n,Age,Disc\n1,0.1,10,NA,no\n") == DataError::Kind::MissingValue);
    CHECK(load_error("y,v,n,Age,Disc\n1,0.1,10,1,no\n1,0.1,10,2,yes\n1,0.1,10,3,maybe\n") ==
          DataError::Kind::MultiLevelCategorical);
    CHECK(load_error("y,v,n,Age,Disc\n1,0.1,2.5,1,no\n") == DataError::Kind::NonNumericValue);
}

TEST_CASE("missing policies") {
    const std::string csv = "y,v,n,Age,Disc\n1,0.1,10,NA,no\n2,0.1,10,3,yes\n3,0.2,10,4,\n";
    std::istringstream a(csv), b(csv);
    const auto dropped = load_dataset(a, small_schema(), {MissingPolicy::drop_incomplete});
    CHECK(dropped.k() == 1);
    CHECK(dropped.complete());
    const auto kept = load_dataset(b, small_schema(), {MissingPolicy::keep});
    CHECK(kept.k() == 3);
    CHECK(std::isnan(kept.studies[0].x[0]));
    CHECK(!kept.complete());
}

TEST_CASE("csv round trip") {
    auto ds = testutil::random_dataset(12, 2, 1, 3);
    std::ostringstream out;
    write_dataset_csv(ds, out);
    std::istringstream in(out.str());
    const auto back = load_dataset(in, schema_for(ds));
    REQUIRE(back.k() == ds.k());
    for (std::size_t i = 0; i < ds.k(); ++i) {
        CHECK(back.studies[i].y == ds.studies[i].y);
        CHECK(back.studies[i].v == ds.studies[i].v);
        CHECK(back.studies[i].x == ds.studies[i].x);
    }
}

TEST_CASE("standardize: zero mean, unit sd, binary untouched, idempotent") {
    auto ds = testutil::random_dataset(30, 2, 1, 5);
    for (auto& s : ds.studies) s.x[0] = 10.0 + 3.0 * s.x[0];
    const auto z = standardize(ds);
    for (std::size_t j = 0; j < 2; ++j) {
        const auto col = z.column(j);
        double m = 0.0, ss = 0.0;
        for (double x : col) m += x;
        m /= static_cast<double>(col.size());
        for (double x : col) ss += (x - m) * (x - m);
        CHECK(std::fabs(m) < 1e-12);
        CHECK(std::sqrt(ss / static_cast<double>(col.size() - 1)) == doctest::Approx(1.0).epsilon(1e-12));
        REQUIRE(z.covariates[j].standardization.has_value());
    }
    CHECK(z.covariates[0].standardization->mean == doctest::Approx(10.0).epsilon(0.2));
    CHECK(z.column(2) == ds.column(2));
    const auto zz = standardize(z);
    for (std::size_t i = 0; i < z.k(); ++i) CHECK(std::fabs(zz.studies[i].x[0] - z.studies[i].x[0]) < 1e-12);

    auto flat = ds;
    for (auto& s : flat.studies) s.x[1] = 2.0;
    CHECK_THROWS_AS(standardize(flat), DataError);
}

TEST_CASE("design matrix under marginality") {
    auto ds = testutil::random_dataset(8, 3, 0, 1);
    ModelSpec spec = parse_effects(ds, "m0,m2,m0:m2");
    const auto X = build_design(ds, spec);
    REQUIRE(X.cols() == 4);
    CHECK(X.columns == std::vector<std::string>{"(Intercept)", "m0", "m2", "m0:m2"});
    for (std::size_t i = 0; i < ds.k(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        CHECK(X.values(r, 0) == 1.0);
        CHECK(X.values(r, 3) == ds.studies[i].x[0] * ds.studies[i].x[2]);
    }
    CHECK(interaction_column(spec, {0, 2}) == 3);
    CHECK(main_column(spec, 2) == 2);

    ModelSpec bad = parse_effects(ds, "m0,m1:m2");
    CHECK(!bad.marginality_closed());
    CHECK_THROWS_AS(build_design(ds, bad), DataError);
    CHECK(bad.closure().marginality_closed());
    CHECK(bad.closure().mains == std::set<std::size_t>{0, 1, 2});

    ModelSpec out_of_range;
    out_of_range.mains = {7};
    CHECK_THROWS_AS(build_design(ds, out_of_range), DataError);
}

TEST_CASE("spec json round trip") {
    auto ds = testutil::random_dataset(5, 3, 0, 1);
    const ModelSpec spec = parse_effects(ds, "m0,m1,m2,m0:m1,m1:m2");
    CHECK(spec_from_json(ds, spec_to_json(ds, spec)) == spec);
    CHECK(describe(ds, spec).find("m0:m1") != std::string::npos);
}

TEST_CASE("admissible model count equals enumeration") {
    for (unsigned p = 0; p <= 4; ++p) {
        const auto pairs = all_pairs(p);
        const std::size_t bits = p + pairs.size();
        std::size_t count = 0;
        for (std::size_t mask = 0; mask < (std::size_t{1} << bits); ++mask) {
            ModelSpec s;
            for (unsigned j = 0; j < p; ++j) {
                if (mask >> j & 1u) s.mains.insert(j);
            }
            for (std::size_t q = 0; q < pairs.size(); ++q) {
                if (mask >> (p + q) & 1u) s.interactions.insert(pairs[q]);
            }
            if (s.marginality_closed()) ++count;
        }
        CHECK(count_admissible_models(p) == count);
    }
    CHECK(count_admissible_models(7) == 2'350'602);
    CHECK_THROWS_AS(count_admissible_models(21), DataError);
}

TEST_CASE("pairs are lexicographic") {
    const auto pairs = all_pairs(4);
    REQUIRE(pairs.size() == 6);
    CHECK(pairs.front() == Pair{0, 1});
    CHECK(pairs[2] == Pair{0, 3});
    CHECK(pairs.back() == Pair{2, 3});
    CHECK(make_pair_sorted(3, 1) == Pair{1, 3});
}
