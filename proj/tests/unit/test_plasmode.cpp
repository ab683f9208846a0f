#include <doctest.h>

#include <cmath>
#include <set>
#include <unordered_set>

#include "helpers.hpp"
#include "metaselect/errors.hpp"
#include "metaselect/estimation.hpp"
#include "metaselect/plasmode.hpp"

using namespace metaselect;

namespace {

// Seven covariates named as in the simulation base.
MetaDataset base_like(std::size_t k, unsigned seed, bool with_missing = false) {
    const std::vector<std::pair<std::string, Scale>> cols{{"Time", Scale::metric}, {"Trial", Scale::binary},
                                                          {"Male", Scale::metric}, {"Age", Scale::metric},
                                                          {"SBP", Scale::metric},  {"Multi", Scale::binary},
                                                          {"Disc", Scale::binary}};
    auto raw = testutil::random_dataset(k, 4, 3, seed);
    for (std::size_t j = 0; j < cols.size(); ++j) {
        raw.covariates[j].name = cols[j].first;
        raw.covariates[j].scale = cols[j].second;
    }
    // reorder values to match the names: random_dataset puts metrics first
    for (auto& s : raw.studies) {
        const auto x = s.x;
        s.x = {x[0], x[4], x[1], x[2], x[3], x[5], x[6]};
    }
    if (with_missing) {
        for (std::size_t i = 0; i < k; i += 3) raw.studies[i].x[4] = std::nan("");
        raw.studies[1].x[6] = std::nan("");
    }
    return raw;
}

}  // namespace

TEST_CASE("settings table") {
    const auto& s = dgm_settings();
    REQUIRE(s.size() == 20);
    CHECK(s[0].id == "1");
    CHECK(s[0].me_coefs.empty());
    CHECK(s[0].intercept == -1.0);
    CHECK(s[1].me_coefs.size() == 7);
    CHECK(s[12].me_coefs.size() == 5);
    CHECK(!s[12].me_coefs.count("Male"));
    CHECK(!s[12].me_coefs.count("SBP"));
    CHECK(s[8].ie_coefs.at({"Disc", "Multi"}) == 0.5);
    CHECK(dgm_setting("N1").nonlinear == Nonlinearity::time_age_indicator);
    CHECK(dgm_setting("N1").ie_coefs == dgm_setting("3").ie_coefs);
    CHECK(dgm_setting("N6").me_coefs == dgm_setting("8").me_coefs);
    CHECK(dgm_setting("N6").nonlinear == Nonlinearity::time_disc_indicator);
    for (const auto& d : s) {
        for (const auto& [n, b] : d.me_coefs) CHECK((b == 0.5 || b == -0.5));
        for (const auto& [n, b] : d.ie_coefs) CHECK((b == 0.5 || b == -0.5));
    }
    CHECK_THROWS_AS(dgm_setting("15"), DataError);
}

TEST_CASE("hot-deck imputation keeps observed cells and draws from the observed support") {
    const auto raw = base_like(30, 1, true);
    Rng rng = make_rng(3, {});
    const auto imp = hot_deck_impute(raw, rng);
    CHECK(imp.complete());
    for (std::size_t j = 0; j < raw.p(); ++j) {
        std::set<double> observed;
        for (const auto& s : raw.studies) {
            if (!std::isnan(s.x[j])) observed.insert(s.x[j]);
        }
        for (std::size_t i = 0; i < raw.k(); ++i) {
            if (std::isnan(raw.studies[i].x[j])) {
                CHECK(observed.count(imp.studies[i].x[j]));
            } else {
                CHECK(imp.studies[i].x[j] == raw.studies[i].x[j]);
            }
        }
    }
    auto empty = raw;
    for (auto& s : empty.studies) s.x[2] = std::nan("");
    CHECK_THROWS_AS(hot_deck_impute(empty, rng), DataError);

    MetaDataset tiny;
    tiny.covariates.push_back({"a", Scale::metric, std::nullopt, "", ""});
    for (double x : {1.0, std::nan(""), 3.0}) tiny.studies.push_back({0.0, 1.0, 10, {x}});
    for (int r = 0; r < 20; ++r) {
        const double v = hot_deck_impute(tiny, rng).studies[1].x[0];
        CHECK((v == 1.0 || v == 3.0));
    }
}

TEST_CASE("setting 1 without heterogeneity") {
    const auto base = prepare_base(base_like(50, 2), 7);
    Rng rng = make_rng(1, {});
    const auto rep = make_replicate(base, dgm_setting("1"), 40, 0.0, rng);
    CHECK(rep.data.k() == 40);
    CHECK(rep.truth.empty());
    CHECK(rep.truth_ies.empty());
    const double p = 1.0 / (1.0 + std::exp(1.0));
    for (const auto& s : rep.data.studies) CHECK(s.v == doctest::Approx(1.0 / (*s.n * p * (1 - p))).epsilon(1e-12));
}

TEST_CASE("noise-free replicate is linear in the design") {
    const auto base = prepare_base(base_like(80, 3), 1);
    Rng rng = make_rng(2, {});
    const auto& setting = dgm_setting("14");
    const auto rep = make_replicate(base, setting, 60, 0.0, rng, {true});
    FitOptions fo;
    fo.tau2_method = Tau2Method::fixed;
    const auto f = fit(rep.data, rep.truth, fo);
    CHECK(f.beta(0) == doctest::Approx(-1.0).epsilon(1e-10));
    for (std::size_t c = 1; c < f.columns.size(); ++c) {
        const auto& name = f.columns[c];
        double expected = 0.0;
        const auto colon = name.find(':');
        if (colon == std::string::npos) {
            expected = setting.me_coefs.at(name);
        } else {
            const std::string a = name.substr(0, colon), b = name.substr(colon + 1);
            expected = setting.ie_coefs.count({a, b}) ? setting.ie_coefs.at({a, b}) : setting.ie_coefs.at({b, a});
        }
        CHECK(std::fabs(f.beta(static_cast<Eigen::Index>(c)) - expected) < 1e-10);
    }
}

TEST_CASE("truth of setting 12 and the nonlinear variants") {
    const auto base = prepare_base(base_like(60, 4), 1);
    Rng rng = make_rng(5, {});
    const auto rep = make_replicate(base, dgm_setting("12"), 30, 0.1, rng);
    const auto t = base.index_of("Time"), a = base.index_of("Age"), d = base.index_of("Disc"), m = base.index_of("Multi");
    CHECK(rep.truth_ies == std::set<Pair>{make_pair_sorted(t, a), make_pair_sorted(t, d), make_pair_sorted(d, m)});
    CHECK(rep.truth.marginality_closed());
    CHECK(rep.truth.mains == std::set<std::size_t>{t, a, d, m});

    Rng r1 = make_rng(8, {});
    const auto nl = make_replicate(base, dgm_setting("N4"), 50, 0.0, r1, {true});
    double time_mean = 0;
    for (const auto& s : nl.data.studies) time_mean += s.x[t];
    time_mean /= 50;
    for (const auto& s : nl.data.studies) {
        const double eta = -1.0 - 0.5 * (s.x[t] > time_mean ? s.x[d] : 0.0);
        CHECK(s.y == doctest::Approx(eta).epsilon(1e-12));
    }
    Rng r2 = make_rng(9, {});
    const auto na = make_replicate(base, dgm_setting("N2"), 50, 0.0, r2, {true});
    double age_mean = 0;
    for (const auto& s : na.data.studies) age_mean += s.x[a];
    age_mean /= 50;
    for (const auto& s : na.data.studies) {
        const double eta = -1.0 - 0.5 * s.x[t] + 0.5 * s.x[a] - 0.5 * (s.x[a] > age_mean ? s.x[t] * s.x[a] : 0.0);
        CHECK(s.y == doctest::Approx(eta).epsilon(1e-12));
    }
}

TEST_CASE("replicate preconditions") {
    auto base = prepare_base(base_like(20, 5), 1);
    Rng rng = make_rng(1, {});
    base.studies[3].n.reset();
    CHECK_THROWS_AS(make_replicate(base, dgm_setting("1"), 10, 0.0, rng), DataError);
    CHECK_THROWS_AS(make_replicate(base_like(20, 5, true), dgm_setting("1"), 10, 0.0, rng), DataError);
}

TEST_CASE("tau2 enters theta") {
    const auto base = prepare_base(base_like(60, 6), 1);
    Rng rng = make_rng(1, {});
    const auto rep = make_replicate(base, dgm_setting("1"), 2000, 0.3, rng);
    double m = 0, ss = 0, ev = 0;
    for (const auto& s : rep.data.studies) m += s.y;
    m /= 2000;
    for (const auto& s : rep.data.studies) {
        ss += (s.y - m) * (s.y - m);
        ev += s.v;
    }
    CHECK(ss / 1999 == doctest::Approx(0.3 + ev / 2000).epsilon(0.15));
}

TEST_CASE("error rates") {
    const auto pairs = all_pairs(7);
    const std::set<Pair> cand(pairs.begin(), pairs.end());
    const std::set<Pair> truth{{0, 3}};
    ModelSpec sel;
    sel.interactions = truth;
    auto r = error_rates(sel, truth, cand);
    CHECK(r.type1 == 0.0);
    CHECK(*r.type2 == 0.0);
    r = error_rates(ModelSpec{}, {{0, 3}, {0, 6}, {5, 6}}, cand);
    CHECK(r.type1 == 0.0);
    CHECK(*r.type2 == 1.0);
    sel.interactions = {{0, 3}, {1, 2}, {4, 5}};
    r = error_rates(sel, truth, cand);
    CHECK(r.type1 == doctest::Approx(0.1));
    CHECK(*r.type2 == 0.0);
    CHECK(!error_rates(sel, {}, cand).type2.has_value());
    CHECK(error_rates(sel, {}, cand).type1 == doctest::Approx(3.0 / 21.0));
}

TEST_CASE("cell seeds are pairwise distinct over the full grid") {
    std::unordered_set<std::uint64_t> seen;
    std::size_t n = 0;
    for (const auto& s : dgm_settings()) {
        for (std::size_t k : {13, 23, 41, 100}) {
            for (double t : {0.0, 0.141, 0.195, 0.233, 0.317}) {
                for (std::size_t rep = 0; rep < 100; ++rep) {
                    seen.insert(cell_seed(42, s.id, k, t, rep));
                    ++n;
                }
            }
        }
    }
    CHECK(seen.size() == n);
}

TEST_CASE("grid config parsing") {
    const auto c = GridConfig::from_json(nlohmann::json::parse(R"({"settings": ["1", 12, "N3"], "replications": 5,
        "methods": ["uni-test", "sremrt"], "lambda_values": [0.3, 0.7], "master_seed": 9})"));
    CHECK(c.settings == std::vector<std::string>{"1", "12", "N3"});
    CHECK(c.k_values == std::vector<std::size_t>{13, 23, 41, 100});
    CHECK(c.tau2_values.size() == 5);
    CHECK(c.methods == std::vector<Method>{Method::uni_test, Method::sremrt});
    CHECK(c.B == 100);
    CHECK(GridConfig::from_json(c.to_json()).to_json() == c.to_json());
    const auto d = GridConfig::from_json(nlohmann::json::object());
    CHECK(d.settings.size() == 20);
    CHECK(d.methods.size() == 8);
    CHECK_THROWS_AS(GridConfig::from_json(nlohmann::json::parse(R"({"settings": ["99"]})")), DataError);
    CHECK_THROWS_AS(GridConfig::from_json(nlohmann::json::parse(R"({"lambda_values": [1.5]})")), DataError);
    CHECK_THROWS_AS(GridConfig::from_json(nlohmann::json::parse(R"({"methods": ["lasso"]})")), DataError);
}

TEST_CASE("smoke grid and determinism") {
    const auto raw = base_like(120, 11, true);
    auto cfg = GridConfig::from_json(nlohmann::json::parse(R"({"settings": ["1"], "k_values": [13],
        "tau2_values": [0.0], "replications": 5, "methods": ["uni_test"], "master_seed": 3})"));
    const auto rep = run_grid(raw, cfg);
    REQUIRE(rep.rows.size() == 1);
    CHECK(rep.rows[0].n_reps + rep.rows[0].n_failed == 5);
    CHECK(!rep.rows[0].type2.has_value());

    cfg = GridConfig::from_json(nlohmann::json::parse(R"({"settings": ["4", "N4"], "k_values": [23, 41],
        "tau2_values": [0.0, 0.2], "replications": 3, "lambda_values": [0.3, 0.5], "B": 10, "master_seed": 5})"));
    const auto a = run_grid(raw, cfg, 1);
    const auto b = run_grid(raw, cfg, 3);
    CHECK(a.to_csv() == b.to_csv());
    CHECK(a.rows.size() == 2 * 2 * 2 * (6 + 2 * 2));
    for (const auto& r : a.rows) {
        if (r.type1) {
            CHECK(*r.type1 >= 0.0);
            CHECK(*r.type1 <= 1.0);
        }
        REQUIRE(r.type2.has_value());
        CHECK(*r.type2 >= 0.0);
        CHECK(*r.type2 <= 1.0);
    }
    cfg.master_seed = 6;
    CHECK(run_grid(raw, cfg, 1).to_csv() != a.to_csv());
    const auto j = a.to_json();
    CHECK(j.at("rows").size() == a.rows.size());
}
