#include "metaselect/plasmode.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <sstream>

#include <boost/random/normal_distribution.hpp>

#include "metaselect/errors.hpp"
#include "metaselect/parallel.hpp"

namespace metaselect {

namespace {

using Coefs = std::map<std::string, double>;
using IeCoefs = std::map<std::pair<std::string, std::string>, double>;

const Coefs kAllMains{{"Time", -0.5}, {"Trial", -0.5}, {"Male", -0.5}, {"Age", 0.5},
                      {"SBP", 0.5},   {"Multi", -0.5}, {"Disc", -0.5}};

const std::pair<std::string, std::string> kAgeTime{"Age", "Time"};
const std::pair<std::string, std::string> kDiscTime{"Disc", "Time"};
const std::pair<std::string, std::string> kDiscMulti{"Disc", "Multi"};

std::vector<DgmSetting> build_settings() {
    std::vector<DgmSetting> s;
    auto add = [&](std::string id, Coefs me, IeCoefs ie) { s.push_back({std::move(id), -1.0, std::move(me), std::move(ie), Nonlinearity::none}); };
    add("1", {}, {});
    add("2", kAllMains, {});
    add("3", {}, {{kAgeTime, -0.5}});
    add("4", {{"Time", -0.5}, {"Age", 0.5}}, {{kAgeTime, -0.5}});
    add("5", kAllMains, {{kAgeTime, -0.5}});
    add("6", {}, {{kDiscTime, -0.5}});
    add("7", {{"Time", -0.5}, {"Disc", -0.5}}, {{kDiscTime, -0.5}});
    add("8", kAllMains, {{kDiscTime, -0.5}});
    add("9", {}, {{kDiscMulti, 0.5}});
    add("10", {{"Trial", -0.5}, {"Multi", -0.5}}, {{kDiscMulti, 0.5}});
    add("11", kAllMains, {{kDiscMulti, 0.5}});
    const IeCoefs all_ies{{kAgeTime, -0.5}, {kDiscTime, -0.5}, {kDiscMulti, 0.5}};
    add("12", {}, all_ies);
    add("13", {{"Time", -0.5}, {"Trial", -0.5}, {"Age", 0.5}, {"Multi", -0.5}, {"Disc", -0.5}}, all_ies);
    add("14", kAllMains, all_ies);
    for (int i = 0; i < 6; ++i) {
        DgmSetting n = s[static_cast<std::size_t>(2 + i)];
        n.id = "N" + std::to_string(i + 1);
        n.nonlinear = i < 3 ? Nonlinearity::time_age_indicator : Nonlinearity::time_disc_indicator;
        s.push_back(n);
    }
    return s;
}

double mean_of(const MetaDataset& ds, std::size_t j) {
    double s = 0.0;
    for (const auto& st : ds.studies) s += st.x[j];
    return s / static_cast<double>(ds.k());
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t double_bits(double x) {
    if (x == 0.0) x = 0.0;  // fold -0
    std::uint64_t u;
    std::memcpy(&u, &x, sizeof u);
    return u;
}

std::string fmt(double x, const char* f) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string opt_fmt(const std::optional<double>& x, const char* f) { return x ? fmt(*x, f) : "NA"; }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

}  // namespace

const std::vector<DgmSetting>& dgm_settings() {
    static const std::vector<DgmSetting> s = build_settings();
    return s;
}

const DgmSetting& dgm_setting(const std::string& id) {
    for (const auto& s : dgm_settings()) {
        if (s.id == id) return s;
    }
    throw DataError(DataError::Kind::InvalidArgument, "unknown simulation setting '" + id + "'");
}

MetaDataset hot_deck_impute(const MetaDataset& base, Rng& rng) {
    MetaDataset out = base;
    for (std::size_t j = 0; j < base.p(); ++j) {
        std::vector<double> observed;
        bool any_missing = false;
        for (const auto& st : base.studies) {
            if (std::isnan(st.x[j])) {
                any_missing = true;
            } else {
                observed.push_back(st.x[j]);
            }
        }
        if (!any_missing) continue;
        if (observed.empty()) {
            throw DataError(DataError::Kind::AllMissingColumn, "covariate '" + base.covariates[j].name + "' has no observed values");
        }
        for (auto& st : out.studies) {
            if (std::isnan(st.x[j])) st.x[j] = observed[uniform_index(rng, observed.size())];
        }
    }
    return out;
}

MetaDataset prepare_base(const MetaDataset& raw, std::uint64_t seed) {
    Rng rng = make_rng(seed, {0x1badb002ULL});
    return standardize(hot_deck_impute(raw, rng));
}

Replicate make_replicate(const MetaDataset& base, const DgmSetting& setting, std::size_t k, double tau2, Rng& rng,
                         const ReplicateOptions& opts) {
    if (k < 1) throw DataError(DataError::Kind::InvalidArgument, "replicate size k must be >= 1");
    if (!(tau2 >= 0.0)) throw DataError(DataError::Kind::InvalidArgument, "tau2 must be >= 0");
    if (base.k() == 0) throw DataError(DataError::Kind::InvalidArgument, "empty base dataset");
    for (std::size_t i = 0; i < base.k(); ++i) {
        const auto& st = base.studies[i];
        if (!st.n || *st.n <= 0) {
            throw DataError(DataError::Kind::MissingValue, "base study " + std::to_string(i + 1) + " has no sample size n");
        }
        for (double x : st.x) {
            if (std::isnan(x)) {
                throw DataError(DataError::Kind::MissingValue,
                                "base study " + std::to_string(i + 1) + " has a missing covariate; impute first");
            }
        }
    }

    std::vector<std::pair<std::size_t, double>> mains;
    for (const auto& [name, b] : setting.me_coefs) {
        if (b != 0.0) mains.emplace_back(base.index_of(name), b);
    }
    struct Ie {
        Pair pair;
        double beta;
        Nonlinearity form;
    };
    std::vector<Ie> ies;
    for (const auto& [names, b] : setting.ie_coefs) {
        if (b == 0.0) continue;
        const Pair pr = make_pair_sorted(base.index_of(names.first), base.index_of(names.second));
        Nonlinearity form = Nonlinearity::none;
        if (setting.nonlinear == Nonlinearity::time_age_indicator && names == kAgeTime) form = setting.nonlinear;
        if (setting.nonlinear == Nonlinearity::time_disc_indicator && names == kDiscTime) form = setting.nonlinear;
        ies.push_back({pr, b, form});
    }

    std::vector<std::size_t> rows(k);
    for (auto& r : rows) r = uniform_index(rng, base.k());
    Replicate rep;
    rep.data = base.subset(rows);
    MetaDataset& ds = rep.data;

    std::size_t time = 0, age = 0, disc = 0;
    double time_mean = 0.0, age_mean = 0.0;
    if (setting.nonlinear != Nonlinearity::none) {
        time = ds.index_of("Time");
        time_mean = mean_of(ds, time);
        if (setting.nonlinear == Nonlinearity::time_age_indicator) {
            age = ds.index_of("Age");
            age_mean = mean_of(ds, age);
        } else {
            disc = ds.index_of("Disc");
        }
    }

    boost::random::normal_distribution<double> normal(0.0, 1.0);
    const double tau = std::sqrt(tau2);
    for (auto& st : ds.studies) {
        double eta = setting.intercept;
        for (const auto& [j, b] : mains) eta += b * st.x[j];
        for (const auto& ie : ies) {
            switch (ie.form) {
                case Nonlinearity::none: eta += ie.beta * st.x[ie.pair.first] * st.x[ie.pair.second]; break;
                case Nonlinearity::time_age_indicator:
                    if (st.x[age] > age_mean) eta += ie.beta * st.x[time] * st.x[age];
                    break;
                case Nonlinearity::time_disc_indicator:
                    if (st.x[time] > time_mean) eta += ie.beta * st.x[disc];
                    break;
            }
        }
        // Draw order per study is fixed: random effect, then sampling error.
        const double u = normal(rng);
        const double e = normal(rng);
        const double theta = eta + tau * u;
        const double p = std::clamp(1.0 / (1.0 + std::exp(-theta)), 0.01, 0.99);
        const double v = 1.0 / (static_cast<double>(*st.n) * p * (1.0 - p));
        if (!std::isfinite(v) || v <= 0.0) {
            throw NumericalError(NumericalError::Kind::DegenerateVariance, "synthesized sampling variance is not finite");
        }
        st.v = v;
        st.y = opts.suppress_noise ? eta : theta + std::sqrt(v) * e;
    }

    for (const auto& [j, b] : mains) rep.truth.mains.insert(j);
    for (const auto& ie : ies) {
        rep.truth.interactions.insert(ie.pair);
        rep.truth_ies.insert(ie.pair);
    }
    rep.truth = rep.truth.closure();
    return rep;
}

ErrorRates error_rates(const ModelSpec& selected, const std::set<Pair>& truth_ies, const std::set<Pair>& candidate_pairs) {
    std::size_t false_pos = 0, hits = 0;
    for (const auto& pr : selected.interactions) {
        if (truth_ies.count(pr)) {
            ++hits;
        } else {
            ++false_pos;
        }
    }
    std::size_t negatives = 0;
    for (const auto& pr : candidate_pairs) {
        if (!truth_ies.count(pr)) ++negatives;
    }
    ErrorRates r;
    r.type1 = negatives == 0 ? 0.0 : static_cast<double>(false_pos) / static_cast<double>(negatives);
    if (!truth_ies.empty()) r.type2 = static_cast<double>(truth_ies.size() - hits) / static_cast<double>(truth_ies.size());
    return r;
}

// ---------------------------------------------------------------------------
// Grid configuration

GridConfig GridConfig::from_json(const nlohmann::json& j) {
    GridConfig c;
    auto bad = [](const std::string& what) { return DataError(DataError::Kind::InvalidArgument, "grid config: " + what); };
    try {
        if (j.contains("base")) c.base = j.at("base").get<std::string>();
        if (j.contains("schema")) c.schema = j.at("schema").get<std::string>();
        if (j.contains("settings")) {
            c.settings.clear();
            for (const auto& s : j.at("settings")) c.settings.push_back(s.is_string() ? s.get<std::string>() : std::to_string(s.get<int>()));
        } else {
            for (const auto& s : dgm_settings()) c.settings.push_back(s.id);
        }
        if (j.contains("k_values")) c.k_values = j.at("k_values").get<std::vector<std::size_t>>();
        if (j.contains("tau2_values")) c.tau2_values = j.at("tau2_values").get<std::vector<double>>();
        if (j.contains("replications")) c.replications = j.at("replications").get<std::size_t>();
        if (j.contains("methods")) {
            for (const auto& m : j.at("methods")) c.methods.push_back(method_from_string(m.get<std::string>()));
        } else {
            c.methods = all_methods();
        }
        if (j.contains("lambda_values")) c.lambda_values = j.at("lambda_values").get<std::vector<double>>();
        if (j.contains("B")) c.B = j.at("B").get<std::size_t>();
        if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw bad(e.what());
    }
    for (const auto& s : c.settings) dgm_setting(s);
    for (auto k : c.k_values) {
        if (k < 4) throw bad("k values must be >= 4");
    }
    for (double t : c.tau2_values) {
        if (!(t >= 0.0)) throw bad("tau2 values must be >= 0");
    }
    for (double l : c.lambda_values) {
        if (!(l > 0.0 && l < 1.0)) throw bad("lambda values must lie in (0, 1)");
    }
    if (c.lambda_values.empty()) throw bad("lambda_values must not be empty");
    if (c.B < 1) throw bad("B must be >= 1");
    if (c.methods.empty()) throw bad("methods must not be empty");
    return c;
}

nlohmann::json GridConfig::to_json() const {
    nlohmann::json j;
    if (base) j["base"] = *base;
    if (schema) j["schema"] = *schema;
    j["settings"] = settings;
    j["k_values"] = k_values;
    j["tau2_values"] = tau2_values;
    j["replications"] = replications;
    j["methods"] = nlohmann::json::array();
    for (Method m : methods) j["methods"].push_back(to_string(m));
    j["lambda_values"] = lambda_values;
    j["B"] = B;
    j["master_seed"] = master_seed;
    return j;
}

std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& setting, std::size_t k, double tau2, std::size_t rep) {
    return derive_seed(master_seed, {fnv1a(setting), static_cast<std::uint64_t>(k), double_bits(tau2), static_cast<std::uint64_t>(rep)});
}

// ---------------------------------------------------------------------------
// Grid execution

namespace {

struct Outcome {
    bool ok = false;
    ErrorRates rates;
    std::size_t n_ies = 0;
    std::size_t n_mes = 0;
    std::string error;
};

// Outcomes of one replicate: per method, one entry per lambda (ensembles)
// or a single entry.
using ReplicateOutcomes = std::vector<std::vector<Outcome>>;

}  // namespace

ErrorReport run_grid(const MetaDataset& raw_base, const GridConfig& config, std::size_t jobs) {
    const MetaDataset base = prepare_base(raw_base, config.master_seed);
    std::set<Pair> candidates;
    for (const auto& pr : all_pairs(base.p())) candidates.insert(pr);
    std::vector<double> lambdas = config.lambda_values;
    std::sort(lambdas.begin(), lambdas.end());

    struct Cell {
        std::size_t setting, k, tau2;
    };
    std::vector<Cell> cells;
    for (std::size_t s = 0; s < config.settings.size(); ++s) {
        for (std::size_t k = 0; k < config.k_values.size(); ++k) {
            for (std::size_t t = 0; t < config.tau2_values.size(); ++t) cells.push_back({s, k, t});
        }
    }
    const std::size_t reps = config.replications;
    std::vector<ReplicateOutcomes> results(cells.size() * reps);

    parallel_for(results.size(), jobs, [&](std::size_t item) {
        const Cell& cell = cells[item / reps];
        const std::size_t rep = item % reps;
        const DgmSetting& setting = dgm_setting(config.settings[cell.setting]);
        const std::size_t k = config.k_values[cell.k];
        const double tau2 = config.tau2_values[cell.tau2];
        const std::uint64_t seed = cell_seed(config.master_seed, setting.id, k, tau2, rep);

        ReplicateOutcomes& out = results[item];
        out.resize(config.methods.size());
        std::optional<Replicate> replicate;
        std::string gen_error;
        try {
            Rng rng = make_rng(seed, {0});
            replicate = make_replicate(base, setting, k, tau2, rng);
        } catch (const std::exception& e) {
            gen_error = std::string("replicate: ") + e.what();
        }
        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            const Method m = config.methods[mi];
            const std::size_t slots = is_ensemble(m) ? lambdas.size() : 1;
            out[mi].assign(slots, Outcome{});
            if (!replicate) {
                for (auto& o : out[mi]) o.error = gen_error;
                continue;
            }
            try {
                MethodOptions mo;
                mo.lambdas = lambdas;
                mo.B = config.B;
                mo.seed = derive_seed(seed, {static_cast<std::uint64_t>(m) + 1});
                const MethodOutput res = run_method(replicate->data, m, mo);
                for (std::size_t l = 0; l < slots; ++l) {
                    Outcome& o = out[mi][l];
                    o.ok = true;
                    o.rates = error_rates(res.specs[l], replicate->truth_ies, candidates);
                    o.n_ies = res.specs[l].interactions.size();
                    o.n_mes = res.specs[l].mains.size();
                }
            } catch (const std::exception& e) {
                for (auto& o : out[mi]) o.error = e.what();
            }
        }
    });

    ErrorReport report;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        const Cell& cell = cells[c];
        for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
            const Method m = config.methods[mi];
            const std::size_t slots = is_ensemble(m) ? lambdas.size() : 1;
            for (std::size_t l = 0; l < slots; ++l) {
                ErrorRow row;
                row.setting = config.settings[cell.setting];
                row.k = config.k_values[cell.k];
                row.tau2 = config.tau2_values[cell.tau2];
                row.method = m;
                if (is_ensemble(m)) row.lambda = lambdas[l];
                double t1 = 0.0, t2 = 0.0, ies = 0.0, mes = 0.0;
                std::size_t n_t2 = 0;
                for (std::size_t r = 0; r < reps; ++r) {
                    const Outcome& o = results[c * reps + r][mi][l];
                    if (!o.ok) {
                        ++row.n_failed;
                        if (row.note.empty()) row.note = o.error;
                        continue;
                    }
                    ++row.n_reps;
                    t1 += o.rates.type1;
                    if (o.rates.type2) {
                        t2 += *o.rates.type2;
                        ++n_t2;
                    }
                    ies += static_cast<double>(o.n_ies);
                    mes += static_cast<double>(o.n_mes);
                }
                if (row.n_reps > 0) {
                    const double n = static_cast<double>(row.n_reps);
                    row.type1 = t1 / n;
                    row.mean_selected_ies = ies / n;
                    row.mean_selected_mes = mes / n;
                    if (n_t2 > 0) row.type2 = t2 / static_cast<double>(n_t2);
                }
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

std::string ErrorReport::to_csv() const {
    std::ostringstream out;
    out << "setting,k,tau2,method,lambda,type1,type2,n_reps,n_failed,mean_selected_ies,mean_selected_mes,note\n";
    for (const auto& r : rows) {
        out << r.setting << ',' << r.k << ',' << fmt(r.tau2, "%g") << ',' << to_string(r.method) << ','
            << opt_fmt(r.lambda, "%.2f") << ',' << opt_fmt(r.type1, "%.6f") << ',' << opt_fmt(r.type2, "%.6f") << ','
            << r.n_reps << ',' << r.n_failed << ',' << opt_fmt(r.mean_selected_ies, "%.4f") << ','
            << opt_fmt(r.mean_selected_mes, "%.4f") << ',' << csv_field(r.note) << '\n';
    }
    return out.str();
}

nlohmann::json ErrorReport::to_json() const {
    auto opt = [](const std::optional<double>& x) { return x ? nlohmann::json(*x) : nlohmann::json(nullptr); };
    nlohmann::json rows_j = nlohmann::json::array();
    std::map<std::string, std::pair<double, std::size_t>> type1_by_method, type2_by_method;
    for (const auto& r : rows) {
        nlohmann::json j;
        j["setting"] = r.setting;
        j["k"] = r.k;
        j["tau2"] = r.tau2;
        j["method"] = to_string(r.method);
        j["lambda"] = opt(r.lambda);
        j["type1"] = opt(r.type1);
        j["type2"] = opt(r.type2);
        j["n_reps"] = r.n_reps;
        j["n_failed"] = r.n_failed;
        j["mean_selected_ies"] = opt(r.mean_selected_ies);
        j["mean_selected_mes"] = opt(r.mean_selected_mes);
        if (!r.note.empty()) j["note"] = r.note;
        rows_j.push_back(j);
        std::string key = to_string(r.method);
        if (r.lambda) key += "@" + fmt(*r.lambda, "%.2f");
        if (r.type1) {
            type1_by_method[key].first += *r.type1;
            ++type1_by_method[key].second;
        }
        if (r.type2) {
            type2_by_method[key].first += *r.type2;
            ++type2_by_method[key].second;
        }
    }
    nlohmann::json summary = nlohmann::json::object();
    for (const auto& [key, acc] : type1_by_method) summary[key]["mean_type1"] = acc.first / static_cast<double>(acc.second);
    for (const auto& [key, acc] : type2_by_method) summary[key]["mean_type2"] = acc.first / static_cast<double>(acc.second);
    return {{"rows", rows_j}, {"summary", summary}};
}

}  // namespace metaselect
