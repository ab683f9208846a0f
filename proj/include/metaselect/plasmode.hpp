#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "metaselect/data.hpp"
#include "metaselect/methods.hpp"
#include "metaselect/rng.hpp"

namespace metaselect {

enum class Nonlinearity { none, time_age_indicator, time_disc_indicator };

// Outcome model of one simulation setting, coefficients on the standardized
// covariate scale. Covariates are referenced by name.
struct DgmSetting {
    std::string id;  // "1".."14", "N1".."N6"
    double intercept = -1.0;
    std::map<std::string, double> me_coefs;
    std::map<std::pair<std::string, std::string>, double> ie_coefs;
    Nonlinearity nonlinear = Nonlinearity::none;
};

/// Settings 1..14 followed by N1..N6.
const std::vector<DgmSetting>& dgm_settings();
const DgmSetting& dgm_setting(const std::string& id);

/// Replaces every missing covariate cell by a uniformly drawn observed value
/// of the same column. Throws DataError(AllMissingColumn).
MetaDataset hot_deck_impute(const MetaDataset& base, Rng& rng);

/// Imputation followed by standardization of the metric covariates.
MetaDataset prepare_base(const MetaDataset& raw, std::uint64_t seed);

struct ReplicateOptions {
    bool suppress_noise = false;  // y = theta exactly (testing hook)
};

struct Replicate {
    MetaDataset data;
    ModelSpec truth;           // closure of the nonzero effects
    std::set<Pair> truth_ies;  // scoring target
};

Replicate make_replicate(const MetaDataset& base, const DgmSetting& setting, std::size_t k, double tau2, Rng& rng,
                         const ReplicateOptions& opts = {});

struct ErrorRates {
    double type1 = 0.0;
    std::optional<double> type2;  // absent without true interactions
};

ErrorRates error_rates(const ModelSpec& selected, const std::set<Pair>& truth_ies, const std::set<Pair>& candidate_pairs);

struct GridConfig {
    std::optional<std::string> base;    // CSV path, relative to the config file
    std::optional<std::string> schema;  // schema JSON path, idem
    std::vector<std::string> settings;
    std::vector<std::size_t> k_values{13, 23, 41, 100};
    std::vector<double> tau2_values{0.0, 0.141, 0.195, 0.233, 0.317};
    std::size_t replications = 100;
    std::vector<Method> methods;
    std::vector<double> lambda_values{0.5};
    std::size_t B = 100;
    std::uint64_t master_seed = 0;

    static GridConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// Seed of one replicate cell; independent of grid ordering.
std::uint64_t cell_seed(std::uint64_t master_seed, const std::string& setting, std::size_t k, double tau2, std::size_t rep);

struct ErrorRow {
    std::string setting;
    std::size_t k = 0;
    double tau2 = 0.0;
    Method method = Method::uni_test;
    std::optional<double> lambda;
    std::optional<double> type1;  // absent when every replicate failed
    std::optional<double> type2;
    std::size_t n_reps = 0;       // successful replicates
    std::size_t n_failed = 0;
    std::optional<double> mean_selected_ies;
    std::optional<double> mean_selected_mes;
    std::string note;             // first failure message
};

struct ErrorReport {
    std::vector<ErrorRow> rows;
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

/// Runs every (setting, k, tau2, rep) cell with every configured method and
/// averages the error rates per (setting, k, tau2, method, lambda). `raw_base`
/// is imputed and standardized first. Output does not depend on `jobs`.
ErrorReport run_grid(const MetaDataset& raw_base, const GridConfig& config, std::size_t jobs = 1);

}  // namespace metaselect
