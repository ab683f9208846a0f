#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

namespace metaselect {

enum class Scale { metric, binary };

struct Standardization {
    double mean = 0.0;
    double sd = 1.0;
};

struct CovariateMeta {
    std::string name;
    Scale scale = Scale::metric;
    std::optional<Standardization> standardization;
    // Binary covariates: text level coded 0 and the one coded 1.
    std::string reference_level;
    std::string other_level;
};

// One study. Missing covariate cells are NaN; they only survive ingestion
// under MissingPolicy::keep (plasmode base data awaiting imputation).
struct StudyRecord {
    double y = 0.0;
    double v = 1.0;
    std::optional<int> n;
    std::vector<double> x;
};

struct MetaDataset {
    std::vector<StudyRecord> studies;
    std::vector<CovariateMeta> covariates;

    std::size_t k() const { return studies.size(); }
    std::size_t p() const { return covariates.size(); }

    /// Index of the covariate called `name`; throws DataError(MissingColumn).
    std::size_t index_of(const std::string& name) const;

    Eigen::VectorXd y() const;
    Eigen::VectorXd v() const;
    std::vector<double> column(std::size_t j) const;

    bool complete() const;

    /// Rows in the given order (duplicates allowed), covariate metadata kept.
    MetaDataset subset(const std::vector<std::size_t>& rows) const;
};

// Unordered covariate pair, always stored with first < second.
using Pair = std::pair<std::size_t, std::size_t>;
Pair make_pair_sorted(std::size_t a, std::size_t b);

struct ModelSpec {
    std::set<std::size_t> mains;
    std::set<Pair> interactions;

    bool marginality_closed() const;
    /// Adds the main effects of every interaction.
    ModelSpec closure() const;
    std::size_t parameter_count() const { return 1 + mains.size() + interactions.size(); }
    bool empty() const { return mains.empty() && interactions.empty(); }
    bool subset_of(const ModelSpec& other) const;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

std::string pair_name(const MetaDataset& ds, const Pair& pr);
std::string describe(const MetaDataset& ds, const ModelSpec& spec);

nlohmann::json spec_to_json(const MetaDataset& ds, const ModelSpec& spec);
/// Accepts {"mains": [names], "interactions": [["A","B"], ...]} or "A:B" strings.
ModelSpec spec_from_json(const MetaDataset& ds, const nlohmann::json& j);

/// Parses "A,B,A:B" style effect lists into a spec (not closed automatically).
ModelSpec parse_effects(const MetaDataset& ds, const std::string& effects);

// Columns: intercept, mains in index order, interactions in lexicographic
// pair order. Interaction columns are products of the raw covariate columns.
struct DesignMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> columns;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

DesignMatrix build_design(const MetaDataset& ds, const ModelSpec& spec);

/// Column of `pr` inside build_design(ds, spec); spec must contain it.
std::size_t interaction_column(const ModelSpec& spec, const Pair& pr);
std::size_t main_column(const ModelSpec& spec, std::size_t j);

// ---------------------------------------------------------------------------
// Ingestion

struct CovariateDecl {
    std::string name;
    Scale scale = Scale::metric;
    std::optional<std::string> reference;
};

struct Schema {
    std::string y_column = "y";
    std::string v_column = "v";
    std::optional<std::string> n_column;
    std::vector<CovariateDecl> covariates;

    static Schema from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

Schema load_schema(const std::string& path);

enum class MissingPolicy {
    reject,           // MissingValue error on any empty/NA cell
    drop_incomplete,  // complete-case restriction
    keep,             // covariate NaNs kept for later imputation
};

struct LoadOptions {
    MissingPolicy missing = MissingPolicy::reject;
};

MetaDataset load_dataset(std::istream& csv, const Schema& schema, const LoadOptions& opts = {});
MetaDataset load_dataset(const std::string& path, const Schema& schema, const LoadOptions& opts = {});

/// Writes y, v, n (when present for every study) and the covariates with
/// binary columns as their text levels. schema_for() gives a matching schema.
void write_dataset_csv(const MetaDataset& ds, std::ostream& out);
Schema schema_for(const MetaDataset& ds);

/// Centers and scales metric covariates (sample sd, denominator k - 1).
MetaDataset standardize(const MetaDataset& ds);

/// Number of marginality-respecting models over p covariates.
boost::multiprecision::cpp_int count_admissible_models(unsigned p);

/// All C(p, 2) pairs in lexicographic order.
std::vector<Pair> all_pairs(std::size_t p);

}  // namespace metaselect
