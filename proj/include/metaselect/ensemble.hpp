#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "metaselect/data.hpp"
#include "metaselect/metacart.hpp"

namespace metaselect {

struct EnsembleOptions {
    std::size_t B = 100;
    double lambda = 0.5;
    std::uint64_t seed = 0;
    TreeControls controls{};  // trees are never pruned inside an ensemble
    std::size_t jobs = 1;
};

// a(i, i): share of trees splitting on covariate i; a(i, j): share of trees
// in which i and j occur together on some root-to-leaf path.
struct SelectionMatrix {
    std::size_t p = 0;
    Eigen::MatrixXd a;
    std::size_t B = 0;
    TreeMode mode = TreeMode::FE;
};

/// B unpruned trees on row bootstrap resamples; resample b draws from a
/// stream derived from (seed, b) so results do not depend on `jobs`.
/// Tree member indices refer to the resample, not to `ds`.
std::vector<Tree> fit_ensemble(const MetaDataset& ds, TreeMode mode, const EnsembleOptions& opts);

SelectionMatrix selection_matrix(const std::vector<Tree>& trees, std::size_t p, TreeMode mode);

/// fit_ensemble followed by selection_matrix without keeping the trees.
SelectionMatrix stability_matrix(const MetaDataset& ds, TreeMode mode, const EnsembleOptions& opts);

ModelSpec threshold_select(const SelectionMatrix& A, double lambda);

/// Largest lambda boundary below which the effect (i, i) or (i, j) is
/// selected by threshold_select; selected iff lambda < selection_level.
double selection_level(const SelectionMatrix& A, std::size_t i, std::size_t j);

std::string heatmap_svg(const SelectionMatrix& A, const std::vector<std::string>& names,
                        const std::vector<double>& lambda_scale = {0.1, 0.3, 0.5, 0.7, 0.9});

std::string matrix_to_csv(const SelectionMatrix& A, const std::vector<std::string>& names);
nlohmann::json matrix_to_json(const SelectionMatrix& A, const std::vector<std::string>& names);

std::vector<std::string> covariate_names(const MetaDataset& ds);

}  // namespace metaselect
