#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metaselect/data.hpp"

namespace metaselect {

enum class TreeMode { FE, RE };

std::string to_string(TreeMode mode);

struct TreeControls {
    std::size_t minsplit = 20;
    std::size_t minbucket = 7;
    std::size_t maxdepth = 30;
    std::size_t cv_folds = 10;
    double min_qb_gain = 0.0;
    // Relative complexity threshold: a split must raise Q_B by at least
    // cp times the total heterogeneity Q of the root node.
    double cp = 0.01;
};

struct PruneRule {
    double c = 1.0;
    std::uint64_t seed = 0;  // fold assignment for cross-validation
};

/// Recommended c for the c-SE rule given the tree type and study count.
double default_prune_c(TreeMode mode, std::size_t k);

// Metric splits send x <= threshold left; binary splits send level 0 left
// (threshold 0.5).
struct Split {
    std::size_t covariate = 0;
    bool binary = false;
    double threshold = 0.0;

    bool goes_left(double x) const { return x <= threshold; }
};

struct TreeNode {
    std::size_t id = 0;
    std::optional<Split> split;
    std::optional<std::size_t> left;
    std::optional<std::size_t> right;
    std::optional<std::size_t> parent;
    double node_mean = 0.0;
    std::vector<std::size_t> members;
    std::size_t depth = 0;

    bool is_leaf() const { return !split.has_value(); }
};

class Tree {
public:
    TreeMode mode = TreeMode::FE;
    TreeControls controls;
    std::vector<TreeNode> nodes;            // nodes[id]; root has id 0
    std::vector<std::size_t> split_order;   // internal node ids in acceptance order
    std::vector<double> tau2_path;          // RE: tau2 after each accepted split
    double tau2 = 0.0;                      // RE: heterogeneity of the final leaf partition

    const TreeNode& root() const { return nodes.front(); }
    std::vector<std::size_t> leaves() const;
    std::size_t leaf_count() const;
    std::size_t split_count() const { return split_order.size(); }
    /// Leaf reached by covariate vector x.
    const TreeNode& route(const std::vector<double>& x) const;
    double predict(const std::vector<double>& x) const { return route(x).node_mean; }
};

/// Between-subgroup heterogeneity of a partition for study weights w.
double qb(const MetaDataset& ds, const std::vector<std::vector<std::size_t>>& partition, const std::vector<double>& w);

/// DL estimate of tau2 when the groups of `partition` form the design.
double partition_tau2(const MetaDataset& ds, const std::vector<std::vector<std::size_t>>& partition);

struct SplitChoice {
    std::size_t leaf = 0;
    Split split;
    double gain = 0.0;  // increase of Q_B over the current partition
    double qb = 0.0;    // Q_B of the partition after the split
    double tau2 = 0.0;  // RE: DL tau2 of that partition (0 in FE mode)
};

/// Best admissible split of any leaf of `tree`, or nothing.
std::optional<SplitChoice> best_split(const MetaDataset& ds, const Tree& tree);

/// Single-leaf tree (the starting point of growth).
Tree make_root(const MetaDataset& ds, TreeMode mode, const TreeControls& controls);

/// Applies a split to a leaf and refreshes node means (and tau2 in RE mode).
void apply_split(const MetaDataset& ds, Tree& tree, const SplitChoice& choice);

Tree grow_tree(const MetaDataset& ds, TreeMode mode, const TreeControls& controls = {});

/// Cost-complexity pruning with the c-SE rule on cross-validated error.
Tree prune_tree(const MetaDataset& ds, const Tree& tree, const PruneRule& rule);

/// Main effects for every split variable, interactions for every pair of
/// variables sharing a root-to-leaf path.
ModelSpec tree_to_spec(const Tree& tree);

nlohmann::json tree_to_json(const MetaDataset& ds, const Tree& tree);
std::string render_tree(const MetaDataset& ds, const Tree& tree);

}  // namespace metaselect
