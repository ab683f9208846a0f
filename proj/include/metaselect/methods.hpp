#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "metaselect/data.hpp"
#include "metaselect/ensemble.hpp"
#include "metaselect/linear_select.hpp"
#include "metaselect/metacart.hpp"

namespace metaselect {

// The eight selection procedures in their fixed comparison order.
enum class Method { uni_test, multi_test, aicc, bic, femrt, remrt, sfemrt, sremrt };

const std::vector<Method>& all_methods();
std::string to_string(Method m);
/// Accepts the snake_case names and the dashed spellings (uni-test, ...).
Method method_from_string(const std::string& s);
/// Column label for reports: uni-test, multi-test, AICc, BIC, FEmrt, ...
std::string method_label(Method m);
bool is_ensemble(Method m);
bool is_tree(Method m);

struct MethodOptions {
    double alpha = 0.05;
    std::vector<double> lambdas{0.5};  // ensembles only
    std::size_t B = 100;
    std::optional<double> prune_c;     // single trees; empty means default_prune_c
    TreeControls controls{};
    std::uint64_t seed = 0;            // CV folds and bootstrap streams
    std::size_t jobs = 1;
};

struct MethodOutput {
    // One spec per lambda for ensembles, a single spec otherwise.
    std::vector<double> lambdas;
    std::vector<ModelSpec> specs;
    std::optional<SelectionResult> selection;
    std::optional<Tree> tree;
    std::optional<SelectionMatrix> matrix;
};

MethodOutput run_method(const MetaDataset& ds, Method m, const MethodOptions& opts);

}  // namespace metaselect
