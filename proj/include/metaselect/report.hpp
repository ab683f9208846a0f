#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metaselect/data.hpp"
#include "metaselect/estimation.hpp"
#include "metaselect/methods.hpp"

namespace metaselect {

struct ReportColumn {
    Method method;
    ModelSpec spec;
    std::optional<FitResult> fit;  // REML refit of the selected model
    std::string error;             // method or refit failure
};

struct MethodReport {
    std::vector<ReportColumn> columns;  // fixed method order
    std::size_t k = 0;
    double lambda = 0.5;
    std::size_t B = 100;
    std::uint64_t seed = 0;
};

/// Runs all eight procedures on `ds` and refits each selected model.
MethodReport build_report(const MetaDataset& ds, const MethodOptions& opts);

/// Markdown table with effects as rows and methods as columns; an effect a
/// method did not select is left blank.
std::string render_markdown(const MetaDataset& ds, const MethodReport& report);

}  // namespace metaselect
