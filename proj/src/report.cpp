#include "metaselect/report.hpp"

#include <cstdio>
#include <sstream>

namespace metaselect {

MethodReport build_report(const MetaDataset& ds, const MethodOptions& opts) {
    MethodReport rep;
    rep.k = ds.k();
    rep.lambda = opts.lambdas.empty() ? 0.5 : opts.lambdas.front();
    rep.B = opts.B;
    rep.seed = opts.seed;
    MethodOptions mo = opts;
    mo.lambdas = {rep.lambda};
    for (Method m : all_methods()) {
        ReportColumn col{m, {}, std::nullopt, {}};
        try {
            mo.seed = opts.seed;
            col.spec = run_method(ds, m, mo).specs.front();
            col.fit = fit(ds, col.spec);
        } catch (const std::exception& e) {
            col.error = e.what();
        }
        rep.columns.push_back(std::move(col));
    }
    return rep;
}

namespace {

std::string cell(const ReportColumn& c, const std::string& column) {
    if (!c.fit) return "";
    for (std::size_t i = 0; i < c.fit->columns.size(); ++i) {
        if (c.fit->columns[i] == column) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2f", c.fit->beta(static_cast<Eigen::Index>(i)));
            return buf;
        }
    }
    return "";
}

}  // namespace

std::string render_markdown(const MetaDataset& ds, const MethodReport& report) {
    ModelSpec all;
    for (const auto& c : report.columns) {
        all.mains.insert(c.spec.mains.begin(), c.spec.mains.end());
        all.interactions.insert(c.spec.interactions.begin(), c.spec.interactions.end());
    }
    std::ostringstream out;
    out << "# Selected effects and REML estimates\n\n";
    out << "k = " << report.k << " studies; ensembles use B = " << report.B << ", lambda = " << report.lambda
        << ", seed = " << report.seed << ".\n\n";
    out << "| Effect |";
    for (const auto& c : report.columns) out << ' ' << method_label(c.method) << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < report.columns.size(); ++i) out << "---:|";
    out << '\n';

    auto row = [&](const std::string& label, const std::string& column) {
        out << "| " << label << " |";
        for (const auto& c : report.columns) out << ' ' << cell(c, column) << " |";
        out << '\n';
    };
    row("(Intercept)", "(Intercept)");
    for (std::size_t j : all.mains) row(ds.covariates[j].name, ds.covariates[j].name);
    for (const auto& pr : all.interactions) row(pair_name(ds, pr), pair_name(ds, pr));

    out << "| tau2 |";
    for (const auto& c : report.columns) {
        if (c.fit) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3f", c.fit->tau2);
            out << ' ' << buf << " |";
        } else {
            out << "  |";
        }
    }
    out << '\n';

    bool any_error = false;
    for (const auto& c : report.columns) any_error = any_error || !c.error.empty();
    if (any_error) {
        out << "\nFailures:\n\n";
        for (const auto& c : report.columns) {
            if (!c.error.empty()) out << "- " << method_label(c.method) << ": " << c.error << '\n';
        }
    }
    return out.str();
}

}  // namespace metaselect
