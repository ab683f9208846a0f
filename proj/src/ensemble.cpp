#include "metaselect/ensemble.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "metaselect/errors.hpp"
#include "metaselect/parallel.hpp"
#include "metaselect/rng.hpp"

namespace metaselect {

namespace {

MetaDataset bootstrap(const MetaDataset& ds, std::uint64_t seed, std::size_t b) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(b)});
    std::vector<std::size_t> rows(ds.k());
    for (auto& r : rows) r = uniform_index(rng, ds.k());
    return ds.subset(rows);
}

void accumulate(Eigen::MatrixXd& counts, const ModelSpec& spec) {
    for (std::size_t j : spec.mains) counts(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += 1.0;
    for (const auto& [a, b] : spec.interactions) {
        counts(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += 1.0;
        counts(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) += 1.0;
    }
}

void check_options(const EnsembleOptions& opts) {
    if (opts.B < 1) throw DataError(DataError::Kind::InvalidArgument, "ensemble size B must be >= 1");
}

}  // namespace

std::vector<Tree> fit_ensemble(const MetaDataset& ds, TreeMode mode, const EnsembleOptions& opts) {
    check_options(opts);
    std::vector<Tree> trees(opts.B);
    parallel_for(opts.B, opts.jobs, [&](std::size_t b) { trees[b] = grow_tree(bootstrap(ds, opts.seed, b), mode, opts.controls); });
    return trees;
}

SelectionMatrix selection_matrix(const std::vector<Tree>& trees, std::size_t p, TreeMode mode) {
    SelectionMatrix A;
    A.p = p;
    A.B = trees.size();
    A.mode = mode;
    A.a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (const auto& t : trees) accumulate(A.a, tree_to_spec(t));
    if (!trees.empty()) A.a /= static_cast<double>(trees.size());
    return A;
}

SelectionMatrix stability_matrix(const MetaDataset& ds, TreeMode mode, const EnsembleOptions& opts) {
    check_options(opts);
    std::vector<ModelSpec> specs(opts.B);
    parallel_for(opts.B, opts.jobs, [&](std::size_t b) {
        specs[b] = tree_to_spec(grow_tree(bootstrap(ds, opts.seed, b), mode, opts.controls));
    });
    SelectionMatrix A;
    A.p = ds.p();
    A.B = opts.B;
    A.mode = mode;
    A.a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(A.p), static_cast<Eigen::Index>(A.p));
    for (const auto& s : specs) accumulate(A.a, s);
    A.a /= static_cast<double>(opts.B);
    return A;
}

ModelSpec threshold_select(const SelectionMatrix& A, double lambda) {
    if (!(lambda > 0.0 && lambda < 1.0)) throw DataError(DataError::Kind::InvalidArgument, "lambda must lie in (0, 1)");
    ModelSpec spec;
    for (std::size_t i = 0; i < A.p; ++i) {
        if (A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) > lambda) spec.mains.insert(i);
    }
    for (std::size_t i : spec.mains) {
        for (std::size_t j : spec.mains) {
            if (j <= i) continue;
            const double ii = A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
            const double jj = A.a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
            const double denom = std::min(ii, jj);
            const double ratio = denom > 0.0 ? A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / denom : 0.0;
            if (ratio > lambda) spec.interactions.insert({i, j});
        }
    }
    return spec;
}

double selection_level(const SelectionMatrix& A, std::size_t i, std::size_t j) {
    const auto ii = A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    if (i == j) return ii;
    const auto jj = A.a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    const double denom = std::min(ii, jj);
    const double ratio = denom > 0.0 ? A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) / denom : 0.0;
    return std::min({ii, jj, ratio});
}

std::vector<std::string> covariate_names(const MetaDataset& ds) {
    std::vector<std::string> out;
    for (const auto& c : ds.covariates) out.push_back(c.name);
    return out;
}

// ---------------------------------------------------------------------------
// Export

namespace {

std::string fmt(double x, const char* f) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// Band 0 is "never selected on the scale"; band b > 0 means selected for
// the b smallest scale values. Light grey to dark blue.
std::string band_color(std::size_t band, std::size_t bands) {
    if (band == 0) return "#eeeeee";
    const double t = bands <= 1 ? 1.0 : static_cast<double>(band - 1) / static_cast<double>(bands - 1);
    const int r = static_cast<int>(198 - t * (198 - 8) + 0.5);
    const int g = static_cast<int>(219 - t * (219 - 48) + 0.5);
    const int b = static_cast<int>(239 - t * (239 - 107) + 0.5);
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

}  // namespace

std::string heatmap_svg(const SelectionMatrix& A, const std::vector<std::string>& names, const std::vector<double>& lambda_scale) {
    if (names.size() != A.p) throw DataError(DataError::Kind::InvalidArgument, "heatmap: one name per covariate required");
    std::vector<double> scale = lambda_scale;
    std::sort(scale.begin(), scale.end());
    const int cell = 56;
    const int left = 110;
    const int top = 30;
    const int legend_h = 24 * static_cast<int>(scale.size() + 1) + 20;
    const int width = left + cell * static_cast<int>(A.p) + 190;
    const int height = std::max(top + cell * static_cast<int>(A.p) + 60, top + legend_h);

    std::ostringstream out;
    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n";
    out << "<title>Selection frequency matrix (" << to_string(A.mode) << ", B = " << A.B << ")</title>\n";
    for (std::size_t i = 0; i < A.p; ++i) {
        const int y = top + cell * static_cast<int>(i);
        out << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">" << xml_escape(names[i])
            << "</text>\n";
        for (std::size_t j = 0; j <= i; ++j) {
            const int x = left + cell * static_cast<int>(j);
            const double level = selection_level(A, i, j);
            const auto band = static_cast<std::size_t>(std::count_if(scale.begin(), scale.end(), [&](double l) { return l < level; }));
            const std::string color = band_color(band, scale.size());
            const double value = A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
                << color << "\" stroke=\"#ffffff\" stroke-width=\"1\"/>\n";
            const char* ink = band * 2 > scale.size() ? "#ffffff" : "#000000";
            out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\"" << ink
                << "\">" << fmt(value, "%.2f") << "</text>\n";
        }
    }
    const int label_y = top + cell * static_cast<int>(A.p) + 16;
    for (std::size_t j = 0; j < A.p; ++j) {
        out << "<text x=\"" << left + cell * static_cast<int>(j) + cell / 2 << "\" y=\"" << label_y
            << "\" text-anchor=\"middle\">" << xml_escape(names[j]) << "</text>\n";
    }
    const int lx = left + cell * static_cast<int>(A.p) + 24;
    out << "<text x=\"" << lx << "\" y=\"" << top + 10 << "\">selected for lambda</text>\n";
    for (std::size_t b = 0; b <= scale.size(); ++b) {
        const int ly = top + 20 + 24 * static_cast<int>(b);
        std::string label;
        if (b == 0) {
            label = "never (" + (scale.empty() ? std::string("-") : "&gt;= " + fmt(scale.front(), "%.2f")) + ")";
        } else {
            label = "&lt;= " + fmt(scale[b - 1], "%.2f");
        }
        out << "<rect x=\"" << lx << "\" y=\"" << ly << "\" width=\"18\" height=\"18\" fill=\"" << band_color(b, scale.size())
            << "\" stroke=\"#999999\" stroke-width=\"0.5\"/>\n";
        out << "<text x=\"" << lx + 26 << "\" y=\"" << ly + 13 << "\">" << label << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string matrix_to_csv(const SelectionMatrix& A, const std::vector<std::string>& names) {
    std::ostringstream out;
    out << "variable";
    for (const auto& n : names) out << ',' << n;
    out << '\n';
    for (std::size_t i = 0; i < A.p; ++i) {
        out << names.at(i);
        for (std::size_t j = 0; j < A.p; ++j) out << ',' << fmt(A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), "%.6f");
        out << '\n';
    }
    return out.str();
}

nlohmann::json matrix_to_json(const SelectionMatrix& A, const std::vector<std::string>& names) {
    nlohmann::json j;
    j["mode"] = to_string(A.mode);
    j["B"] = A.B;
    j["variables"] = names;
    j["a"] = nlohmann::json::array();
    for (std::size_t i = 0; i < A.p; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t c = 0; c < A.p; ++c) row.push_back(A.a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)));
        j["a"].push_back(row);
    }
    return j;
}

}  // namespace metaselect
