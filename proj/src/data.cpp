#include "metaselect/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "metaselect/errors.hpp"

namespace metaselect {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return std::string(s.substr(b, e - b));
}

// RFC 4180-ish: quoted fields may contain commas and doubled quotes.
// Embedded newlines inside quotes are not supported.
std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool is_missing(const std::string& cell) {
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "." || cell == "null";
}

std::optional<double> parse_double(const std::string& cell) {
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    if (first != last && *first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
    return value;
}

std::string fmt_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// MetaDataset

std::size_t MetaDataset::index_of(const std::string& name) const {
    for (std::size_t j = 0; j < covariates.size(); ++j) {
        if (covariates[j].name == name) return j;
    }
    throw DataError(DataError::Kind::MissingColumn, "unknown covariate '" + name + "'");
}

Eigen::VectorXd MetaDataset::y() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(k()));
    for (std::size_t i = 0; i < k(); ++i) out(static_cast<Eigen::Index>(i)) = studies[i].y;
    return out;
}

Eigen::VectorXd MetaDataset::v() const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(k()));
    for (std::size_t i = 0; i < k(); ++i) out(static_cast<Eigen::Index>(i)) = studies[i].v;
    return out;
}

std::vector<double> MetaDataset::column(std::size_t j) const {
    if (j >= p()) throw DataError(DataError::Kind::IndexOutOfRange, "covariate index out of range");
    std::vector<double> out;
    out.reserve(k());
    for (const auto& s : studies) out.push_back(s.x[j]);
    return out;
}

bool MetaDataset::complete() const {
    for (const auto& s : studies) {
        if (!std::isfinite(s.y) || !std::isfinite(s.v)) return false;
        for (double x : s.x) {
            if (!std::isfinite(x)) return false;
        }
    }
    return true;
}

MetaDataset MetaDataset::subset(const std::vector<std::size_t>& rows) const {
    MetaDataset out;
    out.covariates = covariates;
    out.studies.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= k()) throw DataError(DataError::Kind::IndexOutOfRange, "row index out of range");
        out.studies.push_back(studies[r]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// ModelSpec

Pair make_pair_sorted(std::size_t a, std::size_t b) {
    if (a == b) throw DataError(DataError::Kind::InvalidArgument, "interaction of a covariate with itself");
    return a < b ? Pair{a, b} : Pair{b, a};
}

bool ModelSpec::marginality_closed() const {
    for (const auto& [a, b] : interactions) {
        if (a == b || a > b) return false;
        if (!mains.count(a) || !mains.count(b)) return false;
    }
    return true;
}

ModelSpec ModelSpec::closure() const {
    ModelSpec out = *this;
    for (const auto& [a, b] : interactions) {
        out.mains.insert(a);
        out.mains.insert(b);
    }
    return out;
}

bool ModelSpec::subset_of(const ModelSpec& other) const {
    return std::includes(other.mains.begin(), other.mains.end(), mains.begin(), mains.end()) &&
           std::includes(other.interactions.begin(), other.interactions.end(), interactions.begin(),
                         interactions.end());
}

std::string pair_name(const MetaDataset& ds, const Pair& pr) {
    return ds.covariates.at(pr.first).name + ":" + ds.covariates.at(pr.second).name;
}

std::string describe(const MetaDataset& ds, const ModelSpec& spec) {
    std::string out = "{";
    bool first = true;
    for (std::size_t j : spec.mains) {
        out += (first ? "" : ", ") + ds.covariates.at(j).name;
        first = false;
    }
    out += "; ";
    first = true;
    for (const auto& pr : spec.interactions) {
        out += (first ? "" : ", ") + pair_name(ds, pr);
        first = false;
    }
    return out + "}";
}

nlohmann::json spec_to_json(const MetaDataset& ds, const ModelSpec& spec) {
    nlohmann::json j;
    j["mains"] = nlohmann::json::array();
    for (std::size_t m : spec.mains) j["mains"].push_back(ds.covariates.at(m).name);
    j["interactions"] = nlohmann::json::array();
    for (const auto& pr : spec.interactions) j["interactions"].push_back(pair_name(ds, pr));
    return j;
}

namespace {

Pair parse_pair(const MetaDataset& ds, const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw DataError(DataError::Kind::InvalidArgument, "interaction '" + text + "' must be written A:B");
    }
    return make_pair_sorted(ds.index_of(trim(text.substr(0, colon))), ds.index_of(trim(text.substr(colon + 1))));
}

}  // namespace

ModelSpec spec_from_json(const MetaDataset& ds, const nlohmann::json& j) {
    ModelSpec spec;
    for (const auto& m : j.value("mains", nlohmann::json::array())) spec.mains.insert(ds.index_of(m.get<std::string>()));
    for (const auto& ie : j.value("interactions", nlohmann::json::array())) {
        if (ie.is_string()) {
            spec.interactions.insert(parse_pair(ds, ie.get<std::string>()));
        } else {
            spec.interactions.insert(
                make_pair_sorted(ds.index_of(ie.at(0).get<std::string>()), ds.index_of(ie.at(1).get<std::string>())));
        }
    }
    return spec;
}

ModelSpec parse_effects(const MetaDataset& ds, const std::string& effects) {
    ModelSpec spec;
    std::stringstream ss(effects);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        if (item.find(':') != std::string::npos) {
            spec.interactions.insert(parse_pair(ds, item));
        } else {
            spec.mains.insert(ds.index_of(item));
        }
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Design matrix

DesignMatrix build_design(const MetaDataset& ds, const ModelSpec& spec) {
    const std::size_t p = ds.p();
    for (std::size_t j : spec.mains) {
        if (j >= p) throw DataError(DataError::Kind::IndexOutOfRange, "main effect index out of range");
    }
    for (const auto& [a, b] : spec.interactions) {
        if (a >= p || b >= p) throw DataError(DataError::Kind::IndexOutOfRange, "interaction index out of range");
    }
    if (!spec.marginality_closed()) {
        throw DataError(DataError::Kind::MarginalityViolation, "interaction without both main effects: " + describe(ds, spec));
    }

    const auto k = static_cast<Eigen::Index>(ds.k());
    DesignMatrix X;
    X.values.resize(k, static_cast<Eigen::Index>(spec.parameter_count()));
    X.columns.reserve(spec.parameter_count());

    X.values.col(0).setOnes();
    X.columns.emplace_back("(Intercept)");
    Eigen::Index c = 1;
    for (std::size_t j : spec.mains) {
        for (Eigen::Index i = 0; i < k; ++i) X.values(i, c) = ds.studies[static_cast<std::size_t>(i)].x[j];
        X.columns.push_back(ds.covariates[j].name);
        ++c;
    }
    for (const auto& pr : spec.interactions) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto& x = ds.studies[static_cast<std::size_t>(i)].x;
            X.values(i, c) = x[pr.first] * x[pr.second];
        }
        X.columns.push_back(pair_name(ds, pr));
        ++c;
    }
    return X;
}

std::size_t main_column(const ModelSpec& spec, std::size_t j) {
    auto it = spec.mains.find(j);
    if (it == spec.mains.end()) throw DataError(DataError::Kind::IndexOutOfRange, "main effect not in spec");
    return 1 + static_cast<std::size_t>(std::distance(spec.mains.begin(), it));
}

std::size_t interaction_column(const ModelSpec& spec, const Pair& pr) {
    auto it = spec.interactions.find(pr);
    if (it == spec.interactions.end()) throw DataError(DataError::Kind::IndexOutOfRange, "interaction not in spec");
    return 1 + spec.mains.size() + static_cast<std::size_t>(std::distance(spec.interactions.begin(), it));
}

// ---------------------------------------------------------------------------
// Schema

Schema Schema::from_json(const nlohmann::json& j) {
    Schema s;
    s.y_column = j.value("y", std::string("y"));
    s.v_column = j.value("v", std::string("v"));
    if (j.contains("n") && !j["n"].is_null()) s.n_column = j["n"].get<std::string>();
    for (const auto& c : j.at("covariates")) {
        CovariateDecl d;
        d.name = c.at("name").get<std::string>();
        const auto scale = c.value("scale", std::string("metric"));
        if (scale == "metric") {
            d.scale = Scale::metric;
        } else if (scale == "binary") {
            d.scale = Scale::binary;
        } else {
            throw DataError(DataError::Kind::MultiLevelCategorical,
                            "covariate '" + d.name + "': unsupported scale '" + scale + "' (metric or binary)");
        }
        if (c.contains("reference") && !c["reference"].is_null()) {
            d.reference = c["reference"].is_string() ? c["reference"].get<std::string>() : c["reference"].dump();
        }
        s.covariates.push_back(std::move(d));
    }
    return s;
}

nlohmann::json Schema::to_json() const {
    nlohmann::json j;
    j["y"] = y_column;
    j["v"] = v_column;
    if (n_column) j["n"] = *n_column;
    j["covariates"] = nlohmann::json::array();
    for (const auto& c : covariates) {
        nlohmann::json cj{{"name", c.name}, {"scale", c.scale == Scale::metric ? "metric" : "binary"}};
        if (c.reference) cj["reference"] = *c.reference;
        j["covariates"].push_back(cj);
    }
    return j;
}

Schema load_schema(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Kind::InvalidArgument, "cannot open schema '" + path + "'");
    try {
        return Schema::from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(DataError::Kind::InvalidArgument, "schema '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// CSV ingestion

MetaDataset load_dataset(std::istream& csv, const Schema& schema, const LoadOptions& opts) {
    std::string line;
    if (!std::getline(csv, line)) throw DataError(DataError::Kind::MissingColumn, "empty CSV (no header row)");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
    const auto header = split_csv_line(line);

    auto find_col = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw DataError(DataError::Kind::MissingColumn, "missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };

    const std::size_t y_col = find_col(schema.y_column);
    const std::size_t v_col = find_col(schema.v_column);
    std::optional<std::size_t> n_col;
    if (schema.n_column) n_col = find_col(*schema.n_column);
    std::vector<std::size_t> x_cols;
    for (const auto& c : schema.covariates) x_cols.push_back(find_col(c.name));

    const bool keep = opts.missing == MissingPolicy::keep;
    const std::size_t p = schema.covariates.size();

    struct RawRow {
        std::size_t line_no;
        std::vector<std::string> cells;
    };
    std::vector<RawRow> rows;
    std::size_t line_no = 1;
    while (std::getline(csv, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError(DataError::Kind::NonNumericValue, "line " + std::to_string(line_no) + ": expected " +
                                                                  std::to_string(header.size()) + " fields, got " +
                                                                  std::to_string(cells.size()));
        }
        bool incomplete = is_missing(cells[y_col]) || is_missing(cells[v_col]) || (n_col && is_missing(cells[*n_col]));
        for (std::size_t c : x_cols) incomplete = incomplete || is_missing(cells[c]);
        if (incomplete) {
            if (opts.missing == MissingPolicy::drop_incomplete) continue;
            if (opts.missing == MissingPolicy::reject) {
                throw DataError(DataError::Kind::MissingValue,
                                "line " + std::to_string(line_no) + ": missing value (complete-case data required)");
            }
        }
        rows.push_back({line_no, std::move(cells)});
    }

    MetaDataset ds;
    ds.covariates.resize(p);
    // Binary level maps are fixed from all retained rows before decoding.
    std::vector<std::map<std::string, double>> level_maps(p);
    for (std::size_t j = 0; j < p; ++j) {
        const auto& decl = schema.covariates[j];
        auto& meta = ds.covariates[j];
        meta.name = decl.name;
        meta.scale = decl.scale;
        if (decl.scale != Scale::binary) continue;
        std::set<std::string> levels;
        for (const auto& r : rows) {
            if (!is_missing(r.cells[x_cols[j]])) levels.insert(r.cells[x_cols[j]]);
        }
        if (levels.size() > 2) {
            throw DataError(DataError::Kind::MultiLevelCategorical,
                            "covariate '" + decl.name + "' declared binary but has " + std::to_string(levels.size()) +
                                " levels");
        }
        std::string ref = decl.reference.value_or(levels.empty() ? std::string("0") : *levels.begin());
        if (!levels.empty() && !levels.count(ref)) {
            if (levels.size() == 2) {
                throw DataError(DataError::Kind::InvalidArgument,
                                "covariate '" + decl.name + "': reference level '" + ref + "' not present");
            }
        }
        meta.reference_level = ref;
        level_maps[j][ref] = 0.0;
        for (const auto& l : levels) {
            if (l != ref) {
                meta.other_level = l;
                level_maps[j][l] = 1.0;
            }
        }
    }

    auto numeric = [&](const RawRow& r, std::size_t col, const std::string& what) -> double {
        const auto& cell = r.cells[col];
        if (is_missing(cell)) return kNaN;
        auto v = parse_double(cell);
        if (!v) {
            throw DataError(DataError::Kind::NonNumericValue,
                            "line " + std::to_string(r.line_no) + ": non-numeric " + what + " '" + cell + "'");
        }
        return *v;
    };

    ds.studies.reserve(rows.size());
    for (const auto& r : rows) {
        StudyRecord s;
        s.y = numeric(r, y_col, "'" + schema.y_column + "'");
        s.v = numeric(r, v_col, "'" + schema.v_column + "'");
        if (!(std::isnan(s.v) && keep) && !(s.v > 0.0)) {
            throw DataError(DataError::Kind::NonPositiveVariance,
                            "line " + std::to_string(r.line_no) + ": sampling variance must be > 0");
        }
        if (n_col) {
            double n = numeric(r, *n_col, "'" + *schema.n_column + "'");
            if (!std::isnan(n)) {
                if (n < 1.0 || std::floor(n) != n) {
                    throw DataError(DataError::Kind::NonNumericValue,
                                    "line " + std::to_string(r.line_no) + ": sample size must be a positive integer");
                }
                s.n = static_cast<int>(n);
            }
        }
        s.x.resize(p);
        for (std::size_t j = 0; j < p; ++j) {
            const auto& cell = r.cells[x_cols[j]];
            if (schema.covariates[j].scale == Scale::binary) {
                s.x[j] = is_missing(cell) ? kNaN : level_maps[j].at(cell);
            } else {
                s.x[j] = numeric(r, x_cols[j], "covariate '" + schema.covariates[j].name + "'");
            }
        }
        ds.studies.push_back(std::move(s));
    }
    return ds;
}

MetaDataset load_dataset(const std::string& path, const Schema& schema, const LoadOptions& opts) {
    std::ifstream in(path);
    if (!in) throw DataError(DataError::Kind::InvalidArgument, "cannot open data file '" + path + "'");
    return load_dataset(in, schema, opts);
}

void write_dataset_csv(const MetaDataset& ds, std::ostream& out) {
    const bool with_n = !ds.studies.empty() &&
                        std::all_of(ds.studies.begin(), ds.studies.end(), [](const StudyRecord& s) { return s.n.has_value(); });
    out << "y,v";
    if (with_n) out << ",n";
    for (const auto& c : ds.covariates) out << ',' << c.name;
    out << '\n';
    for (const auto& s : ds.studies) {
        out << fmt_double(s.y) << ',' << fmt_double(s.v);
        if (with_n) out << ',' << *s.n;
        for (std::size_t j = 0; j < ds.p(); ++j) {
            out << ',';
            const double x = s.x[j];
            if (std::isnan(x)) {
                out << "NA";
            } else if (ds.covariates[j].scale == Scale::binary) {
                const auto& c = ds.covariates[j];
                out << (x == 0.0 ? (c.reference_level.empty() ? "0" : c.reference_level)
                                 : (c.other_level.empty() ? "1" : c.other_level));
            } else {
                out << fmt_double(x);
            }
        }
        out << '\n';
    }
}

Schema schema_for(const MetaDataset& ds) {
    Schema s;
    if (!ds.studies.empty() &&
        std::all_of(ds.studies.begin(), ds.studies.end(), [](const StudyRecord& r) { return r.n.has_value(); })) {
        s.n_column = "n";
    }
    for (const auto& c : ds.covariates) {
        CovariateDecl d{c.name, c.scale, std::nullopt};
        if (c.scale == Scale::binary) d.reference = c.reference_level.empty() ? "0" : c.reference_level;
        s.covariates.push_back(d);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Preprocessing

MetaDataset standardize(const MetaDataset& ds) {
    MetaDataset out = ds;
    const std::size_t k = ds.k();
    for (std::size_t j = 0; j < ds.p(); ++j) {
        auto& meta = out.covariates[j];
        if (meta.scale != Scale::metric) continue;
        double mean = 0.0;
        for (const auto& s : ds.studies) {
            if (!std::isfinite(s.x[j])) {
                throw DataError(DataError::Kind::MissingValue, "cannot standardize '" + meta.name + "' with missing values");
            }
            mean += s.x[j];
        }
        mean /= static_cast<double>(k);
        double ss = 0.0;
        for (const auto& s : ds.studies) ss += (s.x[j] - mean) * (s.x[j] - mean);
        const double sd = k > 1 ? std::sqrt(ss / static_cast<double>(k - 1)) : 0.0;
        if (!(sd > 0.0)) throw DataError(DataError::Kind::ZeroVariance, "metric covariate '" + meta.name + "' is constant");
        for (auto& s : out.studies) s.x[j] = (s.x[j] - mean) / sd;
        meta.standardization = Standardization{mean, sd};
    }
    return out;
}

boost::multiprecision::cpp_int count_admissible_models(unsigned p) {
    if (p > 20) throw DataError(DataError::Kind::Overflow, "count_admissible_models: p must be <= 20");
    using boost::multiprecision::cpp_int;
    cpp_int total = 0;
    cpp_int binom = 1;  // C(p, k)
    for (unsigned k = 0; k <= p; ++k) {
        if (k > 0) binom = binom * (p - k + 1) / k;
        total += binom * (cpp_int(1) << (k * (k - 1) / 2));
    }
    return total;
}

std::vector<Pair> all_pairs(std::size_t p) {
    std::vector<Pair> out;
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a + 1; b < p; ++b) out.emplace_back(a, b);
    }
    return out;
}

}  // namespace metaselect
