// metaselect: command-line front end.
//
//   metaselect fit      --data d.csv --schema s.json --effects "A,B,A:B"
//   metaselect select   --data d.csv --schema s.json --method uni-test
//   metaselect tree     --data d.csv --schema s.json --mode re --seed 1
//   metaselect ensemble --data d.csv --schema s.json --mode re --B 100 --lambda 0.5 --seed 7
//   metaselect simulate --grid grid.json
//   metaselect report   --data d.csv --schema s.json --seed 1
//
// Exit codes: 0 success, 2 usage, 3 data, 4 numerical.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "metaselect/data.hpp"
#include "metaselect/ensemble.hpp"
#include "metaselect/errors.hpp"
#include "metaselect/estimation.hpp"
#include "metaselect/linear_select.hpp"
#include "metaselect/metacart.hpp"
#include "metaselect/methods.hpp"
#include "metaselect/parallel.hpp"
#include "metaselect/plasmode.hpp"
#include "metaselect/report.hpp"

namespace fs = std::filesystem;
using namespace metaselect;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataArgs {
    std::string data;
    std::string schema;
    std::string missing = "reject";
    std::string out = ".";
    bool raw = false;
};

void add_data_args(CLI::App* cmd, DataArgs& a) {
    cmd->add_option("--data", a.data, "CSV file with one row per study")->required();
    cmd->add_option("--schema", a.schema, "JSON schema naming y, v, n and the covariates")->required();
    cmd->add_option("--missing", a.missing, "Missing covariate cells: reject or drop (complete cases)")
        ->check(CLI::IsMember({"reject", "drop"}));
    cmd->add_option("--out", a.out, "Output directory");
    cmd->add_flag("--no-standardize", a.raw, "Keep metric covariates on their original scale");
}

MetaDataset load(const DataArgs& a) {
    LoadOptions lo;
    lo.missing = a.missing == "drop" ? MissingPolicy::drop_incomplete : MissingPolicy::reject;
    MetaDataset ds = load_dataset(a.data, load_schema(a.schema), lo);
    return a.raw ? ds : standardize(ds);
}

fs::path out_file(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    return fs::path(dir) / name;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError(DataError::Kind::InvalidArgument, "cannot write '" + path.string() + "'");
    f << text;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

TreeMode parse_mode(const std::string& s) { return s == "re" ? TreeMode::RE : TreeMode::FE; }

std::size_t resolve_jobs(std::size_t flag) {
    if (const char* env = std::getenv("METASELECT_JOBS")) {
        try {
            const long n = std::stol(env);
            if (n < 1) throw UsageError("METASELECT_JOBS must be a positive integer");
            return static_cast<std::size_t>(n);
        } catch (const std::logic_error&) {
            throw UsageError("METASELECT_JOBS must be a positive integer");
        }
    }
    return flag == 0 ? default_jobs() : flag;
}

void add_tree_controls(CLI::App* cmd, TreeControls& c) {
    cmd->add_option("--minsplit", c.minsplit, "Smallest node that may be split")->capture_default_str();
    cmd->add_option("--minbucket", c.minbucket, "Smallest admissible child")->capture_default_str();
    cmd->add_option("--maxdepth", c.maxdepth, "Maximum depth")->capture_default_str();
    cmd->add_option("--cv", c.cv_folds, "Cross-validation folds for pruning")->capture_default_str();
    cmd->add_option("--cp", c.cp, "Minimum relative Q_B gain of a split")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interaction selection for random effects meta-regression"};
    app.require_subcommand(1);
    std::size_t jobs_flag = 0;
    app.add_option("--jobs", jobs_flag, "Worker threads (default: all cores; METASELECT_JOBS overrides)");

    // fit
    DataArgs fit_args;
    std::string effects, spec_path, tau2_method = "reml";
    auto* fit_cmd = app.add_subcommand("fit", "Fit one meta-regression model (writes fit.json)");
    add_data_args(fit_cmd, fit_args);
    fit_cmd->add_option("--effects", effects, "Effects, e.g. \"Age,Disc,Age:Disc\"");
    fit_cmd->add_option("--spec", spec_path, "Model spec JSON {mains, interactions}");
    fit_cmd->add_option("--tau2", tau2_method, "Heterogeneity estimator: reml or dl")->check(CLI::IsMember({"reml", "dl"}));

    // select
    DataArgs sel_args;
    std::string sel_method = "uni-test";
    double alpha = 0.05;
    auto* sel_cmd = app.add_subcommand("select", "Linear selection (writes selection.json, selection_trace.csv)");
    add_data_args(sel_cmd, sel_args);
    sel_cmd->add_option("--method", sel_method, "uni-test, multi-test, aicc or bic")
        ->check(CLI::IsMember({"uni-test", "multi-test", "aicc", "bic"}));
    sel_cmd->add_option("--alpha", alpha, "Significance level for the testing methods")->capture_default_str();

    // tree
    DataArgs tree_args;
    std::string tree_mode = "re";
    std::optional<double> prune_c;
    std::optional<std::uint64_t> tree_seed;
    TreeControls tree_controls;
    auto* tree_cmd = app.add_subcommand("tree", "Grow and prune one meta-CART (writes tree.json, tree.txt)");
    add_data_args(tree_cmd, tree_args);
    tree_cmd->add_option("--mode", tree_mode, "fe or re")->check(CLI::IsMember({"fe", "re"}));
    tree_cmd->add_option("--prune-c", prune_c, "c of the c-SE rule (default depends on mode and k; 0 disables)");
    tree_cmd->add_option("--seed", tree_seed, "Seed for the cross-validation folds");
    add_tree_controls(tree_cmd, tree_controls);

    // ensemble
    DataArgs ens_args;
    std::string ens_mode = "re";
    std::size_t B = 100;
    double lambda = 0.5;
    std::optional<std::uint64_t> ens_seed;
    TreeControls ens_controls;
    auto* ens_cmd = app.add_subcommand("ensemble", "Stability-selected tree ensemble (writes amatrix.csv/.json/.svg)");
    add_data_args(ens_cmd, ens_args);
    ens_cmd->add_option("--mode", ens_mode, "fe or re")->check(CLI::IsMember({"fe", "re"}));
    ens_cmd->add_option("--B", B, "Number of bootstrap trees")->capture_default_str()->check(CLI::PositiveNumber);
    ens_cmd->add_option("--lambda", lambda, "Selection threshold in (0, 1)")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    ens_cmd->add_option("--seed", ens_seed, "Seed for the bootstrap streams")->required();
    add_tree_controls(ens_cmd, ens_controls);

    // simulate
    std::string grid_path, sim_out = ".", sim_data, sim_schema;
    auto* sim_cmd = app.add_subcommand("simulate", "Run a plasmode grid (writes grid_report.csv, grid_report.json)");
    sim_cmd->add_option("--grid", grid_path, "Grid configuration JSON")->required();
    sim_cmd->add_option("--data", sim_data, "Base CSV (overrides the grid file)");
    sim_cmd->add_option("--schema", sim_schema, "Base schema (overrides the grid file)");
    sim_cmd->add_option("--out", sim_out, "Output directory");

    // report
    DataArgs rep_args;
    double rep_alpha = 0.05, rep_lambda = 0.5;
    std::size_t rep_B = 100;
    std::optional<std::uint64_t> rep_seed;
    auto* rep_cmd = app.add_subcommand("report", "Compare all methods side by side (writes report.md)");
    add_data_args(rep_cmd, rep_args);
    rep_cmd->add_option("--alpha", rep_alpha, "Significance level")->capture_default_str();
    rep_cmd->add_option("--B", rep_B, "Trees per ensemble")->capture_default_str()->check(CLI::PositiveNumber);
    rep_cmd->add_option("--lambda", rep_lambda, "Ensemble threshold")->capture_default_str()->check(CLI::Range(0.0, 1.0));
    rep_cmd->add_option("--seed", rep_seed, "Seed for pruning folds and bootstrap streams")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const std::size_t jobs = resolve_jobs(jobs_flag);

        if (*fit_cmd) {
            const MetaDataset ds = load(fit_args);
            ModelSpec spec;
            if (!spec_path.empty()) {
                std::ifstream f(spec_path);
                if (!f) throw DataError(DataError::Kind::InvalidArgument, "cannot open spec '" + spec_path + "'");
                spec = spec_from_json(ds, nlohmann::json::parse(f));
            } else {
                spec = parse_effects(ds, effects);
            }
            FitOptions fo;
            fo.tau2_method = tau2_method == "dl" ? Tau2Method::DL : Tau2Method::REML;
            const FitResult res = fit(ds, spec, fo);
            write_json(out_file(fit_args.out, "fit.json"), fit_to_json(ds, res));
        } else if (*sel_cmd) {
            const MetaDataset ds = load(sel_args);
            SelectOptions so;
            so.alpha = alpha;
            SelectionResult res;
            if (sel_method == "uni-test") {
                res = univariate_select(ds, so);
            } else if (sel_method == "multi-test") {
                res = forward_test_select(ds, so);
            } else {
                so.criterion = sel_method == "aicc" ? Criterion::AICc : Criterion::BIC;
                res = forward_ic_select(ds, so);
            }
            write_json(out_file(sel_args.out, "selection.json"), selection_to_json(ds, res));
            write_text(out_file(sel_args.out, "selection_trace.csv"), trace_to_csv(ds, res));
        } else if (*tree_cmd) {
            const MetaDataset ds = load(tree_args);
            const TreeMode mode = parse_mode(tree_mode);
            PruneRule rule;
            rule.c = prune_c.value_or(default_prune_c(mode, ds.k()));
            if (rule.c > 0.0 && !tree_seed) throw UsageError("tree: --seed is required unless --prune-c 0");
            rule.seed = tree_seed.value_or(0);
            const Tree tree = prune_tree(ds, grow_tree(ds, mode, tree_controls), rule);
            nlohmann::json j = tree_to_json(ds, tree);
            j["prune_c"] = rule.c;
            write_json(out_file(tree_args.out, "tree.json"), j);
            write_text(out_file(tree_args.out, "tree.txt"), render_tree(ds, tree));
        } else if (*ens_cmd) {
            if (!(lambda > 0.0 && lambda < 1.0)) throw UsageError("ensemble: --lambda must lie in (0, 1)");
            const MetaDataset ds = load(ens_args);
            EnsembleOptions eo;
            eo.B = B;
            eo.lambda = lambda;
            eo.seed = *ens_seed;
            eo.controls = ens_controls;
            eo.jobs = jobs;
            const SelectionMatrix A = stability_matrix(ds, parse_mode(ens_mode), eo);
            const auto names = covariate_names(ds);
            const ModelSpec spec = threshold_select(A, lambda);
            write_text(out_file(ens_args.out, "amatrix.csv"), matrix_to_csv(A, names));
            nlohmann::json j = matrix_to_json(A, names);
            j["lambda"] = lambda;
            j["seed"] = *ens_seed;
            j["selected"] = spec_to_json(ds, spec);
            write_json(out_file(ens_args.out, "amatrix.json"), j);
            write_text(out_file(ens_args.out, "amatrix.svg"), heatmap_svg(A, names));
        } else if (*sim_cmd) {
            std::ifstream f(grid_path);
            if (!f) throw DataError(DataError::Kind::InvalidArgument, "cannot open grid config '" + grid_path + "'");
            nlohmann::json gj;
            try {
                gj = nlohmann::json::parse(f);
            } catch (const nlohmann::json::exception& e) {
                throw DataError(DataError::Kind::InvalidArgument, "grid config: " + std::string(e.what()));
            }
            const GridConfig cfg = GridConfig::from_json(gj);
            const fs::path dir = fs::path(grid_path).parent_path();
            auto resolve = [&](const std::string& flag, const std::optional<std::string>& cfg_value, const char* what) {
                if (!flag.empty()) return flag;
                if (!cfg_value) throw UsageError(std::string("simulate: no ") + what + " given (--" + what + " or grid file)");
                const fs::path p(*cfg_value);
                return (p.is_absolute() ? p : dir / p).string();
            };
            const std::string data = resolve(sim_data, cfg.base, "data");
            const std::string schema = resolve(sim_schema, cfg.schema, "schema");
            LoadOptions lo;
            lo.missing = MissingPolicy::keep;
            const MetaDataset raw = load_dataset(data, load_schema(schema), lo);
            const ErrorReport report = run_grid(raw, cfg, jobs);
            write_text(out_file(sim_out, "grid_report.csv"), report.to_csv());
            nlohmann::json j = report.to_json();
            j["config"] = cfg.to_json();
            write_json(out_file(sim_out, "grid_report.json"), j);
        } else if (*rep_cmd) {
            if (!(rep_lambda > 0.0 && rep_lambda < 1.0)) throw UsageError("report: --lambda must lie in (0, 1)");
            const MetaDataset ds = load(rep_args);
            MethodOptions mo;
            mo.alpha = rep_alpha;
            mo.lambdas = {rep_lambda};
            mo.B = rep_B;
            mo.seed = *rep_seed;
            mo.jobs = jobs;
            write_text(out_file(rep_args.out, "report.md"), render_markdown(ds, build_report(ds, mo)));
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
