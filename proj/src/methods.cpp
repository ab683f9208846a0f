#include "metaselect/methods.hpp"

#include <algorithm>
#include <cctype>

#include "metaselect/errors.hpp"
#include "metaselect/rng.hpp"

namespace metaselect {

const std::vector<Method>& all_methods() {
    static const std::vector<Method> m{Method::uni_test, Method::multi_test, Method::aicc,   Method::bic,
                                       Method::femrt,    Method::remrt,      Method::sfemrt, Method::sremrt};
    return m;
}

std::string to_string(Method m) {
    switch (m) {
        case Method::uni_test: return "uni_test";
        case Method::multi_test: return "multi_test";
        case Method::aicc: return "aicc";
        case Method::bic: return "bic";
        case Method::femrt: return "femrt";
        case Method::remrt: return "remrt";
        case Method::sfemrt: return "sfemrt";
        case Method::sremrt: return "sremrt";
    }
    return "unknown";
}

Method method_from_string(const std::string& s) {
    std::string key;
    for (char c : s) {
        if (c == '-') c = '_';
        key += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    if (key == "s_femrt") key = "sfemrt";
    if (key == "s_remrt") key = "sremrt";
    for (Method m : all_methods()) {
        if (to_string(m) == key) return m;
    }
    throw DataError(DataError::Kind::InvalidArgument, "unknown method '" + s + "'");
}

std::string method_label(Method m) {
    switch (m) {
        case Method::uni_test: return "uni-test";
        case Method::multi_test: return "multi-test";
        case Method::aicc: return "AICc";
        case Method::bic: return "BIC";
        case Method::femrt: return "FEmrt";
        case Method::remrt: return "REmrt";
        case Method::sfemrt: return "S-FEmrt";
        case Method::sremrt: return "S-REmrt";
    }
    return "unknown";
}

bool is_ensemble(Method m) { return m == Method::sfemrt || m == Method::sremrt; }
bool is_tree(Method m) { return m == Method::femrt || m == Method::remrt || is_ensemble(m); }

MethodOutput run_method(const MetaDataset& ds, Method m, const MethodOptions& opts) {
    MethodOutput out;
    auto linear = [&](SelectionResult r) {
        out.specs.push_back(r.spec);
        out.selection = std::move(r);
    };
    SelectOptions so;
    so.alpha = opts.alpha;
    switch (m) {
        case Method::uni_test: linear(univariate_select(ds, so)); break;
        case Method::multi_test: linear(forward_test_select(ds, so)); break;
        case Method::aicc:
            so.criterion = Criterion::AICc;
            linear(forward_ic_select(ds, so));
            break;
        case Method::bic:
            so.criterion = Criterion::BIC;
            linear(forward_ic_select(ds, so));
            break;
        case Method::femrt:
        case Method::remrt: {
            const TreeMode mode = m == Method::femrt ? TreeMode::FE : TreeMode::RE;
            const Tree grown = grow_tree(ds, mode, opts.controls);
            PruneRule rule;
            rule.c = opts.prune_c.value_or(default_prune_c(mode, ds.k()));
            rule.seed = opts.seed;
            out.tree = prune_tree(ds, grown, rule);
            out.specs.push_back(tree_to_spec(*out.tree));
            break;
        }
        case Method::sfemrt:
        case Method::sremrt: {
            EnsembleOptions eo;
            eo.B = opts.B;
            eo.seed = opts.seed;
            eo.controls = opts.controls;
            eo.jobs = opts.jobs;
            out.matrix = stability_matrix(ds, m == Method::sfemrt ? TreeMode::FE : TreeMode::RE, eo);
            out.lambdas = opts.lambdas;
            std::sort(out.lambdas.begin(), out.lambdas.end());
            for (double l : out.lambdas) out.specs.push_back(threshold_select(*out.matrix, l));
            break;
        }
    }
    return out;
}

}  // namespace metaselect
