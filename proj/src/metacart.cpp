#include "metaselect/metacart.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "metaselect/errors.hpp"
#include "metaselect/rng.hpp"

namespace metaselect {

std::string to_string(TreeMode mode) { return mode == TreeMode::FE ? "FE" : "RE"; }

double default_prune_c(TreeMode mode, std::size_t k) {
    const std::size_t cutoff = mode == TreeMode::FE ? 80 : 120;
    return k < cutoff ? 1.0 : 0.5;
}

// ---------------------------------------------------------------------------
// Tree accessors

std::vector<std::size_t> Tree::leaves() const {
    std::vector<std::size_t> out;
    for (const auto& n : nodes) {
        if (n.is_leaf()) out.push_back(n.id);
    }
    return out;
}

std::size_t Tree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

const TreeNode& Tree::route(const std::vector<double>& x) const {
    const TreeNode* node = &nodes.front();
    while (!node->is_leaf()) {
        node = &nodes[node->split->goes_left(x[node->split->covariate]) ? *node->left : *node->right];
    }
    return *node;
}

// ---------------------------------------------------------------------------
// Heterogeneity statistics

double qb(const MetaDataset& ds, const std::vector<std::vector<std::size_t>>& partition, const std::vector<double>& w) {
    double w_all = 0.0, s_all = 0.0;
    std::vector<double> means;
    means.reserve(partition.size());
    for (const auto& group : partition) {
        if (group.empty()) throw DataError(DataError::Kind::EmptyGroup, "Q_B: empty group in partition");
        double wg = 0.0, sg = 0.0;
        for (std::size_t i : group) {
            if (!(w.at(i) > 0.0)) throw DataError(DataError::Kind::InvalidArgument, "Q_B: weights must be positive");
            wg += w[i];
            sg += w[i] * ds.studies.at(i).y;
        }
        means.push_back(sg / wg);
        w_all += wg;
        s_all += sg;
    }
    const double grand = s_all / w_all;
    double q = 0.0;
    for (std::size_t g = 0; g < partition.size(); ++g) {
        for (std::size_t i : partition[g]) q += w[i] * (means[g] - grand) * (means[g] - grand);
    }
    return q;
}

namespace {

// Fixed-effect (w = 1/v) sums of one group, enough for its share of the
// DL statistics: Q_within = sum w y^2 - (sum w y)^2 / sum w and the trace
// term sum w - sum w^2 / sum w.
struct DlSums {
    double w = 0.0, wy = 0.0, wyy = 0.0, ww = 0.0;

    void add(double v, double y) {
        const double wi = 1.0 / v;
        w += wi;
        wy += wi * y;
        wyy += wi * y * y;
        ww += wi * wi;
    }
    DlSums operator-(const DlSums& o) const { return {w - o.w, wy - o.wy, wyy - o.wyy, ww - o.ww}; }
    double q_within() const { return std::max(0.0, wyy - wy * wy / w); }
    double trace_term() const { return w - ww / w; }
};

double dl_from_totals(double q, double c, std::size_t k, std::size_t groups) {
    if (!(c > 0.0) || k <= groups) return 0.0;
    return std::max(0.0, (q - static_cast<double>(k - groups)) / c);
}

DlSums group_sums(const MetaDataset& ds, const std::vector<std::size_t>& members) {
    DlSums s;
    for (std::size_t i : members) s.add(ds.studies[i].v, ds.studies[i].y);
    return s;
}

std::vector<std::vector<std::size_t>> leaf_partition(const Tree& tree) {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& n : tree.nodes) {
        if (n.is_leaf()) out.push_back(n.members);
    }
    return out;
}

std::vector<double> study_weights(const MetaDataset& ds, double tau2) {
    std::vector<double> w(ds.k());
    for (std::size_t i = 0; i < ds.k(); ++i) w[i] = 1.0 / (ds.studies[i].v + tau2);
    return w;
}

double weighted_mean(const MetaDataset& ds, const std::vector<std::size_t>& members, const std::vector<double>& w) {
    double sw = 0.0, swy = 0.0;
    for (std::size_t i : members) {
        sw += w[i];
        swy += w[i] * ds.studies[i].y;
    }
    return sw > 0.0 ? swy / sw : 0.0;
}

// Total heterogeneity of the root used by the cp threshold.
double root_q(const MetaDataset& ds, const Tree& tree) {
    const auto& all = tree.root().members;
    const double tau2 = tree.mode == TreeMode::RE ? partition_tau2(ds, {all}) : 0.0;
    const auto w = study_weights(ds, tau2);
    const double mean = weighted_mean(ds, all, w);
    double q = 0.0;
    for (std::size_t i : all) q += w[i] * (ds.studies[i].y - mean) * (ds.studies[i].y - mean);
    return q;
}

void refresh_means(const MetaDataset& ds, Tree& tree) {
    const auto w = study_weights(ds, tree.mode == TreeMode::RE ? tree.tau2 : 0.0);
    for (auto& n : tree.nodes) n.node_mean = weighted_mean(ds, n.members, w);
}

// Calls visit(order, cut, threshold, binary) for every admissible cut of
// `node` on covariate j; order[0..cut] goes left.
template <class Visit>
void for_each_cut(const MetaDataset& ds, const TreeNode& node, std::size_t j, const TreeControls& controls,
                  std::vector<std::size_t>& order, Visit&& visit) {
    order = node.members;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double xa = ds.studies[a].x[j], xb = ds.studies[b].x[j];
        return xa < xb || (xa == xb && a < b);
    });
    const std::size_t n = order.size();
    const bool binary = ds.covariates[j].scale == Scale::binary;
    for (std::size_t cut = 0; cut + 1 < n; ++cut) {
        const double xl = ds.studies[order[cut]].x[j];
        const double xr = ds.studies[order[cut + 1]].x[j];
        if (!(xl < xr)) continue;
        const std::size_t n_left = cut + 1;
        if (n_left < controls.minbucket || n - n_left < controls.minbucket) continue;
        visit(cut, binary ? 0.5 : 0.5 * (xl + xr), binary);
    }
}

bool splittable(const TreeNode& node, const TreeControls& controls) {
    return node.is_leaf() && node.members.size() >= controls.minsplit && node.depth < controls.maxdepth &&
           node.members.size() >= 2 * std::max<std::size_t>(controls.minbucket, 1);
}

std::optional<SplitChoice> best_split_fe(const MetaDataset& ds, const Tree& tree, double threshold) {
    const auto w = study_weights(ds, 0.0);
    const double current_qb = qb(ds, leaf_partition(tree), w);
    std::optional<SplitChoice> best;
    std::vector<std::size_t> order;
    for (const auto& node : tree.nodes) {
        if (!splittable(node, tree.controls)) continue;
        double w_tot = 0.0, s_tot = 0.0;
        for (std::size_t i : node.members) {
            w_tot += w[i];
            s_tot += w[i] * ds.studies[i].y;
        }
        for (std::size_t j = 0; j < ds.p(); ++j) {
            double wl = 0.0, sl = 0.0;
            std::size_t consumed = 0;
            for_each_cut(ds, node, j, tree.controls, order, [&](std::size_t cut, double thr, bool binary) {
                for (; consumed <= cut; ++consumed) {
                    wl += w[order[consumed]];
                    sl += w[order[consumed]] * ds.studies[order[consumed]].y;
                }
                const double wr = w_tot - wl, sr = s_tot - sl;
                const double diff = sl / wl - sr / wr;
                const double gain = wl * wr / w_tot * diff * diff;
                if (gain > threshold && (!best || gain > best->gain)) {
                    best = SplitChoice{node.id, Split{j, binary, thr}, gain, current_qb + gain, 0.0};
                }
            });
        }
    }
    return best;
}

std::optional<SplitChoice> best_split_re(const MetaDataset& ds, const Tree& tree, double threshold) {
    const auto partition = leaf_partition(tree);
    const std::size_t k = tree.root().members.size();
    const std::size_t groups = partition.size();
    const double current_qb = qb(ds, partition, study_weights(ds, tree.tau2));

    // DL totals of the current partition; a candidate swaps one leaf's
    // contribution for its two children's.
    std::vector<std::size_t> leaf_ids;
    std::vector<DlSums> leaf_sums;
    double q_tot = 0.0, c_tot = 0.0;
    for (const auto& n : tree.nodes) {
        if (!n.is_leaf()) continue;
        leaf_ids.push_back(n.id);
        leaf_sums.push_back(group_sums(ds, n.members));
        q_tot += leaf_sums.back().q_within();
        c_tot += leaf_sums.back().trace_term();
    }

    std::optional<SplitChoice> best;
    std::vector<std::size_t> order;
    for (std::size_t li = 0; li < leaf_ids.size(); ++li) {
        const TreeNode& node = tree.nodes[leaf_ids[li]];
        if (!splittable(node, tree.controls)) continue;
        const DlSums parent = leaf_sums[li];
        for (std::size_t j = 0; j < ds.p(); ++j) {
            DlSums left;
            std::size_t consumed = 0;
            for_each_cut(ds, node, j, tree.controls, order, [&](std::size_t cut, double thr, bool binary) {
                for (; consumed <= cut; ++consumed) left.add(ds.studies[order[consumed]].v, ds.studies[order[consumed]].y);
                const DlSums right = parent - left;
                const double q = q_tot - parent.q_within() + left.q_within() + right.q_within();
                const double c = c_tot - parent.trace_term() + left.trace_term() + right.trace_term();
                const double tau2 = dl_from_totals(q, c, k, groups + 1);

                // Q_B of the candidate partition under its own RE weights.
                double w_all = 0.0, s_all = 0.0, between = 0.0;
                for (std::size_t lj = 0; lj < leaf_ids.size(); ++lj) {
                    if (lj == li) continue;
                    double wg = 0.0, sg = 0.0;
                    for (std::size_t i : tree.nodes[leaf_ids[lj]].members) {
                        const double wi = 1.0 / (ds.studies[i].v + tau2);
                        wg += wi;
                        sg += wi * ds.studies[i].y;
                    }
                    between += sg * sg / wg;
                    w_all += wg;
                    s_all += sg;
                }
                double wl = 0.0, sl = 0.0, wr = 0.0, sr = 0.0;
                for (std::size_t pos = 0; pos < order.size(); ++pos) {
                    const auto& st = ds.studies[order[pos]];
                    const double wi = 1.0 / (st.v + tau2);
                    if (pos <= cut) {
                        wl += wi;
                        sl += wi * st.y;
                    } else {
                        wr += wi;
                        sr += wi * st.y;
                    }
                }
                between += sl * sl / wl + sr * sr / wr;
                w_all += wl + wr;
                s_all += sl + sr;
                const double cand_qb = std::max(0.0, between - s_all * s_all / w_all);
                const double gain = cand_qb - current_qb;
                if (gain > threshold && (!best || cand_qb > best->qb)) {
                    best = SplitChoice{node.id, Split{j, binary, thr}, gain, cand_qb, tau2};
                }
            });
        }
    }
    return best;
}

}  // namespace

double partition_tau2(const MetaDataset& ds, const std::vector<std::vector<std::size_t>>& partition) {
    double q = 0.0, c = 0.0;
    std::size_t k = 0;
    for (const auto& g : partition) {
        if (g.empty()) throw DataError(DataError::Kind::EmptyGroup, "DL: empty group in partition");
        const DlSums s = group_sums(ds, g);
        q += s.q_within();
        c += s.trace_term();
        k += g.size();
    }
    return dl_from_totals(q, c, k, partition.size());
}

std::optional<SplitChoice> best_split(const MetaDataset& ds, const Tree& tree) {
    const double threshold = std::max(tree.controls.min_qb_gain, tree.controls.cp * root_q(ds, tree));
    return tree.mode == TreeMode::FE ? best_split_fe(ds, tree, threshold) : best_split_re(ds, tree, threshold);
}

Tree make_root(const MetaDataset& ds, TreeMode mode, const TreeControls& controls) {
    if (controls.minbucket < 1) throw DataError(DataError::Kind::InvalidArgument, "minbucket must be >= 1");
    Tree tree;
    tree.mode = mode;
    tree.controls = controls;
    TreeNode root;
    root.members.resize(ds.k());
    std::iota(root.members.begin(), root.members.end(), std::size_t{0});
    tree.nodes.push_back(std::move(root));
    if (mode == TreeMode::RE && ds.k() > 0) tree.tau2 = partition_tau2(ds, {tree.nodes.front().members});
    refresh_means(ds, tree);
    return tree;
}

void apply_split(const MetaDataset& ds, Tree& tree, const SplitChoice& choice) {
    TreeNode& parent = tree.nodes.at(choice.leaf);
    if (!parent.is_leaf()) throw DataError(DataError::Kind::InvalidArgument, "apply_split: node is not a leaf");
    TreeNode left, right;
    for (std::size_t i : parent.members) {
        (choice.split.goes_left(ds.studies[i].x[choice.split.covariate]) ? left : right).members.push_back(i);
    }
    left.depth = right.depth = parent.depth + 1;
    left.parent = right.parent = parent.id;
    left.id = tree.nodes.size();
    right.id = left.id + 1;
    parent.split = choice.split;
    parent.left = left.id;
    parent.right = right.id;
    tree.split_order.push_back(parent.id);
    tree.nodes.push_back(std::move(left));
    tree.nodes.push_back(std::move(right));
    if (tree.mode == TreeMode::RE) {
        tree.tau2 = partition_tau2(ds, leaf_partition(tree));
        tree.tau2_path.push_back(tree.tau2);
    }
    refresh_means(ds, tree);
}

Tree grow_tree(const MetaDataset& ds, TreeMode mode, const TreeControls& controls) {
    Tree tree = make_root(ds, mode, controls);
    while (auto choice = best_split(ds, tree)) apply_split(ds, tree, *choice);
    return tree;
}

// ---------------------------------------------------------------------------
// Cost-complexity pruning

namespace {

// collapsed[id] marks internal nodes turned into leaves.
struct Subtree {
    double alpha = 0.0;
    std::vector<bool> collapsed;
    std::size_t leaves = 0;
};

double node_risk(const MetaDataset& ds, const TreeNode& node, const std::vector<double>& w) {
    const double mean = weighted_mean(ds, node.members, w);
    double r = 0.0;
    for (std::size_t i : node.members) r += w[i] * (ds.studies[i].y - mean) * (ds.studies[i].y - mean);
    return r;
}

std::vector<Subtree> cost_complexity_sequence(const MetaDataset& ds, const Tree& tree, const std::vector<double>& w) {
    const std::size_t n = tree.nodes.size();
    std::vector<double> risk(n);
    for (std::size_t id = 0; id < n; ++id) risk[id] = node_risk(ds, tree.nodes[id], w);

    std::vector<bool> collapsed(n, false);
    // Risk and leaf count of the current (partially collapsed) subtree at id.
    std::function<std::pair<double, std::size_t>(std::size_t)> branch = [&](std::size_t id) -> std::pair<double, std::size_t> {
        const auto& node = tree.nodes[id];
        if (node.is_leaf() || collapsed[id]) return {risk[id], 1};
        auto [rl, nl] = branch(*node.left);
        auto [rr, nr] = branch(*node.right);
        return {rl + rr, nl + nr};
    };
    std::function<bool(std::size_t)> active = [&](std::size_t id) {
        // an internal node still present as a split in the current subtree
        for (auto p = tree.nodes[id].parent; p; p = tree.nodes[*p].parent) {
            if (collapsed[*p]) return false;
        }
        return !tree.nodes[id].is_leaf() && !collapsed[id];
    };

    std::vector<Subtree> seq;
    seq.push_back({0.0, collapsed, branch(0).second});
    while (active(0)) {
        double alpha = std::numeric_limits<double>::infinity();
        std::vector<double> g(n, std::numeric_limits<double>::infinity());
        for (std::size_t id = 0; id < n; ++id) {
            if (!active(id)) continue;
            auto [r_branch, leaves] = branch(id);
            g[id] = (risk[id] - r_branch) / static_cast<double>(leaves - 1);
            alpha = std::min(alpha, g[id]);
        }
        const double tol = 1e-12 * std::max(1.0, std::fabs(alpha));
        for (std::size_t id = 0; id < n; ++id) {
            if (g[id] <= alpha + tol) collapsed[id] = true;
        }
        seq.push_back({std::max(alpha, 0.0), collapsed, branch(0).second});
    }
    return seq;
}

double subtree_predict(const Tree& tree, const std::vector<bool>& collapsed, const std::vector<double>& x) {
    const TreeNode* node = &tree.nodes.front();
    while (!node->is_leaf() && !collapsed[node->id]) {
        node = &tree.nodes[node->split->goes_left(x[node->split->covariate]) ? *node->left : *node->right];
    }
    return node->node_mean;
}

Tree materialize(const MetaDataset& ds, const Tree& tree, const std::vector<bool>& collapsed) {
    // keep[id]: node survives (its ancestors are all uncollapsed)
    std::vector<bool> keep(tree.nodes.size(), false);
    std::vector<std::size_t> new_id(tree.nodes.size(), 0);
    Tree out;
    out.mode = tree.mode;
    out.controls = tree.controls;
    for (const auto& node : tree.nodes) {
        bool k = true;
        for (auto p = node.parent; p; p = tree.nodes[*p].parent) {
            if (collapsed[*p]) {
                k = false;
                break;
            }
        }
        if (!k) continue;
        keep[node.id] = true;
        new_id[node.id] = out.nodes.size();
        TreeNode copy = node;
        copy.id = out.nodes.size();
        if (collapsed[node.id]) {
            copy.split.reset();
            copy.left.reset();
            copy.right.reset();
        }
        out.nodes.push_back(std::move(copy));
    }
    for (auto& node : out.nodes) {
        if (node.parent) node.parent = new_id[*node.parent];
        if (node.left) node.left = new_id[*node.left];
        if (node.right) node.right = new_id[*node.right];
    }
    for (std::size_t s = 0; s < tree.split_order.size(); ++s) {
        const std::size_t id = tree.split_order[s];
        if (keep[id] && !collapsed[id]) {
            out.split_order.push_back(new_id[id]);
            if (tree.mode == TreeMode::RE && s < tree.tau2_path.size()) out.tau2_path.push_back(tree.tau2_path[s]);
        }
    }
    if (out.mode == TreeMode::RE) out.tau2 = partition_tau2(ds, leaf_partition(out));
    refresh_means(ds, out);
    return out;
}

}  // namespace

Tree prune_tree(const MetaDataset& ds, const Tree& tree, const PruneRule& rule) {
    if (rule.c < 0.0) throw DataError(DataError::Kind::InvalidArgument, "pruning constant c must be >= 0");
    if (rule.c == 0.0 || tree.split_count() == 0) return tree;
    const std::size_t k = ds.k();
    const std::size_t folds = std::min<std::size_t>(tree.controls.cv_folds, k);
    if (folds < 2) return tree;

    const double tau2_full = tree.mode == TreeMode::RE ? tree.tau2 : 0.0;
    const auto w_full = study_weights(ds, tau2_full);
    const auto seq = cost_complexity_sequence(ds, tree, w_full);

    // Representative complexity per subtree: geometric midpoint of its range.
    std::vector<double> beta(seq.size());
    for (std::size_t j = 0; j < seq.size(); ++j) {
        beta[j] = j + 1 < seq.size() ? std::sqrt(seq[j].alpha * seq[j + 1].alpha) : std::numeric_limits<double>::infinity();
    }

    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(rule.seed, {0x9c7u});
    for (std::size_t i = k; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    std::vector<std::size_t> fold_of(k);
    for (std::size_t i = 0; i < k; ++i) fold_of[perm[i]] = i % folds;

    // err[j][i]: weighted squared prediction error of study i under subtree j
    std::vector<std::vector<double>> err(seq.size(), std::vector<double>(k, 0.0));
    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < k; ++i) (fold_of[i] == f ? test : train).push_back(i);
        const MetaDataset train_ds = ds.subset(train);
        const Tree fold_tree = grow_tree(train_ds, tree.mode, tree.controls);
        const auto fold_w = study_weights(train_ds, fold_tree.mode == TreeMode::RE ? fold_tree.tau2 : 0.0);
        const auto fold_seq = cost_complexity_sequence(train_ds, fold_tree, fold_w);
        for (std::size_t j = 0; j < seq.size(); ++j) {
            std::size_t pick = 0;
            for (std::size_t s = 0; s < fold_seq.size(); ++s) {
                if (fold_seq[s].alpha <= beta[j]) pick = s;
            }
            for (std::size_t i : test) {
                const double pred = subtree_predict(fold_tree, fold_seq[pick].collapsed, ds.studies[i].x);
                const double r = ds.studies[i].y - pred;
                err[j][i] = w_full[i] * r * r;
            }
        }
    }

    std::vector<double> cv(seq.size()), se(seq.size());
    for (std::size_t j = 0; j < seq.size(); ++j) {
        double sum = 0.0;
        for (double e : err[j]) sum += e;
        const double mean = sum / static_cast<double>(k);
        double ss = 0.0;
        for (double e : err[j]) ss += (e - mean) * (e - mean);
        cv[j] = sum;
        se[j] = k > 1 ? std::sqrt(static_cast<double>(k) * ss / static_cast<double>(k - 1)) : 0.0;
    }
    std::size_t best = 0;
    for (std::size_t j = 1; j < seq.size(); ++j) {
        if (cv[j] < cv[best]) best = j;
    }
    const double limit = cv[best] + rule.c * se[best];
    std::size_t chosen = best;
    for (std::size_t j = seq.size(); j-- > 0;) {
        if (cv[j] <= limit) {
            chosen = j;
            break;
        }
    }
    return materialize(ds, tree, seq[chosen].collapsed);
}

// ---------------------------------------------------------------------------
// Tree -> linear model

ModelSpec tree_to_spec(const Tree& tree) {
    ModelSpec spec;
    std::vector<std::size_t> path;
    std::function<void(std::size_t)> walk = [&](std::size_t id) {
        const auto& node = tree.nodes[id];
        if (node.is_leaf()) {
            for (std::size_t a = 0; a < path.size(); ++a) {
                for (std::size_t b = a + 1; b < path.size(); ++b) {
                    if (path[a] != path[b]) spec.interactions.insert(make_pair_sorted(path[a], path[b]));
                }
            }
            return;
        }
        spec.mains.insert(node.split->covariate);
        path.push_back(node.split->covariate);
        walk(*node.left);
        walk(*node.right);
        path.pop_back();
    };
    if (!tree.nodes.empty()) walk(0);
    return spec;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string fmt(double x, const char* f = "%.4f") {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

std::string side_label(const MetaDataset& ds, const Split& s, bool left) {
    const auto& meta = ds.covariates.at(s.covariate);
    if (s.binary) {
        const std::string level = left ? (meta.reference_level.empty() ? "0" : meta.reference_level)
                                       : (meta.other_level.empty() ? "1" : meta.other_level);
        return meta.name + " = " + level;
    }
    return meta.name + (left ? " <= " : " > ") + fmt(s.threshold);
}

nlohmann::json node_json(const MetaDataset& ds, const Tree& tree, std::size_t id) {
    const auto& n = tree.nodes[id];
    nlohmann::json j{{"id", n.id}, {"k", n.members.size()}, {"mean", n.node_mean}, {"depth", n.depth}};
    if (!n.is_leaf()) {
        j["split"] = {{"variable", ds.covariates.at(n.split->covariate).name},
                      {"type", n.split->binary ? "binary" : "metric"},
                      {"threshold", n.split->threshold}};
        j["left"] = node_json(ds, tree, *n.left);
        j["right"] = node_json(ds, tree, *n.right);
    }
    return j;
}

}  // namespace

nlohmann::json tree_to_json(const MetaDataset& ds, const Tree& tree) {
    nlohmann::json j;
    j["mode"] = to_string(tree.mode);
    j["leaves"] = tree.leaf_count();
    j["splits"] = tree.split_count();
    if (tree.mode == TreeMode::RE) {
        j["tau2"] = tree.tau2;
        j["tau2_path"] = tree.tau2_path;
    }
    j["controls"] = {{"minsplit", tree.controls.minsplit}, {"minbucket", tree.controls.minbucket},
                     {"maxdepth", tree.controls.maxdepth}, {"cv_folds", tree.controls.cv_folds},
                     {"min_qb_gain", tree.controls.min_qb_gain}, {"cp", tree.controls.cp}};
    j["root"] = node_json(ds, tree, 0);
    j["spec"] = spec_to_json(ds, tree_to_spec(tree));
    return j;
}

std::string render_tree(const MetaDataset& ds, const Tree& tree) {
    std::ostringstream out;
    out << to_string(tree.mode) << " meta-CART, " << tree.leaf_count() << " leaves";
    if (tree.mode == TreeMode::RE) out << ", tau2 = " << fmt(tree.tau2);
    out << '\n';
    std::function<void(std::size_t, const std::string&, int)> walk = [&](std::size_t id, const std::string& label, int indent) {
        const auto& n = tree.nodes[id];
        out << std::string(static_cast<std::size_t>(indent) * 2, ' ') << label << "  k=" << n.members.size()
            << "  mean=" << fmt(n.node_mean) << (n.is_leaf() ? "  *" : "") << '\n';
        if (!n.is_leaf()) {
            walk(*n.left, side_label(ds, *n.split, true), indent + 1);
            walk(*n.right, side_label(ds, *n.split, false), indent + 1);
        }
    };
    if (!tree.nodes.empty()) walk(0, "root", 0);
    return out.str();
}

}  // namespace metaselect
