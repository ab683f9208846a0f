#include "metaselect/linear_select.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "metaselect/errors.hpp"

namespace metaselect {

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::no_candidate: return "no_candidate";
        case StopReason::non_convergence: return "non_convergence";
        case StopReason::se_explosion: return "se_explosion";
        case StopReason::exhausted: return "exhausted";
    }
    return "unknown";
}

std::string to_string(Criterion c) { return c == Criterion::AICc ? "AICc" : "BIC"; }

std::string Candidate::name(const MetaDataset& ds) const {
    if (main) return ds.covariates.at(*main).name;
    return pair_name(ds, *interaction);
}

namespace {

void require_min_studies(const MetaDataset& ds) {
    if (ds.k() <= 3) {
        throw NumericalError(NumericalError::Kind::InsufficientDF, "linear selection needs more than 3 studies");
    }
}

ModelSpec extend(const ModelSpec& base, const Candidate& c) {
    ModelSpec out = base;
    if (c.main) out.mains.insert(*c.main);
    if (c.interaction) {
        out.interactions.insert(*c.interaction);
        out.mains.insert(c.interaction->first);
        out.mains.insert(c.interaction->second);
    }
    return out;
}

std::size_t candidate_column(const ModelSpec& spec, const Candidate& c) {
    return c.main ? main_column(spec, *c.main) : interaction_column(spec, *c.interaction);
}

std::vector<Candidate> open_candidates(const MetaDataset& ds, const ModelSpec& current) {
    std::vector<Candidate> out;
    for (std::size_t j = 0; j < ds.p(); ++j) {
        if (!current.mains.count(j)) out.push_back({j, std::nullopt});
    }
    for (const auto& pr : all_pairs(ds.p())) {
        if (!current.interactions.count(pr)) out.push_back({std::nullopt, pr});
    }
    return out;
}

std::optional<FitResult> try_final_fit(const MetaDataset& ds, const ModelSpec& spec, const FitOptions& opts) {
    try {
        return fit(ds, spec, opts);
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

enum class Scoring { wald, criterion };

SelectionResult forward_select(const MetaDataset& ds, const SelectOptions& opts, Scoring scoring) {
    require_min_studies(ds);
    SelectionResult res;
    ModelSpec current;
    std::optional<FitResult> current_fit = try_final_fit(ds, current, opts.fit);
    double current_score = std::numeric_limits<double>::infinity();
    if (scoring == Scoring::criterion) {
        if (!current_fit) {
            throw NumericalError(NumericalError::Kind::InsufficientDF, "intercept-only model could not be fitted");
        }
        current_score = information_criterion(*current_fit, opts.criterion);
    }

    for (std::size_t step = 1;; ++step) {
        const auto candidates = open_candidates(ds, current);
        if (candidates.empty()) {
            res.stopped_reason = StopReason::exhausted;
            break;
        }
        struct Evaluated {
            ModelSpec spec;
            FitResult fit;
            double score;
            std::size_t trace_index;
        };
        std::optional<Evaluated> best;
        bool non_converged = false;
        for (const auto& cand : candidates) {
            TraceStep ts;
            ts.step = step;
            ts.candidate = cand;
            ModelSpec spec = extend(current, cand);
            ts.m = spec.parameter_count();
            try {
                FitResult f = fit(ds, spec, opts.fit);
                ts.loglik = f.loglik;
                double score = scoring == Scoring::wald ? wald_pvalue(f, candidate_column(spec, cand))
                                                        : information_criterion(f, opts.criterion);
                ts.score = score;
                if (!f.converged) {
                    non_converged = true;
                    ts.note = "tau2 optimizer did not converge";
                }
                res.trace.push_back(ts);
                if (f.converged && (!best || score < best->score)) {
                    best = Evaluated{std::move(spec), std::move(f), score, res.trace.size() - 1};
                }
            } catch (const std::exception& e) {
                ts.note = e.what();
                res.trace.push_back(ts);
            }
        }
        if (non_converged) {
            res.stopped_reason = StopReason::non_convergence;
            break;
        }
        const bool improves = best && (scoring == Scoring::wald ? best->score < opts.alpha : best->score < current_score);
        if (!improves) {
            res.stopped_reason = StopReason::no_candidate;
            break;
        }
        if (best->fit.max_se > opts.se_cap) {
            res.trace[best->trace_index].note = "standard error above cap";
            res.stopped_reason = StopReason::se_explosion;
            break;
        }
        res.trace[best->trace_index].accepted = true;
        const std::size_t added_mains = best->spec.mains.size() - current.mains.size();
        const Candidate& cand = res.trace[best->trace_index].candidate;
        res.forced_mains += cand.interaction ? added_mains : 0;
        current = std::move(best->spec);
        current_score = best->score;
        current_fit = std::move(best->fit);
    }
    res.spec = current;
    res.final_fit = current_fit;
    return res;
}

}  // namespace

SelectionResult univariate_select(const MetaDataset& ds, const SelectOptions& opts) {
    require_min_studies(ds);
    SelectionResult res;
    ModelSpec selected;
    auto screen = [&](const Candidate& cand) {
        TraceStep ts;
        ts.candidate = cand;
        ModelSpec spec = extend(ModelSpec{}, cand);
        ts.m = spec.parameter_count();
        try {
            const FitResult f = fit(ds, spec, opts.fit);
            ts.loglik = f.loglik;
            const double p = wald_pvalue(f, candidate_column(spec, cand));
            ts.score = p;
            ts.accepted = p < opts.alpha;
        } catch (const std::exception& e) {
            ts.note = e.what();
        }
        if (ts.accepted) {
            if (cand.main) selected.mains.insert(*cand.main);
            if (cand.interaction) selected.interactions.insert(*cand.interaction);
        }
        res.trace.push_back(std::move(ts));
    };
    for (std::size_t j = 0; j < ds.p(); ++j) screen({j, std::nullopt});
    for (const auto& pr : all_pairs(ds.p())) screen({std::nullopt, pr});

    res.spec = selected.closure();
    res.forced_mains = res.spec.mains.size() - selected.mains.size();
    res.final_fit = try_final_fit(ds, res.spec, opts.fit);
    res.stopped_reason = StopReason::exhausted;
    return res;
}

SelectionResult forward_test_select(const MetaDataset& ds, const SelectOptions& opts) {
    return forward_select(ds, opts, Scoring::wald);
}

SelectionResult forward_ic_select(const MetaDataset& ds, const SelectOptions& opts) {
    return forward_select(ds, opts, Scoring::criterion);
}

double information_criterion(double loglik, std::size_t m, double k, Criterion kind) {
    const double params = static_cast<double>(m) + 1.0;  // coefficients + tau2
    if (kind == Criterion::BIC) return -2.0 * loglik + params * std::log(k);
    const double kstar = std::max(k, static_cast<double>(m) + 3.0);
    const double denom = kstar - params - 1.0;
    if (!(denom > 0.0)) {
        throw NumericalError(NumericalError::Kind::DegenerateCorrection, "AICc correction denominator is not positive");
    }
    return -2.0 * loglik + 2.0 * params * kstar / denom;
}

double information_criterion(const FitResult& fit, Criterion kind) {
    return information_criterion(fit.loglik, fit.m, static_cast<double>(fit.k), kind);
}

nlohmann::json selection_to_json(const MetaDataset& ds, const SelectionResult& result) {
    nlohmann::json j;
    j["spec"] = spec_to_json(ds, result.spec);
    j["stopped_reason"] = to_string(result.stopped_reason);
    j["forced_mains"] = result.forced_mains;
    j["final_fit"] = result.final_fit ? fit_to_json(ds, *result.final_fit) : nlohmann::json(nullptr);
    j["trace"] = nlohmann::json::array();
    for (const auto& t : result.trace) {
        nlohmann::json tj{{"step", t.step}, {"candidate", t.candidate.name(ds)}, {"m", t.m}, {"accepted", t.accepted}};
        tj["score"] = t.score ? nlohmann::json(*t.score) : nlohmann::json(nullptr);
        tj["loglik"] = t.loglik ? nlohmann::json(*t.loglik) : nlohmann::json(nullptr);
        if (!t.note.empty()) tj["note"] = t.note;
        j["trace"].push_back(tj);
    }
    return j;
}

std::string trace_to_csv(const MetaDataset& ds, const SelectionResult& result) {
    std::ostringstream out;
    out << "step,candidate,score,loglik,m,accepted,note\n";
    char buf[64];
    for (const auto& t : result.trace) {
        out << t.step << ',' << t.candidate.name(ds) << ',';
        if (t.score) {
            std::snprintf(buf, sizeof buf, "%.10g", *t.score);
            out << buf;
        }
        out << ',';
        if (t.loglik) {
            std::snprintf(buf, sizeof buf, "%.10g", *t.loglik);
            out << buf;
        }
        std::string note = t.note;
        for (auto& ch : note) {
            if (ch == '"') ch = '\'';
        }
        out << ',' << t.m << ',' << (t.accepted ? "true" : "false") << ",\"" << note << "\"\n";
    }
    return out.str();
}

}  // namespace metaselect
