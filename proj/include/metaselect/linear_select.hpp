#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "metaselect/data.hpp"
#include "metaselect/estimation.hpp"

namespace metaselect {

enum class Criterion { AICc, BIC };

enum class StopReason { no_candidate, non_convergence, se_explosion, exhausted };

std::string to_string(StopReason r);
std::string to_string(Criterion c);

struct SelectOptions {
    double alpha = 0.05;
    Criterion criterion = Criterion::AICc;
    double se_cap = 100.0;
    FitOptions fit{};
};

// A candidate effect: a main effect (pair empty) or an interaction.
struct Candidate {
    std::optional<std::size_t> main;
    std::optional<Pair> interaction;

    std::string name(const MetaDataset& ds) const;
};

struct TraceStep {
    std::size_t step = 0;          // forward step (0 for univariate screening)
    Candidate candidate;
    std::optional<double> score;   // p-value or criterion; empty when the fit failed
    std::optional<double> loglik;  // unrestricted log-likelihood of the candidate model
    std::size_t m = 0;             // parameters of the candidate model
    bool accepted = false;
    std::string note;              // failure message, if any
};

struct SelectionResult {
    ModelSpec spec;
    std::optional<FitResult> final_fit;
    std::vector<TraceStep> trace;
    StopReason stopped_reason = StopReason::no_candidate;
    std::size_t forced_mains = 0;  // main effects inserted by marginality
};

/// Tests each main effect alone and each interaction together with its two
/// main effects; returns the marginality closure of everything significant.
SelectionResult univariate_select(const MetaDataset& ds, const SelectOptions& opts = {});

/// Forward selection by the smallest Wald p-value below alpha.
SelectionResult forward_test_select(const MetaDataset& ds, const SelectOptions& opts = {});

double information_criterion(const FitResult& fit, Criterion kind);
/// Same, from the raw ingredients (log-likelihood, coefficients m, studies k).
double information_criterion(double loglik, std::size_t m, double k, Criterion kind);

/// Forward selection on AICc or BIC; stops when no candidate improves.
SelectionResult forward_ic_select(const MetaDataset& ds, const SelectOptions& opts = {});

nlohmann::json selection_to_json(const MetaDataset& ds, const SelectionResult& result);
/// One row per evaluated candidate: step,candidate,score,loglik,m,accepted,note
std::string trace_to_csv(const MetaDataset& ds, const SelectionResult& result);

}  // namespace metaselect
