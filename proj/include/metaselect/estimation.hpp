#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "metaselect/data.hpp"

namespace metaselect {

enum class Tau2Method { REML, DL, fixed };

struct FitOptions {
    Tau2Method tau2_method = Tau2Method::REML;
    double tau2_fixed = 0.0;  // used when tau2_method == fixed
    int max_iter = 1000;
    double reml_tol = 1e-8;
    double condition_limit = 1e12;
};

struct Tau2Estimate {
    double tau2 = 0.0;
    bool converged = true;
    int iterations = 0;
};

struct FitResult {
    ModelSpec spec;
    std::vector<std::string> columns;
    Eigen::VectorXd beta;
    Eigen::MatrixXd sigma;  // HKSJ covariance
    double tau2 = 0.0;
    double loglik = 0.0;    // unrestricted, at (beta, tau2)
    std::size_t m = 0;
    std::size_t k = 0;
    bool converged = true;
    double max_se = 0.0;    // largest non-intercept standard error

    Eigen::VectorXd se() const;
};

/// Unrestricted log-likelihood of the random effects meta-regression.
double log_likelihood(const MetaDataset& ds, const DesignMatrix& X, const Eigen::VectorXd& beta, double tau2);

/// Weighted least squares / ML coefficients for fixed tau2.
Eigen::VectorXd fit_beta(const MetaDataset& ds, const DesignMatrix& X, double tau2,
                         double condition_limit = 1e12);

/// Profile restricted log-likelihood (additive constants dropped).
double restricted_log_likelihood(const MetaDataset& ds, const DesignMatrix& X, double tau2,
                                 double condition_limit = 1e12);

/// Upper end of the REML search interval: 10 times the sample variance of y.
double reml_upper_bound(const MetaDataset& ds);

Tau2Estimate estimate_tau2(const MetaDataset& ds, const DesignMatrix& X, const FitOptions& opts = {});

/// DerSimonian-Laird moment estimator generalized to meta-regression.
double dersimonian_laird_tau2(const MetaDataset& ds, const DesignMatrix& X, double condition_limit = 1e12);

/// Knapp-Hartung / Sidik-Jonkman covariance of the coefficients.
Eigen::MatrixXd hksj_covariance(const MetaDataset& ds, const DesignMatrix& X, double tau2,
                                double condition_limit = 1e12);

FitResult fit(const MetaDataset& ds, const ModelSpec& spec, const FitOptions& opts = {});

/// Two-sided Wald t-test p-value of coefficient j with k - m degrees of freedom.
double wald_pvalue(const FitResult& fit, std::size_t j);

nlohmann::json fit_to_json(const MetaDataset& ds, const FitResult& fit);

}  // namespace metaselect
