#include "metaselect/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "metaselect/errors.hpp"
#include "metaselect/tdist.hpp"

namespace metaselect {

namespace {

void check_dims(const MetaDataset& ds, const DesignMatrix& X) {
    if (X.rows() != ds.k()) {
        throw NumericalError(NumericalError::Kind::DimensionMismatch, "design rows do not match study count");
    }
}

Eigen::VectorXd weights(const MetaDataset& ds, double tau2) {
    Eigen::VectorXd w(static_cast<Eigen::Index>(ds.k()));
    for (std::size_t i = 0; i < ds.k(); ++i) w(static_cast<Eigen::Index>(i)) = 1.0 / (ds.studies[i].v + tau2);
    return w;
}

// X'WX with its eigendecomposition; the inverse and log-determinant come
// from the spectrum so the condition guard is exact.
struct WeightedNormal {
    Eigen::MatrixXd inverse;
    Eigen::VectorXd rhs;  // X'Wy
    double log_det = 0.0;

    WeightedNormal(const DesignMatrix& X, const Eigen::VectorXd& w, const Eigen::VectorXd& y, double condition_limit) {
        const Eigen::MatrixXd Xw = X.values.array().colwise() * w.array();
        const Eigen::MatrixXd xtwx = X.values.transpose() * Xw;
        rhs = Xw.transpose() * y;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(xtwx);
        if (eig.info() != Eigen::Success) {
            throw NumericalError(NumericalError::Kind::SingularDesign, "eigendecomposition of X'WX failed");
        }
        const Eigen::VectorXd& ev = eig.eigenvalues();
        const double lo = ev.minCoeff();
        const double hi = ev.maxCoeff();
        if (!(lo > 0.0) || hi / lo > condition_limit) {
            throw NumericalError(NumericalError::Kind::SingularDesign,
                                 "X'WX is singular or ill-conditioned (collinear design columns)");
        }
        inverse = eig.eigenvectors() * ev.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
        log_det = ev.array().log().sum();
    }

    Eigen::VectorXd beta() const { return inverse * rhs; }
};

// Brent's method (golden section with parabolic interpolation) minimizing f
// on [a, b]. Returns the abscissa; `iterations` reports the count used.
template <class F>
double brent_minimize(F&& f, double a, double b, double tol, int max_iter, int& iterations, bool& converged) {
    const double golden = 0.5 * (3.0 - std::sqrt(5.0));
    const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());
    double x = a + golden * (b - a);
    double w = x, v = x;
    double fx = f(x);
    double fw = fx, fv = fx;
    double d = 0.0, e = 0.0;
    converged = false;
    for (iterations = 1; iterations <= max_iter; ++iterations) {
        const double mid = 0.5 * (a + b);
        const double tol1 = sqrt_eps * std::fabs(x) + tol / 3.0;
        const double tol2 = 2.0 * tol1;
        if (std::fabs(x - mid) <= tol2 - 0.5 * (b - a)) {
            converged = true;
            break;
        }
        bool golden_step = true;
        if (std::fabs(e) > tol1) {
            double r = (x - w) * (fx - fv);
            double q = (x - v) * (fx - fw);
            double p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if (q > 0.0) p = -p;
            q = std::fabs(q);
            const double e_prev = e;
            e = d;
            if (std::fabs(p) < std::fabs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
                d = p / q;
                const double u = x + d;
                if (u - a < tol2 || b - u < tol2) d = x < mid ? tol1 : -tol1;
                golden_step = false;
            }
        }
        if (golden_step) {
            e = (x < mid ? b : a) - x;
            d = golden * e;
        }
        const double u = std::fabs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
        const double fu = f(u);
        if (fu <= fx) {
            if (u < x) b = x; else a = x;
            v = w; fv = fw;
            w = x; fw = fx;
            x = u; fx = fu;
        } else {
            if (u < x) a = u; else b = u;
            if (fu <= fw || w == x) {
                v = w; fv = fw;
                w = u; fw = fu;
            } else if (fu <= fv || v == x || v == w) {
                v = u; fv = fu;
            }
        }
    }
    return x;
}

}  // namespace

Eigen::VectorXd FitResult::se() const { return sigma.diagonal().cwiseMax(0.0).cwiseSqrt(); }

double log_likelihood(const MetaDataset& ds, const DesignMatrix& X, const Eigen::VectorXd& beta, double tau2) {
    check_dims(ds, X);
    if (static_cast<std::size_t>(beta.size()) != X.cols()) {
        throw NumericalError(NumericalError::Kind::DimensionMismatch, "coefficient length does not match design");
    }
    if (tau2 < 0.0) throw DataError(DataError::Kind::InvalidArgument, "tau2 must be nonnegative");
    const Eigen::VectorXd r = ds.y() - X.values * beta;
    double ll = -0.5 * static_cast<double>(ds.k()) * std::log(2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < ds.k(); ++i) {
        const double var = ds.studies[i].v + tau2;
        ll -= 0.5 * std::log(var) + 0.5 * r(static_cast<Eigen::Index>(i)) * r(static_cast<Eigen::Index>(i)) / var;
    }
    return ll;
}

Eigen::VectorXd fit_beta(const MetaDataset& ds, const DesignMatrix& X, double tau2, double condition_limit) {
    check_dims(ds, X);
    return WeightedNormal(X, weights(ds, tau2), ds.y(), condition_limit).beta();
}

double restricted_log_likelihood(const MetaDataset& ds, const DesignMatrix& X, double tau2, double condition_limit) {
    check_dims(ds, X);
    const Eigen::VectorXd w = weights(ds, tau2);
    const Eigen::VectorXd y = ds.y();
    const WeightedNormal normal(X, w, y, condition_limit);
    const Eigen::VectorXd r = y - X.values * normal.beta();
    return -0.5 * (-w.array().log()).sum() - 0.5 * normal.log_det - 0.5 * (w.array() * r.array().square()).sum();
}

double reml_upper_bound(const MetaDataset& ds) {
    const Eigen::VectorXd y = ds.y();
    if (y.size() < 2) return 0.0;
    const double mean = y.mean();
    return 10.0 * (y.array() - mean).square().sum() / static_cast<double>(y.size() - 1);
}

Tau2Estimate estimate_tau2(const MetaDataset& ds, const DesignMatrix& X, const FitOptions& opts) {
    check_dims(ds, X);
    if (opts.max_iter < 1) throw DataError(DataError::Kind::InvalidArgument, "max_iter must be >= 1");
    switch (opts.tau2_method) {
        case Tau2Method::fixed:
            if (opts.tau2_fixed < 0.0) throw DataError(DataError::Kind::InvalidArgument, "fixed tau2 must be >= 0");
            return {opts.tau2_fixed, true, 0};
        case Tau2Method::DL:
            return {dersimonian_laird_tau2(ds, X, opts.condition_limit), true, 0};
        case Tau2Method::REML:
            break;
    }

    if (ds.k() <= X.cols()) {
        throw NumericalError(NumericalError::Kind::InsufficientDF, "REML requires more studies than coefficients");
    }
    const double upper = reml_upper_bound(ds);
    if (!(upper > 0.0)) return {0.0, true, 0};

    auto objective = [&](double t) { return restricted_log_likelihood(ds, X, t, opts.condition_limit); };

    // Coarse scan (quadratically spaced, denser near zero) locates the
    // global mode; Brent then refines inside the bracketing cell pair.
    constexpr int kGrid = 32;
    std::vector<double> grid(kGrid + 1);
    std::size_t best = 0;
    double best_val = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kGrid; ++i) {
        const double s = static_cast<double>(i) / kGrid;
        grid[static_cast<std::size_t>(i)] = upper * s * s;
        const double val = objective(grid[static_cast<std::size_t>(i)]);
        if (val > best_val) {
            best_val = val;
            best = static_cast<std::size_t>(i);
        }
    }
    const double lo = grid[best == 0 ? 0 : best - 1];
    const double hi = grid[std::min<std::size_t>(best + 1, kGrid)];

    Tau2Estimate est;
    const double x = brent_minimize([&](double t) { return -objective(t); }, lo, hi, opts.reml_tol, opts.max_iter,
                                    est.iterations, est.converged);
    est.tau2 = x;
    double fx = objective(x);
    // Brent never evaluates the interval ends; the boundary mode at zero is
    // common (no residual heterogeneity).
    for (double end : {lo, hi}) {
        const double fe = objective(end);
        if (fe >= fx) {
            fx = fe;
            est.tau2 = end;
        }
    }
    return est;
}

double dersimonian_laird_tau2(const MetaDataset& ds, const DesignMatrix& X, double condition_limit) {
    check_dims(ds, X);
    const std::size_t k = ds.k();
    const std::size_t m = X.cols();
    if (k <= m) throw NumericalError(NumericalError::Kind::InsufficientDF, "DL requires more studies than coefficients");
    const Eigen::VectorXd w = weights(ds, 0.0);
    const Eigen::VectorXd y = ds.y();
    const WeightedNormal normal(X, w, y, condition_limit);
    const Eigen::VectorXd r = y - X.values * normal.beta();
    const double q = (w.array() * r.array().square()).sum();
    // c = tr(W) - tr((X'WX)^-1 X'W^2 X)
    const Eigen::MatrixXd Xw2 = X.values.array().colwise() * w.array().square();
    const double c = w.sum() - (normal.inverse * (X.values.transpose() * Xw2)).trace();
    if (!(c > 0.0)) return 0.0;
    return std::max(0.0, (q - static_cast<double>(k - m)) / c);
}

Eigen::MatrixXd hksj_covariance(const MetaDataset& ds, const DesignMatrix& X, double tau2, double condition_limit) {
    check_dims(ds, X);
    const std::size_t k = ds.k();
    const std::size_t m = X.cols();
    if (k <= m) throw NumericalError(NumericalError::Kind::InsufficientDF, "HKSJ requires more studies than coefficients");
    const Eigen::VectorXd w = weights(ds, tau2);
    const Eigen::VectorXd y = ds.y();
    const WeightedNormal normal(X, w, y, condition_limit);
    const Eigen::VectorXd r = y - X.values * normal.beta();
    // y'WPy reduces to the weighted residual sum of squares.
    const double s2 = (w.array() * r.array().square()).sum() / static_cast<double>(k - m);
    Eigen::MatrixXd sigma = s2 * normal.inverse;
    return 0.5 * (sigma + sigma.transpose());
}

FitResult fit(const MetaDataset& ds, const ModelSpec& spec, const FitOptions& opts) {
    if (!spec.marginality_closed()) {
        throw DataError(DataError::Kind::MarginalityViolation, "spec violates marginality: " + describe(ds, spec));
    }
    const DesignMatrix X = build_design(ds, spec);
    if (ds.k() <= X.cols()) {
        throw NumericalError(NumericalError::Kind::InsufficientDF,
                             "model with " + std::to_string(X.cols()) + " coefficients needs more than " +
                                 std::to_string(ds.k()) + " studies");
    }
    const Tau2Estimate t = estimate_tau2(ds, X, opts);

    FitResult out;
    out.spec = spec;
    out.columns = X.columns;
    out.tau2 = t.tau2;
    out.converged = t.converged;
    out.m = X.cols();
    out.k = ds.k();
    out.beta = fit_beta(ds, X, t.tau2, opts.condition_limit);
    out.sigma = hksj_covariance(ds, X, t.tau2, opts.condition_limit);
    out.loglik = log_likelihood(ds, X, out.beta, t.tau2);
    for (Eigen::Index j = 1; j < out.sigma.rows(); ++j) {
        out.max_se = std::max(out.max_se, std::sqrt(std::max(0.0, out.sigma(j, j))));
    }
    return out;
}

double wald_pvalue(const FitResult& fit, std::size_t j) {
    if (j >= fit.m) throw DataError(DataError::Kind::IndexOutOfRange, "coefficient index out of range");
    if (fit.k <= fit.m) throw NumericalError(NumericalError::Kind::InsufficientDF, "no residual degrees of freedom");
    const auto jj = static_cast<Eigen::Index>(j);
    const double var = fit.sigma(jj, jj);
    if (!(var > 0.0)) throw NumericalError(NumericalError::Kind::ZeroStandardError, "zero standard error for '" + fit.columns[j] + "'");
    const double t = fit.beta(jj) / std::sqrt(var);
    return t_two_sided_p(t, static_cast<double>(fit.k - fit.m));
}

nlohmann::json fit_to_json(const MetaDataset& ds, const FitResult& fit) {
    nlohmann::json j;
    j["spec"] = spec_to_json(ds, fit.spec);
    const Eigen::VectorXd se = fit.se();
    j["beta"] = nlohmann::json::object();
    j["se"] = nlohmann::json::object();
    j["pvalue"] = nlohmann::json::object();
    j["columns"] = fit.columns;
    for (std::size_t c = 0; c < fit.m; ++c) {
        const auto cc = static_cast<Eigen::Index>(c);
        j["beta"][fit.columns[c]] = fit.beta(cc);
        j["se"][fit.columns[c]] = se(cc);
        try {
            j["pvalue"][fit.columns[c]] = wald_pvalue(fit, c);
        } catch (const NumericalError&) {
            j["pvalue"][fit.columns[c]] = nullptr;
        }
    }
    j["tau2"] = fit.tau2;
    j["loglik"] = fit.loglik;
    j["converged"] = fit.converged;
    j["k"] = fit.k;
    j["m"] = fit.m;
    return j;
}

}  // namespace metaselect
