#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace calfplay {

class LmmError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Design for a random-intercept model: response, fixed-effect design
/// matrix (including the intercept column) and a group index per
/// observation.
struct LmmSpec {
    Eigen::VectorXd y;
    Eigen::MatrixXd design;
    std::vector<std::string> column_names;  // one per design column
    std::vector<int> group;                 // 0-based, contiguous
};

struct LmmOptions {
    bool reml = false;           // ML is the default estimation method
    double log_lambda_lo = -12;  // search bounds for log variance ratio
    double log_lambda_hi = 12;
    int grid_points = 25;        // pre-scan before golden-section
    double tolerance = 1e-10;
};

struct LmmFit {
    Eigen::VectorXd beta;
    Eigen::MatrixXd cov_beta;       // at the estimated variance components
    double sigma2_group = 0.0;      // between-group (farm) variance
    double sigma2_resid = 0.0;
    double lambda = 0.0;            // sigma2_group / sigma2_resid
    double loglik = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_groups = 0;
    std::size_t n_params = 0;       // fixed effects + 2 variance components
    bool reml = false;              // estimation method used for this fit
    Eigen::VectorXd fitted_fixed;   // X * beta
    Eigen::VectorXd group_effects;  // BLUPs, one per group
    Eigen::VectorXd std_residuals;  // conditional residuals / sigma_resid
    std::vector<std::string> column_names;
};

/// Profile-likelihood fit of a Gaussian random-intercept model. For each
/// variance ratio lambda the fixed effects have a closed-form GLS
/// solution; lambda is optimized by golden-section search on log lambda
/// after a grid pre-scan, with the sigma2_group = 0 boundary evaluated
/// explicitly.
LmmFit fit_random_intercept(const LmmSpec& spec, const LmmOptions& opts = {});

/// Profile log-likelihood at a fixed lambda (beta profiled out). Exposed
/// for the optimum-verification property tests.
double profile_loglik(const LmmSpec& spec, double lambda, bool reml = false);

/// sigma2_group / (sigma2_group + sigma2_resid)
double icc(const LmmFit& fit);

struct RSquared {
    double marginal = 0.0;
    double conditional = 0.0;
};

/// Variance-partition R2: marginal uses fixed-effect fitted variance over
/// fitted variance + both variance components; conditional adds the group
/// variance to the numerator.
RSquared r_squared(const LmmFit& fit, const LmmFit& baseline);

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
};

InformationCriteria information_criteria(const LmmFit& fit);

struct LrTest {
    double chi2 = 0.0;
    std::size_t df = 0;
    double p = 1.0;
};

LrTest lr_test(const LmmFit& full, const LmmFit& nested);

struct PairwiseComparison {
    std::string level_a;
    std::string level_b;
    double difference = 0.0;  // adjusted mean a - adjusted mean b
    double std_error = 0.0;
    double t = 0.0;
    double df = 0.0;
    double p = 1.0;
};

/// Unadjusted (LSD) pairwise t-tests between factor levels. The factor is
/// identified by the design column index of each non-reference level; the
/// reference level contributes a zero contrast. Denominator df:
/// n_obs - rank(design) - n_groups + 1.
std::vector<PairwiseComparison> lsd_pairwise(
    const LmmFit& fit, const std::vector<std::string>& level_names,
    const std::vector<int>& level_columns);  // -1 marks the reference level

struct LeveneResult {
    double statistic = 0.0;
    double p = 1.0;
    std::size_t df1 = 0, df2 = 0;
    std::vector<std::string> warnings;
};

struct Diagnostics {
    Eigen::VectorXd std_residuals;
    LeveneResult levene;
};

/// Brown-Forsythe Levene test (|residual - group median| ANOVA) on the
/// standardized residuals grouped by `groups`. Singleton groups are
/// dropped with a warning.
Diagnostics diagnostics(const LmmFit& fit, const std::vector<int>& groups);

}  // namespace calfplay
