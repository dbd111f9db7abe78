#include "calfplay/lmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace calfplay {

namespace {

struct GroupIndex {
    std::vector<std::vector<Eigen::Index>> members;  // per group
    std::size_t n_groups = 0;
};

GroupIndex index_groups(const LmmSpec& spec) {
    GroupIndex gi;
    int max_g = -1;
    for (int g : spec.group) {
        if (g < 0) throw LmmError("negative group index");
        max_g = std::max(max_g, g);
    }
    gi.n_groups = static_cast<std::size_t>(max_g + 1);
    gi.members.resize(gi.n_groups);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(spec.group.size()); ++i)
        gi.members[spec.group[i]].push_back(i);
    for (const auto& m : gi.members)
        if (m.empty()) throw LmmError("group index has empty levels");
    return gi;
}

// Applies V0^{-1} = (I + lambda Z Z')^{-1} blockwise:
// within group j, V0^{-1} v = v - lambda/(1 + lambda n_j) * sum(v).
Eigen::MatrixXd apply_v0_inverse(const Eigen::MatrixXd& m, double lambda,
                                 const GroupIndex& gi) {
    Eigen::MatrixXd out = m;
    for (const auto& members : gi.members) {
        const double shrink =
            lambda / (1.0 + lambda * static_cast<double>(members.size()));
        Eigen::RowVectorXd colsum = Eigen::RowVectorXd::Zero(m.cols());
        for (Eigen::Index i : members) colsum += m.row(i);
        for (Eigen::Index i : members) out.row(i) -= shrink * colsum;
    }
    return out;
}

double log_det_v0(double lambda, const GroupIndex& gi) {
    double ld = 0.0;
    for (const auto& members : gi.members)
        ld += std::log1p(lambda * static_cast<double>(members.size()));
    return ld;
}

struct ProfilePoint {
    Eigen::VectorXd beta;
    Eigen::MatrixXd xtvx_inv;
    double sigma2 = 0.0;  // residual variance (profiled)
    double loglik = 0.0;
};

ProfilePoint profile_at(const LmmSpec& spec, const GroupIndex& gi,
                        double lambda, bool reml) {
    const Eigen::Index n = spec.y.size();
    const Eigen::Index p = spec.design.cols();

    Eigen::MatrixXd v0inv_x = apply_v0_inverse(spec.design, lambda, gi);
    Eigen::MatrixXd xtvx = spec.design.transpose() * v0inv_x;
    Eigen::VectorXd xtvy = v0inv_x.transpose() * spec.y;

    ProfilePoint pt;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(xtvx);
    pt.beta = ldlt.solve(xtvy);
    pt.xtvx_inv = ldlt.solve(Eigen::MatrixXd::Identity(p, p));

    Eigen::VectorXd resid = spec.y - spec.design * pt.beta;
    double quad =
        resid.dot(apply_v0_inverse(resid, lambda, gi).col(0).eval());
    const double denom =
        reml ? static_cast<double>(n - p) : static_cast<double>(n);
    pt.sigma2 = std::max(quad / denom, 1e-300);

    const double ld_v0 = log_det_v0(lambda, gi);
    constexpr double ln2pi = 1.8378770664093453;  // ln(2*pi)
    if (!reml) {
        pt.loglik = -0.5 * (static_cast<double>(n) *
                                (ln2pi + std::log(pt.sigma2) + 1.0) +
                            ld_v0);
    } else {
        double ld_xtvx = xtvx.ldlt().vectorD().array().log().sum();
        pt.loglik = -0.5 * (static_cast<double>(n - p) *
                                (ln2pi + std::log(pt.sigma2) + 1.0) +
                            ld_v0 + ld_xtvx);
    }
    return pt;
}

void check_design(const LmmSpec& spec) {
    if (spec.y.size() != spec.design.rows() ||
        spec.group.size() != static_cast<std::size_t>(spec.y.size()))
        throw LmmError("design, response and group sizes disagree");
    if (spec.y.size() == 0) throw LmmError("empty model");
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(spec.design);
    if (qr.rank() < spec.design.cols()) {
        // Name the aliased columns: those whose pivot fell outside the rank.
        std::string names;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index i = qr.rank(); i < spec.design.cols(); ++i) {
            Eigen::Index col = perm[i];
            if (!names.empty()) names += ", ";
            names += col < static_cast<Eigen::Index>(spec.column_names.size())
                         ? spec.column_names[col]
                         : "column " + std::to_string(col);
        }
        throw LmmError("rank-deficient design; aliased: " + names);
    }
}

}  // namespace

double profile_loglik(const LmmSpec& spec, double lambda, bool reml) {
    GroupIndex gi = index_groups(spec);
    return profile_at(spec, gi, lambda, reml).loglik;
}

LmmFit fit_random_intercept(const LmmSpec& spec, const LmmOptions& opts) {
    check_design(spec);
    GroupIndex gi = index_groups(spec);
    if (gi.n_groups < 2)
        throw LmmError("need at least 2 groups to identify the group variance");

    auto obj = [&](double log_lambda) {
        return profile_at(spec, gi, std::exp(log_lambda), opts.reml).loglik;
    };

    // Grid pre-scan guards against landing in the wrong basin.
    double best_x = opts.log_lambda_lo;
    double best_f = obj(best_x);
    for (int i = 1; i < opts.grid_points; ++i) {
        double x = opts.log_lambda_lo +
                   (opts.log_lambda_hi - opts.log_lambda_lo) * i /
                       (opts.grid_points - 1);
        double f = obj(x);
        if (f > best_f) {
            best_f = f;
            best_x = x;
        }
    }

    // Golden-section around the best grid point.
    double step = (opts.log_lambda_hi - opts.log_lambda_lo) /
                  (opts.grid_points - 1);
    double a = std::max(opts.log_lambda_lo, best_x - step);
    double b = std::min(opts.log_lambda_hi, best_x + step);
    constexpr double invphi = 0.6180339887498949;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = obj(c), fd = obj(d);
    while (b - a > opts.tolerance) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = obj(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = obj(d);
        }
    }
    double log_lambda = (a + b) / 2;
    double lambda = std::exp(log_lambda);
    ProfilePoint interior = profile_at(spec, gi, lambda, opts.reml);

    // The sigma2_group = 0 boundary is permitted and checked explicitly.
    ProfilePoint boundary = profile_at(spec, gi, 0.0, opts.reml);
    if (boundary.loglik >= interior.loglik) {
        lambda = 0.0;
        interior = boundary;
    }

    LmmFit fit;
    fit.beta = interior.beta;
    fit.sigma2_resid = interior.sigma2;
    fit.sigma2_group = lambda * interior.sigma2;
    fit.lambda = lambda;
    fit.loglik = interior.loglik;
    fit.cov_beta = interior.sigma2 * interior.xtvx_inv;
    fit.n_obs = static_cast<std::size_t>(spec.y.size());
    fit.n_groups = gi.n_groups;
    fit.n_params = static_cast<std::size_t>(spec.design.cols()) + 2;
    fit.reml = opts.reml;
    fit.fitted_fixed = spec.design * fit.beta;
    fit.column_names = spec.column_names;

    // BLUPs and conditional residuals.
    Eigen::VectorXd marg_resid = spec.y - fit.fitted_fixed;
    fit.group_effects.resize(static_cast<Eigen::Index>(gi.n_groups));
    Eigen::VectorXd cond_resid = marg_resid;
    for (std::size_t g = 0; g < gi.n_groups; ++g) {
        double sum = 0;
        for (Eigen::Index i : gi.members[g]) sum += marg_resid[i];
        double u = lambda * sum /
                   (1.0 + lambda * static_cast<double>(gi.members[g].size()));
        fit.group_effects[static_cast<Eigen::Index>(g)] = u;
        for (Eigen::Index i : gi.members[g]) cond_resid[i] -= u;
    }
    fit.std_residuals = cond_resid / std::sqrt(fit.sigma2_resid);
    return fit;
}

double icc(const LmmFit& fit) {
    double denom = fit.sigma2_group + fit.sigma2_resid;
    return denom > 0 ? fit.sigma2_group / denom : 0.0;
}

namespace {

double sample_variance(const Eigen::VectorXd& v) {
    if (v.size() < 2) return 0.0;
    double mean = v.mean();
    return (v.array() - mean).square().sum() /
           static_cast<double>(v.size() - 1);
}

}  // namespace

RSquared r_squared(const LmmFit& fit, const LmmFit& baseline) {
    if (fit.n_obs != baseline.n_obs || fit.n_groups != baseline.n_groups)
        throw LmmError("r_squared: fits are not on the same data");
    double var_f = sample_variance(fit.fitted_fixed);
    double denom = var_f + fit.sigma2_group + fit.sigma2_resid;
    RSquared r;
    if (denom > 0) {
        r.marginal = var_f / denom;
        r.conditional = (var_f + fit.sigma2_group) / denom;
    }
    return r;
}

InformationCriteria information_criteria(const LmmFit& fit) {
    InformationCriteria ic;
    double k = static_cast<double>(fit.n_params);
    ic.aic = -2.0 * fit.loglik + 2.0 * k;
    ic.bic = -2.0 * fit.loglik + k * std::log(static_cast<double>(fit.n_obs));
    return ic;
}

LrTest lr_test(const LmmFit& full, const LmmFit& nested) {
    if (full.n_obs != nested.n_obs)
        throw LmmError("lr_test: fits are not on the same data");
    if (full.n_params <= nested.n_params)
        throw LmmError("lr_test: models are not nested (full must add parameters)");
    LrTest t;
    t.chi2 = std::max(0.0, 2.0 * (full.loglik - nested.loglik));
    t.df = full.n_params - nested.n_params;
    boost::math::chi_squared dist(static_cast<double>(t.df));
    t.p = boost::math::cdf(boost::math::complement(dist, t.chi2));
    return t;
}

std::vector<PairwiseComparison> lsd_pairwise(
    const LmmFit& fit, const std::vector<std::string>& level_names,
    const std::vector<int>& level_columns) {
    if (level_names.size() != level_columns.size())
        throw LmmError("lsd_pairwise: level names and columns disagree");
    const std::size_t L = level_names.size();
    if (L < 2) throw LmmError("lsd_pairwise: need at least 2 levels");
    const Eigen::Index p = fit.beta.size();
    for (int c : level_columns)
        if (c >= p) throw LmmError("lsd_pairwise: level column out of range");

    double df = static_cast<double>(fit.n_obs) - static_cast<double>(p) -
                static_cast<double>(fit.n_groups) + 1.0;
    if (df < 1.0) throw LmmError("lsd_pairwise: nonpositive degrees of freedom");
    boost::math::students_t dist(df);

    auto contrast = [&](int col) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
        if (col >= 0) c[col] = 1.0;  // reference level is the zero contrast
        return c;
    };

    std::vector<PairwiseComparison> out;
    out.reserve(L * (L - 1) / 2);
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = i + 1; j < L; ++j) {
            Eigen::VectorXd c = contrast(level_columns[i]) -
                                contrast(level_columns[j]);
            PairwiseComparison pc;
            pc.level_a = level_names[i];
            pc.level_b = level_names[j];
            pc.difference = c.dot(fit.beta);
            // cov_beta carries the ML residual scale (RSS/n); contrasts use
            // the unbiased scale (RSS/(n-p)) so that the two-group boundary
            // case reduces exactly to the pooled two-sample t-test.
            double correction =
                fit.reml ? 1.0
                         : static_cast<double>(fit.n_obs) /
                               (static_cast<double>(fit.n_obs) -
                                static_cast<double>(p));
            pc.std_error = std::sqrt(c.dot(fit.cov_beta * c) * correction);
            pc.df = df;
            if (pc.std_error > 0) {
                pc.t = pc.difference / pc.std_error;
                pc.p = 2.0 * boost::math::cdf(boost::math::complement(
                                 dist, std::abs(pc.t)));
            } else {
                pc.t = 0.0;
                pc.p = 1.0;
            }
            out.push_back(std::move(pc));
        }
    }
    return out;
}

Diagnostics diagnostics(const LmmFit& fit, const std::vector<int>& groups) {
    if (groups.size() != fit.n_obs)
        throw LmmError("diagnostics: group labels do not match observations");
    Diagnostics d;
    d.std_residuals = fit.std_residuals;

    // Brown-Forsythe: one-way ANOVA on |residual - group median|.
    std::map<int, std::vector<double>> by_group;
    for (std::size_t i = 0; i < groups.size(); ++i)
        by_group[groups[i]].push_back(fit.std_residuals[static_cast<Eigen::Index>(i)]);

    std::vector<std::vector<double>> z_groups;
    for (auto& [g, vals] : by_group) {
        if (vals.size() < 2) {
            d.levene.warnings.push_back("group " + std::to_string(g) +
                                        " has n=1; excluded from Levene test");
            continue;
        }
        std::vector<double> sorted = vals;
        std::sort(sorted.begin(), sorted.end());
        double median = sorted.size() % 2
                            ? sorted[sorted.size() / 2]
                            : 0.5 * (sorted[sorted.size() / 2 - 1] +
                                     sorted[sorted.size() / 2]);
        std::vector<double> z;
        z.reserve(vals.size());
        for (double v : vals) z.push_back(std::abs(v - median));
        z_groups.push_back(std::move(z));
    }
    const std::size_t k = z_groups.size();
    if (k < 2) {
        d.levene.warnings.push_back(
            "fewer than 2 usable groups; Levene test skipped");
        return d;
    }
    std::size_t n_total = 0;
    double grand_sum = 0;
    for (const auto& z : z_groups) {
        n_total += z.size();
        for (double v : z) grand_sum += v;
    }
    double grand_mean = grand_sum / static_cast<double>(n_total);
    double between = 0, within = 0;
    for (const auto& z : z_groups) {
        double m = 0;
        for (double v : z) m += v;
        m /= static_cast<double>(z.size());
        between += static_cast<double>(z.size()) * (m - grand_mean) * (m - grand_mean);
        for (double v : z) within += (v - m) * (v - m);
    }
    d.levene.df1 = k - 1;
    d.levene.df2 = n_total - k;
    if (within <= 0) {
        d.levene.statistic = between > 0
                                 ? std::numeric_limits<double>::infinity()
                                 : 0.0;
        d.levene.p = between > 0 ? 0.0 : 1.0;
        return d;
    }
    d.levene.statistic = (between / static_cast<double>(d.levene.df1)) /
                         (within / static_cast<double>(d.levene.df2));
    boost::math::fisher_f dist(static_cast<double>(d.levene.df1),
                               static_cast<double>(d.levene.df2));
    d.levene.p = boost::math::cdf(
        boost::math::complement(dist, d.levene.statistic));
    return d;
}

}  // namespace calfplay
