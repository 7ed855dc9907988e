#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>

#include "ogl/dictionary.hpp"
#include "ogl/errors.hpp"
#include "ogl/rng.hpp"

namespace ogl {

// Coefficients below this are treated as structural zeros when counting the
// support of a dense model.
inline constexpr double kNnzCutoff = 1e-8;

struct SolverStats {
    std::size_t iterations = 0;
    double optimality_residual = 0; // first-order / fixed-point residual of the result
    bool converged = true;
};

// Full-dictionary linear model a (one coefficient per atom), from ridge or
// lasso fitting.  No prediction clamp: the dense baselines are reported raw.
struct DenseModel {
    Eigen::VectorXd coefficients;
    double lambda = 0;
    SolverStats stats;

    std::size_t nnz(double cutoff = kNnzCutoff) const {
        std::size_t c = 0;
        for (Eigen::Index j = 0; j < coefficients.size(); ++j)
            if (std::abs(coefficients[j]) > cutoff) ++c;
        return c;
    }
};

// The data-dependent part of the least-squares objective
//   f(a) = (1/m)||y - G a||^2 = yty - 2 a.gty + a^T gtg a,
// precomputed so that a whole regularization path can be fit against one
// Gram matrix.  For m > n this also makes every solver iteration O(n^2)
// instead of O(mn).
struct QuadraticForm {
    Eigen::MatrixXd gtg; // G^T G / m
    Eigen::VectorXd gty; // G^T y / m
    double yty = 0;      // y^T y / m
    std::size_t m = 0;

    static QuadraticForm from(const Dictionary& d, const Eigen::VectorXd& y) {
        if (static_cast<std::size_t>(y.size()) != d.m())
            throw std::invalid_argument("QuadraticForm: sample/dictionary mismatch");
        QuadraticForm q;
        q.m = d.m();
        const double inv_m = 1.0 / static_cast<double>(q.m);
        q.gtg.noalias() = d.design.transpose() * d.design * inv_m;
        q.gty.noalias() = d.design.transpose() * y * inv_m;
        q.yty = y.squaredNorm() * inv_m;
        return q;
    }

    double objective(const Eigen::VectorXd& a) const {
        return yty - 2.0 * a.dot(gty) + a.dot(gtg * a);
    }
};

// Ridge regression: minimizes (1/m)||y - G a||^2 + lambda ||a||^2, solved
// through the normal equations (gtg + lambda I) a = gty.  The system is
// symmetric positive definite for lambda > 0; at lambda = 0 a rank-deficient
// dictionary makes it singular, which surfaces as a NumericalError.
inline DenseModel fit_ridge(const QuadraticForm& q, double lambda) {
    if (lambda < 0) throw std::invalid_argument("fit_ridge: lambda must be nonnegative");
    Eigen::MatrixXd a = q.gtg;
    a.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw NumericalError("fit_ridge: normal equations not positive definite"
                             " (rank-deficient dictionary needs lambda > 0)");
    DenseModel model;
    model.lambda = lambda;
    model.coefficients = llt.solve(q.gty);
    model.stats.iterations = 1;
    // First-order condition: gty - gtg a = lambda a.
    model.stats.optimality_residual =
        (q.gty - q.gtg * model.coefficients - lambda * model.coefficients)
            .cwiseAbs()
            .maxCoeff();
    model.stats.converged = true;
    return model;
}

inline DenseModel fit_ridge(const Dictionary& d, const Eigen::VectorXd& y, double lambda) {
    return fit_ridge(QuadraticForm::from(d, y), lambda);
}

inline double soft_threshold(double v, double tau) {
    if (v > tau) return v - tau;
    if (v < -tau) return v + tau;
    return 0.0;
}

struct FistaOptions {
    std::size_t max_iter = 20000;
    double tol = 1e-8;          // proximal fixed-point residual, sup norm
    Eigen::VectorXd init;        // warm start; empty = zero vector
    std::uint64_t power_seed = 1; // start vector for the Lipschitz estimate
};

namespace detail {

// Largest eigenvalue of a symmetric PSD matrix by power iteration, to 1e-6
// relative accuracy.  Deterministic through the seeded start vector.
inline double power_iteration_lmax(const Eigen::MatrixXd& s, std::uint64_t seed) {
    const Eigen::Index n = s.rows();
    Rng rng(seed);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = rng.normal();
    double vn = v.norm();
    if (vn == 0) {
        v.setOnes();
        vn = v.norm();
    }
    v /= vn;

    double lambda = 0;
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd w = s * v;
        const double wn = w.norm();
        if (wn == 0) return 0.0; // the matrix annihilated the subspace: treat as zero
        const double next = v.dot(w);
        v = w / wn;
        if (it > 0 && std::abs(next - lambda) <= 1e-6 * std::abs(next)) return next;
        lambda = next;
    }
    return lambda;
}

} // namespace detail

// Lasso: minimizes F(a) = (1/m)||y - G a||^2 + lambda ||a||_1 by FISTA with
// fixed step 1/L, L the largest eigenvalue of the Hessian 2 gtg.  Stops when
// the iterate is a proximal fixed point to within opts.tol.  On convergence
// the stopping iterate is returned; if the iteration budget runs out, the
// best-objective iterate seen (never worse than the start point) is returned
// with converged = false.
inline DenseModel fit_lasso_fista(const QuadraticForm& q, double lambda,
                                  const FistaOptions& opts = {}) {
    if (lambda < 0) throw std::invalid_argument("fit_lasso_fista: lambda must be nonnegative");
    if (!(opts.tol > 0)) throw std::invalid_argument("fit_lasso_fista: tol must be positive");
    const Eigen::Index n = q.gtg.rows();

    DenseModel model;
    model.lambda = lambda;

    const double lip = 2.0 * detail::power_iteration_lmax(q.gtg, opts.power_seed);
    if (lip <= 0) {
        // Degenerate dictionary (all-zero design): any support costs penalty
        // and buys nothing, so zero is optimal.
        model.coefficients = Eigen::VectorXd::Zero(n);
        model.stats = {0, 0.0, true};
        return model;
    }
    const double step = 1.0 / lip;
    const double tau = lambda * step;

    Eigen::VectorXd a = opts.init.size() == 0 ? Eigen::VectorXd::Zero(n) : opts.init;
    if (a.size() != n) throw std::invalid_argument("fit_lasso_fista: init length mismatch");
    Eigen::VectorXd z = a;
    double t = 1.0;

    auto penalized = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& gtg_v) {
        return q.yty - 2.0 * v.dot(q.gty) + v.dot(gtg_v) + lambda * v.cwiseAbs().sum();
    };

    Eigen::VectorXd best = a;
    double best_obj = penalized(a, q.gtg * a);
    double best_fp = std::numeric_limits<double>::infinity();

    for (std::size_t it = 1; it <= opts.max_iter; ++it) {
        // Proximal gradient step from the momentum point.
        Eigen::VectorXd grad_z = 2.0 * (q.gtg * z - q.gty);
        Eigen::VectorXd a_next(n);
        for (Eigen::Index j = 0; j < n; ++j)
            a_next[j] = soft_threshold(z[j] - step * grad_z[j], tau);

        // Fixed-point residual and objective at the new iterate (one extra
        // Gram product, shared by both).
        Eigen::VectorXd gtg_a = q.gtg * a_next;
        double fp = 0;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double g = 2.0 * (gtg_a[j] - q.gty[j]);
            fp = std::max(fp, std::abs(a_next[j] - soft_threshold(a_next[j] - step * g, tau)));
        }
        const double obj = penalized(a_next, gtg_a);
        if (obj < best_obj) {
            best_obj = obj;
            best = a_next;
            best_fp = fp;
        }

        if (fp <= opts.tol) {
            model.coefficients = a_next;
            model.stats.iterations = it;
            model.stats.optimality_residual = fp;
            model.stats.converged = true;
            return model;
        }

        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        z = a_next + ((t - 1.0) / t_next) * (a_next - a);
        a = a_next;
        t = t_next;
    }

    model.coefficients = best;
    model.stats.iterations = opts.max_iter;
    model.stats.optimality_residual = best_fp;
    model.stats.converged = false;
    return model;
}

inline DenseModel fit_lasso_fista(const Dictionary& d, const Eigen::VectorXd& y, double lambda,
                                  const FistaOptions& opts = {}) {
    return fit_lasso_fista(QuadraticForm::from(d, y), lambda, opts);
}

// Dense-model prediction at arbitrary points (no clamp).
inline double predict(const DenseModel& model, const Dictionary& d, double x) {
    if (static_cast<std::size_t>(model.coefficients.size()) != d.n())
        throw std::invalid_argument("predict: model size does not match dictionary");
    return eval_atoms(d, x).dot(model.coefficients);
}

inline Eigen::VectorXd predict(const DenseModel& model, const Dictionary& d,
                               const std::vector<double>& xs) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = predict(model, d, xs[i]);
    return out;
}

} // namespace ogl
