#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace ogl {

// Columns whose orthogonalized remainder falls below this fraction of their
// plain norm are numerically inside the selected span and are rejected.
inline constexpr double kRankTol = 1e-10;

// Empirical inner product <u, v>_m = (1/m) sum_i u_i v_i and its norm.  All
// greedy decisions and all reported residual magnitudes use this geometry, so
// they are comparable across sample sizes.
inline double emp_inner(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    if (u.size() != v.size()) throw std::invalid_argument("emp_inner: length mismatch");
    if (u.size() == 0) throw std::invalid_argument("emp_inner: empty input");
    return u.dot(v) / static_cast<double>(u.size());
}

inline double emp_norm(const Eigen::VectorXd& u) {
    if (u.size() == 0) throw std::invalid_argument("emp_norm: empty input");
    return u.norm() / std::sqrt(static_cast<double>(u.size()));
}

// Orthogonal projection of a target onto the span of incrementally selected
// columns, maintained as a thin QR factorization.  Q is orthonormal in the
// plain Euclidean sense — the 1/m factor cancels inside the projector — and
// R's columns express the selected atoms in Q's basis.
//
// Each append runs classical Gram-Schmidt with one reorthogonalization pass
// (enough to hold the orthogonality of Q near machine precision for the
// dictionary sizes this library targets) and then recomputes the residual
// from scratch as y - Q (Q^T y), which stops error from accumulating across
// a long selection path.
class GreedyState {
public:
    enum class Append { Accepted, RankReject };

    explicit GreedyState(const Eigen::VectorXd& y) : y_(y) {
        if (y.size() == 0) throw std::invalid_argument("GreedyState: empty target");
        residual_ = y_;
        residual_norm_m_ = emp_norm(residual_);
    }

    // Tries to extend the basis with `col` (the design column of atom
    // `atom_index`).  On rank rejection the state is left untouched.
    Append project_append(const Eigen::VectorXd& col, std::size_t atom_index) {
        if (col.size() != y_.size())
            throw std::invalid_argument("project_append: column length mismatch");
        const double plain_norm = col.norm();
        if (plain_norm == 0) return Append::RankReject;

        const auto kk = static_cast<Eigen::Index>(k());
        Eigen::VectorXd head(kk);
        Eigen::VectorXd w = col;
        if (kk > 0) {
            head = q_.leftCols(kk).transpose() * w;
            w.noalias() -= q_.leftCols(kk) * head;
            Eigen::VectorXd head2 = q_.leftCols(kk).transpose() * w;
            w.noalias() -= q_.leftCols(kk) * head2;
            head += head2;
        }
        const double rkk = w.norm();
        if (rkk < kRankTol * plain_norm) return Append::RankReject;

        q_.conservativeResize(y_.size(), kk + 1);
        q_.col(kk) = w / rkk;
        r_.conservativeResize(kk + 1, kk + 1);
        if (kk > 0) {
            r_.col(kk).head(kk) = head;
            r_.row(kk).head(kk).setZero();
        }
        r_(kk, kk) = rkk;
        qty_.conservativeResize(kk + 1);
        qty_[kk] = q_.col(kk).dot(y_);

        residual_.noalias() = y_ - q_ * qty_;
        residual_norm_m_ = emp_norm(residual_);
        selected_.push_back(atom_index);
        return Append::Accepted;
    }

    // Coefficients of the projection in atom order: back-substitution of
    // R a = Q^T y.
    Eigen::VectorXd coefficients() const {
        const auto kk = static_cast<Eigen::Index>(k());
        if (kk == 0) return Eigen::VectorXd();
        return r_.topLeftCorner(kk, kk).triangularView<Eigen::Upper>().solve(qty_);
    }

    std::size_t k() const { return selected_.size(); }
    const std::vector<std::size_t>& selected() const { return selected_; }
    const Eigen::VectorXd& residual() const { return residual_; }
    double residual_norm_m() const { return residual_norm_m_; }
    const Eigen::VectorXd& target() const { return y_; }

    // Fitted values of the current projection at the sample points.
    Eigen::VectorXd fitted() const {
        if (k() == 0) return Eigen::VectorXd::Zero(y_.size());
        return q_ * qty_;
    }

private:
    Eigen::VectorXd y_;
    Eigen::MatrixXd q_;        // m x k, orthonormal columns
    Eigen::MatrixXd r_;        // k x k, upper triangular, positive diagonal
    Eigen::VectorXd qty_;      // Q^T y
    Eigen::VectorXd residual_; // y - Q Q^T y
    double residual_norm_m_ = 0;
    std::vector<std::size_t> selected_;
};

} // namespace ogl
