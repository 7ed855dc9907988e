#pragma once

#include <Eigen/Core>

#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "ogl/data.hpp"
#include "ogl/dictionary.hpp"
#include "ogl/greedy.hpp"

namespace ogl {

// Full record of one greedy selection path: the atoms in selection order plus,
// for every prefix length k, the projection coefficients, the residual norm,
// and the best eligible correlation ratio.  For any selection rule that does
// not itself consult the threshold (ArgMax, KthMax, UniformRandom), the path
// under a loose threshold *contains* the run under any stricter one — those
// two per-k scalars are exactly the stop inputs of every threshold rule — so
// a single traced fit can be replayed under a whole grid of thresholds.
struct GreedyPath {
    std::vector<std::size_t> atoms;      // accepted atoms, selection order (size K)
    std::vector<Eigen::VectorXd> coeffs; // projection coefficients, k = 0..K
    std::vector<double> residual_norms;  // ||r_k||_m, k = 0..K
    std::vector<double> max_ratios;      // best eligible ratio at step k, k = 0..K
    double y_norm_m = 0;
    double truncation_M = std::numeric_limits<double>::infinity();
    std::uint64_t fingerprint = 0;
    Termination reason = Termination::KLimit; // why the driving fit ended
    double fit_seconds = 0;

    std::size_t K() const { return atoms.size(); }
};

inline GreedyPath trace_greedy_path(const GreedyConfig& cfg, const SampleSet& z,
                                    const Dictionary& d) {
    GreedyPath p;
    const auto t0 = std::chrono::steady_clock::now();
    const Estimator e = fit_greedy(cfg, z, d, [&](const GreedyState& s, const IterationInfo& info) {
        p.coeffs.push_back(s.coefficients());
        p.residual_norms.push_back(info.residual_norm_m);
        p.max_ratios.push_back(info.max_eligible_ratio);
    });
    const auto t1 = std::chrono::steady_clock::now();
    p.fit_seconds = std::chrono::duration<double>(t1 - t0).count();
    p.atoms = e.atom_indices;
    p.y_norm_m = emp_norm(z.ys);
    p.truncation_M = e.truncation_M;
    p.fingerprint = e.dictionary_fingerprint;
    p.reason = e.termination_reason;
    return p;
}

// Evaluates a traced path on a fixed set of input points: atom columns are
// computed once, after which the prediction of any prefix is one small
// matrix-vector product (clamped like the estimator itself would clamp).
class PathEvaluator {
public:
    PathEvaluator(const GreedyPath& path, const Dictionary& d, const std::vector<double>& xs)
        : path_(&path), cols_(static_cast<Eigen::Index>(xs.size()),
                              static_cast<Eigen::Index>(path.K())) {
        if (path.fingerprint != d.fingerprint)
            throw std::invalid_argument("PathEvaluator: path belongs to a different dictionary");
        for (std::size_t j = 0; j < path.K(); ++j)
            for (std::size_t i = 0; i < xs.size(); ++i)
                cols_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    atom_value(d, path.atoms[j], xs[i]);
    }

    Eigen::VectorXd predict_at_k(std::size_t k) const {
        if (k > path_->K()) throw std::out_of_range("PathEvaluator: k beyond the traced path");
        Eigen::VectorXd out = k == 0 ? Eigen::VectorXd::Zero(cols_.rows()).eval()
                                     : (cols_.leftCols(static_cast<Eigen::Index>(k)) *
                                        path_->coeffs[k])
                                           .eval();
        for (Eigen::Index i = 0; i < out.size(); ++i)
            out[i] = truncate(out[i], path_->truncation_M);
        return out;
    }

    double rmse_at_k(std::size_t k, const Eigen::VectorXd& truth) const {
        return rmse(predict_at_k(k), truth);
    }

private:
    const GreedyPath* path_;
    Eigen::MatrixXd cols_;
};

struct StopPoint {
    std::size_t k = 0;
    Termination reason = Termination::KLimit;
};

// Replays the threshold(+budget) stop along a traced path: stop at the first
// k where no eligible atom clears `delta` (or the budget is hit).  Valid
// whenever the path was driven by the same selection rule under a threshold
// no larger than `delta` and a budget no smaller than `k_cap`.
inline StopPoint reconstruct_threshold_stop(const GreedyPath& p, double delta,
                                            std::optional<std::size_t> k_cap) {
    for (std::size_t k = 0; k <= p.K(); ++k) {
        if (p.residual_norms[k] == 0) return {k, Termination::RelativeResidual};
        const double ratio = p.max_ratios[k];
        const bool active = !std::isnan(ratio) && ratio >= delta;
        if (!active) return {k, Termination::NoActiveAtom};
        if (k_cap && k >= *k_cap) return {k, Termination::KLimit};
    }
    return {p.K(), p.reason};
}

// Replays the adaptive stop: residual shrunk to delta * ||y||_m, or no atom
// clears delta, whichever fires first along the path.
inline StopPoint reconstruct_adaptive_stop(const GreedyPath& p, double delta) {
    for (std::size_t k = 0; k <= p.K(); ++k) {
        if (p.residual_norms[k] <= delta * p.y_norm_m)
            return {k, Termination::RelativeResidual};
        const double ratio = p.max_ratios[k];
        const bool active = !std::isnan(ratio) && ratio >= delta;
        if (!active) return {k, Termination::NoActiveAtom};
    }
    return {p.K(), p.reason};
}

} // namespace ogl
