#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ogl/data.hpp"
#include "ogl/dictionary.hpp"
#include "ogl/errors.hpp"
#include "ogl/projection.hpp"
#include "ogl/rng.hpp"

namespace ogl {

// How the next atom is chosen among the eligible ones.  The score of an atom
// is its correlation ratio |<r, g>_m| / ||r||_m against the current residual.
//
//   ArgMax        — highest score (pure steepest descent).
//   KthMax        — the `order`-th highest score; order 2 and 3 deliberately
//                   weaken the choice to probe how much optimality matters.
//   UniformRandom — uniform over all eligible atoms, ignoring scores.
//   DeltaArbitrary— first atom whose score clears the threshold, scanning a
//                   random permutation fixed once per fit: any rule that picks
//                   *some* above-threshold atom is admissible, this one is the
//                   cheapest such choice.
//   DeltaRandom   — uniform over the atoms whose score clears the threshold.
struct SelectionRule {
    enum class Kind { ArgMax, KthMax, UniformRandom, DeltaArbitrary, DeltaRandom };

    Kind kind = Kind::ArgMax;
    std::size_t order = 1; // used by KthMax only

    static SelectionRule argmax() { return {Kind::ArgMax, 1}; }
    static SelectionRule kth_max(std::size_t order) {
        if (order < 1) throw std::invalid_argument("SelectionRule::kth_max: order must be >= 1");
        return {Kind::KthMax, order};
    }
    static SelectionRule uniform_random() { return {Kind::UniformRandom, 1}; }
    static SelectionRule delta_arbitrary() { return {Kind::DeltaArbitrary, 1}; }
    static SelectionRule delta_random() { return {Kind::DeltaRandom, 1}; }

    bool needs_threshold() const {
        return kind == Kind::DeltaArbitrary || kind == Kind::DeltaRandom;
    }
    bool uses_rng() const {
        return kind == Kind::UniformRandom || kind == Kind::DeltaArbitrary ||
               kind == Kind::DeltaRandom;
    }
};

// When the selection loop ends.
//
//   FixedK         — after exactly k_max atoms (rank limits permitting).
//   ThresholdOnly  — once no eligible atom clears the threshold delta.
//   ThresholdPlusK — ThresholdOnly, with k_max as a hard cap.
//   Adaptive       — once the residual has shrunk to delta * ||y||_m, or no
//                    eligible atom clears delta, whichever comes first.  The
//                    same delta drives both tests, which is what makes the
//                    stopping parameter-free beyond delta itself.
struct StoppingRule {
    enum class Kind { FixedK, ThresholdOnly, ThresholdPlusK, Adaptive };

    Kind kind = Kind::FixedK;
    double delta = std::numeric_limits<double>::quiet_NaN();
    std::size_t k_max = 0;

    static StoppingRule fixed_k(std::size_t k_max) {
        return {Kind::FixedK, std::numeric_limits<double>::quiet_NaN(), k_max};
    }
    static StoppingRule threshold_only(double delta) {
        check_delta(delta);
        return {Kind::ThresholdOnly, delta, 0};
    }
    static StoppingRule threshold_plus_k(double delta, std::size_t k_max) {
        check_delta(delta);
        return {Kind::ThresholdPlusK, delta, k_max};
    }
    static StoppingRule adaptive(double delta) {
        check_delta(delta);
        return {Kind::Adaptive, delta, 0};
    }

    bool has_threshold() const { return kind != Kind::FixedK; }

    static void check_delta(double delta) {
        if (!(delta > 0.0) || !(delta <= 1.0))
            throw std::invalid_argument("StoppingRule: delta must lie in (0, 1]");
    }
};

struct GreedyConfig {
    SelectionRule selection = SelectionRule::argmax();
    StoppingRule stopping = StoppingRule::fixed_k(10);
    // Prediction clamp bound; NaN means "derive from the data" (max |y_i|).
    double truncation_M = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;
};

enum class Termination {
    NoActiveAtom,       // no eligible atom cleared the threshold
    RelativeResidual,   // residual norm fell to delta * ||y||_m (or to zero)
    KLimit,             // hit the configured atom budget
    DictionaryExhausted // selection ran out of usable atoms
};

inline const char* to_string(Termination t) {
    switch (t) {
    case Termination::NoActiveAtom: return "NoActiveAtom";
    case Termination::RelativeResidual: return "RelativeResidual";
    case Termination::KLimit: return "KLimit";
    case Termination::DictionaryExhausted: return "DictionaryExhausted";
    }
    throw std::logic_error("to_string(Termination): unknown value");
}

inline std::optional<Termination> termination_from_string(std::string_view s) {
    if (s == "NoActiveAtom") return Termination::NoActiveAtom;
    if (s == "RelativeResidual") return Termination::RelativeResidual;
    if (s == "KLimit") return Termination::KLimit;
    if (s == "DictionaryExhausted") return Termination::DictionaryExhausted;
    return std::nullopt;
}

// A fitted sparse combination of dictionary atoms.  coefficients[i] multiplies
// atom atom_indices[i]; predictions clamp to [-truncation_M, truncation_M].
struct Estimator {
    std::vector<std::size_t> atom_indices;
    Eigen::VectorXd coefficients;
    std::uint64_t dictionary_fingerprint = 0;
    double truncation_M = std::numeric_limits<double>::infinity();
    std::size_t k_final = 0;
    double delta_used = std::numeric_limits<double>::quiet_NaN();
    Termination termination_reason = Termination::KLimit;
    std::vector<std::size_t> rejected_atoms; // rank-rejected along the way
};

// Correlation ratio of every atom against the residual, NaN where the atom is
// not eligible.  Requires a nonzero residual: once the residual vanishes, the
// interpolation is exact and selection has no meaningful score left.
inline Eigen::VectorXd correlation_ratios(const Eigen::VectorXd& residual, const Dictionary& d,
                                          const std::vector<std::uint8_t>& eligible) {
    if (static_cast<std::size_t>(residual.size()) != d.m())
        throw std::invalid_argument("correlation_ratios: residual length mismatch");
    if (eligible.size() != d.n())
        throw std::invalid_argument("correlation_ratios: eligibility mask length mismatch");
    const double rnorm = emp_norm(residual);
    if (rnorm == 0)
        throw std::domain_error("correlation_ratios: zero residual (exact interpolation)");

    const double scale = 1.0 / (static_cast<double>(d.m()) * rnorm);
    Eigen::VectorXd ratios = (d.design.transpose() * residual).cwiseAbs() * scale;
    for (std::size_t j = 0; j < d.n(); ++j)
        if (!eligible[j]) ratios[static_cast<Eigen::Index>(j)] = std::numeric_limits<double>::quiet_NaN();
    return ratios;
}

// Picks the next atom from a ratio vector (NaN = ineligible).  Returns
// nothing when the rule has no admissible candidate.  Ties on the score break
// toward the lowest index, which keeps every deterministic rule reproducible.
inline std::optional<std::size_t> select_atom(const SelectionRule& rule,
                                              const Eigen::VectorXd& ratios,
                                              std::optional<double> delta, Rng& rng,
                                              const std::vector<std::size_t>& scan_order = {}) {
    const auto n = static_cast<std::size_t>(ratios.size());
    if ((rule.needs_threshold()) && !delta)
        throw std::invalid_argument("select_atom: rule needs a threshold but none was given");

    switch (rule.kind) {
    case SelectionRule::Kind::ArgMax: {
        std::optional<std::size_t> best;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = ratios[static_cast<Eigen::Index>(j)];
            if (std::isnan(v)) continue;
            if (!best || v > ratios[static_cast<Eigen::Index>(*best)]) best = j;
        }
        return best;
    }
    case SelectionRule::Kind::KthMax: {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < n; ++j)
            if (!std::isnan(ratios[static_cast<Eigen::Index>(j)])) idx.push_back(j);
        if (idx.size() < rule.order) return std::nullopt;
        std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(rule.order - 1),
                         idx.end(), [&](std::size_t a, std::size_t b) {
                             const double ra = ratios[static_cast<Eigen::Index>(a)];
                             const double rb = ratios[static_cast<Eigen::Index>(b)];
                             if (ra != rb) return ra > rb;
                             return a < b;
                         });
        return idx[rule.order - 1];
    }
    case SelectionRule::Kind::UniformRandom: {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < n; ++j)
            if (!std::isnan(ratios[static_cast<Eigen::Index>(j)])) idx.push_back(j);
        if (idx.empty()) return std::nullopt;
        return idx[rng.below(idx.size())];
    }
    case SelectionRule::Kind::DeltaArbitrary: {
        if (scan_order.empty()) {
            for (std::size_t j = 0; j < n; ++j) {
                const double v = ratios[static_cast<Eigen::Index>(j)];
                if (!std::isnan(v) && v >= *delta) return j;
            }
            return std::nullopt;
        }
        for (std::size_t j : scan_order) {
            const double v = ratios[static_cast<Eigen::Index>(j)];
            if (!std::isnan(v) && v >= *delta) return j;
        }
        return std::nullopt;
    }
    case SelectionRule::Kind::DeltaRandom: {
        std::vector<std::size_t> idx;
        for (std::size_t j = 0; j < n; ++j) {
            const double v = ratios[static_cast<Eigen::Index>(j)];
            if (!std::isnan(v) && v >= *delta) idx.push_back(j);
        }
        if (idx.empty()) return std::nullopt;
        return idx[rng.below(idx.size())];
    }
    }
    throw std::logic_error("select_atom: unknown selection kind");
}

// Stop decision for the current iteration; empty optional means continue.
// For Adaptive, the residual test is checked before the active-set test, so a
// run that satisfies both reports the residual as its reason.
inline std::optional<Termination> stop_reason(const StoppingRule& rule, std::size_t k,
                                              double residual_norm_m, double target_norm_m,
                                              bool active_exists) {
    switch (rule.kind) {
    case StoppingRule::Kind::FixedK:
        if (k >= rule.k_max) return Termination::KLimit;
        return std::nullopt;
    case StoppingRule::Kind::ThresholdOnly:
        if (!active_exists) return Termination::NoActiveAtom;
        return std::nullopt;
    case StoppingRule::Kind::ThresholdPlusK:
        if (!active_exists) return Termination::NoActiveAtom;
        if (k >= rule.k_max) return Termination::KLimit;
        return std::nullopt;
    case StoppingRule::Kind::Adaptive:
        if (residual_norm_m <= rule.delta * target_norm_m) return Termination::RelativeResidual;
        if (!active_exists) return Termination::NoActiveAtom;
        return std::nullopt;
    }
    throw std::logic_error("stop_reason: unknown stopping kind");
}

inline bool should_stop(const StoppingRule& rule, std::size_t k, double residual_norm_m,
                        double target_norm_m, bool active_exists) {
    return stop_reason(rule, k, residual_norm_m, target_norm_m, active_exists).has_value();
}

// Snapshot handed to a fit observer once per iteration, before the stop test,
// for k = 0 .. k_final.  max_eligible_ratio is the best correlation ratio
// over the still-eligible atoms (NaN when the residual is zero or nothing is
// eligible): together with residual_norm_m it determines the stop decision of
// any threshold rule, which is what lets experiment drivers replay one fitted
// path under many thresholds.
struct IterationInfo {
    std::size_t k = 0;
    double residual_norm_m = 0;
    double max_eligible_ratio = std::numeric_limits<double>::quiet_NaN();
};

using StepObserver = std::function<void(const GreedyState&, const IterationInfo&)>;

// Runs the greedy selection loop: score eligible atoms against the residual,
// stop if the rule says so, otherwise select one atom and extend the
// orthogonal projection.  Columns that are numerically inside the selected
// span are blacklisted and selection retries within the same iteration.
inline Estimator fit_greedy(const GreedyConfig& cfg, const SampleSet& z, const Dictionary& d,
                            const StepObserver& observer = {}) {
    if (z.m() == 0) throw std::invalid_argument("fit_greedy: empty sample");
    if (d.m() != z.m()) throw std::invalid_argument("fit_greedy: dictionary built on different sample");
    if (cfg.selection.needs_threshold() && !cfg.stopping.has_threshold())
        throw std::invalid_argument("fit_greedy: threshold selection needs a threshold stopping rule");
    if (cfg.stopping.has_threshold()) StoppingRule::check_delta(cfg.stopping.delta);
    if (!std::isnan(cfg.truncation_M) && !(cfg.truncation_M >= 0))
        throw std::invalid_argument("fit_greedy: truncation bound must be nonnegative");

    const std::optional<double> delta = cfg.stopping.has_threshold()
                                            ? std::optional<double>(cfg.stopping.delta)
                                            : std::nullopt;
    const double y_norm_m = emp_norm(z.ys);

    Rng rng(cfg.seed);
    std::vector<std::size_t> scan_order;
    if (cfg.selection.kind == SelectionRule::Kind::DeltaArbitrary) {
        scan_order.resize(d.n());
        std::iota(scan_order.begin(), scan_order.end(), std::size_t{0});
        rng.shuffle(scan_order.begin(), scan_order.end());
    }

    std::vector<std::uint8_t> eligible(d.n());
    for (std::size_t j = 0; j < d.n(); ++j) eligible[j] = d.dead[j] ? 0 : 1;

    GreedyState state(z.ys);
    std::vector<std::size_t> rejected;
    Termination reason;

    for (;;) {
        Eigen::VectorXd ratios;
        double max_ratio = std::numeric_limits<double>::quiet_NaN();
        const bool residual_zero = state.residual_norm_m() == 0;
        if (!residual_zero) {
            ratios = correlation_ratios(state.residual(), d, eligible);
            for (Eigen::Index j = 0; j < ratios.size(); ++j) {
                const double v = ratios[j];
                if (!std::isnan(v) && !(v <= max_ratio)) max_ratio = v;
            }
        }

        if (observer) observer(state, IterationInfo{state.k(), state.residual_norm_m(), max_ratio});

        if (residual_zero) {
            reason = Termination::RelativeResidual;
            break;
        }
        const bool active_exists = delta && !std::isnan(max_ratio) && max_ratio >= *delta;
        if (auto stop = stop_reason(cfg.stopping, state.k(), state.residual_norm_m(), y_norm_m,
                                    active_exists)) {
            reason = *stop;
            break;
        }

        // Select and append; a rank rejection blacklists the atom and retries
        // against the same residual.  Blacklisting can empty the active set,
        // which ends the run with the matching reason.
        std::optional<Termination> mid_stop;
        for (;;) {
            const auto pick = select_atom(cfg.selection, ratios, delta, rng, scan_order);
            if (!pick) {
                mid_stop = Termination::DictionaryExhausted;
                break;
            }
            const double prev_norm = state.residual_norm_m();
            const auto res = state.project_append(d.design.col(static_cast<Eigen::Index>(*pick)), *pick);
            if (res == GreedyState::Append::Accepted) {
                eligible[*pick] = 0;
                if (state.residual_norm_m() > prev_norm + 1e-9 * y_norm_m)
                    throw NumericalError("fit_greedy: residual norm increased");
                break;
            }
            eligible[*pick] = 0;
            rejected.push_back(*pick);
            ratios[static_cast<Eigen::Index>(*pick)] = std::numeric_limits<double>::quiet_NaN();
            // For a threshold selection, a blacklist can remove the last
            // active atom: that is a NoActiveAtom stop, not exhaustion.
            if (cfg.selection.needs_threshold()) {
                bool any_active = false;
                for (Eigen::Index j = 0; j < ratios.size() && !any_active; ++j)
                    any_active = !std::isnan(ratios[j]) && ratios[j] >= *delta;
                if (!any_active) {
                    mid_stop = Termination::NoActiveAtom;
                    break;
                }
            }
        }
        if (mid_stop) {
            reason = *mid_stop;
            break;
        }
    }

    Estimator e;
    e.atom_indices = state.selected();
    e.coefficients = state.coefficients();
    e.dictionary_fingerprint = d.fingerprint;
    e.truncation_M = std::isnan(cfg.truncation_M) ? z.ys.cwiseAbs().maxCoeff() : cfg.truncation_M;
    e.k_final = state.k();
    e.delta_used = delta ? *delta : std::numeric_limits<double>::quiet_NaN();
    e.termination_reason = reason;
    e.rejected_atoms = std::move(rejected);
    return e;
}

// Untruncated fitted values at the training points.
inline Eigen::VectorXd fitted_values(const Estimator& e, const Dictionary& d) {
    if (e.dictionary_fingerprint != d.fingerprint)
        throw std::invalid_argument("fitted_values: estimator belongs to a different dictionary");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d.m()));
    for (std::size_t i = 0; i < e.atom_indices.size(); ++i)
        out += e.coefficients[static_cast<Eigen::Index>(i)] *
               d.design.col(static_cast<Eigen::Index>(e.atom_indices[i]));
    return out;
}

inline double predict(const Estimator& e, const Dictionary& d, double x) {
    if (e.dictionary_fingerprint != d.fingerprint)
        throw std::invalid_argument("predict: estimator belongs to a different dictionary");
    double acc = 0;
    for (std::size_t i = 0; i < e.atom_indices.size(); ++i)
        acc += e.coefficients[static_cast<Eigen::Index>(i)] * atom_value(d, e.atom_indices[i], x);
    return truncate(acc, e.truncation_M);
}

inline Eigen::VectorXd predict(const Estimator& e, const Dictionary& d,
                               const std::vector<double>& xs) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(xs.size()));
    for (std::size_t i = 0; i < xs.size(); ++i) out[static_cast<Eigen::Index>(i)] = predict(e, d, xs[i]);
    return out;
}

// Oracle-inequality certificate for a threshold-terminated fit: against any
// competitor h = sum_j h_j g_j, the training residual obeys
//     ||y - fit||_m  <=  ||y - h||_m + delta * sum_j |h_j|.
// Meaningful only when the fit stopped through its threshold (NoActiveAtom or
// RelativeResidual); a budget- or exhaustion-terminated fit carries no such
// guarantee and asking for one is an error.
inline bool oracle_inequality_certificate(const Estimator& e, const SampleSet& z, const Dictionary& d,
                               const Eigen::VectorXd& h_coeffs) {
    if (e.termination_reason != Termination::NoActiveAtom &&
        e.termination_reason != Termination::RelativeResidual)
        throw std::invalid_argument("oracle_inequality_certificate: fit did not stop through its threshold");
    if (std::isnan(e.delta_used))
        throw std::invalid_argument("oracle_inequality_certificate: fit carries no threshold");
    if (static_cast<std::size_t>(h_coeffs.size()) != d.n())
        throw std::invalid_argument("oracle_inequality_certificate: competitor length mismatch");
    if (z.m() != d.m()) throw std::invalid_argument("oracle_inequality_certificate: sample/dictionary mismatch");

    const Eigen::VectorXd fit_vals = fitted_values(e, d);
    const Eigen::VectorXd h_vals = d.design * h_coeffs;
    const double lhs = emp_norm(z.ys - fit_vals);
    const double h_l1 = h_coeffs.cwiseAbs().sum();
    const double rhs = emp_norm(z.ys - h_vals) + e.delta_used * h_l1;
    const double slack = 1e-9 * (1.0 + emp_norm(z.ys) + h_l1);
    return lhs <= rhs + slack;
}

} // namespace ogl
