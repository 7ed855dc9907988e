#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ogl/data.hpp"
#include "ogl/dictionary.hpp"
#include "ogl/errors.hpp"
#include "ogl/rng.hpp"

namespace ogl {

struct Grid {
    enum class Scale { Log, Linear };
    std::vector<double> values;
    Scale scale = Scale::Log;
};

// `count` points geometrically spaced on [lo, hi].  Both endpoints are pinned
// exactly so config-declared bounds appear verbatim in reports.
inline Grid log_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0) || !(hi > lo)) throw std::invalid_argument("log_grid: need 0 < lo < hi");
    if (count < 2) throw std::invalid_argument("log_grid: need at least two points");
    Grid g;
    g.scale = Grid::Scale::Log;
    g.values.resize(count);
    const double llo = std::log(lo);
    const double lhi = std::log(hi);
    for (std::size_t i = 0; i < count; ++i)
        g.values[i] = std::exp(llo + (lhi - llo) * static_cast<double>(i) /
                                         static_cast<double>(count - 1));
    g.values.front() = lo;
    g.values.back() = hi;
    return g;
}

inline Grid linear_grid(double lo, double hi, std::size_t count) {
    if (!(hi > lo)) throw std::invalid_argument("linear_grid: need lo < hi");
    if (count < 2) throw std::invalid_argument("linear_grid: need at least two points");
    Grid g;
    g.scale = Grid::Scale::Linear;
    g.values.resize(count);
    for (std::size_t i = 0; i < count; ++i)
        g.values[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    g.values.front() = lo;
    g.values.back() = hi;
    return g;
}

// Seeded partition of {0..m-1} into k folds whose sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t m, std::size_t k,
                                                         std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("kfold_split: need at least two folds");
    if (k > m) throw std::invalid_argument("kfold_split: more folds than samples");
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(idx.begin(), idx.end());

    std::vector<std::vector<std::size_t>> folds(k);
    const std::size_t base = m / k;
    const std::size_t extra = m % k;
    std::size_t pos = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(idx.begin() + static_cast<std::ptrdiff_t>(pos),
                        idx.begin() + static_cast<std::ptrdiff_t>(pos + size));
        pos += size;
    }
    return folds;
}

struct CvResult {
    std::vector<double> candidates;
    std::vector<double> mean_rmse; // over folds; +inf if the candidate failed anywhere
    std::vector<double> std_rmse;  // sample standard deviation over folds
    std::size_t best_index = 0;

    double best_candidate() const { return candidates[best_index]; }
};

// Predictions at a batch of input points.
using BatchPredictor = std::function<Eigen::VectorXd(const std::vector<double>&)>;

// Trains one model on a training fold at one candidate parameter value.  The
// dictionary passed in was built on exactly the fold's inputs, so empirical
// inner products inside the fit use the fold's own sample size.
using CvFitter =
    std::function<BatchPredictor(double candidate, const SampleSet& train, const Dictionary& d)>;

using DictionaryBuilder = std::function<Dictionary(const std::vector<double>& xs)>;

// k-fold cross validation of a parametrized fitter.  The dictionary is
// rebuilt on each training fold.  Folds are the outer loop and candidates the
// inner one — a contract fitters may rely on to cache per-fold work (Gram
// matrices, warm starts, shared greedy paths).  A candidate whose fit or
// prediction throws on any fold receives infinite mean RMSE and cannot win.
// Ties on the mean break toward the smaller candidate value.
inline CvResult cross_validate(const CvFitter& fitter, const Grid& grid, const SampleSet& z,
                               const DictionaryBuilder& builder, std::size_t folds,
                               std::uint64_t seed) {
    if (grid.values.empty()) throw std::invalid_argument("cross_validate: empty candidate grid");
    const auto fold_idx = kfold_split(z.m(), folds, seed);

    const std::size_t n_cand = grid.values.size();
    std::vector<std::vector<double>> errors(n_cand); // per candidate, per fold

    std::vector<std::uint8_t> seen(z.m(), 0);
    for (const auto& f : fold_idx)
        for (std::size_t i : f) {
            if (seen[i]) throw std::logic_error("cross_validate: folds overlap");
            seen[i] = 1;
        }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end())
        throw std::logic_error("cross_validate: folds do not cover the sample");

    for (std::size_t f = 0; f < folds; ++f) {
        std::vector<std::uint8_t> in_val(z.m(), 0);
        for (std::size_t i : fold_idx[f]) in_val[i] = 1;

        SampleSet train;
        train.sigma = z.sigma;
        train.seed = z.seed;
        std::vector<double> val_xs;
        std::vector<double> val_ys;
        std::vector<double> train_ys;
        for (std::size_t i = 0; i < z.m(); ++i) {
            if (in_val[i]) {
                val_xs.push_back(z.xs[i]);
                val_ys.push_back(z.ys[static_cast<Eigen::Index>(i)]);
            } else {
                train.xs.push_back(z.xs[i]);
                train_ys.push_back(z.ys[static_cast<Eigen::Index>(i)]);
            }
        }
        train.ys = Eigen::Map<const Eigen::VectorXd>(train_ys.data(),
                                                     static_cast<Eigen::Index>(train_ys.size()));

        const Dictionary d = builder(train.xs);
        for (std::size_t c = 0; c < n_cand; ++c) {
            double err;
            try {
                const BatchPredictor predictor = fitter(grid.values[c], train, d);
                const Eigen::VectorXd pred = predictor(val_xs);
                err = rmse(std::span<const double>(pred.data(),
                                                   static_cast<std::size_t>(pred.size())),
                           std::span<const double>(val_ys.data(), val_ys.size()));
            } catch (const std::exception&) {
                err = std::numeric_limits<double>::infinity();
            }
            errors[c].push_back(err);
        }
    }

    CvResult result;
    result.candidates = grid.values;
    result.mean_rmse.resize(n_cand);
    result.std_rmse.resize(n_cand);
    for (std::size_t c = 0; c < n_cand; ++c) {
        const auto& e = errors[c];
        double mean = 0;
        bool failed = false;
        for (double v : e) {
            if (std::isinf(v)) failed = true;
            mean += v;
        }
        if (failed) {
            result.mean_rmse[c] = std::numeric_limits<double>::infinity();
            result.std_rmse[c] = std::numeric_limits<double>::infinity();
            continue;
        }
        mean /= static_cast<double>(e.size());
        double ss = 0;
        for (double v : e) ss += (v - mean) * (v - mean);
        result.mean_rmse[c] = mean;
        result.std_rmse[c] = e.size() > 1 ? std::sqrt(ss / static_cast<double>(e.size() - 1)) : 0.0;
    }

    std::size_t best = 0;
    bool found = false;
    for (std::size_t c = 0; c < n_cand; ++c) {
        if (std::isinf(result.mean_rmse[c])) continue;
        if (!found || result.mean_rmse[c] < result.mean_rmse[best] ||
            (result.mean_rmse[c] == result.mean_rmse[best] &&
             result.candidates[c] < result.candidates[best])) {
            best = c;
            found = true;
        }
    }
    if (!found) throw NumericalError("cross_validate: every candidate failed on some fold");
    result.best_index = best;
    return result;
}

} // namespace ogl
