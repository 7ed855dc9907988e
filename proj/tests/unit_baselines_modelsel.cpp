// Unit suites for the dense baselines (ridge, l1 proximal-gradient) and the
// model-selection utilities (grids, fold splitting, cross validation).
#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <set>
#include <vector>

#include "ogl/baselines.hpp"
#include "ogl/modelsel.hpp"
#include "test_support.hpp"

using Catch::Approx;
using test_support::dictionary_from_design;

namespace {

// 4x4 sign matrix with mutually orthogonal columns of squared norm 4, so the
// columns are orthonormal under the (1/m)-weighted inner product.
Eigen::MatrixXd sign_orthogonal_4() {
    Eigen::MatrixXd h(4, 4);
    h << 1, 1, 1, 1, //
        1, -1, 1, -1, //
        1, 1, -1, -1, //
        1, -1, -1, 1;
    return h;
}

double l1_objective(const ogl::QuadraticForm& q, double lambda, const Eigen::VectorXd& a) {
    return q.objective(a) + lambda * a.cwiseAbs().sum();
}

} // namespace

// ---------------------------------------------------------------------------
// Ridge
// ---------------------------------------------------------------------------

TEST_CASE("ridge: one-atom closed form") {
    // minimize (1/2)((3-a)^2 + (1-a)^2) + a^2  =>  4a - 4 = 0  =>  a = 1
    Eigen::MatrixXd design(2, 1);
    design << 1, 1;
    const ogl::Dictionary d = dictionary_from_design(design);
    const Eigen::Vector2d y(3, 1);
    const ogl::DenseModel model = ogl::fit_ridge(d, y, 1.0);
    REQUIRE(model.coefficients.size() == 1);
    CHECK(model.coefficients[0] == Approx(1.0).epsilon(1e-14));
    CHECK(model.lambda == 1.0);
    CHECK(model.stats.converged);
}

TEST_CASE("ridge: matches dense normal equations on random instances") {
    for (std::uint32_t trial = 0; trial < 30; ++trial) {
        const std::size_t m = 20 + trial;
        const std::size_t n = 3 + trial % 8;
        const Eigen::MatrixXd g = test_support::random_design(m, n, 100 + trial);
        const Eigen::VectorXd y = test_support::random_vector(m, 200 + trial);
        const ogl::Dictionary d = dictionary_from_design(g);
        const double lambda = 0.01 * (1 + trial % 5);

        const ogl::DenseModel model = ogl::fit_ridge(d, y, lambda);

        Eigen::MatrixXd lhs = g.transpose() * g / static_cast<double>(m);
        lhs.diagonal().array() += lambda;
        const Eigen::VectorXd rhs = g.transpose() * y / static_cast<double>(m);
        const Eigen::VectorXd oracle = lhs.ldlt().solve(rhs);

        CHECK((model.coefficients - oracle).cwiseAbs().maxCoeff() <=
              1e-10 * (1 + oracle.cwiseAbs().maxCoeff()));
        CHECK(model.stats.optimality_residual <= 1e-8);
    }
}

TEST_CASE("ridge: rank-deficient dictionary needs regularization") {
    Eigen::MatrixXd design(2, 2);
    design << 1, 1, 1, 1; // duplicate columns: exactly singular Gram
    const ogl::Dictionary d = dictionary_from_design(design);
    const Eigen::Vector2d y(1, 2);
    CHECK_THROWS_AS(ogl::fit_ridge(d, y, 0.0), ogl::NumericalError);
    CHECK_NOTHROW(ogl::fit_ridge(d, y, 1e-6));
    CHECK_THROWS_AS(ogl::fit_ridge(d, y, -0.1), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// L1 proximal gradient
// ---------------------------------------------------------------------------

TEST_CASE("soft threshold: hand values") {
    CHECK(ogl::soft_threshold(3.0, 1.0) == 2.0);
    CHECK(ogl::soft_threshold(-3.0, 1.0) == -2.0);
    CHECK(ogl::soft_threshold(0.5, 1.0) == 0.0);
    CHECK(ogl::soft_threshold(-0.5, 1.0) == 0.0);
    CHECK(ogl::soft_threshold(1.0, 1.0) == 0.0);
}

TEST_CASE("l1 solver: separable closed form under orthonormal columns") {
    const Eigen::MatrixXd h = sign_orthogonal_4();
    const ogl::Dictionary d = dictionary_from_design(h);
    Eigen::Vector4d y(2.0, -1.0, 0.5, 1.0);
    const double lambda = 0.3;

    ogl::FistaOptions opts;
    opts.tol = 1e-10;
    const ogl::DenseModel model = ogl::fit_lasso_fista(d, y, lambda, opts);
    REQUIRE(model.stats.converged);

    // with (1/m) G^T G = I the objective separates: a_j = S((G^T y / m)_j, lambda/2)
    const Eigen::VectorXd gty = h.transpose() * y / 4.0;
    for (Eigen::Index j = 0; j < 4; ++j) {
        const double oracle = ogl::soft_threshold(gty[j], lambda / 2.0);
        CHECK(model.coefficients[j] == Approx(oracle).margin(1e-8));
    }
}

TEST_CASE("l1 solver: zero solution once the penalty dominates") {
    const Eigen::MatrixXd g = test_support::random_design(25, 6, 42);
    const Eigen::VectorXd y = test_support::random_vector(25, 43);
    const ogl::Dictionary d = dictionary_from_design(g);
    const ogl::QuadraticForm q = ogl::QuadraticForm::from(d, y);

    // the zero vector satisfies the optimality condition iff lambda >= 2 ||gty||_inf
    const double lambda = 2.0 * q.gty.cwiseAbs().maxCoeff() * 1.01;
    const ogl::DenseModel model = ogl::fit_lasso_fista(q, lambda);
    CHECK(model.stats.converged);
    CHECK(model.nnz() == 0);
    CHECK(model.coefficients.cwiseAbs().maxCoeff() == 0.0);

    // just below the critical value the solution is nonzero
    const ogl::DenseModel below = ogl::fit_lasso_fista(q, lambda * 0.9);
    CHECK(below.nnz() >= 1);
}

TEST_CASE("l1 solver: converged iterates are proximal fixed points") {
    for (std::uint32_t trial = 0; trial < 10; ++trial) {
        const Eigen::MatrixXd g = test_support::random_design(30, 8, 300 + trial);
        const Eigen::VectorXd y = test_support::random_vector(30, 400 + trial);
        const ogl::Dictionary d = dictionary_from_design(g);
        const ogl::QuadraticForm q = ogl::QuadraticForm::from(d, y);
        const double lambda = 0.05;

        const ogl::DenseModel model = ogl::fit_lasso_fista(q, lambda);
        REQUIRE(model.stats.converged);
        CHECK(model.stats.optimality_residual <= 1e-8);

        // verify the reported fixed-point residual independently
        const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q.gtg)
                                .eigenvalues()
                                .maxCoeff();
        const double step = 1.0 / (2.0 * lmax);
        const Eigen::VectorXd grad = 2.0 * (q.gtg * model.coefficients - q.gty);
        double fp = 0;
        for (Eigen::Index j = 0; j < model.coefficients.size(); ++j) {
            const double prox = ogl::soft_threshold(model.coefficients[j] - step * grad[j],
                                                    lambda * step);
            fp = std::max(fp, std::abs(model.coefficients[j] - prox));
        }
        // steps differ slightly (power iteration vs exact eigenvalue): allow slack
        CHECK(fp <= 1e-6);
    }
}

TEST_CASE("l1 solver: warm and cold starts agree; budget exhaustion never regresses") {
    const Eigen::MatrixXd g = test_support::random_design(40, 10, 7);
    const Eigen::VectorXd y = test_support::random_vector(40, 8);
    const ogl::Dictionary d = dictionary_from_design(g);
    const ogl::QuadraticForm q = ogl::QuadraticForm::from(d, y);
    const double lambda = 0.02;

    ogl::FistaOptions tight;
    tight.tol = 1e-10;
    const ogl::DenseModel cold = ogl::fit_lasso_fista(q, lambda, tight);
    REQUIRE(cold.stats.converged);

    ogl::FistaOptions warm = tight;
    warm.init = test_support::random_vector(10, 99); // arbitrary start point
    const ogl::DenseModel warmed = ogl::fit_lasso_fista(q, lambda, warm);
    REQUIRE(warmed.stats.converged);
    CHECK((cold.coefficients - warmed.coefficients).cwiseAbs().maxCoeff() <= 1e-6);

    // tiny budget: returns the best-objective iterate, never worse than the start
    ogl::FistaOptions capped = warm;
    capped.max_iter = 3;
    const ogl::DenseModel truncated = ogl::fit_lasso_fista(q, lambda, capped);
    CHECK_FALSE(truncated.stats.converged);
    CHECK(truncated.stats.iterations == 3);
    CHECK(l1_objective(q, lambda, truncated.coefficients) <=
          l1_objective(q, lambda, warm.init) + 1e-12);

    ogl::FistaOptions bad = tight;
    bad.tol = 0.0;
    CHECK_THROWS_AS(ogl::fit_lasso_fista(q, lambda, bad), std::invalid_argument);
    bad = tight;
    bad.init = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(ogl::fit_lasso_fista(q, lambda, bad), std::invalid_argument);
    CHECK_THROWS_AS(ogl::fit_lasso_fista(q, -0.5), std::invalid_argument);
}

TEST_CASE("quadratic form matches the explicit objective; support counting") {
    const Eigen::MatrixXd g = test_support::random_design(15, 4, 1);
    const Eigen::VectorXd y = test_support::random_vector(15, 2);
    const ogl::Dictionary d = dictionary_from_design(g);
    const ogl::QuadraticForm q = ogl::QuadraticForm::from(d, y);
    CHECK(q.m == 15);

    const Eigen::VectorXd a = test_support::random_vector(4, 3);
    const double direct = (y - g * a).squaredNorm() / 15.0;
    CHECK(q.objective(a) == Approx(direct).epsilon(1e-10));

    CHECK_THROWS_AS(ogl::QuadraticForm::from(d, Eigen::VectorXd::Zero(14)),
                    std::invalid_argument);

    ogl::DenseModel model;
    model.coefficients = Eigen::Vector4d(1e-9, 0.5, -2e-9, -0.1);
    CHECK(model.nnz() == 2);       // default cutoff 1e-8 hides the two tiny entries
    CHECK(model.nnz(0.2) == 1);    // custom cutoff
    CHECK(model.nnz(0.0) == 4);

    // dense-model predictions at the training points reproduce G a, for a
    // dictionary whose columns genuinely come from its atom functions
    std::vector<double> xs;
    for (int i = 0; i < 15; ++i) xs.push_back(-1.5 + 0.2 * i);
    const ogl::Dictionary rbf = ogl::build_rbf_dictionary({-1.0, 0.0, 1.0, 2.0}, 1.0, xs, false);
    model.coefficients = test_support::random_vector(4, 5);
    const Eigen::VectorXd preds = ogl::predict(model, rbf, xs);
    CHECK((preds - rbf.design * model.coefficients).cwiseAbs().maxCoeff() <= 1e-12);

    ogl::DenseModel wrong;
    wrong.coefficients = Eigen::Vector3d(1, 2, 3);
    CHECK_THROWS_AS(ogl::predict(wrong, rbf, 0.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Grids and folds
// ---------------------------------------------------------------------------

TEST_CASE("log grid: exact endpoints, geometric spacing") {
    const ogl::Grid g = ogl::log_grid(1e-6, 0.5, 100);
    REQUIRE(g.values.size() == 100);
    CHECK(g.values.front() == 1e-6); // bitwise, not approximately
    CHECK(g.values.back() == 0.5);
    CHECK(g.scale == ogl::Grid::Scale::Log);
    const double ratio = g.values[1] / g.values[0];
    for (std::size_t i = 1; i < g.values.size(); ++i) {
        CHECK(g.values[i] > g.values[i - 1]);
        CHECK(g.values[i] / g.values[i - 1] == Approx(ratio).epsilon(1e-9));
    }
    CHECK_THROWS_AS(ogl::log_grid(0.0, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(ogl::log_grid(1.0, 1.0, 5), std::invalid_argument);
    CHECK_THROWS_AS(ogl::log_grid(1.0, 2.0, 1), std::invalid_argument);
}

TEST_CASE("linear grid: exact endpoints, constant spacing") {
    const ogl::Grid g = ogl::linear_grid(1.0, 15.0, 15);
    REQUIRE(g.values.size() == 15);
    CHECK(g.values.front() == 1.0);
    CHECK(g.values.back() == 15.0);
    CHECK(g.scale == ogl::Grid::Scale::Linear);
    for (std::size_t i = 0; i < g.values.size(); ++i)
        CHECK(g.values[i] == Approx(1.0 + static_cast<double>(i)).epsilon(1e-12));
    CHECK_THROWS_AS(ogl::linear_grid(2.0, 1.0, 3), std::invalid_argument);
    CHECK_THROWS_AS(ogl::linear_grid(1.0, 2.0, 1), std::invalid_argument);
}

TEST_CASE("kfold split: partition, balance, determinism") {
    const auto folds = ogl::kfold_split(10, 3, 99);
    REQUIRE(folds.size() == 3);
    CHECK(folds[0].size() == 4); // 10 % 3 == 1 extra goes to the first fold
    CHECK(folds[1].size() == 3);
    CHECK(folds[2].size() == 3);

    std::set<std::size_t> all;
    for (const auto& f : folds) all.insert(f.begin(), f.end());
    std::set<std::size_t> expect;
    for (std::size_t i = 0; i < 10; ++i) expect.insert(i);
    CHECK(all == expect); // disjoint (sizes sum to 10) and covering

    CHECK(ogl::kfold_split(10, 3, 99) == folds);
    CHECK(ogl::kfold_split(10, 3, 100) != folds);

    const auto even = ogl::kfold_split(12, 4, 1);
    for (const auto& f : even) CHECK(f.size() == 3);

    CHECK_THROWS_AS(ogl::kfold_split(10, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(ogl::kfold_split(3, 4, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Cross validation
// ---------------------------------------------------------------------------

namespace {

// Shared scaffolding: a 12-point sample with constant targets and a trivial
// one-atom dictionary builder, so rigged predictors fully control the scores.
struct CvScaffold {
    ogl::SampleSet z;
    ogl::DictionaryBuilder builder;

    CvScaffold() {
        for (int i = 0; i < 12; ++i) z.xs.push_back(0.1 * i);
        z.ys = Eigen::VectorXd::Constant(12, 0.7);
        builder = [](const std::vector<double>& xs) {
            return ogl::build_rbf_dictionary({0.0}, 1.0, xs, false);
        };
    }
};

ogl::BatchPredictor constant_predictor(double value) {
    return [value](const std::vector<double>& xs) {
        return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(xs.size()), value).eval();
    };
}

} // namespace

TEST_CASE("cross validation: scores candidates and picks the minimum") {
    const CvScaffold s;
    const ogl::CvFitter fitter = [](double candidate, const ogl::SampleSet&,
                                    const ogl::Dictionary&) {
        return constant_predictor(candidate);
    };
    ogl::Grid grid;
    grid.values = {0.5, 0.7, 0.9};
    const ogl::CvResult r = ogl::cross_validate(fitter, grid, s.z, s.builder, 3, 11);
    REQUIRE(r.candidates == grid.values);
    // constant targets: the validation error of the constant-c predictor is |c - 0.7|
    CHECK(r.mean_rmse[0] == Approx(0.2).epsilon(1e-12));
    CHECK(r.mean_rmse[1] == 0.0);
    CHECK(r.mean_rmse[2] == Approx(0.2).epsilon(1e-12));
    CHECK(r.std_rmse[1] == 0.0);
    CHECK(r.best_index == 1);
    CHECK(r.best_candidate() == 0.7);

    // deterministic: same seed, same folds, same numbers
    const ogl::CvResult again = ogl::cross_validate(fitter, grid, s.z, s.builder, 3, 11);
    CHECK(again.mean_rmse == r.mean_rmse);
    CHECK(again.std_rmse == r.std_rmse);
}

TEST_CASE("cross validation: a failing candidate scores infinite and cannot win") {
    const CvScaffold s;
    int calls_for_half = 0;
    const ogl::CvFitter fitter = [&](double candidate, const ogl::SampleSet&,
                                     const ogl::Dictionary&) -> ogl::BatchPredictor {
        if (candidate == 0.5 && ++calls_for_half == 2) // fail on its second fold only
            throw ogl::NumericalError("rigged failure");
        return constant_predictor(candidate);
    };
    ogl::Grid grid;
    grid.values = {0.5, 0.9};
    const ogl::CvResult r = ogl::cross_validate(fitter, grid, s.z, s.builder, 3, 11);
    CHECK(std::isinf(r.mean_rmse[0]));
    CHECK(r.best_candidate() == 0.9); // despite 0.5 winning two of three folds

    const ogl::CvFitter all_fail = [](double, const ogl::SampleSet&,
                                      const ogl::Dictionary&) -> ogl::BatchPredictor {
        throw std::runtime_error("rigged");
    };
    CHECK_THROWS_AS(ogl::cross_validate(all_fail, grid, s.z, s.builder, 3, 11),
                    ogl::NumericalError);

    ogl::Grid empty;
    CHECK_THROWS_AS(ogl::cross_validate(fitter, empty, s.z, s.builder, 3, 11),
                    std::invalid_argument);
}

TEST_CASE("cross validation: exact ties break toward the smaller candidate value") {
    const CvScaffold s;
    // every candidate predicts perfectly, so all means tie at exactly zero
    const ogl::CvFitter fitter = [](double, const ogl::SampleSet&, const ogl::Dictionary&) {
        return constant_predictor(0.7);
    };
    ogl::Grid grid;
    grid.values = {0.9, 0.5}; // deliberately out of order: value, not index, must win
    const ogl::CvResult r = ogl::cross_validate(fitter, grid, s.z, s.builder, 3, 11);
    CHECK(r.mean_rmse[0] == 0.0);
    CHECK(r.mean_rmse[1] == 0.0);
    CHECK(r.best_candidate() == 0.5);
}

TEST_CASE("cross validation: folds are the outer loop, candidates the inner") {
    const CvScaffold s;
    std::vector<std::pair<const ogl::Dictionary*, double>> calls;
    const ogl::CvFitter fitter = [&](double candidate, const ogl::SampleSet& train,
                                     const ogl::Dictionary& d) {
        CHECK(d.m() == train.m()); // dictionary built on exactly the fold's inputs
        CHECK(train.m() == 8);     // 12 points, 3 folds: 4 held out
        calls.emplace_back(&d, candidate);
        return constant_predictor(candidate);
    };
    ogl::Grid grid;
    grid.values = {0.1, 0.2};
    (void)ogl::cross_validate(fitter, grid, s.z, s.builder, 3, 11);

    REQUIRE(calls.size() == 6);
    for (std::size_t f = 0; f < 3; ++f) {
        // within one fold both candidates see the same dictionary object,
        // in grid order — the contract per-fold caches rely on
        CHECK(calls[2 * f].first == calls[2 * f + 1].first);
        CHECK(calls[2 * f].second == 0.1);
        CHECK(calls[2 * f + 1].second == 0.2);
    }
}
