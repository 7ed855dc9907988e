#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "ogl/data.hpp"

namespace ogl {

// Atoms whose empirical norm falls below this are unusable as regressors and
// are excluded from selection.
inline constexpr double kDeadAtomNorm = 1e-12;

// Input-point metric, isolated here so the point carrier can change in one
// place.  The shipped pipeline works on the real line.
inline double squared_distance(double a, double b) {
    const double d = a - b;
    return d * d;
}

// Gaussian dictionary evaluated on a fixed sample: design(i, j) holds atom j
// at sample point i.  atom_norms are the *raw* empirical norms
// sqrt((1/m) sum_i g_j(x_i)^2) measured before any normalization; when
// `normalized` is set they are the frozen divisors that make each column have
// unit empirical norm, so out-of-sample evaluation divides by the same
// constants the fit saw.
struct Dictionary {
    std::vector<double> centers;
    double eta = 1.0;
    bool normalized = false;
    Eigen::MatrixXd design;     // m x n
    Eigen::VectorXd atom_norms; // n raw norms
    std::vector<std::uint8_t> dead;
    std::uint64_t fingerprint = 0;

    std::size_t n() const { return centers.size(); }
    std::size_t m() const { return static_cast<std::size_t>(design.rows()); }
};

namespace detail {

inline void fnv1a_bytes(std::uint64_t& h, const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
}

inline void fnv1a_double(std::uint64_t& h, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    fnv1a_bytes(h, &bits, sizeof bits);
}

// Identifies the atom family as a set of functions: centers, width, and (when
// normalizing) the divisors.  Two dictionaries with equal fingerprints define
// pointwise-identical atoms, so an estimator fit against one can be evaluated
// against the other.
inline std::uint64_t dictionary_fingerprint(const std::vector<double>& centers, double eta,
                                            bool normalized, const Eigen::VectorXd& atom_norms) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const std::uint64_t n = centers.size();
    fnv1a_bytes(h, &n, sizeof n);
    for (double c : centers) fnv1a_double(h, c);
    fnv1a_double(h, eta);
    const std::uint8_t flag = normalized ? 1 : 0;
    fnv1a_bytes(h, &flag, sizeof flag);
    if (normalized)
        for (Eigen::Index j = 0; j < atom_norms.size(); ++j) fnv1a_double(h, atom_norms[j]);
    return h;
}

} // namespace detail

// Midpoint packing of n centers on [lo, hi]: t_j = lo + (j + 1/2) * (hi-lo)/n.
// Adjacent spacing is exactly (hi-lo)/n and no center sits on the boundary.
inline std::vector<double> packing_centers(std::size_t n, double lo, double hi) {
    if (n == 0) throw std::invalid_argument("packing_centers: n must be positive");
    if (!(lo < hi)) throw std::invalid_argument("packing_centers: empty interval");
    std::vector<double> centers(n);
    const double step = (hi - lo) / static_cast<double>(n);
    for (std::size_t j = 0; j < n; ++j)
        centers[j] = lo + (static_cast<double>(j) + 0.5) * step;
    return centers;
}

// Builds the m x n Gaussian design g_j(x_i) = exp(-|x_i - t_j|^2 / eta^2).
// Raw Gaussian columns automatically satisfy the unit bound on the empirical
// norm; the optional normalization rescales every live column to norm one.
inline Dictionary build_rbf_dictionary(const std::vector<double>& centers, double eta,
                                       const std::vector<double>& xs, bool normalize = false) {
    if (centers.empty()) throw std::invalid_argument("build_rbf_dictionary: no centers");
    if (!(eta > 0)) throw std::invalid_argument("build_rbf_dictionary: eta must be positive");
    if (xs.empty()) throw std::invalid_argument("build_rbf_dictionary: no sample points");

    const auto m = static_cast<Eigen::Index>(xs.size());
    const auto n = static_cast<Eigen::Index>(centers.size());
    const double inv_eta2 = 1.0 / (eta * eta);

    Dictionary d;
    d.centers = centers;
    d.eta = eta;
    d.design.resize(m, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = 0; i < m; ++i)
            d.design(i, j) =
                std::exp(-squared_distance(xs[static_cast<std::size_t>(i)],
                                           centers[static_cast<std::size_t>(j)]) *
                         inv_eta2);

    d.atom_norms = (d.design.colwise().squaredNorm() / static_cast<double>(m)).cwiseSqrt();
    d.dead.resize(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!std::isfinite(d.atom_norms[j]) || d.atom_norms[j] > 1.0 + 1e-12)
            throw std::logic_error("build_rbf_dictionary: atom norm out of range");
        d.dead[static_cast<std::size_t>(j)] = d.atom_norms[j] < kDeadAtomNorm ? 1 : 0;
    }

    if (normalize) {
        d.normalized = true;
        for (Eigen::Index j = 0; j < n; ++j)
            if (!d.dead[static_cast<std::size_t>(j)]) d.design.col(j) /= d.atom_norms[j];
    }

    d.fingerprint = detail::dictionary_fingerprint(d.centers, d.eta, d.normalized, d.atom_norms);
    return d;
}

// One atom at an arbitrary input point, applying the same frozen divisor the
// training design used.
inline double atom_value(const Dictionary& d, std::size_t j, double x) {
    if (j >= d.n()) throw std::out_of_range("atom_value: atom index out of range");
    double v = std::exp(-squared_distance(x, d.centers[j]) / (d.eta * d.eta));
    if (d.normalized && !d.dead[j]) v /= d.atom_norms[static_cast<Eigen::Index>(j)];
    return v;
}

// All n atoms at one input point (a fresh design row).
inline Eigen::VectorXd eval_atoms(const Dictionary& d, double x) {
    Eigen::VectorXd row(static_cast<Eigen::Index>(d.n()));
    for (std::size_t j = 0; j < d.n(); ++j) row[static_cast<Eigen::Index>(j)] = atom_value(d, j, x);
    return row;
}

} // namespace ogl
