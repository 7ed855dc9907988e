#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ogl/errors.hpp"
#include "ogl/rng.hpp"

namespace ogl {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// A labelled sample (x_i, y_i)_{i<m}.  sigma is the noise level the set was
// generated with (NaN when unknown, e.g. data loaded from a file); seed is the
// stream that produced it, kept so reports can be regenerated.
struct SampleSet {
    std::vector<double> xs;
    Eigen::VectorXd ys;
    double sigma = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t seed = 0;

    std::size_t m() const { return xs.size(); }
};

// Regression target on a closed interval.  The built-in target is the scaled
// sinc profile sin(x)/x; arbitrary targets plug in through `custom`.
struct TargetFunction {
    enum class Kind { Sinc, Custom };

    Kind kind = Kind::Sinc;
    double lo = -kPi;
    double hi = kPi;
    std::function<double(double)> custom;
};

inline TargetFunction sinc_target(double lo = -kPi, double hi = kPi) {
    TargetFunction f;
    f.kind = TargetFunction::Kind::Sinc;
    f.lo = lo;
    f.hi = hi;
    return f;
}

inline TargetFunction custom_target(std::function<double(double)> fn, double lo, double hi) {
    TargetFunction f;
    f.kind = TargetFunction::Kind::Custom;
    f.lo = lo;
    f.hi = hi;
    f.custom = std::move(fn);
    return f;
}

inline double eval_target(const TargetFunction& f, double x) {
    if (!(x >= f.lo && x <= f.hi))
        throw std::domain_error("eval_target: x outside the target's domain");
    switch (f.kind) {
    case TargetFunction::Kind::Sinc:
        // Series head near zero; sin(x)/x loses nothing at this width but the
        // series avoids the 0/0 at x == 0 itself.
        if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
        return std::sin(x) / x;
    case TargetFunction::Kind::Custom:
        if (!f.custom) throw std::invalid_argument("eval_target: custom target without a function");
        return f.custom(x);
    }
    throw std::logic_error("eval_target: unknown target kind");
}

// i.i.d. uniform inputs on [lo, hi], Gaussian noise of scale sigma on the
// labels.  All xs are drawn first, then all noise terms, so the x-grid of a
// trial does not move when sigma changes.
inline SampleSet gen_samples(const TargetFunction& f, std::size_t m, double sigma,
                             std::uint64_t seed) {
    if (m == 0) throw std::invalid_argument("gen_samples: m must be positive");
    if (sigma < 0) throw std::invalid_argument("gen_samples: sigma must be nonnegative");

    Rng rng(seed);
    SampleSet z;
    z.sigma = sigma;
    z.seed = seed;
    z.xs.resize(m);
    for (std::size_t i = 0; i < m; ++i) z.xs[i] = rng.uniform(f.lo, f.hi);
    z.ys.resize(static_cast<Eigen::Index>(m));
    for (std::size_t i = 0; i < m; ++i) {
        const double noise = sigma > 0 ? rng.normal(0.0, sigma) : 0.0;
        z.ys[static_cast<Eigen::Index>(i)] = eval_target(f, z.xs[i]) + noise;
    }
    return z;
}

namespace detail {

inline double parse_number(std::string_view field, std::size_t line_no, const char* what) {
    double value = 0;
    const char* first = field.data();
    const char* last = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw DataError("csv: line " + std::to_string(line_no) + ": bad " + std::string(what) +
                        " value '" + std::string(field) + "'");
    return value;
}

} // namespace detail

// Reads a two-column "x,y" CSV (header required).  Parsing is locale
// independent; errors carry the 1-based line number.
inline SampleSet load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("csv: cannot open '" + path.string() + "'");

    std::string line;
    std::size_t line_no = 0;

    if (!std::getline(in, line)) throw DataError("csv: '" + path.string() + "' is empty");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "x,y")
        throw DataError("csv: line 1: expected header 'x,y', got '" + line + "'");

    std::vector<double> xs;
    std::vector<double> ys;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw DataError("csv: line " + std::to_string(line_no) + ": expected 'x,y' pair, got '" +
                            line + "'");
        xs.push_back(detail::parse_number(std::string_view(line).substr(0, comma), line_no, "x"));
        ys.push_back(detail::parse_number(std::string_view(line).substr(comma + 1), line_no, "y"));
    }
    if (xs.empty()) throw DataError("csv: '" + path.string() + "' has no data rows");

    SampleSet z;
    z.xs = std::move(xs);
    z.ys = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
    return z;
}

inline double rmse(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size())
        throw std::invalid_argument("rmse: length mismatch");
    if (pred.empty()) throw std::invalid_argument("rmse: empty input");
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

inline double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
    return rmse(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
                std::span<const double>(truth.data(), static_cast<std::size_t>(truth.size())));
}

// Clamp to [-bound, bound]; predictions pass through this so a wild
// extrapolation cannot blow up the test error.
inline double truncate(double v, double bound) {
    if (!(bound >= 0)) throw std::invalid_argument("truncate: bound must be nonnegative");
    return std::clamp(v, -bound, bound);
}

} // namespace ogl
