#include "ccmatch/loess.hpp"

#include "ccmatch/surface.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace ccmatch {

void validate(const LoessParams& params) {
    if (!(params.span > 0.0 && params.span <= 1.0)) {
        throw InvalidArgument("loess span must lie in (0, 1]");
    }
    if (params.degree != 1 && params.degree != 2) {
        throw InvalidArgument("loess degree must be 1 or 2");
    }
}

namespace {

inline double tricube(double u) {
    if (u >= 1.0) return 0.0;
    const double a = 1.0 - u * u * u;
    return a * a * a;
}

// One local fit centred on x0 over x[lo, lo+q). Returns (fitted value, smoother diagonal).
template <int P>
std::pair<double, double> local_fit(std::span<const double> x, std::span<const double> y,
                                    std::size_t lo, std::size_t q, std::size_t i) {
    using Mat = Eigen::Matrix<double, P, P>;
    using Vec = Eigen::Matrix<double, P, 1>;
    const double x0 = x[i];
    const double h = std::max(x0 - x[lo], x[lo + q - 1] - x0);
    if (!(h > 0.0)) throw DataError("loess: degenerate local design (zero bandwidth)");

    // Power sums of the scaled offset t = (x - x0) / h.
    double s[2 * P - 1] = {};
    double b[P] = {};
    std::size_t support = 0;
    for (std::size_t j = lo; j < lo + q; ++j) {
        const double t = (x[j] - x0) / h;
        const double w = tricube(std::abs(t));
        if (w <= 0.0) continue;
        ++support;
        double tp = w;
        for (int k = 0; k < 2 * P - 1; ++k) {
            s[k] += tp;
            if (k < P) b[k] += tp * y[j];
            tp *= t;
        }
    }
    if (support < static_cast<std::size_t>(P)) {
        throw DataError("loess: too few points with positive weight for the local polynomial");
    }
    Mat m;
    Vec rhs;
    for (int r = 0; r < P; ++r) {
        rhs(r) = b[r];
        for (int c = 0; c < P; ++c) m(r, c) = s[r + c];
    }
    Eigen::FullPivLU<Mat> lu(m);
    if (lu.rank() < P) throw DataError("loess: singular local design");
    const Vec coef = lu.solve(rhs);
    // The row of the design at x0 is e_0 and its weight is 1, so S_ii = (M^-1)_00.
    const Vec e0 = lu.solve(Vec::Unit(0));
    return {coef(0), e0(0)};
}

}  // namespace

LoessFit loess_fit(std::span<const double> x, std::span<const double> y,
                   const LoessParams& params) {
    validate(params);
    const std::size_t n = x.size();
    if (y.size() != n) throw InvalidArgument("loess: x and y differ in length");
    if (n < static_cast<std::size_t>(params.degree) + 2) {
        throw InvalidArgument("loess: need at least degree + 2 points");
    }
    for (std::size_t i = 1; i < n; ++i) {
        if (!(x[i] > x[i - 1])) throw InvalidArgument("loess: x must be strictly increasing");
    }

    const auto q = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::ceil(params.span * static_cast<double>(n) - 1e-9)));

    LoessFit out;
    out.fitted.resize(n);
    std::size_t lo = 0;
    for (std::size_t i = 0; i < n; ++i) {
        // Slide the q-point window right while that brings it closer to x_i.
        while (lo + q < n && x[i] - x[lo] > x[lo + q] - x[i]) ++lo;
        const auto [fit, diag] = params.degree == 2 ? local_fit<3>(x, y, lo, q, i)
                                                    : local_fit<2>(x, y, lo, q, i);
        out.fitted[i] = fit;
        out.edf += diag;
    }
    return out;
}

}  // namespace ccmatch
