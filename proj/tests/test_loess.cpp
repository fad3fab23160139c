#include "ccmatch/loess.hpp"
#include "ccmatch/surface.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace ccmatch;

namespace {

std::vector<double> seq(std::size_t n, double step) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) * step;
    return x;
}

}  // namespace

TEST_CASE("local quadratic reproduces a global quadratic") {
    const auto x = seq(120, 0.37);
    std::vector<double> y;
    for (double v : x) y.push_back(3.0 - 1.25 * v + 0.4 * v * v);
    const auto fit = loess_fit(x, y);
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(fit.fitted[i] - y[i]));
    CHECK(worst < 1e-8);
}

TEST_CASE("local line reproduces a global line") {
    const auto x = seq(50, 1.0);
    std::vector<double> y;
    for (double v : x) y.push_back(7.0 - 0.5 * v);
    const auto fit = loess_fit(x, y, {0.3, 1});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(fit.fitted[i] == doctest::Approx(y[i]).epsilon(1e-10));
}

TEST_CASE("matches the brute-force reference on noisy data") {
    std::mt19937_64 rng(2019);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::uniform_real_distribution<double> gap(0.01, 0.1);
    std::vector<double> x, y;
    double t = 0.0;
    for (int i = 0; i < 200; ++i) {
        t += gap(rng);
        x.push_back(t);
        y.push_back(std::sin(t) + noise(rng));
    }
    for (auto [span, degree] : {std::pair{0.75, 2}, std::pair{0.3, 2}, std::pair{0.5, 1}}) {
        CAPTURE(span);
        CAPTURE(degree);
        const auto fit = loess_fit(x, y, {span, degree});
        const auto ref = oracle::reference_loess(x, y, span, degree);
        double worst = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(fit.fitted[i] - ref.fitted[i]));
        CHECK(worst < 1e-6);
        CHECK(fit.edf == doctest::Approx(ref.edf).epsilon(1e-6));
    }
}

TEST_CASE("effective degrees of freedom stay small for a wide span") {
    const std::size_t n = 10000;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(i) / 100.0;
        y[i] = std::exp(-x[i] / 40.0) + 0.01 * std::cos(x[i] / 7.0);
    }
    const auto fit = loess_fit(x, y);
    CHECK(fit.edf < 5.0);
    CHECK(fit.edf > 2.0);
}

TEST_CASE("loess input validation") {
    const std::vector<double> x{0, 1, 2, 3, 4};
    const std::vector<double> y{1, 2, 3, 4, 5};
    CHECK_THROWS_AS(loess_fit(x, y, {0.0, 2}), InvalidArgument);
    CHECK_THROWS_AS(loess_fit(x, y, {0.5, 3}), InvalidArgument);
    CHECK_THROWS_AS(loess_fit(std::vector<double>{0, 1, 2}, std::vector<double>{1, 2, 3}), InvalidArgument);
    CHECK_THROWS_AS(loess_fit(std::vector<double>{0, 2, 1, 3, 4}, y), InvalidArgument);
    CHECK_THROWS_AS(loess_fit(x, std::vector<double>{1, 2}), InvalidArgument);
    // Three points in the window cannot support a quadratic with zero-weight edges.
    CHECK_THROWS_AS(loess_fit(x, y, {0.5, 2}), DataError);
}
