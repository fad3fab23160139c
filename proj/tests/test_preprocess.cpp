#include "ccmatch/preprocess.hpp"
#include "ccmatch/synthetic.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

using namespace ccmatch;

namespace {

Surface make(std::size_t rows, std::size_t cols, double res, auto&& f) {
    Surface s(rows, cols, res);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) s.set(r, c, f(double(r), double(c)));
    return s;
}

double max_abs(const Surface& s) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.mask()[i]) m = std::max(m, std::abs(s.values()[i]));
    return m;
}

// Largest |value| over valid cells at least `border` cells from every edge.
double interior_max_abs(const Surface& s, std::size_t border) {
    double m = 0.0;
    for (std::size_t r = border; r + border < s.rows(); ++r)
        for (std::size_t c = border; c + border < s.cols(); ++c)
            if (s.valid(r, c)) m = std::max(m, std::abs(s.value(r, c)));
    return m;
}

// Continuous transfer of L(short) - L(long) at wavelength lambda.
double band_transfer(double lambda, double ls, double lc) {
    const auto g = [&](double cut) { return std::exp(-std::numbers::ln2 * (cut / lambda) * (cut / lambda)); };
    return g(ls) - g(lc);
}

}  // namespace

TEST_CASE("ransac iteration bound") {
    CHECK(required_ransac_iterations(0.99, 0.6, 3) == 70);
    CHECK(required_ransac_iterations(0.99, 0.5, 3) == 35);
    CHECK(required_ransac_iterations(0.5, 0.0, 3) == 1);
    CHECK(required_ransac_iterations(0.999, 0.0, 3) == 1);
    for (double e : {0.1, 0.3, 0.45, 0.7}) {
        const int n = required_ransac_iterations(0.95, e, 3);
        const double fail = std::pow(1.0 - std::pow(1.0 - e, 3), n);
        const double fail_prev = std::pow(1.0 - std::pow(1.0 - e, 3), n - 1);
        CHECK(fail <= 0.05 + 1e-12);
        if (n > 1) CHECK(fail_prev > 0.05);
    }
    CHECK_THROWS_AS(required_ransac_iterations(1.0, 0.5, 3), InvalidArgument);
    CHECK_THROWS_AS(required_ransac_iterations(0.9, 1.0, 3), InvalidArgument);
}

TEST_CASE("ransac recovers an exact plane") {
    const Surface s = make(40, 50, 1.0, [](double r, double c) { return 2 * c + 3 * r + 5; });
    RansacParams p;
    p.seed = 3;
    const PlaneFit fit = ransac_plane(s, p);
    CHECK(std::abs(fit.plane.a - 2) < 1e-9);
    CHECK(std::abs(fit.plane.b - 3) < 1e-9);
    CHECK(std::abs(fit.plane.c - 5) < 1e-9);
    CHECK(fit.inlier_count == s.size());
}

TEST_CASE("ransac excludes an indented disc") {
    const double res = 2.0;
    const auto in_disc = [](double r, double c) { return std::hypot(r - 50, c - 50) < 20; };
    const Surface s = make(100, 100, res, [&](double r, double c) {
        return 0.01 * c * res + 0.02 * r * res + 3 - (in_disc(r, c) ? 50.0 : 0.0);
    });
    RansacParams p;
    p.seed = 11;
    const PlaneFit fit = ransac_plane(s, p);
    std::size_t mismatches = 0;
    for (std::size_t r = 0; r < 100; ++r)
        for (std::size_t c = 0; c < 100; ++c)
            mismatches += (fit.inlier_mask[r * 100 + c] != 0) == in_disc(double(r), double(c));
    CHECK(mismatches == 0);
    std::size_t count = 0;
    for (auto m : fit.inlier_mask) count += m;
    CHECK(count == fit.inlier_count);
}

TEST_CASE("ransac keeps every cell of a mildly noisy plane") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const Surface s = make(60, 60, 1.5, [&](double r, double c) { return 0.3 * c - 0.1 * r + u(rng); });
    RansacParams p;
    p.seed = 1;
    const PlaneFit fit = ransac_plane(s, p);
    CHECK(fit.inlier_count == s.size());
    // Every reported inlier honours the threshold against the refit plane.
    for (std::size_t r = 0; r < 60; ++r)
        for (std::size_t c = 0; c < 60; ++c)
            CHECK(std::abs(s.value(r, c) - fit.plane.at(c * 1.5, r * 1.5)) <= p.inlier_threshold_um);
}

TEST_CASE("ransac is deterministic and monotone in the threshold") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> g(0.0, 6.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Surface s = make(50, 50, 1.0, [&](double r, double c) {
        return 0.2 * c + 0.4 * r + g(rng) + (u(rng) < 0.3 ? 80.0 * u(rng) : 0.0);
    });
    RansacParams p;
    p.seed = 99;
    const PlaneFit a = ransac_plane(s, p);
    const PlaneFit b = ransac_plane(s, p);
    CHECK(a.plane.a == b.plane.a);
    CHECK(a.plane.c == b.plane.c);
    CHECK(a.inlier_mask == b.inlier_mask);

    std::size_t previous = 0;
    for (double delta : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0}) {
        p.inlier_threshold_um = delta;
        const PlaneFit f = ransac_plane(s, p);
        CHECK(f.sample_inlier_count >= previous);
        previous = f.sample_inlier_count;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (!f.inlier_mask[i]) continue;
            const std::size_t r = i / 50, c = i % 50;
            CHECK(std::abs(s.values()[i] - f.plane.at(double(c), double(r))) <= delta);
        }
    }
}

TEST_CASE("ransac errors") {
    Surface two(3, 3, 1.0);
    two.set(0, 0, 1.0);
    two.set(1, 1, 1.0);
    CHECK_THROWS_AS(ransac_plane(two, {}), DataError);
    Surface line(5, 5, 1.0);
    for (std::size_t i = 0; i < 5; ++i) line.set(i, i, double(i));
    CHECK_THROWS_AS(ransac_plane(line, {}), DataError);
    RansacParams bad;
    bad.sample_size = 2;
    CHECK_THROWS_AS(ransac_plane(line, bad), InvalidArgument);
}

TEST_CASE("level subtracts the plane") {
    const double res = 2.5;
    const Surface plane = make(30, 30, res, [&](double r, double c) { return 0.5 * c * res - 0.25 * r * res + 7; });
    const Surface zero = level(plane, ransac_plane(plane, {}));
    CHECK(max_abs(zero) < 1e-9);

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    const Surface s = make(30, 30, res, [&](double r, double c) { return 0.5 * c * res - 0.25 * r * res + 7 + u(rng); });
    const PlaneFit fit = ransac_plane(s, {});
    REQUIRE(fit.inlier_count == s.size());
    const Surface lev = level(s, fit);
    double sum = 0.0;
    for (double v : lev.values()) sum += v;
    CHECK(std::abs(sum / double(lev.size())) < 1e-9 * max_abs(lev));
    const Plane refit = fit_plane_least_squares(lev);
    CHECK(std::abs(refit.a) < 1e-9);
    CHECK(std::abs(refit.b) < 1e-9);
    CHECK(std::abs(refit.c) < 1e-9);

    const Surface again = level(lev, ransac_plane(lev, {}));
    double change = 0.0;
    for (std::size_t i = 0; i < lev.size(); ++i) change = std::max(change, std::abs(again.values()[i] - lev.values()[i]));
    CHECK(change < 1e-9);
}

TEST_CASE("level drops non-inlier cells") {
    const Surface s = make(20, 20, 1.0, [](double r, double c) { return (r == 5 && c == 5) ? 100.0 : 0.0; });
    const Surface lev = level(s, ransac_plane(s, {}));
    CHECK_FALSE(lev.valid(5, 5));
    CHECK(lev.valid_count() == 399);
}

TEST_CASE("resample block means") {
    const Surface s = make(4, 4, 1.0, [](double r, double c) { return r * 4 + c + 1; });
    const Surface half = resample(s, 2.0);
    REQUIRE(half.rows() == 2);
    REQUIRE(half.cols() == 2);
    CHECK(half.value(0, 0) == 3.5);
    CHECK(half.value(0, 1) == 5.5);
    CHECK(half.value(1, 0) == 11.5);
    CHECK(half.value(1, 1) == 13.5);
    CHECK(half.resolution() == 2.0);

    const Surface constant = resample(make(4, 4, 1.0, [](double, double) { return 4.25; }), 2.0);
    for (double v : constant.values()) CHECK(v == 4.25);

    const Surface same = resample(s, 1.0);
    CHECK(std::equal(same.values().begin(), same.values().end(), s.values().begin()));
    CHECK_THROWS_AS(resample(s, 0.5), InvalidArgument);
}

TEST_CASE("resample support rule and fractional factors") {
    Surface s = make(4, 4, 1.0, [](double r, double c) { return r + c; });
    s.set_invalid(0, 0);
    s.set_invalid(0, 1);
    s.set_invalid(1, 0);
    s.set_invalid(2, 2);
    s.set_invalid(2, 3);
    const Surface half = resample(s, 2.0);
    CHECK_FALSE(half.valid(0, 0));      // 1 of 4 valid
    CHECK(half.valid(1, 1));            // 2 of 4 valid
    CHECK(half.value(1, 1) == 5.5);     // cells (3,2) and (3,3)
    const Surface odd = resample(make(9, 9, 2.0, [](double, double) { return 1.0; }), 3.0);
    CHECK(odd.rows() == 6);
    for (std::size_t i = 0; i < odd.size(); ++i) CHECK(odd.values()[i] == doctest::Approx(1.0));
}

TEST_CASE("distinct radii") {
    CHECK(count_distinct_radii(1) == 1);
    CHECK(count_distinct_radii(3) == 3);
    CHECK(count_distinct_radii(5) == 6);
    CHECK(count_distinct_radii(701) == 39978);
    CHECK_THROWS_AS(count_distinct_radii(4), InvalidArgument);
    for (std::size_t m = 1; m <= 101; m += 2) {
        std::set<long> seen;
        const long h = long(m / 2);
        for (long i = -h; i <= h; ++i)
            for (long j = -h; j <= h; ++j) seen.insert(i * i + j * j);
        CHECK(count_distinct_radii(m) == seen.size());
    }
}

TEST_CASE("radial profile ring means") {
    const Surface s = Surface::from_values(3, 3, {1, 2, 1, 2, 0, 2, 1, 2, 1}, 1.0);
    const RadialFit f = radial_profile(s);
    REQUIRE(f.size() == 3);
    CHECK(f.radii[0] == 0.0);
    CHECK(f.radii[1] == 1.0);
    CHECK(f.radii[2] == doctest::Approx(std::sqrt(2.0)));
    CHECK(f.coefficients[0] == 0.0);
    CHECK(f.coefficients[1] == 2.0);
    CHECK(f.coefficients[2] == 1.0);
    CHECK(f.counts == std::vector<std::size_t>{1, 4, 4});

    const RadialFit c = radial_profile(make(21, 21, 1.0, [](double, double) { return -1.5; }));
    for (double b : c.coefficients) CHECK(b == -1.5);
    CHECK(c.size() == count_distinct_radii(21));

    const Surface sq = make(41, 41, 1.0, [](double r, double c) { return (r - 20) * (r - 20) + (c - 20) * (c - 20); });
    const RadialFit q = radial_profile(sq);
    for (std::size_t k = 0; k < q.size(); ++k) CHECK(q.coefficients[k] == double(q.squared_radii[k]));

    Surface holes = sq;
    holes.set_invalid(20, 20);
    const RadialFit h = radial_profile(holes);
    CHECK(h.counts[0] == 0);
    CHECK(std::isnan(h.coefficients[0]));
    CHECK_THROWS_AS(radial_profile(Surface(3, 3, 1.0)), DataError);
}

TEST_CASE("circular symmetry removal") {
    const Surface constant = make(51, 51, 1.0, [](double, double) { return 12.0; });
    CHECK(max_abs(remove_circular_symmetry(constant)) < 1e-9);

    const auto bowl = [](double r, double c) { return 0.001 * ((r - 100) * (r - 100) + (c - 100) * (c - 100)); };
    const Surface b = make(201, 201, 1.0, bowl);
    CHECK(max_abs(remove_circular_symmetry(b)) < 0.01 * max_abs(b));

    const Surface wave = make(201, 201, 1.0, [](double, double c) {
        return std::sin(2 * std::numbers::pi * c / 50.0 + 0.7);
    });
    RadialFit fit;
    const Surface out = remove_circular_symmetry(wave, {}, &fit);
    CHECK(testing::correlation(out, wave) > 0.95);
    CHECK(fit.edf > 0.0);
    CHECK(out.valid_count() == wave.valid_count());
}

TEST_CASE("circular symmetry removal is stable on its own output") {
    // Radial bowl plus a texture that is odd about the centre: ring means of the
    // texture vanish, so one pass leaves exactly the texture.
    const Surface s = make(201, 201, 1.0, [](double r, double c) {
        const double dr = r - 100, dc = c - 100;
        return 0.002 * (dr * dr + dc * dc) + std::sin(0.21 * dc + 0.13 * dr) + 0.5 * std::sin(0.05 * dr);
    });
    const Surface once = remove_circular_symmetry(s);
    const Surface twice = remove_circular_symmetry(once);
    double change = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) change = std::max(change, std::abs(twice.values()[i] - once.values()[i]));
    CHECK(change < 1e-6 * max_abs(once));
}

TEST_CASE("gaussian cutoff convention") {
    CHECK(gaussian_sigma_for_cutoff(150.0) == doctest::Approx(150.0 * 0.187390).epsilon(1e-5));
    // 50% amplitude at the cutoff wavelength.
    const double res = 1.0, lambda = 40.0;
    const Surface s = make(400, 400, res, [&](double, double c) { return std::cos(2 * std::numbers::pi * c / lambda); });
    const Surface lp = gaussian_lowpass(s, lambda);
    CHECK(interior_max_abs(lp, 60) == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("bandpass removes DC and follows the transfer function") {
    const double res = 6.25;
    const Surface flat = make(120, 120, res, [](double, double) { return 250.0; });
    CHECK(max_abs(bandpass(flat)) < 1e-6 * 250.0);

    const double predicted500 = band_transfer(500.0, 20.0, 150.0);
    const double predicted60 = band_transfer(60.0, 20.0, 150.0);
    CHECK(predicted500 < 0.15);
    CHECK(predicted60 > 0.70);
    for (double lambda : {500.0, 60.0, 100.0, 300.0}) {
        CAPTURE(lambda);
        const Surface wave = make(400, 400, res, [&](double r, double c) {
            return std::sin(2 * std::numbers::pi * (0.6 * c + 0.8 * r) * res / lambda);
        });
        const double gain = interior_max_abs(bandpass(wave), 40);
        CHECK(gain == doctest::Approx(band_transfer(lambda, 20.0, 150.0)).epsilon(0.02));
    }
}

TEST_CASE("bandpass is linear on full grids") {
    const Surface x = testing::white_noise(64, 64, 1, 6.25);
    const Surface y = testing::white_noise(64, 64, 2, 6.25);
    const double a = 2.5, b = -0.75;
    Surface mix(64, 64, 6.25);
    for (std::size_t r = 0; r < 64; ++r)
        for (std::size_t c = 0; c < 64; ++c) mix.set(r, c, a * x.value(r, c) + b * y.value(r, c));
    const Surface fx = bandpass(x), fy = bandpass(y), fm = bandpass(mix);
    double worst = 0.0;
    for (std::size_t i = 0; i < fm.size(); ++i) {
        REQUIRE(fm.mask()[i] == fx.mask()[i]);
        if (fm.mask()[i]) worst = std::max(worst, std::abs(fm.values()[i] - (a * fx.values()[i] + b * fy.values()[i])));
    }
    CHECK(worst < 1e-9);
}

TEST_CASE("bandpass masking and validation") {
    Surface s = testing::white_noise(80, 80, 3, 6.25);
    for (std::size_t r = 0; r < 80; ++r)
        for (std::size_t c = 40; c < 80; ++c) s.set_invalid(r, c);
    const Surface out = bandpass(s);
    for (std::size_t r = 0; r < 80; ++r)
        for (std::size_t c = 40; c < 80; ++c) CHECK_FALSE(out.valid(r, c));
    CHECK(out.valid(40, 10));
    CHECK_THROWS_AS(bandpass(s, {10.0, 150.0}), InvalidArgument);
    CHECK_THROWS_AS(bandpass(s, {150.0, 20.0}), InvalidArgument);
}

TEST_CASE("full preprocessing retains the injected texture") {
    synthetic::PhantomSpec spec;
    spec.size = 400;
    spec.individual_rms = 0.0;
    const auto texture = synthetic::source_texture(77);
    const Surface raw = synthetic::breechface_phantom(texture, spec, {}, 5);

    PreprocessParams params;
    params.ransac.seed = 1;
    const Surface out = preprocess_full(raw, params);

    // Push the bare texture through the same geometry.
    const PlaneFit fit = ransac_plane(raw, params.ransac);
    Surface bare = synthetic::sample(texture, spec.size, spec.size, spec.resolution_um);
    for (std::size_t i = 0; i < bare.size(); ++i)
        if (!fit.inlier_mask[i]) bare.set_invalid(i / bare.cols(), i % bare.cols());
    bare = bandpass(resample(crop_to_valid(bare), params.resolution_um), params.filter);
    REQUIRE(bare.rows() == out.rows());
    REQUIRE(bare.cols() == out.cols());
    CHECK(out.resolution() == 6.25);
    CHECK(testing::correlation(out, bare) > 0.8);

    // The firing-pin pit is excluded.
    const Surface lev = level(raw, fit);
    CHECK_FALSE(lev.valid(spec.size / 2, spec.size / 2));

    params.ransac.seed = 2;
    const Surface other = preprocess_full(raw, params);
    REQUIRE(other.rows() == out.rows());
    std::size_t both = 0, same = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!out.mask()[i] || !other.mask()[i]) continue;
        ++both;
        same += std::abs(out.values()[i] - other.values()[i]) <= 1e-9;
    }
    CHECK(double(same) >= 0.99 * double(both));

    CHECK_THROWS_AS(preprocess_full(Surface(10, 10, 3.125), params), DataError);
}
