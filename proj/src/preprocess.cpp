#include "ccmatch/preprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

namespace ccmatch {

void validate(const RansacParams& params) {
    if (params.sample_size < 3) throw InvalidArgument("RANSAC sample size must be at least 3");
    if (!(params.confidence > 0.0 && params.confidence < 1.0)) {
        throw InvalidArgument("RANSAC confidence must lie in (0, 1)");
    }
    if (!(params.outlier_rate >= 0.0 && params.outlier_rate < 1.0)) {
        throw InvalidArgument("RANSAC outlier rate must lie in [0, 1)");
    }
    if (!(params.inlier_threshold_um > 0.0)) {
        throw InvalidArgument("RANSAC inlier threshold must be positive");
    }
    if (params.iterations < 0) throw InvalidArgument("RANSAC iterations must be non-negative");
}

void validate(const FilterParams& params) {
    if (!(params.short_cutoff_um > 0.0 && params.short_cutoff_um < params.long_cutoff_um)) {
        throw InvalidArgument("filter cutoffs must satisfy 0 < short < long");
    }
}

int required_ransac_iterations(double confidence, double outlier_rate, int sample_size) {
    if (!(confidence > 0.0 && confidence < 1.0) || !(outlier_rate >= 0.0 && outlier_rate < 1.0) ||
        sample_size < 1) {
        throw InvalidArgument("required_ransac_iterations: argument out of domain");
    }
    const double clean = std::pow(1.0 - outlier_rate, sample_size);
    if (clean >= 1.0) return 1;
    const double n = std::log(1.0 - confidence) / std::log1p(-clean);
    // Guard against n landing a hair above an integer through rounding.
    const double rounded = std::round(n);
    const double bound = std::abs(n - rounded) < 1e-9 ? rounded : std::ceil(n);
    return std::max(1, static_cast<int>(bound));
}

// ---------------------------------------------------------------------------
// Plane fitting

namespace {

struct Point3 {
    double x, y, z;
};

std::vector<Point3> valid_points(const Surface& s) {
    std::vector<Point3> pts;
    pts.reserve(s.valid_count());
    for (std::size_t r = 0; r < s.rows(); ++r) {
        for (std::size_t c = 0; c < s.cols(); ++c) {
            if (s.valid(r, c)) {
                pts.push_back({static_cast<double>(c) * s.resolution(),
                               static_cast<double>(r) * s.resolution(), s.value(r, c)});
            }
        }
    }
    return pts;
}

// Plane through three points, or nothing if their xy projections are collinear.
std::optional<Plane> plane_through(const Point3& p, const Point3& q, const Point3& r) {
    const double ux = q.x - p.x, uy = q.y - p.y, uz = q.z - p.z;
    const double vx = r.x - p.x, vy = r.y - p.y, vz = r.z - p.z;
    const double nx = uy * vz - uz * vy;
    const double ny = uz * vx - ux * vz;
    const double nz = ux * vy - uy * vx;
    const double scale = std::hypot(ux, uy) * std::hypot(vx, vy);
    if (!(std::abs(nz) > 1e-12 * scale)) return std::nullopt;
    Plane pl;
    pl.a = -nx / nz;
    pl.b = -ny / nz;
    pl.c = p.z - pl.a * p.x - pl.b * p.y;
    return pl;
}

template <typename Pred>
std::optional<Plane> least_squares(const std::vector<Point3>& pts, Pred&& include) {
    double mx = 0, my = 0, mz = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!include(i)) continue;
        mx += pts[i].x;
        my += pts[i].y;
        mz += pts[i].z;
        ++n;
    }
    if (n < 3) return std::nullopt;
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    mz /= static_cast<double>(n);
    double sxx = 0, sxy = 0, syy = 0, sxz = 0, syz = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!include(i)) continue;
        const double dx = pts[i].x - mx, dy = pts[i].y - my, dz = pts[i].z - mz;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
        sxz += dx * dz;
        syz += dy * dz;
    }
    Eigen::Matrix2d m;
    m << sxx, sxy, sxy, syy;
    Eigen::FullPivLU<Eigen::Matrix2d> lu(m);
    lu.setThreshold(1e-12);
    if (lu.rank() < 2) return std::nullopt;
    const Eigen::Vector2d ab = lu.solve(Eigen::Vector2d(sxz, syz));
    return Plane{ab(0), ab(1), mz - ab(0) * mx - ab(1) * my};
}

}  // namespace

Plane fit_plane_least_squares(const Surface& surface, std::span<const std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != surface.size()) {
        throw InvalidArgument("plane fit mask has the wrong size");
    }
    std::vector<Point3> pts;
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            const std::size_t i = r * surface.cols() + c;
            if (!surface.valid(r, c) || (!mask.empty() && !mask[i])) continue;
            pts.push_back({static_cast<double>(c) * surface.resolution(),
                           static_cast<double>(r) * surface.resolution(), surface.value(r, c)});
        }
    }
    auto plane = least_squares(pts, [](std::size_t) { return true; });
    if (!plane) throw DataError("least-squares plane is undetermined (collinear or < 3 cells)");
    return *plane;
}

PlaneFit ransac_plane(const Surface& surface, const RansacParams& params) {
    validate(params);
    const auto pts = valid_points(surface);
    if (pts.size() < 3) throw DataError("RANSAC needs at least 3 valid cells");

    const int iterations = params.iterations > 0
                               ? params.iterations
                               : required_ransac_iterations(params.confidence,
                                                            params.outlier_rate,
                                                            params.sample_size);
    const double delta = params.inlier_threshold_um;
    const auto count_inliers = [&](const Plane& pl) {
        std::size_t n = 0;
        for (const auto& p : pts) n += std::abs(p.z - pl.at(p.x, p.y)) <= delta;
        return n;
    };

    std::mt19937_64 rng(params.seed);
    std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
    const long max_attempts = 100L * iterations + 1000;

    std::optional<Plane> best;
    std::size_t best_count = 0;
    int accepted = 0;
    for (long attempt = 0; attempt < max_attempts && accepted < iterations; ++attempt) {
        std::vector<std::size_t> sample;
        while (sample.size() < static_cast<std::size_t>(params.sample_size)) {
            const std::size_t k = pick(rng);
            if (std::find(sample.begin(), sample.end(), k) == sample.end()) sample.push_back(k);
            if (sample.size() == pts.size()) break;
        }
        if (sample.size() < 3) break;
        std::optional<Plane> candidate;
        if (sample.size() == 3) {
            candidate = plane_through(pts[sample[0]], pts[sample[1]], pts[sample[2]]);
        } else {
            candidate = least_squares(pts, [&](std::size_t i) {
                return std::find(sample.begin(), sample.end(), i) != sample.end();
            });
        }
        if (!candidate) continue;  // degenerate sample: resample without consuming an iteration
        ++accepted;
        const std::size_t n = count_inliers(*candidate);
        if (!best || n > best_count) {
            best = candidate;
            best_count = n;
        }
    }
    if (!best) throw DataError("RANSAC found no non-collinear sample");

    PlaneFit fit;
    fit.sample_inlier_count = best_count;
    std::vector<std::uint8_t> chosen(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        chosen[i] = std::abs(pts[i].z - best->at(pts[i].x, pts[i].y)) <= delta;
    }
    fit.plane = least_squares(pts, [&](std::size_t i) { return chosen[i] != 0; }).value_or(*best);

    fit.inlier_mask.assign(surface.size(), 0);
    const double res = surface.resolution();
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            if (!surface.valid(r, c)) continue;
            const double resid = surface.value(r, c) -
                                 fit.plane.at(static_cast<double>(c) * res,
                                              static_cast<double>(r) * res);
            if (std::abs(resid) <= delta) {
                fit.inlier_mask[r * surface.cols() + c] = 1;
                ++fit.inlier_count;
            }
        }
    }
    return fit;
}

Surface level(const Surface& surface, const PlaneFit& fit) {
    if (fit.inlier_mask.size() != surface.size()) {
        throw InvalidArgument("plane fit does not belong to this surface");
    }
    Surface out(surface.rows(), surface.cols(), surface.resolution(), surface.id());
    const double res = surface.resolution();
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            if (!surface.valid(r, c) || !fit.inlier_mask[r * surface.cols() + c]) continue;
            out.set(r, c, surface.value(r, c) - fit.plane.at(static_cast<double>(c) * res,
                                                             static_cast<double>(r) * res));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

struct Overlap {
    std::size_t index;
    double weight;
};

// Source cells overlapping [k*f, (k+1)*f) for each target index k.
std::vector<std::vector<Overlap>> overlaps(std::size_t src, std::size_t dst, double f) {
    std::vector<std::vector<Overlap>> out(dst);
    for (std::size_t k = 0; k < dst; ++k) {
        const double lo = static_cast<double>(k) * f;
        const double hi = std::min(static_cast<double>(k + 1) * f, static_cast<double>(src));
        auto i = static_cast<std::size_t>(std::floor(lo));
        for (; i < src && static_cast<double>(i) < hi; ++i) {
            const double w = std::min(hi, static_cast<double>(i + 1)) -
                             std::max(lo, static_cast<double>(i));
            if (w > 1e-12) out[k].push_back({i, w});
        }
    }
    return out;
}

}  // namespace

Surface resample(const Surface& surface, double target_resolution_um) {
    if (!(target_resolution_um > 0.0)) throw InvalidArgument("target resolution must be positive");
    const double f = target_resolution_um / surface.resolution();
    if (f < 1.0 - 1e-12) {
        throw InvalidArgument("resample only downsamples (target resolution is finer than source)");
    }
    if (std::abs(f - 1.0) <= 1e-12) {
        Surface copy = surface;
        return copy;
    }
    const auto out_rows = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(surface.rows()) / f + 1e-9)));
    const auto out_cols = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(static_cast<double>(surface.cols()) / f + 1e-9)));
    const auto row_w = overlaps(surface.rows(), out_rows, f);
    const auto col_w = overlaps(surface.cols(), out_cols, f);

    Surface out(out_rows, out_cols, target_resolution_um, surface.id());
    for (std::size_t R = 0; R < out_rows; ++R) {
        for (std::size_t C = 0; C < out_cols; ++C) {
            double total = 0.0, support = 0.0, sum = 0.0;
            for (const auto& [r, wr] : row_w[R]) {
                for (const auto& [c, wc] : col_w[C]) {
                    const double w = wr * wc;
                    total += w;
                    if (surface.valid(r, c)) {
                        support += w;
                        sum += w * surface.value(r, c);
                    }
                }
            }
            if (total > 0.0 && support >= 0.5 * total) out.set(R, C, sum / support);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Circular symmetry

std::size_t count_distinct_radii(std::size_t m) {
    if (m % 2 == 0) throw InvalidArgument("count_distinct_radii needs an odd grid size");
    const std::size_t h = (m - 1) / 2;
    std::vector<bool> seen(2 * h * h + 1, false);
    std::size_t count = 0;
    for (std::size_t i = 0; i <= h; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const std::size_t d2 = i * i + j * j;
            if (!seen[d2]) {
                seen[d2] = true;
                ++count;
            }
        }
    }
    return count;
}

namespace {

// Ring index of every cell, plus the sorted list of squared radii present in the grid.
struct RingIndex {
    std::vector<std::int64_t> squared;
    std::vector<std::uint32_t> ring_of_cell;
};

RingIndex ring_index(std::size_t rows, std::size_t cols) {
    const auto cr = static_cast<std::int64_t>(rows / 2);
    const auto cc = static_cast<std::int64_t>(cols / 2);
    const auto sq = [&](std::size_t r, std::size_t c) {
        const std::int64_t dr = static_cast<std::int64_t>(r) - cr;
        const std::int64_t dc = static_cast<std::int64_t>(c) - cc;
        return dr * dr + dc * dc;
    };
    std::int64_t max_sq = 0;
    for (std::size_t r : {std::size_t{0}, rows - 1}) {
        for (std::size_t c : {std::size_t{0}, cols - 1}) max_sq = std::max(max_sq, sq(r, c));
    }
    std::vector<std::uint32_t> lookup(static_cast<std::size_t>(max_sq) + 1, 0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) lookup[static_cast<std::size_t>(sq(r, c))] = 1;
    }
    RingIndex idx;
    for (std::size_t d2 = 0; d2 < lookup.size(); ++d2) {
        if (lookup[d2]) {
            lookup[d2] = static_cast<std::uint32_t>(idx.squared.size());
            idx.squared.push_back(static_cast<std::int64_t>(d2));
        }
    }
    idx.ring_of_cell.resize(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            idx.ring_of_cell[r * cols + c] = lookup[static_cast<std::size_t>(sq(r, c))];
        }
    }
    return idx;
}

}  // namespace

RadialFit radial_profile(const Surface& surface) {
    if (surface.valid_count() == 0) throw DataError("radial profile of a surface with no valid cells");
    const auto idx = ring_index(surface.rows(), surface.cols());
    const std::size_t K = idx.squared.size();

    RadialFit fit;
    fit.squared_radii = idx.squared;
    fit.radii.resize(K);
    fit.counts.assign(K, 0);
    fit.coefficients.assign(K, 0.0);
    fit.smoothed.assign(K, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < K; ++k) fit.radii[k] = std::sqrt(static_cast<double>(idx.squared[k]));

    const auto mask = surface.mask();
    const auto values = surface.values();
    for (std::size_t i = 0; i < surface.size(); ++i) {
        if (!mask[i]) continue;
        const auto k = idx.ring_of_cell[i];
        fit.coefficients[k] += values[i];
        ++fit.counts[k];
    }
    for (std::size_t k = 0; k < K; ++k) {
        fit.coefficients[k] = fit.counts[k] > 0
                                  ? fit.coefficients[k] / static_cast<double>(fit.counts[k])
                                  : std::numeric_limits<double>::quiet_NaN();
    }
    return fit;
}

Surface remove_circular_symmetry(const Surface& surface, const LoessParams& params,
                                 RadialFit* fit_out) {
    RadialFit fit = radial_profile(surface);
    std::vector<double> x, y;
    std::vector<std::size_t> ring;
    for (std::size_t k = 0; k < fit.size(); ++k) {
        if (fit.counts[k] == 0) continue;
        x.push_back(fit.radii[k]);
        y.push_back(fit.coefficients[k]);
        ring.push_back(k);
    }
    const LoessFit smooth = loess_fit(x, y, params);
    for (std::size_t j = 0; j < ring.size(); ++j) fit.smoothed[ring[j]] = smooth.fitted[j];
    fit.edf = smooth.edf;

    const auto idx = ring_index(surface.rows(), surface.cols());
    Surface out(surface.rows(), surface.cols(), surface.resolution(), surface.id());
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            if (!surface.valid(r, c)) continue;
            out.set(r, c, surface.value(r, c) - fit.smoothed[idx.ring_of_cell[r * surface.cols() + c]]);
        }
    }
    if (fit_out) *fit_out = std::move(fit);
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian filtering

double gaussian_sigma_for_cutoff(double cutoff_um) {
    return cutoff_um * std::sqrt(std::numbers::ln2 / 2.0) / std::numbers::pi;
}

namespace {

std::vector<double> gaussian_kernel(double sigma_px) {
    const auto radius = static_cast<std::ptrdiff_t>(std::max(1.0, std::ceil(4.0 * sigma_px)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (std::ptrdiff_t i = -radius; i <= radius; ++i) {
        const double v = std::exp(-0.5 * static_cast<double>(i * i) / (sigma_px * sigma_px));
        k[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable convolution with zero extension outside the grid.
std::vector<double> convolve(const std::vector<double>& in, std::size_t rows, std::size_t cols,
                             const std::vector<double>& kernel) {
    const auto radius = static_cast<std::ptrdiff_t>(kernel.size() / 2);
    const auto R = static_cast<std::ptrdiff_t>(rows);
    const auto C = static_cast<std::ptrdiff_t>(cols);
    std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (std::ptrdiff_t r = 0; r < R; ++r) {
        for (std::ptrdiff_t c = 0; c < C; ++c) {
            double acc = 0.0;
            const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-radius, -c);
            const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(radius, C - 1 - c);
            for (std::ptrdiff_t k = lo; k <= hi; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       in[static_cast<std::size_t>(r * C + c + k)];
            }
            tmp[static_cast<std::size_t>(r * C + c)] = acc;
        }
    }
    for (std::ptrdiff_t r = 0; r < R; ++r) {
        const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(-radius, -r);
        const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(radius, R - 1 - r);
        for (std::ptrdiff_t c = 0; c < C; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t k = lo; k <= hi; ++k) {
                acc += kernel[static_cast<std::size_t>(k + radius)] *
                       tmp[static_cast<std::size_t>((r + k) * C + c)];
            }
            out[static_cast<std::size_t>(r * C + c)] = acc;
        }
    }
    return out;
}

struct Smoothed {
    std::vector<double> value;
    std::vector<double> weight;
};

Smoothed normalized_lowpass(const Surface& s, double cutoff_um) {
    const double sigma_px = gaussian_sigma_for_cutoff(cutoff_um) / s.resolution();
    const auto kernel = gaussian_kernel(sigma_px);
    std::vector<double> vm(s.values().begin(), s.values().end());  // invalid cells are 0
    std::vector<double> m(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) m[i] = s.mask()[i] ? 1.0 : 0.0;
    Smoothed out{convolve(vm, s.rows(), s.cols(), kernel), convolve(m, s.rows(), s.cols(), kernel)};
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (out.weight[i] > 0.0) out.value[i] /= out.weight[i];
    }
    return out;
}

}  // namespace

Surface gaussian_lowpass(const Surface& surface, double cutoff_um) {
    if (!(cutoff_um > 0.0)) throw InvalidArgument("cutoff must be positive");
    const auto lp = normalized_lowpass(surface, cutoff_um);
    Surface out(surface.rows(), surface.cols(), surface.resolution(), surface.id());
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            const std::size_t i = r * surface.cols() + c;
            if (lp.weight[i] >= 0.5) out.set(r, c, lp.value[i]);
        }
    }
    return out;
}

Surface bandpass(const Surface& surface, const FilterParams& params) {
    validate(params);
    if (!(params.short_cutoff_um > 2.0 * surface.resolution())) {
        throw InvalidArgument("short cutoff must exceed twice the resolution (Nyquist)");
    }
    const auto fine = normalized_lowpass(surface, params.short_cutoff_um);
    const auto coarse = normalized_lowpass(surface, params.long_cutoff_um);
    Surface out(surface.rows(), surface.cols(), surface.resolution(), surface.id());
    for (std::size_t r = 0; r < surface.rows(); ++r) {
        for (std::size_t c = 0; c < surface.cols(); ++c) {
            const std::size_t i = r * surface.cols() + c;
            if (!surface.valid(r, c) || fine.weight[i] < 0.5 || coarse.weight[i] < 0.5) continue;
            out.set(r, c, fine.value[i] - coarse.value[i]);
        }
    }
    return out;
}

Surface preprocess_full(const Surface& surface, const PreprocessParams& params) {
    validate(params.ransac);
    validate(params.loess);
    validate(params.filter);
    if (surface.valid_count() == 0) throw DataError("surface has no valid cells");
    const PlaneFit fit = ransac_plane(surface, params.ransac);
    Surface s = crop_to_valid(level(surface, fit));
    s = resample(s, params.resolution_um);
    if (s.valid_count() == 0) throw DataError("no valid cells left after resampling");
    s = remove_circular_symmetry(s, params.loess);
    s = bandpass(s, params.filter);
    if (s.valid_count() == 0) throw DataError("no valid cells left after filtering");
    return s;
}

}  // namespace ccmatch
