#pragma once

#include "ccmatch/loess.hpp"
#include "ccmatch/surface.hpp"

#include <cstdint>
#include <vector>

namespace ccmatch {

struct RansacParams {
    int sample_size = 3;
    double inlier_threshold_um = 10.0;
    double confidence = 0.99;
    double outlier_rate = 0.6;
    int iterations = 75;  ///< 0 derives the count from confidence and outlier_rate
    std::uint64_t seed = 0;
};

/// Plane z = a*x + b*y + c with x = column * resolution and y = row * resolution (µm).
struct Plane {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double at(double x_um, double y_um) const { return a * x_um + b * y_um + c; }
};

struct PlaneFit {
    Plane plane;
    std::vector<std::uint8_t> inlier_mask;  ///< same shape as the surface
    std::size_t inlier_count = 0;
    /// Inliers of the best minimal-sample plane, before the least-squares refit.
    std::size_t sample_inlier_count = 0;
};

struct FilterParams {
    double short_cutoff_um = 20.0;
    double long_cutoff_um = 150.0;
};

struct PreprocessParams {
    RansacParams ransac;
    double resolution_um = 6.25;
    LoessParams loess;
    FilterParams filter;
};

/// Circularly symmetric decomposition: one ring per distinct centre distance.
struct RadialFit {
    std::vector<double> radii;               ///< strictly increasing, in pixels
    std::vector<std::int64_t> squared_radii; ///< integer squared distances
    std::vector<double> coefficients;        ///< ring means; NaN where count == 0
    std::vector<std::size_t> counts;         ///< valid cells per ring
    std::vector<double> smoothed;            ///< loess fit; NaN where count == 0
    double edf = 0.0;

    std::size_t size() const { return radii.size(); }
};

/// Smallest N with 1 - (1 - (1-e)^s)^N >= p, at least 1.
int required_ransac_iterations(double confidence, double outlier_rate, int sample_size);

/// Ordinary least squares plane over the valid cells selected by `mask`
/// (or all valid cells if `mask` is empty).
Plane fit_plane_least_squares(const Surface& surface, std::span<const std::uint8_t> mask = {});

PlaneFit ransac_plane(const Surface& surface, const RansacParams& params);

/// Residuals from `fit.plane`; only inliers stay valid.
Surface level(const Surface& surface, const PlaneFit& fit);

/// Area-weighted downsampling. Target cells with under half valid support are invalid.
Surface resample(const Surface& surface, double target_resolution_um);

/// Number of distinct centre distances in an m x m grid (m odd).
std::size_t count_distinct_radii(std::size_t m);

/// Ring means about the grid centre (rows/2, cols/2); even dimensions behave
/// as if padded with one missing row/column at the end.
RadialFit radial_profile(const Surface& surface);

/// Subtracts the loess-smoothed radial profile from every valid cell.
Surface remove_circular_symmetry(const Surface& surface, const LoessParams& params = {},
                                 RadialFit* fit_out = nullptr);

/// Standard deviation (µm) of the Gaussian whose transmission is 50% at `cutoff_um`.
double gaussian_sigma_for_cutoff(double cutoff_um);

/// Missing-aware Gaussian low-pass (normalized convolution).
/// Cells whose kernel-weighted support is below 0.5 become invalid.
Surface gaussian_lowpass(const Surface& surface, double cutoff_um);

/// Band-pass L(short) - L(long). Input-invalid cells stay invalid.
Surface bandpass(const Surface& surface, const FilterParams& params = {});

/// RANSAC selection, levelling, crop, resample, circular symmetry removal, filtering.
Surface preprocess_full(const Surface& surface, const PreprocessParams& params);

void validate(const RansacParams& params);
void validate(const FilterParams& params);

}  // namespace ccmatch
