#pragma once

#include "ccmatch/surface.hpp"

#include <string>
#include <vector>

namespace ccmatch {

/// Best rotation/translation of one surface onto another.
struct AlignResult {
    double ccf_max = -1.0;
    double theta_star = 0.0;  ///< degrees, normalised to (-180, 180]
    int k_star = 0;           ///< vertical lag (rows)
    int l_star = 0;           ///< horizontal lag (columns)
};

/// Symmetric similarity for one pair; id1 < id2 lexicographically.
struct PairScore {
    std::string id1;
    std::string id2;
    double c12 = 0.0;  ///< aligning id2 onto id1
    double c21 = 0.0;  ///< aligning id1 onto id2
    double s_hat = 0.0;
    AlignResult align12;
    AlignResult align21;

    /// Alignment that produced s_hat.
    const AlignResult& best() const { return c12 >= c21 ? align12 : align21; }
};

struct AlignParams {
    /// Lag bound per axis as a fraction of the grid dimension.
    double lag_fraction = 0.2;
};

/// Lag bounds |k| <= rows, |l| <= cols.
struct LagRange {
    int rows = 0;
    int cols = 0;
};

/// Correlation values for every lag in [-rows, rows] x [-cols, cols].
struct CorrelationGrid {
    LagRange range;
    std::vector<double> values;

    double at(int k, int l) const {
        return values[static_cast<std::size_t>((k + range.rows) * (2 * range.cols + 1) +
                                               (l + range.cols))];
    }
};

/// Peak of a correlation grid with deterministic tie-breaking (smallest |k|+|l|, then k, then l).
struct LagPeak {
    double value = -2.0;
    int k = 0;
    int l = 0;
};

/// Zero mean and unit sum of squares over valid cells; invalid cells become 0.
Surface standardize(const Surface& surface);

/**
 * Normalised cross-correlation
 *   CCF(k,l) = sum_ij A(i,j) B(i+k, j+l) / (|A| |B|)
 * with invalid cells contributing zero and norms taken over all valid cells.
 * Both surfaces must have the same shape. Computed with FFTs.
 */
CorrelationGrid cross_correlation(const Surface& a, const Surface& b, LagRange lags);

/// Same quantity by direct summation; slow, used for verification.
CorrelationGrid cross_correlation_direct(const Surface& a, const Surface& b, LagRange lags);

LagPeak peak(const CorrelationGrid& grid);

/// Bilinear rotation about the grid centre, counter-clockwise in (column, -row) axes.
/// A cell is invalid if any source cell with non-zero weight is invalid or outside.
Surface rotate(const Surface& surface, double theta_degrees);

/// Pads with invalid cells so the original sits centred in a rows x cols grid.
Surface pad_to(const Surface& surface, std::size_t rows, std::size_t cols);

LagRange default_lags(std::size_t rows, std::size_t cols, double lag_fraction);

/// Coarse search angles: 5° steps outside [-10, 10], 2.5° steps inside.
std::vector<double> coarse_angles();

/// Refinement angles around the best coarse angle.
std::vector<double> fine_angles(double theta_coarse);

/// Best lag for I2 rotated by `theta` against an already-standardised I1.
LagPeak correlate_at_angle(const Surface& standardized1, const Surface& surface2, double theta,
                           LagRange lags);

/// Rotation and translation grid search aligning I2 onto I1.
AlignResult align(const Surface& surface1, const Surface& surface2, const AlignParams& params = {});

/// Aligns in both directions and keeps the larger correlation.
PairScore similarity(const Surface& surface1, const Surface& surface2,
                     const AlignParams& params = {});

}  // namespace ccmatch
