#pragma once

#include <span>
#include <vector>

namespace ccmatch {

/// Local polynomial regression settings; the kernel is always tricube.
struct LoessParams {
    double span = 0.75;  ///< fraction of points in each local fit
    int degree = 2;      ///< 1 or 2
};

struct LoessFit {
    std::vector<double> fitted;
    double edf = 0.0;  ///< trace of the smoother matrix
};

/**
 * Direct (non-interpolated) loess evaluated at every x_i.
 *
 * Each local fit uses the q = ceil(span * n) nearest neighbours of x_i, with
 * bandwidth equal to the q-th smallest |x_j - x_i| and tricube weights
 * (1 - (d/h)^3)^3. x must be strictly increasing.
 */
LoessFit loess_fit(std::span<const double> x, std::span<const double> y,
                   const LoessParams& params = {});

void validate(const LoessParams& params);

}  // namespace ccmatch
