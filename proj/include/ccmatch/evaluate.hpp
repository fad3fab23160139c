#pragma once

#include "ccmatch/align.hpp"
#include "ccmatch/linkage.hpp"
#include "ccmatch/surface.hpp"

#include <string>
#include <vector>

namespace ccmatch {

struct LabeledPair {
    std::string id1;
    std::string id2;
    double s_hat = 0.0;
    bool truth = false;  ///< same (study, firearm, slide)
};

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    /// 1 when nothing is predicted positive.
    double precision() const;
    /// 0 when there are no true matches.
    double recall() const;
};

struct PRPoint {
    double cutoff = 0.0;
    double precision = 1.0;
    double recall = 0.0;
    Confusion counts;
};

struct PRCurve {
    std::vector<PRPoint> points;  ///< ascending cutoff
    double auc = 0.0;
};

std::vector<LabeledPair> label_pairs(const std::vector<PairScore>& scores,
                                     const std::vector<SurfaceMeta>& manifest);

/// Predicted match iff s_hat > cutoff.
Confusion confusion(const std::vector<LabeledPair>& labeled, double cutoff);

/// True when both classes are present, i.e. precision/recall are defined.
bool pr_defined(const std::vector<LabeledPair>& labeled);

/**
 * Area under a precision-recall curve. Points sharing a recall value are
 * represented by their highest precision; the curve starts at (recall 0,
 * precision 1) and is integrated with the trapezoidal rule over recall.
 */
double pr_auc(const std::vector<PRPoint>& points);

/// One point per distinct-score cutoff (midpoints plus sentinels beyond the range).
PRCurve pr_curve(const std::vector<LabeledPair>& labeled);

/**
 * Sweeps the cut height of a dendrogram over the same ids as `labeled`.
 * Cutoffs are reported in similarity space (1 - height).
 */
PRCurve pr_from_clusterings(const std::vector<LabeledPair>& labeled, const Dendrogram& dendrogram);

struct Histogram {
    double low = 0.0;
    double high = 1.0;
    std::vector<std::size_t> match;
    std::vector<std::size_t> nonmatch;

    double bin_low(std::size_t b) const;
    double bin_high(std::size_t b) const;
};

/// Equal-width bins over [low, high]; out-of-range scores land in the edge bins.
Histogram export_histograms(const std::vector<LabeledPair>& labeled, std::size_t bins,
                            double low = 0.0, double high = 1.0);

std::string pr_csv(const PRCurve& curve);
std::string histogram_csv(const Histogram& hist);

}  // namespace ccmatch
