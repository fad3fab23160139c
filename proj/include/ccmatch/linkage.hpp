#pragma once

#include "ccmatch/align.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ccmatch {

enum class Linkage { Single, Complete, Average, Minimax };

std::string_view to_string(Linkage linkage);
Linkage parse_linkage(std::string_view name);
inline constexpr Linkage kAllLinkages[] = {Linkage::Single, Linkage::Complete, Linkage::Average,
                                           Linkage::Minimax};

/// Symmetric dissimilarities d = 1 - s_hat with a zero diagonal.
class DistanceTable {
public:
    DistanceTable() = default;
    /// All off-diagonal entries start at NaN (unknown).
    explicit DistanceTable(std::vector<std::string> ids);

    /// Builds d = 1 - s_hat. Ids are sorted; every pair must be present exactly once.
    static DistanceTable from_scores(const std::vector<PairScore>& scores,
                                     std::vector<std::string> extra_ids = {});

    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    double operator()(std::size_t i, std::size_t j) const { return d_[i * ids_.size() + j]; }
    void set(std::size_t i, std::size_t j, double d);

    /// Throws unless the table is complete, symmetric, and within [0, 2].
    void check() const;

private:
    std::vector<std::string> ids_;
    std::vector<double> d_;
};

/// One agglomeration step. Nodes 0..n-1 are leaves; step s creates node n + s.
struct Merge {
    std::size_t left = 0;   ///< node whose smallest leaf index is smaller
    std::size_t right = 0;
    double height = 0.0;
    /// Minimax linkage only: leaf at the centre of the merged group.
    std::optional<std::size_t> prototype;
};

struct Dendrogram {
    std::vector<std::string> leaves;
    std::vector<Merge> merges;
    Linkage linkage = Linkage::Minimax;
};

/// Flat partition of the leaves.
struct Clustering {
    std::vector<std::string> ids;
    std::vector<int> labels;  ///< 1-based, numbered by first appearance in `ids`
    double cutoff = 0.0;      ///< dendrogram height
    Linkage linkage = Linkage::Minimax;
    /// Minimax only: prototype leaf index per label (index label-1).
    std::vector<std::size_t> prototypes;

    int cluster_count() const;
    std::vector<std::vector<std::size_t>> members() const;
};

/// Threshold predictions: match iff s_hat > cutoff.
std::vector<bool> classify(const std::vector<PairScore>& scores, double cutoff);

/// Linkage between disjoint non-empty leaf groups.
double group_dissimilarity(const std::vector<std::size_t>& g, const std::vector<std::size_t>& h,
                           const DistanceTable& d, Linkage linkage);

/// Minimax centre of a group: argmin_i max_j d_ij (smallest index on ties) and its radius.
std::pair<std::size_t, double> minimax_center(const std::vector<std::size_t>& group,
                                              const DistanceTable& d);

/// Greedy agglomeration. Ties go to the lexicographically smallest
/// (min leaf of left group, min leaf of right group).
Dendrogram hac(const DistanceTable& d, Linkage linkage);

/// Applies merges in order while their height is <= cutoff.
Clustering cut(const Dendrogram& dendrogram, double height_cutoff);

/// Similarity-space cutoff s maps to the height cutoff 1 - s.
inline double height_for_similarity(double s) { return 1.0 - s; }

/// Pair predictions induced by a clustering, for pairs (i, j) with i < j in row-major order.
std::vector<bool> clusters_to_pairs(const Clustering& clustering);

/// Same, looked up for an arbitrary list of id pairs.
std::vector<bool> clusters_to_pairs(const Clustering& clustering,
                                    const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace ccmatch
