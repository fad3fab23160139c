#include "ccmatch/linkage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace ccmatch {

std::string_view to_string(Linkage linkage) {
    switch (linkage) {
        case Linkage::Single: return "single";
        case Linkage::Complete: return "complete";
        case Linkage::Average: return "average";
        case Linkage::Minimax: return "minimax";
    }
    return "unknown";
}

Linkage parse_linkage(std::string_view name) {
    for (Linkage l : kAllLinkages) {
        if (to_string(l) == name) return l;
    }
    throw InvalidArgument("unknown linkage '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------

DistanceTable::DistanceTable(std::vector<std::string> ids)
    : ids_(std::move(ids)),
      d_(ids_.size() * ids_.size(), std::numeric_limits<double>::quiet_NaN()) {
    for (std::size_t i = 0; i < ids_.size(); ++i) d_[i * ids_.size() + i] = 0.0;
}

void DistanceTable::set(std::size_t i, std::size_t j, double d) {
    d_[i * ids_.size() + j] = d;
    d_[j * ids_.size() + i] = d;
}

DistanceTable DistanceTable::from_scores(const std::vector<PairScore>& scores,
                                         std::vector<std::string> extra_ids) {
    std::vector<std::string> ids = std::move(extra_ids);
    for (const auto& s : scores) {
        ids.push_back(s.id1);
        ids.push_back(s.id2);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;

    DistanceTable table(ids);
    for (const auto& s : scores) {
        const std::size_t i = index.at(s.id1), j = index.at(s.id2);
        if (i == j) throw DataError("score row compares '" + s.id1 + "' with itself");
        if (!std::isnan(table(i, j))) {
            throw DataError("duplicate score for pair (" + s.id1 + ", " + s.id2 + ")");
        }
        table.set(i, j, 1.0 - s.s_hat);
    }
    table.check();
    return table;
}

void DistanceTable::check() const {
    const std::size_t n = ids_.size();
    for (std::size_t i = 0; i < n; ++i) {
        if ((*this)(i, i) != 0.0) throw DataError("distance table diagonal must be zero");
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = (*this)(i, j);
            if (std::isnan(d)) {
                throw DataError("no score for pair (" + ids_[i] + ", " + ids_[j] + ")");
            }
            if (d != (*this)(j, i)) throw DataError("distance table is not symmetric");
            if (d < -1e-12 || d > 2.0 + 1e-12) {
                throw DataError("distance outside [0, 2] for pair (" + ids_[i] + ", " + ids_[j] + ")");
            }
        }
    }
}

// ---------------------------------------------------------------------------

int Clustering::cluster_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end());
}

std::vector<std::vector<std::size_t>> Clustering::members() const {
    std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(cluster_count()));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        out[static_cast<std::size_t>(labels[i] - 1)].push_back(i);
    }
    return out;
}

std::vector<bool> classify(const std::vector<PairScore>& scores, double cutoff) {
    std::vector<bool> out;
    out.reserve(scores.size());
    for (const auto& s : scores) out.push_back(s.s_hat > cutoff);
    return out;
}

std::pair<std::size_t, double> minimax_center(const std::vector<std::size_t>& group,
                                              const DistanceTable& d) {
    if (group.empty()) throw InvalidArgument("minimax centre of an empty group");
    std::size_t best = group.front();
    double radius = std::numeric_limits<double>::infinity();
    for (std::size_t i : group) {
        double r = 0.0;
        for (std::size_t j : group) r = std::max(r, d(i, j));
        if (r < radius || (r == radius && i < best)) {
            radius = r;
            best = i;
        }
    }
    return {best, radius};
}

double group_dissimilarity(const std::vector<std::size_t>& g, const std::vector<std::size_t>& h,
                           const DistanceTable& d, Linkage linkage) {
    if (g.empty() || h.empty()) throw InvalidArgument("linkage of an empty group");
    for (std::size_t i : g) {
        if (std::find(h.begin(), h.end(), i) != h.end()) {
            throw InvalidArgument("linkage groups overlap");
        }
    }
    switch (linkage) {
        case Linkage::Single:
        case Linkage::Complete:
        case Linkage::Average: {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo, sum = 0.0;
            for (std::size_t i : g) {
                for (std::size_t j : h) {
                    lo = std::min(lo, d(i, j));
                    hi = std::max(hi, d(i, j));
                    sum += d(i, j);
                }
            }
            if (linkage == Linkage::Single) return lo;
            if (linkage == Linkage::Complete) return hi;
            return sum / static_cast<double>(g.size() * h.size());
        }
        case Linkage::Minimax: {
            std::vector<std::size_t> u = g;
            u.insert(u.end(), h.begin(), h.end());
            return minimax_center(u, d).second;
        }
    }
    throw InvalidArgument("unknown linkage");
}

// ---------------------------------------------------------------------------

namespace {

struct Group {
    std::size_t node;
    std::size_t min_leaf;
    std::vector<std::size_t> leaves;
};

}  // namespace

Dendrogram hac(const DistanceTable& d, Linkage linkage) {
    const std::size_t n = d.size();
    if (n == 0) throw InvalidArgument("hierarchical clustering of zero items");
    d.check();

    Dendrogram out;
    out.leaves = d.ids();
    out.linkage = linkage;

    // Active groups live in slots 0..n-1; a merged group reuses the slot of its left part.
    std::vector<std::optional<Group>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[i] = Group{i, i, {i}};

    // dist[a][b]: current linkage between slots. For average linkage we also keep
    // the cross-sum so means are exact sums divided by counts.
    std::vector<double> dist(n * n), sums(n * n);
    // far[i][slot]: max distance from leaf i to the group in slot (minimax bookkeeping).
    std::vector<double> far;
    for (std::size_t a = 0; a < n; ++a) {
        for (std::size_t b = 0; b < n; ++b) {
            dist[a * n + b] = d(a, b);
            sums[a * n + b] = d(a, b);
        }
    }
    if (linkage == Linkage::Minimax) far = dist;

    for (std::size_t step = 0; step + 1 < n; ++step) {
        std::size_t best_a = n, best_b = n;
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::size_t, std::size_t> best_key{n, n};
        for (std::size_t a = 0; a < n; ++a) {
            if (!groups[a]) continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (!groups[b]) continue;
                const double v = dist[a * n + b];
                const std::pair<std::size_t, std::size_t> key = std::minmax(groups[a]->min_leaf, groups[b]->min_leaf);
                if (v < best || (v == best && key < best_key)) {
                    best = v;
                    best_a = a;
                    best_b = b;
                    best_key = key;
                }
            }
        }
        // Left is the group holding the smaller leaf index.
        if (groups[best_b]->min_leaf < groups[best_a]->min_leaf) std::swap(best_a, best_b);
        Group& left = *groups[best_a];
        Group& right = *groups[best_b];

        Merge merge{left.node, right.node, best, std::nullopt};
        Group merged{n + step, std::min(left.min_leaf, right.min_leaf), left.leaves};
        merged.leaves.insert(merged.leaves.end(), right.leaves.begin(), right.leaves.end());
        std::sort(merged.leaves.begin(), merged.leaves.end());

        if (linkage == Linkage::Minimax) {
            for (std::size_t i = 0; i < n; ++i) {
                far[i * n + best_a] = std::max(far[i * n + best_a], far[i * n + best_b]);
            }
            merge.prototype = minimax_center(merged.leaves, d).first;
        }
        const std::size_t merged_size = merged.leaves.size();
        const std::size_t slot = best_a;
        groups[best_b].reset();
        groups[slot] = std::move(merged);

        for (std::size_t h = 0; h < n; ++h) {
            if (!groups[h] || h == slot) continue;
            double v = 0.0;
            switch (linkage) {
                case Linkage::Single:
                    v = std::min(dist[slot * n + h], dist[best_b * n + h]);
                    break;
                case Linkage::Complete:
                    v = std::max(dist[slot * n + h], dist[best_b * n + h]);
                    break;
                case Linkage::Average: {
                    const double s = sums[slot * n + h] + sums[best_b * n + h];
                    sums[slot * n + h] = sums[h * n + slot] = s;
                    v = s / static_cast<double>(merged_size * groups[h]->leaves.size());
                    break;
                }
                case Linkage::Minimax: {
                    v = std::numeric_limits<double>::infinity();
                    for (std::size_t i : groups[slot]->leaves) {
                        v = std::min(v, std::max(far[i * n + slot], far[i * n + h]));
                    }
                    for (std::size_t i : groups[h]->leaves) {
                        v = std::min(v, std::max(far[i * n + slot], far[i * n + h]));
                    }
                    break;
                }
            }
            dist[slot * n + h] = dist[h * n + slot] = v;
        }
        out.merges.push_back(merge);
    }
    return out;
}

Clustering cut(const Dendrogram& dendrogram, double height_cutoff) {
    const std::size_t n = dendrogram.leaves.size();
    std::vector<std::size_t> parent(2 * n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    const auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    // Prototype per node (leaves are their own prototype).
    std::vector<std::size_t> prototype(2 * n);
    std::iota(prototype.begin(), prototype.begin() + static_cast<long>(n), std::size_t{0});

    for (std::size_t s = 0; s < dendrogram.merges.size(); ++s) {
        const Merge& m = dendrogram.merges[s];
        if (m.height > height_cutoff) break;
        const std::size_t node = n + s;
        parent[find(m.left)] = node;
        parent[find(m.right)] = node;
        if (m.prototype) prototype[node] = *m.prototype;
    }

    Clustering out;
    out.ids = dendrogram.leaves;
    out.cutoff = height_cutoff;
    out.linkage = dendrogram.linkage;
    out.labels.assign(n, 0);
    std::map<std::size_t, int> label_of_root;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = find(i);
        auto [it, inserted] = label_of_root.emplace(root, static_cast<int>(label_of_root.size()) + 1);
        out.labels[i] = it->second;
        if (inserted && dendrogram.linkage == Linkage::Minimax) {
            out.prototypes.push_back(prototype[root]);
        }
    }
    return out;
}

std::vector<bool> clusters_to_pairs(const Clustering& clustering) {
    const std::size_t n = clustering.labels.size();
    std::vector<bool> out;
    out.reserve(n * (n - (n > 0)) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            out.push_back(clustering.labels[i] == clustering.labels[j]);
        }
    }
    return out;
}

std::vector<bool> clusters_to_pairs(const Clustering& clustering,
                                    const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::map<std::string, int> label;
    for (std::size_t i = 0; i < clustering.ids.size(); ++i) label[clustering.ids[i]] = clustering.labels[i];
    std::vector<bool> out;
    out.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        auto ia = label.find(a), ib = label.find(b);
        if (ia == label.end() || ib == label.end()) {
            throw InvalidArgument("pair references an id outside the clustering");
        }
        out.push_back(ia->second == ib->second);
    }
    return out;
}

}  // namespace ccmatch
