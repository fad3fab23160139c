#include "ccmatch/evaluate.hpp"

#include "ccmatch/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace ccmatch {

double Confusion::precision() const {
    return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Confusion::recall() const {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

std::vector<LabeledPair> label_pairs(const std::vector<PairScore>& scores,
                                     const std::vector<SurfaceMeta>& manifest) {
    std::map<std::string, const SurfaceMeta*> by_id;
    for (const auto& m : manifest) by_id[m.id] = &m;
    std::vector<LabeledPair> out;
    out.reserve(scores.size());
    for (const auto& s : scores) {
        auto a = by_id.find(s.id1), b = by_id.find(s.id2);
        if (a == by_id.end()) throw DataError("id '" + s.id1 + "' is not in the manifest");
        if (b == by_id.end()) throw DataError("id '" + s.id2 + "' is not in the manifest");
        out.push_back({s.id1, s.id2, s.s_hat, a->second->same_source(*b->second)});
    }
    return out;
}

Confusion confusion(const std::vector<LabeledPair>& labeled, double cutoff) {
    Confusion c;
    for (const auto& p : labeled) {
        const bool predicted = p.s_hat > cutoff;
        if (predicted && p.truth) ++c.tp;
        else if (predicted) ++c.fp;
        else if (p.truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

bool pr_defined(const std::vector<LabeledPair>& labeled) {
    const bool any_match = std::any_of(labeled.begin(), labeled.end(), [](auto& p) { return p.truth; });
    const bool any_non = std::any_of(labeled.begin(), labeled.end(), [](auto& p) { return !p.truth; });
    return any_match && any_non;
}

double pr_auc(const std::vector<PRPoint>& points) {
    std::map<double, double> best;  // recall -> highest precision
    best[0.0] = 1.0;
    for (const auto& p : points) {
        if (p.recall == 0.0) continue;
        auto [it, inserted] = best.emplace(p.recall, p.precision);
        if (!inserted) it->second = std::max(it->second, p.precision);
    }
    double area = 0.0;
    for (auto it = best.begin(), next = std::next(it); next != best.end(); ++it, ++next) {
        area += (next->first - it->first) * (it->second + next->second) / 2.0;
    }
    return area;
}

namespace {

void require_pr_defined(const std::vector<LabeledPair>& labeled) {
    if (!pr_defined(labeled)) {
        throw DataError("precision-recall is undefined: need both matched and non-matched pairs");
    }
}

PRPoint make_point(double cutoff, const Confusion& c) {
    return {cutoff, c.precision(), c.recall(), c};
}

}  // namespace

PRCurve pr_curve(const std::vector<LabeledPair>& labeled) {
    require_pr_defined(labeled);
    std::vector<std::pair<double, bool>> sorted;
    sorted.reserve(labeled.size());
    std::size_t total_match = 0;
    for (const auto& p : labeled) {
        sorted.emplace_back(p.s_hat, p.truth);
        total_match += p.truth;
    }
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const std::size_t total_non = n - total_match;

    // Cutoffs below the smallest score, between each distinct score, and above the largest.
    std::vector<double> cutoffs{sorted.front().first - 1.0};
    for (std::size_t i = 1; i < n; ++i) {
        if (sorted[i].first != sorted[i - 1].first) {
            cutoffs.push_back(sorted[i - 1].first + (sorted[i].first - sorted[i - 1].first) / 2.0);
        }
    }
    cutoffs.push_back(sorted.back().first + 1.0);

    PRCurve curve;
    std::size_t below = 0, below_match = 0;  // pairs with score <= cutoff
    for (double cutoff : cutoffs) {
        while (below < n && sorted[below].first <= cutoff) {
            below_match += sorted[below].second;
            ++below;
        }
        Confusion c;
        c.fn = below_match;
        c.tn = below - below_match;
        c.tp = total_match - c.fn;
        c.fp = total_non - c.tn;
        curve.points.push_back(make_point(cutoff, c));
    }
    curve.auc = pr_auc(curve.points);
    return curve;
}

PRCurve pr_from_clusterings(const std::vector<LabeledPair>& labeled, const Dendrogram& dendrogram) {
    require_pr_defined(labeled);
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dendrogram.leaves.size(); ++i) index[dendrogram.leaves[i]] = i;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (const auto& p : labeled) {
        auto a = index.find(p.id1), b = index.find(p.id2);
        if (a == index.end() || b == index.end()) {
            throw DataError("labeled pair (" + p.id1 + ", " + p.id2 + ") is not in the dendrogram");
        }
        pairs.emplace_back(a->second, b->second);
    }

    std::vector<double> heights;
    for (const auto& m : dendrogram.merges) heights.push_back(m.height);
    std::sort(heights.begin(), heights.end());
    heights.erase(std::unique(heights.begin(), heights.end()), heights.end());
    if (heights.empty()) heights.push_back(0.0);
    heights.insert(heights.begin(), heights.front() - 1.0);

    PRCurve curve;
    for (double h : heights) {
        const Clustering cl = cut(dendrogram, h);
        Confusion c;
        for (std::size_t k = 0; k < labeled.size(); ++k) {
            const bool predicted = cl.labels[pairs[k].first] == cl.labels[pairs[k].second];
            const bool truth = labeled[k].truth;
            if (predicted && truth) ++c.tp;
            else if (predicted) ++c.fp;
            else if (truth) ++c.fn;
            else ++c.tn;
        }
        curve.points.push_back(make_point(height_for_similarity(h), c));
    }
    std::reverse(curve.points.begin(), curve.points.end());
    curve.auc = pr_auc(curve.points);
    return curve;
}

double Histogram::bin_low(std::size_t b) const {
    return low + (high - low) * static_cast<double>(b) / static_cast<double>(match.size());
}

double Histogram::bin_high(std::size_t b) const {
    return low + (high - low) * static_cast<double>(b + 1) / static_cast<double>(match.size());
}

Histogram export_histograms(const std::vector<LabeledPair>& labeled, std::size_t bins, double low,
                            double high) {
    if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
    if (!(high > low)) throw InvalidArgument("histogram range is empty");
    Histogram h{low, high, std::vector<std::size_t>(bins, 0), std::vector<std::size_t>(bins, 0)};
    for (const auto& p : labeled) {
        const double pos = (p.s_hat - low) / (high - low) * static_cast<double>(bins);
        const auto b = static_cast<std::size_t>(
            std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
        ++(p.truth ? h.match : h.nonmatch)[b];
    }
    return h;
}

std::string pr_csv(const PRCurve& curve) {
    std::ostringstream os;
    os << "cutoff,precision,recall,tp,fp,fn,tn\n";
    for (const auto& p : curve.points) {
        os << csv::format_double(p.cutoff) << ',' << csv::format_double(p.precision) << ','
           << csv::format_double(p.recall) << ',' << p.counts.tp << ',' << p.counts.fp << ','
           << p.counts.fn << ',' << p.counts.tn << '\n';
    }
    return os.str();
}

std::string histogram_csv(const Histogram& hist) {
    std::ostringstream os;
    os << "bin_low,bin_high,match_count,nonmatch_count\n";
    for (std::size_t b = 0; b < hist.match.size(); ++b) {
        os << csv::format_double(hist.bin_low(b)) << ',' << csv::format_double(hist.bin_high(b))
           << ',' << hist.match[b] << ',' << hist.nonmatch[b] << '\n';
    }
    return os.str();
}

}  // namespace ccmatch
