#pragma once

#include "ccmatch/align.hpp"
#include "ccmatch/linkage.hpp"
#include "ccmatch/preprocess.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

namespace ccmatch {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitPartial = 3,
};

struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path cache_dir = "cache";
    std::filesystem::path out_dir = "out";
    PreprocessParams params;
    int jobs = 1;
    std::vector<Linkage> linkages{Linkage::Minimax};
    double cutoff = 0.4;  ///< similarity-space cutoff
    std::uint64_t seed = 0;
    double lag_fraction = 0.2;
    double compare_resolution_um = 25.0;
    std::size_t histogram_bins = 20;

    void validate() const;
};

/// Runs fn(i) for i in [0, n) on `jobs` worker threads. Exceptions are rethrown after join.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// RANSAC seed for one image, independent of processing order.
std::uint64_t image_seed(std::uint64_t global_seed, const std::string& id);

/// Hex SHA-256 over (id, parameter set, seed, raw file bytes).
std::string cache_key(const std::string& id, const PreprocessParams& params, std::uint64_t seed,
                      std::span<const std::uint8_t> raw);

/// Path of the cached preprocessed surface for a manifest row.
std::filesystem::path cache_path(const RunConfig& config, const SurfaceMeta& meta);

/// Loads a raw scan: `.png` as grayscale, anything else as C3DP. The id comes from `meta`.
Surface load_scan(const SurfaceMeta& meta);

/// Full preprocessing for one scan; grayscale images pass through unchanged.
Surface preprocess_scan(const Surface& raw, const SurfaceMeta& meta, const RunConfig& config);

struct PreprocessFailure {
    std::string id;
    std::string path;
    std::string error;
};

struct PreprocessReport {
    std::size_t computed = 0;
    std::size_t reused = 0;
    std::vector<PreprocessFailure> failures;
};

PreprocessReport cmd_preprocess(const RunConfig& config, std::ostream& log);

struct CompareReport {
    std::size_t pairs = 0;
    std::size_t resumed = 0;
    std::vector<PairScore> scores;
};

/// Scores every pair of manifest ids (minus `exclude`). Resumes from
/// `scores.partial.csv` if an earlier run was interrupted.
CompareReport cmd_compare(const RunConfig& config, std::ostream& log,
                          const std::set<std::string>& exclude = {});

struct ClusterReport {
    std::vector<Clustering> clusterings;  ///< one per requested linkage
};

/// Clusters the ids in scores.csv; with an empty table, the manifest ids (minus `exclude`).
ClusterReport cmd_cluster(const RunConfig& config, std::ostream& log,
                          const std::set<std::string>& exclude = {});

/// Writes PR CSVs, histograms, and summary.json. Returns the summary JSON text.
std::string cmd_evaluate(const RunConfig& config, std::ostream& log);

/// All stages; returns an ExitCode.
int cmd_run(const RunConfig& config, std::ostream& log);

/// Scores CSV: `id1,id2,c12,c21,s_hat,theta_star,k_star,l_star`, sorted by (id1, id2).
std::string scores_csv(std::vector<PairScore> scores);
std::vector<PairScore> read_scores_csv(const std::filesystem::path& path);

std::string clusters_csv(const Clustering& clustering);
/// `step,left,right,height`; leaves are written by id, internal nodes as `@<step>`.
std::string dendrogram_csv(const Dendrogram& dendrogram);

}  // namespace ccmatch
