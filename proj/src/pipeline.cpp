#include "ccmatch/pipeline.hpp"

#include "ccmatch/csv.hpp"
#include "ccmatch/evaluate.hpp"
#include "ccmatch/params.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace ccmatch {

namespace fs = std::filesystem;

void RunConfig::validate() const {
    if (jobs < 1) throw InvalidArgument("--jobs must be at least 1");
    if (!(cutoff >= -1.0 && cutoff <= 1.0)) throw InvalidArgument("--cutoff must lie in [-1, 1]");
    if (!(lag_fraction >= 0.0 && lag_fraction < 1.0)) {
        throw InvalidArgument("--lag-frac must lie in [0, 1)");
    }
    if (!(compare_resolution_um > 0.0)) {
        throw InvalidArgument("--compare-resolution-um must be positive");
    }
    if (linkages.empty()) throw InvalidArgument("at least one linkage is required");
    if (histogram_bins == 0) throw InvalidArgument("histogram needs at least one bin");
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
        std::vector<std::jthread> workers;
        const auto count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
        for (std::size_t w = 0; w < count; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < n && !failed; i = next++) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                        failed = true;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Hashing

namespace {

std::array<unsigned char, 32> sha256(std::span<const std::uint8_t> a,
                                     std::span<const std::uint8_t> b = {}) {
    std::array<unsigned char, 32> digest{};
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), a.data(), a.size()) != 1 ||
        EVP_DigestUpdate(ctx.get(), b.data(), b.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
        throw Error("SHA-256 computation failed");
    }
    return digest;
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

std::uint64_t image_seed(std::uint64_t global_seed, const std::string& id) {
    const std::string text = "seed:" + std::to_string(global_seed) + ":" + id;
    const auto d = sha256(as_bytes(text));
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | d[static_cast<std::size_t>(i)];
    return v;
}

std::string cache_key(const std::string& id, const PreprocessParams& params, std::uint64_t seed,
                      std::span<const std::uint8_t> raw) {
    const std::string header = "ccmatch-cache-v1\nid=" + id + "\n" + canonical_params(params) +
                               "seed=" + std::to_string(seed) + "\n";
    const auto d = sha256(as_bytes(header), raw);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned char byte : d) {
        out += kHex[byte >> 4];
        out += kHex[byte & 15];
    }
    return out;
}

fs::path cache_path(const RunConfig& config, const SurfaceMeta& meta) {
    const auto raw = read_file_bytes(meta.path);
    return config.cache_dir / (cache_key(meta.id, config.params, config.seed, raw) + ".c3dp");
}

// ---------------------------------------------------------------------------
// Stage: preprocess

namespace {

bool is_png(const fs::path& p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

}  // namespace

Surface load_scan(const SurfaceMeta& meta) {
    Surface s = is_png(meta.path) ? load_grayscale_png(meta.path) : load_depth_grid(meta.path);
    s.set_id(meta.id);
    return s;
}

Surface preprocess_scan(const Surface& raw, const SurfaceMeta& meta, const RunConfig& config) {
    if (is_png(meta.path)) return raw;
    PreprocessParams params = config.params;
    params.ransac.seed = image_seed(config.seed, meta.id);
    Surface out = preprocess_full(raw, params);
    out.set_id(meta.id);
    return out;
}

PreprocessReport cmd_preprocess(const RunConfig& config, std::ostream& log) {
    config.validate();
    const auto manifest = load_manifest(config.manifest);
    fs::create_directories(config.cache_dir);

    enum class Outcome { Computed, Reused, Failed };
    std::vector<Outcome> outcomes(manifest.size(), Outcome::Failed);
    std::vector<std::string> errors(manifest.size());

    parallel_for(manifest.size(), config.jobs, [&](std::size_t i) {
        const SurfaceMeta& meta = manifest[i];
        try {
            const fs::path target = cache_path(config, meta);
            if (fs::exists(target)) {
                outcomes[i] = Outcome::Reused;
                return;
            }
            const Surface processed = preprocess_scan(load_scan(meta), meta, config);
            save_depth_grid(processed, target);
            outcomes[i] = Outcome::Computed;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });

    PreprocessReport report;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        switch (outcomes[i]) {
            case Outcome::Computed: ++report.computed; break;
            case Outcome::Reused: ++report.reused; break;
            case Outcome::Failed:
                report.failures.push_back({manifest[i].id, manifest[i].path.string(), errors[i]});
                break;
        }
    }
    std::sort(report.failures.begin(), report.failures.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });

    const fs::path failures_path = config.out_dir / "failures.csv";
    if (report.failures.empty()) {
        fs::remove(failures_path);
    } else {
        std::ostringstream os;
        os << "id,path,error\n";
        for (const auto& f : report.failures) {
            os << csv::escape(f.id) << ',' << csv::escape(f.path) << ',' << csv::escape(f.error) << '\n';
        }
        write_file_atomic(failures_path, os.str());
    }
    log << "preprocess: " << report.computed << " computed, " << report.reused << " cached, "
        << report.failures.size() << " failed\n";
    for (const auto& f : report.failures) log << "  failed " << f.id << ": " << f.error << '\n';
    return report;
}

// ---------------------------------------------------------------------------
// Scores CSV

namespace {

const std::vector<std::string> kScoresHeader = {"id1", "id2", "c12", "c21", "s_hat",
                                                "theta_star", "k_star", "l_star"};

std::string score_row(const PairScore& s) {
    const AlignResult& a = s.best();
    std::ostringstream os;
    os << csv::escape(s.id1) << ',' << csv::escape(s.id2) << ',' << csv::format_double(s.c12)
       << ',' << csv::format_double(s.c21) << ',' << csv::format_double(s.s_hat) << ','
       << csv::format_double(a.theta_star) << ',' << a.k_star << ',' << a.l_star << '\n';
    return os.str();
}

PairScore parse_score_row(const std::vector<std::string>& row) {
    PairScore s;
    s.id1 = row[0];
    s.id2 = row[1];
    s.c12 = csv::parse_double(row[2]);
    s.c21 = csv::parse_double(row[3]);
    s.s_hat = csv::parse_double(row[4]);
    AlignResult best{s.s_hat, csv::parse_double(row[5]), static_cast<int>(csv::parse_int(row[6])),
                     static_cast<int>(csv::parse_int(row[7]))};
    if (s.id1 == s.id2) throw FormatError("scores row compares '" + s.id1 + "' with itself");
    if (s.s_hat != std::max(s.c12, s.c21)) throw FormatError("s_hat must equal max(c12, c21)");
    if (s.id2 < s.id1) {
        std::swap(s.id1, s.id2);
        std::swap(s.c12, s.c21);
    }
    s.align12.ccf_max = s.c12;
    s.align21.ccf_max = s.c21;
    (s.c12 >= s.c21 ? s.align12 : s.align21) = best;
    return s;
}

}  // namespace

std::string scores_csv(std::vector<PairScore> scores) {
    std::sort(scores.begin(), scores.end(), [](const PairScore& a, const PairScore& b) {
        return std::tie(a.id1, a.id2) < std::tie(b.id1, b.id2);
    });
    std::string out = "id1,id2,c12,c21,s_hat,theta_star,k_star,l_star\n";
    for (const auto& s : scores) out += score_row(s);
    return out;
}

std::vector<PairScore> read_scores_csv(const fs::path& path) {
    std::vector<PairScore> out;
    for (const auto& row : csv::read_table(path.string(), kScoresHeader)) {
        out.push_back(parse_score_row(row));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage: compare

CompareReport cmd_compare(const RunConfig& config, std::ostream& log,
                          const std::set<std::string>& exclude) {
    config.validate();
    auto manifest = load_manifest(config.manifest);
    std::erase_if(manifest, [&](const SurfaceMeta& m) { return exclude.contains(m.id); });
    std::sort(manifest.begin(), manifest.end(),
              [](const auto& a, const auto& b) { return a.id < b.id; });
    const std::size_t n = manifest.size();
    fs::create_directories(config.out_dir);
    const fs::path final_path = config.out_dir / "scores.csv";
    const fs::path partial_path = config.out_dir / "scores.partial.csv";

    CompareReport report;
    if (n < 2) {
        log << "compare: warning: fewer than two images, writing an empty scores table\n";
        write_file_atomic(final_path, scores_csv({}));
        return report;
    }

    std::vector<Surface> surfaces(n);
    parallel_for(n, config.jobs, [&](std::size_t i) {
        const fs::path cached = cache_path(config, manifest[i]);
        if (!fs::exists(cached)) {
            throw DataError("missing cache entry for '" + manifest[i].id + "' (run preprocess first)");
        }
        Surface s = load_depth_grid(cached);
        if (s.resolution() < config.compare_resolution_um) s = resample(s, config.compare_resolution_um);
        s.set_id(manifest[i].id);
        surfaces[i] = std::move(s);
    });

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::map<std::pair<std::string, std::string>, std::size_t> pair_index;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            pair_index[{manifest[i].id, manifest[j].id}] = pairs.size();
            pairs.emplace_back(i, j);
        }
    }
    report.pairs = pairs.size();

    std::vector<std::optional<PairScore>> results(pairs.size());
    if (fs::exists(partial_path)) {
        std::ifstream in(partial_path);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            try {
                const auto fields = csv::split_line(line);
                if (fields.size() != kScoresHeader.size()) continue;
                PairScore s = parse_score_row(fields);
                auto it = pair_index.find({s.id1, s.id2});
                if (it != pair_index.end() && !results[it->second]) {
                    results[it->second] = std::move(s);
                    ++report.resumed;
                }
            } catch (const Error&) {
                // A truncated trailing row from an interrupted run.
            }
        }
    }

    std::vector<std::size_t> todo;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (!results[k]) todo.push_back(k);
    }
    {
        std::ofstream partial;
        if (report.resumed == 0) {
            partial.open(partial_path, std::ios::trunc);
            partial << "id1,id2,c12,c21,s_hat,theta_star,k_star,l_star\n";
        } else {
            partial.open(partial_path, std::ios::app);
        }
        if (!partial) throw Error(partial_path.string() + ": cannot open for writing");
        partial.flush();
        std::mutex partial_mutex;
        const AlignParams align_params{config.lag_fraction};
        parallel_for(todo.size(), config.jobs, [&](std::size_t t) {
            const std::size_t k = todo[t];
            PairScore s = similarity(surfaces[pairs[k].first], surfaces[pairs[k].second], align_params);
            const std::string row = score_row(s);
            results[k] = std::move(s);
            std::lock_guard lock(partial_mutex);
            partial << row;
            partial.flush();
        });
    }

    for (auto& r : results) report.scores.push_back(std::move(*r));
    write_file_atomic(final_path, scores_csv(report.scores));
    fs::remove(partial_path);
    log << "compare: " << report.pairs << " pairs (" << report.resumed << " resumed) -> "
        << final_path.string() << '\n';
    return report;
}

// ---------------------------------------------------------------------------
// Stage: cluster

std::string clusters_csv(const Clustering& clustering) {
    std::vector<std::size_t> order(clustering.ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return clustering.ids[a] < clustering.ids[b]; });
    std::string out = "id,cluster\n";
    for (std::size_t i : order) {
        out += csv::escape(clustering.ids[i]) + "," + std::to_string(clustering.labels[i]) + "\n";
    }
    return out;
}

std::string dendrogram_csv(const Dendrogram& dendrogram) {
    const std::size_t n = dendrogram.leaves.size();
    const auto name = [&](std::size_t node) {
        return node < n ? csv::escape(dendrogram.leaves[node]) : "@" + std::to_string(node - n + 1);
    };
    std::string out = "step,left,right,height\n";
    for (std::size_t s = 0; s < dendrogram.merges.size(); ++s) {
        const Merge& m = dendrogram.merges[s];
        out += std::to_string(s + 1) + "," + name(m.left) + "," + name(m.right) + "," +
               csv::format_double(m.height) + "\n";
    }
    return out;
}

namespace {

std::vector<std::string> manifest_ids(const RunConfig& config, const std::set<std::string>& exclude) {
    std::vector<std::string> ids;
    if (config.manifest.empty() || !fs::exists(config.manifest)) return ids;
    for (const auto& m : load_manifest(config.manifest)) {
        if (!exclude.contains(m.id)) ids.push_back(m.id);
    }
    return ids;
}

}  // namespace

ClusterReport cmd_cluster(const RunConfig& config, std::ostream& log,
                          const std::set<std::string>& exclude) {
    config.validate();
    const auto scores = read_scores_csv(config.out_dir / "scores.csv");
    std::vector<std::string> extra;
    if (scores.empty()) extra = manifest_ids(config, exclude);
    const DistanceTable table = DistanceTable::from_scores(scores, extra);
    if (table.size() == 0) throw DataError("nothing to cluster: no ids in scores or manifest");

    ClusterReport report;
    const double height = height_for_similarity(config.cutoff);
    for (Linkage linkage : config.linkages) {
        const Dendrogram dendrogram = hac(table, linkage);
        Clustering clustering = cut(dendrogram, height);
        const std::string name(to_string(linkage));
        write_file_atomic(config.out_dir / ("clusters_" + name + ".csv"), clusters_csv(clustering));
        write_file_atomic(config.out_dir / ("dendrogram_" + name + ".csv"), dendrogram_csv(dendrogram));
        if (linkage == Linkage::Minimax) {
            std::string protos = "cluster,prototype\n";
            for (std::size_t k = 0; k < clustering.prototypes.size(); ++k) {
                protos += std::to_string(k + 1) + "," +
                          csv::escape(clustering.ids[clustering.prototypes[k]]) + "\n";
            }
            write_file_atomic(config.out_dir / "prototypes_minimax.csv", protos);
        }
        log << "cluster: " << name << " linkage at similarity " << config.cutoff << " -> "
            << clustering.cluster_count() << " clusters\n";
        report.clusterings.push_back(std::move(clustering));
    }
    return report;
}

// ---------------------------------------------------------------------------
// Stage: evaluate

namespace {

std::string file_token(const std::string& s) {
    std::string out;
    for (unsigned char c : s) out += std::isalnum(c) || c == '-' || c == '_' ? static_cast<char>(c) : '_';
    return out.empty() ? "unnamed" : out;
}

nlohmann::ordered_json counts_json(const Confusion& c) {
    return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn},
            {"precision", c.precision()}, {"recall", c.recall()}};
}

}  // namespace

std::string cmd_evaluate(const RunConfig& config, std::ostream& log) {
    config.validate();
    const auto manifest = load_manifest(config.manifest);
    const auto scores = read_scores_csv(config.out_dir / "scores.csv");
    std::map<std::string, std::string> study_of;
    for (const auto& m : manifest) study_of[m.id] = m.study;

    std::map<std::string, std::vector<PairScore>> by_study;
    for (const auto& s : scores) {
        auto a = study_of.find(s.id1), b = study_of.find(s.id2);
        if (a == study_of.end()) throw DataError("id '" + s.id1 + "' is not in the manifest");
        if (b == study_of.end()) throw DataError("id '" + s.id2 + "' is not in the manifest");
        if (a->second == b->second) by_study[a->second].push_back(s);
    }

    nlohmann::ordered_json summary;
    summary["similarity_cutoff"] = config.cutoff;
    summary["datasets"] = nlohmann::ordered_json::array();
    for (const auto& [study, study_scores] : by_study) {
        const auto labeled = label_pairs(study_scores, manifest);
        const std::string token = file_token(study);
        write_file_atomic(config.out_dir / ("hist_" + token + ".csv"),
                          histogram_csv(export_histograms(labeled, config.histogram_bins)));

        nlohmann::ordered_json entry;
        entry["study"] = study;
        entry["pairs"] = labeled.size();
        entry["matches"] = std::count_if(labeled.begin(), labeled.end(), [](auto& p) { return p.truth; });
        if (!pr_defined(labeled)) {
            const bool all_match = entry["matches"].get<std::size_t>() == labeled.size();
            entry["pr"] = all_match ? "skipped: no non-matched pairs" : "skipped: no matched pairs";
            log << "evaluate: " << study << ": precision-recall skipped ("
                << (all_match ? "no non-matched pairs" : "no matched pairs") << "), histogram written\n";
            summary["datasets"].push_back(entry);
            continue;
        }
        entry["pr"] = "computed";

        const PRCurve before = pr_curve(labeled);
        write_file_atomic(config.out_dir / ("pr_" + token + "_raw.csv"), pr_csv(before));
        entry["auc_before"] = before.auc;
        entry["at_cutoff"]["before"] = counts_json(confusion(labeled, config.cutoff));

        const DistanceTable table = DistanceTable::from_scores(study_scores);
        for (Linkage linkage : config.linkages) {
            const std::string name(to_string(linkage));
            const Dendrogram dendrogram = hac(table, linkage);
            const PRCurve after = pr_from_clusterings(labeled, dendrogram);
            write_file_atomic(config.out_dir / ("pr_" + token + "_" + name + ".csv"), pr_csv(after));
            entry["auc_after"][name] = after.auc;

            const Clustering cl = cut(dendrogram, height_for_similarity(config.cutoff));
            std::vector<std::pair<std::string, std::string>> ids;
            for (const auto& p : labeled) ids.emplace_back(p.id1, p.id2);
            const auto predicted = clusters_to_pairs(cl, ids);
            Confusion c;
            for (std::size_t k = 0; k < labeled.size(); ++k) {
                if (predicted[k] && labeled[k].truth) ++c.tp;
                else if (predicted[k]) ++c.fp;
                else if (labeled[k].truth) ++c.fn;
                else ++c.tn;
            }
            entry["at_cutoff"][name] = counts_json(c);
            entry["clusters"][name] = cl.cluster_count();
        }
        log << "evaluate: " << study << ": auc before clustering " << before.auc << '\n';
        summary["datasets"].push_back(entry);
    }
    const std::string text = summary.dump(2) + "\n";
    write_file_atomic(config.out_dir / "summary.json", text);
    return text;
}

int cmd_run(const RunConfig& config, std::ostream& log) {
    const PreprocessReport pre = cmd_preprocess(config, log);
    std::set<std::string> failed;
    for (const auto& f : pre.failures) failed.insert(f.id);
    cmd_compare(config, log, failed);
    cmd_cluster(config, log, failed);
    cmd_evaluate(config, log);
    return failed.empty() ? kExitOk : kExitPartial;
}

}  // namespace ccmatch
