// ccmatch: preprocess, compare, cluster and evaluate cartridge case scans.

#include "ccmatch/params.hpp"
#include "ccmatch/pipeline.hpp"
#include "ccmatch/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace ccmatch;

struct Options {
    RunConfig config;
    std::string params_path;
    std::string linkage = "minimax";
};

void add_common(CLI::App* cmd, Options& o, bool needs_manifest) {
    auto* m = cmd->add_option("--manifest", o.config.manifest, "manifest CSV");
    if (needs_manifest) m->required();
    cmd->add_option("--params", o.params_path, "key=value parameter file");
    cmd->add_option("--cache-dir", o.config.cache_dir, "preprocessed surface cache")->capture_default_str();
    cmd->add_option("--out", o.config.out_dir, "output directory")->capture_default_str();
    cmd->add_option("--jobs", o.config.jobs, "worker threads")->capture_default_str();
    cmd->add_option("--linkage", o.linkage, "single, complete, average, minimax or all")
        ->capture_default_str();
    cmd->add_option("--cutoff", o.config.cutoff, "similarity cutoff")->capture_default_str();
    cmd->add_option("--seed", o.config.seed, "global RANSAC seed")->capture_default_str();
    cmd->add_option("--lag-frac", o.config.lag_fraction, "translation range as a fraction of size")
        ->capture_default_str();
    cmd->add_option("--compare-resolution-um", o.config.compare_resolution_um,
                    "grid spacing used for comparison")
        ->capture_default_str();
}

void finish(Options& o) {
    if (!o.params_path.empty()) o.config.params = load_params(o.params_path);
    if (o.linkage == "all") {
        o.config.linkages.assign(std::begin(kAllLinkages), std::end(kAllLinkages));
    } else {
        o.config.linkages = {parse_linkage(o.linkage)};
    }
    o.config.validate();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cartridge case surface matching"};
    app.require_subcommand(1);

    Options o;
    auto* pre = app.add_subcommand("preprocess", "level, crop, resample and filter every scan");
    auto* cmp = app.add_subcommand("compare", "score every pair of preprocessed scans");
    auto* clu = app.add_subcommand("cluster", "cluster the pairwise scores");
    auto* eva = app.add_subcommand("evaluate", "precision-recall and histograms per study");
    auto* run = app.add_subcommand("run", "all stages in order");
    add_common(pre, o, true);
    add_common(cmp, o, true);
    add_common(clu, o, false);
    add_common(eva, o, true);
    add_common(run, o, true);

    std::string synth_dir;
    std::size_t guns = 3, cases = 5;
    std::uint64_t synth_seed = 1;
    std::size_t synth_size = synthetic::PhantomSpec{}.size;
    auto* syn = app.add_subcommand("synth", "write a synthetic study with known sources");
    syn->add_option("dir", synth_dir, "output directory")->required();
    syn->add_option("--guns", guns)->capture_default_str();
    syn->add_option("--cases", cases)->capture_default_str();
    syn->add_option("--seed", synth_seed)->capture_default_str();
    syn->add_option("--size", synth_size, "grid edge in pixels")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (syn->parsed()) {
            synthetic::PhantomSpec spec;
            spec.size = synth_size;
            const auto manifest = synthetic::write_study(synth_dir, guns, cases, synth_seed, spec);
            std::cout << manifest.string() << '\n';
            return kExitOk;
        }
        finish(o);
        if (pre->parsed()) {
            return cmd_preprocess(o.config, std::cerr).failures.empty() ? kExitOk : kExitPartial;
        }
        if (cmp->parsed()) {
            cmd_compare(o.config, std::cerr);
            return kExitOk;
        }
        if (clu->parsed()) {
            cmd_cluster(o.config, std::cerr);
            return kExitOk;
        }
        if (eva->parsed()) {
            std::cout << cmd_evaluate(o.config, std::cerr);
            return kExitOk;
        }
        return cmd_run(o.config, std::cerr);
    } catch (const InvalidArgument& e) {
        std::cerr << "ccmatch: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "ccmatch: " << e.what() << '\n';
        return kExitData;
    }
}
