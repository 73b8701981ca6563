// Command line front end: `dgnn run` trains a single configuration and
// exports its artifacts, `dgnn sweep` runs a depth × normalizer grid.
//
// Exit codes: 0 success, 1 bad configuration or arguments, 2 unreadable or
// malformed data, 3 every training repeat diverged.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dgnn/error.hpp"
#include "dgnn/experiment.hpp"

namespace {

using namespace dgnn;

void print_record(const cli::ResultRecord& r) {
    std::printf("%s depth=%d norm=%s", cli::to_string(r.cfg.model.kind).c_str(),
                r.cfg.model.depth, cli::to_string(r.cfg.model.norm).c_str());
    if (r.cfg.model.norm == layers::NormKind::dgn)
        std::printf(" G=%d lambda=%g", r.cfg.model.groups, r.cfg.model.lambda);
    std::printf("\n");
    if (!r.per_seed_acc.empty()) {
        std::printf("  test accuracy: %.2f%% +/- %.2f%% over %zu repeat(s)\n",
                    100.0 * r.acc_mean, 100.0 * r.acc_std, r.per_seed_acc.size());
        std::printf("  group distance ratio: %.6g\n", r.r_group);
        std::printf("  instance information gain: %.6g\n", r.g_ins);
        std::printf("  intra-group distance: %.6g\n", r.intra_group);
    }
    for (const std::string& f : r.failures) std::printf("  failed repeat: %s\n", f.c_str());
    std::printf("  wrote results to %s\n", r.cfg.output_dir.c_str());
}

int run_main(const std::string& config_path, double sigma2_override) {
    cli::ExperimentConfig cfg = cli::load_config(config_path);
    if (sigma2_override > 0) cfg.metric.sigma2 = sigma2_override;

    const graph::Graph g = cli::prepare_graph(cfg);
    const graph::NormalizedAdjacency adj = graph::normalize_adjacency(g);
    cli::Artifacts art;
    cli::ResultRecord rec = cli::compute_experiment(cfg, g, adj, &art);
    cli::append_result(rec, cfg.output_dir);
    print_record(rec);
    if (rec.failed_repeats == rec.cfg.repeats) {
        std::cerr << "error: all " << rec.cfg.repeats << " repeats diverged\n";
        return 3;
    }
    cli::export_embeddings(art, g, adj, cfg.output_dir);
    return 0;
}

int sweep_main(const std::string& config_path, double sigma2_override,
               const cli::SweepOptions& opts) {
    cli::ExperimentConfig cfg = cli::load_config(config_path);
    if (sigma2_override > 0) cfg.metric.sigma2 = sigma2_override;

    const std::vector<cli::ResultRecord> records = cli::sweep(cfg, opts);
    bool any_ok = false;
    for (const auto& r : records) any_ok = any_ok || !r.per_seed_acc.empty();
    if (!any_ok) {
        std::cerr << "error: every sweep cell failed\n";
        return 3;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deep graph networks with pluggable inter-layer normalization"};
    app.require_subcommand(1);

    std::string run_config, sweep_config;
    double run_sigma2 = -1.0, sweep_sigma2 = -1.0;
    cli::SweepOptions opts;

    CLI::App* run = app.add_subcommand("run", "train one configuration, export artifacts");
    run->add_option("--config", run_config, "JSON experiment config")->required();
    run->add_option("--sigma2", run_sigma2, "kernel bandwidth^2 for the information gain");

    CLI::App* sw = app.add_subcommand("sweep", "grid over depth / normalizer / G / lambda");
    sw->add_option("--config", sweep_config, "JSON experiment config")->required();
    sw->add_option("--k", opts.depths, "depths (default grid depends on the model)")
        ->delimiter(',');
    sw->add_option("--norm", opts.norms, "normalizers (default: none,batch,pair,dgn)")
        ->delimiter(',');
    sw->add_option("--g", opts.groups, "group counts for dgn cells")->delimiter(',');
    sw->add_option("--lambda", opts.lambdas, "balancing factors for dgn cells")->delimiter(',');
    sw->add_flag("--tune-lambda", opts.tune_lambda,
                 "pick lambda per dgn cell by validation accuracy");
    sw->add_flag("--missing-features", opts.missing_features,
                 "zero the features of val/test nodes before training");
    sw->add_flag("--deep", opts.deep, "extend the default sgc depth grid to 120");
    sw->add_option("--jobs", opts.jobs, "worker threads")->check(CLI::PositiveNumber);
    sw->add_option("--sigma2", sweep_sigma2, "kernel bandwidth^2 for the information gain");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return run_main(run_config, run_sigma2);
        return sweep_main(sweep_config, sweep_sigma2, opts);
    } catch (const dgnn::FormatError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const dgnn::IoError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << e.what() << '\n';
        return 1;
    }
}
