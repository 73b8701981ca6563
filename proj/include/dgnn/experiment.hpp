#ifndef DGNN_EXPERIMENT_HPP
#define DGNN_EXPERIMENT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dgnn/graph.hpp"
#include "dgnn/metrics.hpp"
#include "dgnn/model.hpp"
#include "dgnn/train.hpp"

namespace dgnn::cli {

struct DatasetConfig {
    std::string path;  // content_cites: file prefix; generic: directory
    std::string format = "content_cites";
    std::string name = "cora";
};

struct SplitConfig {
    int per_class = 20;
    int val = 500;
    int test = 1000;
    std::uint64_t seed = 1;
};

struct MetricConfig {
    double sigma2 = 1.0;
    std::int64_t pair_cap = metrics::kDefaultPairCap;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    SplitConfig split;
    layers::ModelConfig model;
    train::TrainConfig training;
    MetricConfig metric;
    std::string scenario = "attributed";  // or "missing_features"
    std::string output_dir = "out";
    int repeats = 5;

    void validate() const;
};

std::string to_string(layers::ModelKind k);
std::string to_string(layers::NormKind k);
layers::ModelKind model_kind_from(const std::string& s);
layers::NormKind norm_kind_from(const std::string& s);

/// Parses the JSON config text; unknown keys anywhere are rejected.
/// Hyperparameters omitted from the file take per-dataset defaults keyed by
/// dataset.name (pubmed: lr 1e-2, L2 1e-3, 5 groups; others: lr 5e-3,
/// L2 5e-4, 10 groups; dropout 0.6 everywhere).
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct ResultRecord {
    ExperimentConfig cfg;
    std::vector<double> per_seed_acc;  // successful repeats, seed order
    std::vector<int> best_epochs;
    std::vector<std::string> failures;
    int failed_repeats = 0;
    double acc_mean = 0.0;
    double acc_std = 0.0;
    double g_ins = 0.0;
    double r_group = 0.0;
    double intra_group = 0.0;
    std::int64_t pair_sample_size = 0;
    double seconds = 0.0;
};

/// Trained state of the first successful repeat, kept for export.
struct Artifacts {
    std::optional<layers::Model<float>> model;
    Tensor<float> x;
};

/// Loads the dataset, applies the configured split (content/cites inputs)
/// or keeps the file-provided one (generic inputs), then applies the
/// missing-features transform when the scenario asks for it.
graph::Graph prepare_graph(const ExperimentConfig& cfg);

/// Trains `repeats` seeds (base seed + repeat index), evaluates test
/// accuracy, computes the over-smoothing metrics per repeat on the final
/// model (ratio/intra on the pre-classifier representation, information
/// gain on the logits), and aggregates. Divergent repeats are recorded,
/// not dropped silently.
ResultRecord compute_experiment(const ExperimentConfig& cfg, const graph::Graph& g,
                                const graph::NormalizedAdjacency& adj,
                                Artifacts* keep = nullptr);

/// prepare_graph + compute_experiment + append to results.jsonl/results.csv.
ResultRecord run_experiment(const ExperimentConfig& cfg, Artifacts* keep = nullptr);

/// Serializes a record to one JSON object (field order fixed by the
/// library's sorted keys; `seconds` is the only nondeterministic field).
std::string record_to_json(const ResultRecord& r);

void append_result(const ResultRecord& r, const std::string& output_dir);

/// Writes embeddings.csv and, when the model normalizes with groups,
/// group_means.csv + assignments.csv. Re-export is byte-identical.
void export_embeddings(Artifacts& art, const graph::Graph& g,
                       const graph::NormalizedAdjacency& adj, const std::string& output_dir);

struct SweepOptions {
    std::vector<int> depths;
    std::vector<std::string> norms;
    std::vector<int> groups;
    std::vector<double> lambdas;
    bool tune_lambda = false;
    bool missing_features = false;
    bool deep = false;
    int jobs = 1;
};

/// Cartesian product over (depth, norm, G, λ) executed by a small worker
/// pool; per-cell failures are recorded and the sweep continues. Emits
/// results.jsonl/results.csv rows plus plot-ready curves.csv, and prints
/// the best depth per normalizer with the relative/absolute improvement of
/// group normalization over the unnormalized baseline.
std::vector<ResultRecord> sweep(ExperimentConfig base, const SweepOptions& opts);

/// Validation-accuracy selection over the λ candidate set.
double tune_lambda(const ExperimentConfig& cfg, const graph::Graph& g,
                   const graph::NormalizedAdjacency& adj);

extern const std::vector<double> kLambdaCandidates;

}  // namespace dgnn::cli

#endif
