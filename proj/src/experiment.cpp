#include "dgnn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "dgnn/error.hpp"

namespace dgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<double> kLambdaCandidates = {5e-4, 1e-3, 2e-3, 3e-3, 5e-3,
                                               1e-2, 2e-2, 3e-2, 5e-2};

void ExperimentConfig::validate() const {
    if (dataset.path.empty()) throw ConfigError("dataset.path is required");
    if (dataset.format != "content_cites" && dataset.format != "generic")
        throw ConfigError("dataset.format must be 'content_cites' or 'generic', got '" +
                          dataset.format + "'");
    if (scenario != "attributed" && scenario != "missing_features")
        throw ConfigError("scenario must be 'attributed' or 'missing_features', got '" +
                          scenario + "'");
    if (repeats < 1) throw ConfigError("repeats must be >= 1, got " + std::to_string(repeats));
    if (metric.sigma2 <= 0) throw ConfigError("metrics.sigma2 must be positive");
    model.validate();
    training.validate();
}

std::string to_string(layers::ModelKind k) {
    switch (k) {
        case layers::ModelKind::gcn: return "gcn";
        case layers::ModelKind::gat: return "gat";
        case layers::ModelKind::sgc: return "sgc";
    }
    return "?";
}

std::string to_string(layers::NormKind k) {
    switch (k) {
        case layers::NormKind::none: return "none";
        case layers::NormKind::batch: return "batch";
        case layers::NormKind::pair: return "pair";
        case layers::NormKind::dgn: return "dgn";
    }
    return "?";
}

layers::ModelKind model_kind_from(const std::string& s) {
    if (s == "gcn") return layers::ModelKind::gcn;
    if (s == "gat") return layers::ModelKind::gat;
    if (s == "sgc") return layers::ModelKind::sgc;
    throw ConfigError("unknown model kind '" + s + "' (expected gcn|gat|sgc)");
}

layers::NormKind norm_kind_from(const std::string& s) {
    if (s == "none") return layers::NormKind::none;
    if (s == "batch") return layers::NormKind::batch;
    if (s == "pair") return layers::NormKind::pair;
    if (s == "dgn") return layers::NormKind::dgn;
    throw ConfigError("unknown normalizer '" + s + "' (expected none|batch|pair|dgn)");
}

namespace {

void check_keys(const json& obj, const char* section, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&](const char* a) { return key == a; }) == allowed.end())
            throw ConfigError(std::string("unknown key '") + key + "' in " + section);
    }
}

template <class T>
void assign(const json& obj, const char* section, const char* key, T& target) {
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(target);
    } catch (const json::exception&) {
        throw ConfigError(std::string("bad value for '") + key + "' in " + section);
    }
}

std::string fmt(double v) { return json(v).dump(); }

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be a JSON object");
    check_keys(j, "config", {"dataset", "split", "model", "train", "metrics", "scenario",
                             "output_dir", "repeats"});

    ExperimentConfig cfg;
    if (j.contains("dataset")) {
        const json& d = j["dataset"];
        check_keys(d, "dataset", {"path", "format", "name"});
        assign(d, "dataset", "path", cfg.dataset.path);
        assign(d, "dataset", "format", cfg.dataset.format);
        assign(d, "dataset", "name", cfg.dataset.name);
    }

    // Per-dataset hyperparameter defaults; explicit values below override.
    if (cfg.dataset.name == "pubmed") {
        cfg.training.learning_rate = 1e-2;
        cfg.training.weight_decay = 1e-3;
        cfg.model.groups = 5;
    }

    if (j.contains("split")) {
        const json& s = j["split"];
        check_keys(s, "split", {"per_class", "val", "test", "seed"});
        assign(s, "split", "per_class", cfg.split.per_class);
        assign(s, "split", "val", cfg.split.val);
        assign(s, "split", "test", cfg.split.test);
        assign(s, "split", "seed", cfg.split.seed);
    }
    if (j.contains("model")) {
        const json& m = j["model"];
        check_keys(m, "model", {"kind", "depth", "hidden", "norm", "groups", "lambda"});
        std::string kind = to_string(cfg.model.kind), norm = to_string(cfg.model.norm);
        assign(m, "model", "kind", kind);
        assign(m, "model", "norm", norm);
        cfg.model.kind = model_kind_from(kind);
        cfg.model.norm = norm_kind_from(norm);
        assign(m, "model", "depth", cfg.model.depth);
        assign(m, "model", "hidden", cfg.model.hidden);
        assign(m, "model", "groups", cfg.model.groups);
        assign(m, "model", "lambda", cfg.model.lambda);
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        check_keys(t, "train",
                   {"lr", "weight_decay", "dropout", "max_epochs", "patience", "seed"});
        assign(t, "train", "lr", cfg.training.learning_rate);
        assign(t, "train", "weight_decay", cfg.training.weight_decay);
        assign(t, "train", "dropout", cfg.training.dropout_p);
        assign(t, "train", "max_epochs", cfg.training.max_epochs);
        assign(t, "train", "patience", cfg.training.patience);
        assign(t, "train", "seed", cfg.training.seed);
    }
    if (j.contains("metrics")) {
        const json& m = j["metrics"];
        check_keys(m, "metrics", {"sigma2", "pair_cap"});
        assign(m, "metrics", "sigma2", cfg.metric.sigma2);
        assign(m, "metrics", "pair_cap", cfg.metric.pair_cap);
    }
    assign(j, "config", "scenario", cfg.scenario);
    assign(j, "config", "output_dir", cfg.output_dir);
    assign(j, "config", "repeats", cfg.repeats);

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

graph::Graph prepare_graph(const ExperimentConfig& cfg) {
    cfg.validate();
    graph::Graph g;
    if (cfg.dataset.format == "content_cites") {
        g = graph::load_content_cites(cfg.dataset.path + ".content", cfg.dataset.path + ".cites");
        graph::generate_split(g, cfg.split.per_class, cfg.split.val, cfg.split.test,
                              cfg.split.seed);
    } else {
        g = graph::load_generic(cfg.dataset.path);
        const bool has_split = !graph::indices_of(g.train_mask).empty();
        if (!has_split)
            graph::generate_split(g, cfg.split.per_class, cfg.split.val, cfg.split.test,
                                  cfg.split.seed);
    }
    if (cfg.scenario == "missing_features") g = graph::mask_features(g);
    return g;
}

ResultRecord compute_experiment(const ExperimentConfig& cfg, const graph::Graph& g,
                                const graph::NormalizedAdjacency& adj, Artifacts* keep) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();

    ResultRecord rec;
    rec.cfg = cfg;
    const std::vector<int> test_idx = graph::indices_of(g.test_mask);
    if (test_idx.empty()) throw ParamError("empty test mask");

    double g_ins_sum = 0, r_group_sum = 0, intra_sum = 0;
    int metric_count = 0;

    for (int r = 0; r < cfg.repeats; ++r) {
        train::TrainConfig tc = cfg.training;
        tc.seed = cfg.training.seed + static_cast<std::uint64_t>(r);
        try {
            auto outcome = train::fit<float>(cfg.model, tc, g, adj);
            auto eval = train::evaluate(outcome.model, outcome.x, adj.csr, g.y, test_idx);
            rec.per_seed_acc.push_back(eval.accuracy);
            rec.best_epochs.push_back(outcome.history.best_epoch);

            // Metric surfaces: ratio/intra on the representation feeding the
            // classifier, information gain on the logits.
            const Tensor<float>& hidden = eval.hidden;
            std::vector<double> h(hidden.values().begin(), hidden.values().end());
            std::vector<double> logits(eval.logits.values().begin(), eval.logits.values().end());
            double intra = 0;
            std::int64_t pairs = 0;
            const double ratio =
                metrics::group_distance_ratio(h.data(), hidden.rows(), hidden.cols(), g.y,
                                              cfg.metric.pair_cap, tc.seed, &pairs, &intra);
            const double gain = metrics::instance_info_gain(
                g.x.data(), g.n, g.d, logits.data(), g.num_classes, cfg.metric.sigma2);
            r_group_sum += ratio;
            intra_sum += intra;
            g_ins_sum += gain;
            ++metric_count;
            if (rec.pair_sample_size == 0) rec.pair_sample_size = pairs;

            if (keep && !keep->model) {
                keep->model = std::move(outcome.model);
                keep->x = outcome.x;
            }
        } catch (const TrainingDiverged& e) {
            ++rec.failed_repeats;
            rec.failures.push_back(std::string(e.what()) + " (seed " + std::to_string(tc.seed) +
                                   ")");
        }
    }

    if (!rec.per_seed_acc.empty()) {
        double mean = 0;
        for (double a : rec.per_seed_acc) mean += a;
        mean /= static_cast<double>(rec.per_seed_acc.size());
        double var = 0;
        for (double a : rec.per_seed_acc) var += (a - mean) * (a - mean);
        var /= static_cast<double>(rec.per_seed_acc.size());
        rec.acc_mean = mean;
        rec.acc_std = std::sqrt(var);
    }
    if (metric_count > 0) {
        rec.g_ins = g_ins_sum / metric_count;
        rec.r_group = r_group_sum / metric_count;
        rec.intra_group = intra_sum / metric_count;
    }
    rec.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

std::string record_to_json(const ResultRecord& r) {
    json j;
    j["dataset"] = r.cfg.dataset.name;
    j["dataset_path"] = r.cfg.dataset.path;
    j["dataset_format"] = r.cfg.dataset.format;
    j["scenario"] = r.cfg.scenario;
    j["model"] = to_string(r.cfg.model.kind);
    j["depth"] = r.cfg.model.depth;
    j["hidden"] = r.cfg.model.hidden;
    j["norm"] = to_string(r.cfg.model.norm);
    j["groups"] = r.cfg.model.groups;
    j["lambda"] = r.cfg.model.lambda;
    j["lr"] = r.cfg.training.learning_rate;
    j["weight_decay"] = r.cfg.training.weight_decay;
    j["dropout"] = r.cfg.training.dropout_p;
    j["max_epochs"] = r.cfg.training.max_epochs;
    j["patience"] = r.cfg.training.patience;
    j["seed"] = r.cfg.training.seed;
    j["split_per_class"] = r.cfg.split.per_class;
    j["split_val"] = r.cfg.split.val;
    j["split_test"] = r.cfg.split.test;
    j["split_seed"] = r.cfg.split.seed;
    j["sigma2"] = r.cfg.metric.sigma2;
    j["pair_cap"] = r.cfg.metric.pair_cap;
    j["repeats"] = r.cfg.repeats;
    j["failed_repeats"] = r.failed_repeats;
    j["failures"] = r.failures;
    j["per_seed_accuracy"] = r.per_seed_acc;
    j["best_epochs"] = r.best_epochs;
    j["acc_mean"] = r.acc_mean;
    j["acc_std"] = r.acc_std;
    j["g_ins"] = r.g_ins;
    j["r_group"] = r.r_group;
    j["intra_group"] = r.intra_group;
    j["pair_sample_size"] = r.pair_sample_size;
    j["seconds"] = r.seconds;
    return j.dump();
}

namespace {

const char* kResultsCsvHeader =
    "dataset,scenario,model,depth,hidden,norm,groups,lambda,lr,weight_decay,dropout,"
    "max_epochs,patience,seed,repeats,failed_repeats,acc_mean,acc_std,g_ins,r_group,"
    "intra_group,pair_sample_size,seconds";

std::string record_to_csv_row(const ResultRecord& r) {
    std::ostringstream ss;
    ss << r.cfg.dataset.name << ',' << r.cfg.scenario << ',' << to_string(r.cfg.model.kind) << ','
       << r.cfg.model.depth << ',' << r.cfg.model.hidden << ',' << to_string(r.cfg.model.norm)
       << ',' << r.cfg.model.groups << ',' << fmt(r.cfg.model.lambda) << ','
       << fmt(r.cfg.training.learning_rate) << ',' << fmt(r.cfg.training.weight_decay) << ','
       << fmt(r.cfg.training.dropout_p) << ',' << r.cfg.training.max_epochs << ','
       << r.cfg.training.patience << ',' << r.cfg.training.seed << ',' << r.cfg.repeats << ','
       << r.failed_repeats << ',' << fmt(r.acc_mean) << ',' << fmt(r.acc_std) << ','
       << fmt(r.g_ins) << ',' << fmt(r.r_group) << ',' << fmt(r.intra_group) << ','
       << r.pair_sample_size << ',' << fmt(r.seconds);
    return ss.str();
}

void append_line(const fs::path& path, const std::string& line, const char* header) {
    const bool fresh = !fs::exists(path);
    std::ofstream out(path, std::ios::app);
    if (!out) throw IoError("cannot write " + path.string());
    if (fresh && header) out << header << '\n';
    out << line << '\n';
}

}  // namespace

void append_result(const ResultRecord& r, const std::string& output_dir) {
    std::error_code ec;
    fs::create_directories(output_dir, ec);
    append_line(fs::path(output_dir) / "results.jsonl", record_to_json(r), nullptr);
    append_line(fs::path(output_dir) / "results.csv", record_to_csv_row(r), kResultsCsvHeader);
}

ResultRecord run_experiment(const ExperimentConfig& cfg, Artifacts* keep) {
    const graph::Graph g = prepare_graph(cfg);
    const graph::NormalizedAdjacency adj = graph::normalize_adjacency(g);
    ResultRecord rec = compute_experiment(cfg, g, adj, keep);
    append_result(rec, cfg.output_dir);
    return rec;
}

void export_embeddings(Artifacts& art, const graph::Graph& g,
                       const graph::NormalizedAdjacency& adj, const std::string& output_dir) {
    if (!art.model) throw ParamError("no trained model available for export");
    std::error_code ec;
    fs::create_directories(output_dir, ec);

    std::vector<int> all(static_cast<std::size_t>(g.n));
    for (int v = 0; v < g.n; ++v) all[v] = v;
    auto eval = train::evaluate(*art.model, art.x, adj.csr, g.y, all);

    char buf[32];
    auto put = [&buf](std::ofstream& out, double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        out << buf;
    };

    {
        std::ofstream out(fs::path(output_dir) / "embeddings.csv");
        if (!out) throw IoError("cannot write embeddings.csv");
        out << "node_id,label";
        for (int j = 0; j < eval.hidden.cols(); ++j) out << ",e" << j;
        out << '\n';
        for (int v = 0; v < g.n; ++v) {
            out << v << ',' << g.y[v];
            for (int j = 0; j < eval.hidden.cols(); ++j) {
                out << ',';
                put(out, eval.hidden.at(v, j));
            }
            out << '\n';
        }
    }

    const layers::DgnState<float>* dgn = art.model->final_dgn();
    if (!dgn) return;
    {
        std::ofstream out(fs::path(output_dir) / "group_means.csv");
        if (!out) throw IoError("cannot write group_means.csv");
        const int d = dgn->gamma.cols();
        out << "group_id";
        for (int j = 0; j < d; ++j) out << ",m" << j;
        out << '\n';
        for (int gi = 0; gi < dgn->groups; ++gi) {
            out << gi;
            for (int j = 0; j < d; ++j) {
                out << ',';
                put(out, dgn->run_mean[static_cast<std::size_t>(gi) * d + j]);
            }
            out << '\n';
        }
    }
    {
        const Tensor<float>& s = art.model->last_assignment();
        std::ofstream out(fs::path(output_dir) / "assignments.csv");
        if (!out) throw IoError("cannot write assignments.csv");
        out << "node_id";
        for (int j = 0; j < s.cols(); ++j) out << ",p" << j;
        out << '\n';
        for (int v = 0; v < s.rows(); ++v) {
            out << v;
            for (int j = 0; j < s.cols(); ++j) {
                out << ',';
                put(out, s.at(v, j));
            }
            out << '\n';
        }
    }
}

double tune_lambda(const ExperimentConfig& cfg, const graph::Graph& g,
                   const graph::NormalizedAdjacency& adj) {
    double best_lambda = cfg.model.lambda;
    double best_val = -1.0;
    for (double cand : kLambdaCandidates) {
        layers::ModelConfig mc = cfg.model;
        mc.lambda = cand;
        try {
            auto outcome = train::fit<float>(mc, cfg.training, g, adj);
            if (outcome.history.best_val_acc > best_val) {
                best_val = outcome.history.best_val_acc;
                best_lambda = cand;
            }
        } catch (const TrainingDiverged&) {
            // candidate rejected
        }
    }
    return best_lambda;
}

std::vector<ResultRecord> sweep(ExperimentConfig base, const SweepOptions& opts) {
    if (opts.missing_features) base.scenario = "missing_features";
    base.validate();

    std::vector<int> depths = opts.depths;
    if (depths.empty()) {
        if (base.model.kind == layers::ModelKind::sgc)
            depths = opts.deep ? std::vector<int>{1, 5, 10, 20, 30, 60, 90, 120}
                               : std::vector<int>{1, 5, 10, 20, 30};
        else
            depths = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 25, 30};
    }
    std::vector<std::string> norms = opts.norms;
    if (norms.empty()) norms = {"none", "batch", "pair", "dgn"};
    std::vector<int> groups = opts.groups.empty() ? std::vector<int>{base.model.groups}
                                                  : opts.groups;
    std::vector<double> lambdas =
        opts.lambdas.empty() ? std::vector<double>{base.model.lambda} : opts.lambdas;

    struct Cell {
        int depth;
        layers::NormKind norm;
        int g;
        double lambda;
    };
    std::vector<Cell> cells;
    for (int k : depths)
        for (const auto& nm : norms)
            for (int gg : groups)
                for (double lm : lambdas)
                    cells.push_back({k, norm_kind_from(nm), gg, lm});

    const graph::Graph g = prepare_graph(base);
    const graph::NormalizedAdjacency adj = graph::normalize_adjacency(g);

    std::vector<ResultRecord> records(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&]() {
        for (std::size_t i = next.fetch_add(1); i < cells.size(); i = next.fetch_add(1)) {
            ExperimentConfig cfg = base;
            cfg.model.depth = cells[i].depth;
            cfg.model.norm = cells[i].norm;
            cfg.model.groups = cells[i].g;
            cfg.model.lambda = cells[i].lambda;
            try {
                if (opts.tune_lambda && cfg.model.norm == layers::NormKind::dgn)
                    cfg.model.lambda = tune_lambda(cfg, g, adj);
                records[i] = compute_experiment(cfg, g, adj);
            } catch (const std::exception& e) {
                records[i].cfg = cfg;
                records[i].failed_repeats = cfg.repeats;
                records[i].failures = {e.what()};
            }
            {
                std::lock_guard<std::mutex> lock(log_mutex);
                std::cout << "cell depth=" << cells[i].depth << " norm="
                          << to_string(cells[i].norm) << " G=" << cells[i].g
                          << " lambda=" << records[i].cfg.model.lambda
                          << " acc=" << records[i].acc_mean << " (" << records[i].seconds
                          << "s)\n";
            }
        }
    };
    const int n_workers =
        std::max(1, std::min<int>(opts.jobs, static_cast<int>(cells.size())));
    if (n_workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(n_workers));
        for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::error_code ec;
    fs::create_directories(base.output_dir, ec);
    for (const ResultRecord& r : records) append_result(r, base.output_dir);
    {
        std::ofstream out(fs::path(base.output_dir) / "curves.csv");
        if (!out) throw IoError("cannot write curves.csv");
        out << "K,norm,G,lambda,acc_mean,acc_std,g_ins,r_group,intra_group,seconds\n";
        for (const ResultRecord& r : records) {
            out << r.cfg.model.depth << ',' << to_string(r.cfg.model.norm) << ','
                << r.cfg.model.groups << ',' << fmt(r.cfg.model.lambda) << ',' << fmt(r.acc_mean)
                << ',' << fmt(r.acc_std) << ',' << fmt(r.g_ins) << ',' << fmt(r.r_group) << ','
                << fmt(r.intra_group) << ',' << fmt(r.seconds) << '\n';
        }
    }

    // Best depth per normalizer, plus the group-normalization improvement
    // over the unnormalized baseline at their respective best depths.
    std::map<std::string, const ResultRecord*> best;
    for (const ResultRecord& r : records) {
        if (r.per_seed_acc.empty()) continue;
        auto& slot = best[to_string(r.cfg.model.norm)];
        if (!slot || r.acc_mean > slot->acc_mean) slot = &r;
    }
    for (const auto& [norm, r] : best)
        std::cout << "best " << norm << ": depth=" << r->cfg.model.depth
                  << " acc=" << 100.0 * r->acc_mean << "%\n";
    if (best.count("none") && best.count("dgn")) {
        const double none_acc = best["none"]->acc_mean;
        const double dgn_acc = best["dgn"]->acc_mean;
        std::cout << "improvement_abs=" << 100.0 * (dgn_acc - none_acc)
                  << " improvement_rel=" << (none_acc > 0 ? (dgn_acc - none_acc) / none_acc : 0.0)
                  << '\n';
    }
    return records;
}

}  // namespace dgnn::cli
