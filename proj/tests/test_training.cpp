#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "dgnn/graph.hpp"
#include "dgnn/grad_check.hpp"
#include "dgnn/model.hpp"
#include "dgnn/train.hpp"

using namespace dgnn;

namespace {

/// Two noisy clusters of 8 nodes, intra-cluster ring edges plus one bridge.
/// Linearly separable by features, so any of the models should fit it.
graph::Graph two_cluster_graph(std::uint64_t seed = 7) {
    graph::Graph g;
    g.n = 16;
    g.d = 4;
    g.num_classes = 2;
    Rng rng(seed);
    g.x.resize(static_cast<std::size_t>(g.n) * g.d);
    g.y.resize(g.n);
    for (int v = 0; v < g.n; ++v) {
        const int cls = v < 8 ? 0 : 1;
        g.y[v] = cls;
        for (int j = 0; j < g.d; ++j)
            g.x[static_cast<std::size_t>(v) * g.d + j] =
                (j == cls ? 1.0 : 0.0) + rng.uniform(-0.1, 0.1);
    }

    std::vector<std::set<int>> nbr(g.n);
    auto add = [&](int u, int v) {
        nbr[u].insert(v);
        nbr[v].insert(u);
    };
    for (int v = 0; v < 8; ++v) add(v, (v + 1) % 8);
    for (int v = 0; v < 8; ++v) add(8 + v, 8 + (v + 1) % 8);
    add(0, 8);

    g.adj.rows = g.adj.cols = g.n;
    g.adj.row_ptr.assign(g.n + 1, 0);
    for (int v = 0; v < g.n; ++v) g.adj.row_ptr[v + 1] = g.adj.row_ptr[v] + nbr[v].size();
    for (int v = 0; v < g.n; ++v)
        for (int u : nbr[v]) {
            g.adj.col.push_back(u);
            g.adj.val.push_back(1.0);
        }
    g.adj.check_valid();

    g.train_mask.assign(g.n, 0);
    g.val_mask.assign(g.n, 0);
    g.test_mask.assign(g.n, 0);
    for (int v : {0, 1, 2, 8, 9, 10}) g.train_mask[v] = 1;
    for (int v : {3, 4, 11, 12}) g.val_mask[v] = 1;
    for (int v : {5, 6, 7, 13, 14, 15}) g.test_mask[v] = 1;
    return g;
}

}  // namespace

TEST_CASE("TrainConfig validation") {
    train::TrainConfig tc;
    tc.validate();

    train::TrainConfig bad = tc;
    bad.patience = bad.max_epochs + 1;
    CHECK_THROWS_AS(bad.validate(), ParamError);

    bad = tc;
    bad.learning_rate = 0;
    CHECK_THROWS_AS(bad.validate(), ParamError);

    bad = tc;
    bad.dropout_p = 1.0;
    CHECK_THROWS_AS(bad.validate(), ParamError);

    bad = tc;
    bad.max_epochs = -1;
    CHECK_THROWS_AS(bad.validate(), ParamError);
}

TEST_CASE("masked_cross_entropy: hand values") {
    Tape<double> tape;

    SUBCASE("uniform logits give ln C") {
        Tensor<double> logits(3, 4);
        logits.fill(0.7);  // any constant row is uniform after softmax
        const auto loss = train::masked_cross_entropy(tape, logits, {0, 1, 2}, {0, 1, 2});
        CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }

    SUBCASE("single row log-sum-exp") {
        Tensor<double> logits(1, 3);
        logits.at(0, 0) = 1;
        logits.at(0, 1) = 2;
        logits.at(0, 2) = 3;
        const double want = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 2.0;
        const auto loss = train::masked_cross_entropy(tape, logits, {1}, {0});
        CHECK(loss.item() == doctest::Approx(want).epsilon(1e-12));
    }

    SUBCASE("mask selects rows") {
        Tensor<double> logits(2, 2);
        logits.at(0, 0) = 100;  // ignored row would dominate if included
        logits.at(0, 1) = -100;
        logits.at(1, 0) = 0;
        logits.at(1, 1) = 0;
        const auto loss = train::masked_cross_entropy(tape, logits, {1, 0}, {1});
        CHECK(loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("masked_cross_entropy: validation") {
    Tape<double> tape;
    Tensor<double> logits(2, 3);
    logits.fill(0.0);
    CHECK_THROWS_AS(train::masked_cross_entropy(tape, logits, {0, 1}, {}), ParamError);
    CHECK_THROWS_AS(train::masked_cross_entropy(tape, logits, {0, 3}, {0, 1}), ShapeError);
    CHECK_THROWS_AS(train::masked_cross_entropy(tape, logits, {0, 1}, {2}), ShapeError);
    CHECK_THROWS_AS(train::masked_cross_entropy(tape, logits, {0}, {0}), ShapeError);
}

TEST_CASE("masked_cross_entropy: gradient against finite differences") {
    Rng rng(11);
    Tensor<double> logits(5, 3);
    for (std::int64_t i = 0; i < logits.size(); ++i) logits.data()[i] = rng.uniform(-2, 2);
    logits.set_requires_grad(true);
    const std::vector<int> labels = {0, 2, 1, 1, 0};
    const std::vector<int> mask = {0, 2, 4};
    const double err = core::grad_check(
        [&](Tape<double>& tape) { return train::masked_cross_entropy(tape, logits, labels, mask); },
        {logits});
    CHECK(err < 1e-7);
}

TEST_CASE("accuracy: hand values and tie-breaking") {
    Tensor<double> logits(3, 3);
    // Row 0: clear class 2. Row 1: tie between 0 and 1 -> class 0.
    // Row 2: clear class 1.
    const double vals[] = {0, 1, 5, 2, 2, 0, 0, 3, 1};
    std::copy(std::begin(vals), std::end(vals), logits.data());
    CHECK(train::accuracy(logits, {2, 0, 1}, {0, 1, 2}) == doctest::Approx(1.0));
    CHECK(train::accuracy(logits, {2, 1, 1}, {0, 1, 2}) == doctest::Approx(2.0 / 3));
    CHECK(train::accuracy(logits, {0, 0, 0}, {1}) == doctest::Approx(1.0));
    CHECK_THROWS_AS(train::accuracy(logits, {0, 0, 0}, {}), ParamError);
}

TEST_CASE("Adam: first step moves by about lr per coordinate") {
    Tensor<float> p(1, 3);
    p.data()[0] = 1.0f;
    p.data()[1] = -2.0f;
    p.data()[2] = 0.5f;
    p.set_requires_grad(true);
    p.zero_grad();
    p.grad()[0] = 0.3f;
    p.grad()[1] = -4.0f;
    p.grad()[2] = 1e-3f;

    train::Adam<float> opt({p}, 0.01, 0.0);
    opt.step();
    // Bias-corrected first step is lr * g / (|g| + eps) = lr * sign(g).
    CHECK(p.data()[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-4));
    CHECK(p.data()[1] == doctest::Approx(-2.0 + 0.01).epsilon(1e-4));
    CHECK(p.data()[2] == doctest::Approx(0.5 - 0.01).epsilon(1e-3));
    CHECK(opt.steps() == 1);
    // The step zeroed the gradient for the next accumulation.
    CHECK(p.grad()[0] == 0.0f);
}

TEST_CASE("Adam: weight decay pulls parameters toward zero") {
    Tensor<float> p(1, 1);
    p.data()[0] = 5.0f;
    p.set_requires_grad(true);
    p.zero_grad();  // raw gradient stays zero; only decay acts

    train::Adam<float> opt({p}, 0.1, 1e-2);
    for (int i = 0; i < 50; ++i) opt.step();
    CHECK(std::abs(p.data()[0]) < 5.0f);
    CHECK(p.data()[0] > 0.0f);
}

TEST_CASE("fit: learns the two-cluster graph and restores the best epoch") {
    const graph::Graph g = two_cluster_graph();
    const auto adj = graph::normalize_adjacency(g);

    layers::ModelConfig mc;
    mc.kind = layers::ModelKind::gcn;
    mc.depth = 2;
    mc.hidden = 8;
    train::TrainConfig tc;
    tc.max_epochs = 200;
    tc.patience = 50;
    tc.dropout_p = 0.1;
    tc.seed = 3;

    auto out = train::fit<float>(mc, tc, g, adj);
    REQUIRE(out.history.epochs_run > 0);
    CHECK(out.history.train_loss.front() > out.history.train_loss.back());
    CHECK(out.history.best_epoch >= 1);
    CHECK(out.history.best_val_acc ==
          *std::max_element(out.history.val_acc.begin(), out.history.val_acc.end()));

    // Restored parameters reproduce the best validation accuracy.
    const auto val_idx = graph::indices_of(g.val_mask);
    auto ev = train::evaluate(out.model, out.x, adj.csr, g.y, val_idx);
    CHECK(ev.accuracy == doctest::Approx(out.history.best_val_acc));
    CHECK(ev.accuracy >= 0.75);

    const auto test_idx = graph::indices_of(g.test_mask);
    CHECK(train::evaluate(out.model, out.x, adj.csr, g.y, test_idx).accuracy >= 0.75);

    // last_hidden is the representation before the classifier layer.
    CHECK(ev.hidden.rows() == g.n);
    CHECK(ev.hidden.cols() == mc.hidden);
    CHECK(ev.logits.cols() == g.num_classes);
}

TEST_CASE("fit: identical seeds give identical runs") {
    const graph::Graph g = two_cluster_graph();
    const auto adj = graph::normalize_adjacency(g);

    layers::ModelConfig mc;
    mc.depth = 2;
    mc.hidden = 8;
    mc.norm = layers::NormKind::dgn;
    mc.groups = 2;
    mc.lambda = 0.01;
    train::TrainConfig tc;
    tc.max_epochs = 40;
    tc.patience = 40;
    tc.seed = 12;

    auto a = train::fit<float>(mc, tc, g, adj);
    auto b = train::fit<float>(mc, tc, g, adj);
    CHECK(a.history.train_loss == b.history.train_loss);
    CHECK(a.history.val_acc == b.history.val_acc);
    CHECK(a.history.best_epoch == b.history.best_epoch);
    CHECK(a.model.snapshot() == b.model.snapshot());

    tc.seed = 13;
    auto c = train::fit<float>(mc, tc, g, adj);
    CHECK(a.history.train_loss != c.history.train_loss);
}

TEST_CASE("fit: zero epochs returns the initialized model") {
    const graph::Graph g = two_cluster_graph();
    const auto adj = graph::normalize_adjacency(g);
    layers::ModelConfig mc;
    mc.depth = 1;
    train::TrainConfig tc;
    tc.max_epochs = 0;
    tc.patience = 0;

    auto out = train::fit<float>(mc, tc, g, adj);
    CHECK(out.history.epochs_run == 0);
    CHECK(out.history.best_epoch == -1);
    CHECK(out.history.train_loss.empty());
    // Evaluation still works on the untouched initialization.
    const auto idx = graph::indices_of(g.test_mask);
    const auto ev = train::evaluate(out.model, out.x, adj.csr, g.y, idx);
    CHECK(ev.logits.rows() == g.n);
}

TEST_CASE("fit: early stopping halts before max_epochs on a saturated run") {
    const graph::Graph g = two_cluster_graph();
    const auto adj = graph::normalize_adjacency(g);
    layers::ModelConfig mc;
    mc.kind = layers::ModelKind::sgc;
    mc.depth = 2;
    train::TrainConfig tc;
    tc.max_epochs = 1000;
    tc.patience = 5;
    tc.dropout_p = 0.0;
    tc.seed = 1;

    auto out = train::fit<float>(mc, tc, g, adj);
    CHECK(out.history.epochs_run < tc.max_epochs);
    // The last `patience` epochs did not improve on the best.
    const int last_improvement = out.history.best_epoch;
    CHECK(out.history.epochs_run - last_improvement >= tc.patience);
}

TEST_CASE("fit: non-finite loss raises TrainingDiverged") {
    const graph::Graph g = two_cluster_graph();
    const auto adj = graph::normalize_adjacency(g);
    layers::ModelConfig mc;
    mc.depth = 2;
    train::TrainConfig tc;
    tc.max_epochs = 10;
    tc.patience = 10;
    tc.learning_rate = 1e38;  // first step catapults the weights to overflow
    CHECK_THROWS_AS(train::fit<float>(mc, tc, g, adj), TrainingDiverged);
}

TEST_CASE("fit: empty train mask raises") {
    graph::Graph g = two_cluster_graph();
    std::fill(g.train_mask.begin(), g.train_mask.end(), std::uint8_t{0});
    const auto adj = graph::normalize_adjacency(g);
    layers::ModelConfig mc;
    train::TrainConfig tc;
    CHECK_THROWS_AS(train::fit<float>(mc, tc, g, adj), ParamError);
}
