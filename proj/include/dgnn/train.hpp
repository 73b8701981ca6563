#ifndef DGNN_TRAIN_HPP
#define DGNN_TRAIN_HPP

#include <cmath>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "dgnn/error.hpp"
#include "dgnn/graph.hpp"
#include "dgnn/model.hpp"
#include "dgnn/ops.hpp"
#include "dgnn/rng.hpp"
#include "dgnn/tensor.hpp"

namespace dgnn::train {

struct TrainConfig {
    double learning_rate = 5e-3;
    double weight_decay = 5e-4;
    double dropout_p = 0.6;
    int max_epochs = 1000;
    int patience = 100;
    std::uint64_t seed = 42;

    void validate() const {
        if (learning_rate <= 0) throw ParamError("learning rate must be positive");
        if (dropout_p < 0 || dropout_p >= 1)
            throw ParamError("dropout must be in [0,1), got " + std::to_string(dropout_p));
        if (max_epochs < 0) throw ParamError("max_epochs must be >= 0");
        if (patience > max_epochs)
            throw ParamError("patience " + std::to_string(patience) + " exceeds max_epochs " +
                             std::to_string(max_epochs));
        if (weight_decay < 0) throw ParamError("weight decay must be >= 0");
    }
};

/// Mean over masked nodes of −log softmax(logits)[label], log-sum-exp form.
template <class T>
Tensor<T> masked_cross_entropy(Tape<T>& tape, const Tensor<T>& logits,
                               const std::vector<int>& labels, const std::vector<int>& mask) {
    if (mask.empty()) throw ParamError("cross entropy over an empty mask");
    const int n = logits.rows();
    const int c = logits.cols();
    if (static_cast<int>(labels.size()) != n)
        throw ShapeError("labels size " + std::to_string(labels.size()) + " != rows " +
                         std::to_string(n));
    for (int v : mask) {
        if (v < 0 || v >= n) throw ShapeError("mask index " + std::to_string(v) + " out of range");
        if (labels[v] < 0 || labels[v] >= c)
            throw ShapeError("label " + std::to_string(labels[v]) + " out of range for " +
                             std::to_string(c) + " classes");
    }

    Tensor<T> out(1, 1);
    const T* pl = logits.data();
    T loss = 0;
    for (int v : mask) {
        const T* row = pl + static_cast<std::int64_t>(v) * c;
        T mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        T sum = 0;
        for (int j = 0; j < c; ++j) sum += std::exp(row[j] - mx);
        loss += std::log(sum) + mx - row[labels[v]];
    }
    const T inv_m = T(1) / static_cast<T>(mask.size());
    out.data()[0] = loss * inv_m;

    if (tape.recording() && logits.requires_grad()) {
        out.set_requires_grad(true);
        tape.push([logits, out, labels, mask, inv_m]() mutable {
            const int c2 = logits.cols();
            const T g = out.grad()[0] * inv_m;
            const T* pl2 = logits.data();
            T* gl = logits.grad();
            for (int v : mask) {
                const T* row = pl2 + static_cast<std::int64_t>(v) * c2;
                T* grow = gl + static_cast<std::int64_t>(v) * c2;
                T mx = row[0];
                for (int j = 1; j < c2; ++j) mx = std::max(mx, row[j]);
                T sum = 0;
                for (int j = 0; j < c2; ++j) sum += std::exp(row[j] - mx);
                const T inv_sum = T(1) / sum;
                for (int j = 0; j < c2; ++j) {
                    const T p = std::exp(row[j] - mx) * inv_sum;
                    grow[j] += g * (p - (j == labels[v] ? T(1) : T(0)));
                }
            }
        });
    }
    return out;
}

/// Fraction of masked nodes whose argmax logit (lowest index on ties)
/// matches the label.
template <class T>
double accuracy(const Tensor<T>& logits, const std::vector<int>& labels,
                const std::vector<int>& mask) {
    if (mask.empty()) throw ParamError("accuracy over an empty mask");
    const int c = logits.cols();
    const T* pl = logits.data();
    int hits = 0;
    for (int v : mask) {
        const T* row = pl + static_cast<std::int64_t>(v) * c;
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        hits += best == labels[v];
    }
    return static_cast<double>(hits) / static_cast<double>(mask.size());
}

/// Adam with bias correction; L2 regularization is added to the raw
/// gradient before the moment updates (coupled form).
template <class T>
class Adam {
public:
    Adam(std::vector<Tensor<T>> params, double lr, double weight_decay)
        : params_(std::move(params)), lr_(lr), wd_(weight_decay) {
        m_.resize(params_.size());
        v_.resize(params_.size());
        for (std::size_t i = 0; i < params_.size(); ++i) {
            m_[i].assign(static_cast<std::size_t>(params_[i].size()), T(0));
            v_[i].assign(static_cast<std::size_t>(params_[i].size()), T(0));
        }
    }

    void step() {
        ++t_;
        const T b1 = static_cast<T>(0.9);
        const T b2 = static_cast<T>(0.999);
        const T eps = static_cast<T>(1e-8);
        const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(0.9, t_)));
        const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(0.999, t_)));
        const T lr = static_cast<T>(lr_);
        const T wd = static_cast<T>(wd_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Tensor<T>& p = params_[i];
            T* val = p.data();
            const T* grad = p.grad();
            T* m = m_[i].data();
            T* v = v_[i].data();
            const std::int64_t sz = p.size();
            for (std::int64_t k = 0; k < sz; ++k) {
                const T g = grad[k] + wd * val[k];
                m[k] = b1 * m[k] + (T(1) - b1) * g;
                v[k] = b2 * v[k] + (T(1) - b2) * g * g;
                val[k] -= lr * (m[k] * c1) / (std::sqrt(v[k] * c2) + eps);
            }
            p.zero_grad();
        }
    }

    int steps() const { return t_; }

private:
    std::vector<Tensor<T>> params_;
    std::vector<std::vector<T>> m_, v_;
    double lr_;
    double wd_;
    int t_ = 0;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> val_acc;
    int best_epoch = -1;  // 1-based; -1 when no epoch ran
    double best_val_acc = -1.0;
    int epochs_run = 0;
};

template <class T>
struct EvalResult {
    double accuracy = 0.0;
    Tensor<T> logits;
    Tensor<T> hidden;
};

template <class T>
Tensor<T> features_tensor(const graph::Graph& g) {
    Tensor<T> x(g.n, g.d);
    T* p = x.data();
    for (std::size_t i = 0; i < g.x.size(); ++i) p[i] = static_cast<T>(g.x[i]);
    return x;
}

/// Eval-mode pass (dropout off, running statistics) over the full graph.
template <class T>
EvalResult<T> evaluate(layers::Model<T>& model, const Tensor<T>& x, const Csr& adj,
                       const std::vector<int>& labels, const std::vector<int>& mask) {
    Tape<T> tape;
    NoGradGuard<T> guard(tape);
    Rng unused(0);
    EvalResult<T> r;
    r.logits = model.forward(tape, x, adj, false, 0.0, unused);
    r.hidden = model.last_hidden();
    r.accuracy = accuracy(r.logits, labels, mask);
    return r;
}

template <class T>
struct TrainOutcome {
    layers::Model<T> model;
    Tensor<T> x;
    TrainHistory history;
};

/// Full-batch training with early stopping on validation accuracy and
/// best-epoch parameter restore. Deterministic under (config, seed).
template <class T>
TrainOutcome<T> fit(const layers::ModelConfig& mc, const TrainConfig& tc, const graph::Graph& g,
                    const graph::NormalizedAdjacency& adj) {
    mc.validate();
    tc.validate();
    const std::vector<int> train_idx = graph::indices_of(g.train_mask);
    const std::vector<int> val_idx = graph::indices_of(g.val_mask);
    if (train_idx.empty()) throw ParamError("empty train mask");
    {
        std::set<int> seen;
        for (int v : train_idx) seen.insert(g.y[v]);
        if (static_cast<int>(seen.size()) < g.num_classes)
            std::cerr << "warning: train mask covers " << seen.size() << " of " << g.num_classes
                      << " classes\n";
    }

    Rng rng(tc.seed);
    TrainOutcome<T> out{layers::Model<T>(mc, g.d, g.num_classes, rng), features_tensor<T>(g), {}};
    layers::Model<T>& model = out.model;
    TrainHistory& hist = out.history;

    Adam<T> opt(model.parameters(), tc.learning_rate, tc.weight_decay);
    std::vector<std::vector<T>> best = model.snapshot();
    int since_best = 0;

    for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
        Tape<T> tape;
        Tensor<T> logits = model.forward(tape, out.x, adj.csr, true, tc.dropout_p, rng);
        Tensor<T> loss = masked_cross_entropy(tape, logits, g.y, train_idx);
        const double loss_value = static_cast<double>(loss.item());
        if (!std::isfinite(loss_value)) throw TrainingDiverged(epoch);
        tape.backward(loss);
        opt.step();

        const double val =
            val_idx.empty() ? 0.0 : evaluate(model, out.x, adj.csr, g.y, val_idx).accuracy;
        hist.train_loss.push_back(loss_value);
        hist.val_acc.push_back(val);
        hist.epochs_run = epoch;

        if (val > hist.best_val_acc) {
            hist.best_val_acc = val;
            hist.best_epoch = epoch;
            best = model.snapshot();
            since_best = 0;
        } else if (++since_best >= tc.patience) {
            break;
        }
    }

    if (hist.best_epoch > 0) model.restore(best);
    return out;
}

}  // namespace dgnn::train

#endif
