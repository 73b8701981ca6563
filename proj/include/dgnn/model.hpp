#ifndef DGNN_MODEL_HPP
#define DGNN_MODEL_HPP

#include <string>
#include <vector>

#include "dgnn/csr.hpp"
#include "dgnn/error.hpp"
#include "dgnn/layers.hpp"
#include "dgnn/ops.hpp"
#include "dgnn/rng.hpp"
#include "dgnn/tensor.hpp"

namespace dgnn::layers {

enum class ModelKind { gcn, gat, sgc };
enum class NormKind { none, batch, pair, dgn };

struct ModelConfig {
    ModelKind kind = ModelKind::gcn;
    int depth = 2;
    int hidden = 16;
    NormKind norm = NormKind::none;
    int groups = 10;      // dgn only
    double lambda = 0.005;  // dgn only

    void validate() const {
        if (depth < 1) throw ParamError("depth must be >= 1, got " + std::to_string(depth));
        if (hidden < 1) throw ParamError("hidden width must be >= 1");
        if (norm == NormKind::dgn && groups < 1)
            throw ParamError("group count must be >= 1, got " + std::to_string(groups));
        if (norm == NormKind::dgn && lambda < 0) throw ParamError("lambda must be >= 0");
    }
};

/// A depth-K network with a normalizer between successive propagations.
///
/// GCN/GAT: K trainable layers; dropout on every layer input; the
/// normalizer follows each layer except the last (whose output is logits).
/// SGC: K parameter-free propagations, each followed by the normalizer,
/// then dropout and a single linear classifier. When the normalizer chain
/// is itself parameter-free (none/pair), the propagated features are
/// computed once and cached for the model's lifetime.
template <class T>
class Model {
public:
    Model(const ModelConfig& cfg, int in_dim, int num_classes, Rng& rng)
        : cfg_(cfg), in_dim_(in_dim), num_classes_(num_classes) {
        cfg_.validate();
        if (num_classes_ < 1) throw ParamError("need at least one class");
        const int K = cfg_.depth;
        switch (cfg_.kind) {
            case ModelKind::gcn:
                for (int k = 0; k < K; ++k)
                    gcn_.emplace_back(layer_in(k), layer_out(k), rng);
                break;
            case ModelKind::gat:
                for (int k = 0; k < K; ++k)
                    gat_.emplace_back(layer_in(k), layer_out(k), rng);
                break;
            case ModelKind::sgc:
                sgc_w_ = core::glorot_init<T>(in_dim_, num_classes_, rng);
                break;
        }
        const int norm_count = cfg_.kind == ModelKind::sgc ? K : K - 1;
        for (int k = 0; k < norm_count; ++k) {
            const int width = cfg_.kind == ModelKind::sgc ? in_dim_ : cfg_.hidden;
            if (cfg_.norm == NormKind::batch) bn_.emplace_back(width);
            if (cfg_.norm == NormKind::dgn)
                dgn_.emplace_back(width, cfg_.groups, cfg_.lambda, rng);
        }
    }

    /// Full-graph forward pass. Returns logits (n×C) and retains the
    /// representation feeding the classifier for metric computation.
    Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x, const Csr& adj, bool training,
                      double dropout_p, Rng& rng) {
        if (x.cols() != in_dim_)
            throw ShapeError("model expects " + std::to_string(in_dim_) + " features, got " +
                             std::to_string(x.cols()));
        return cfg_.kind == ModelKind::sgc ? forward_sgc(tape, x, adj, training, dropout_p, rng)
                                           : forward_conv(tape, x, adj, training, dropout_p, rng);
    }

    std::vector<Tensor<T>> parameters() {
        std::vector<Tensor<T>> out;
        for (auto& l : gcn_) out.push_back(l.w);
        for (auto& l : gat_) {
            out.push_back(l.w);
            out.push_back(l.a);
        }
        if (sgc_w_.defined()) out.push_back(sgc_w_);
        for (auto& s : bn_) {
            out.push_back(s.gamma);
            out.push_back(s.beta);
        }
        for (auto& s : dgn_) {
            out.push_back(s.u);
            out.push_back(s.gamma);
            out.push_back(s.beta);
        }
        return out;
    }

    /// Copies every trainable value and running statistic.
    std::vector<std::vector<T>> snapshot() {
        std::vector<std::vector<T>> out;
        for (auto p : parameters()) out.push_back(p.values());
        for (auto& s : bn_) {
            out.push_back(s.run_mean);
            out.push_back(s.run_std);
        }
        for (auto& s : dgn_) {
            out.push_back(s.run_mean);
            out.push_back(s.run_std);
        }
        return out;
    }

    void restore(const std::vector<std::vector<T>>& snap) {
        std::size_t i = 0;
        for (auto p : parameters()) p.values() = snap.at(i++);
        for (auto& s : bn_) {
            s.run_mean = snap.at(i);
            s.run_std = snap.at(i + 1);
            i += 2;
        }
        for (auto& s : dgn_) {
            s.run_mean = snap.at(i);
            s.run_std = snap.at(i + 1);
            i += 2;
        }
        if (i != snap.size()) throw ParamError("snapshot does not match model layout");
    }

    const ModelConfig& config() const { return cfg_; }
    const Tensor<T>& last_hidden() const { return last_hidden_; }
    const Tensor<T>& last_assignment() const { return last_assignment_; }
    const DgnState<T>* final_dgn() const { return dgn_.empty() ? nullptr : &dgn_.back(); }
    std::vector<DgnState<T>>& dgn_states() { return dgn_; }
    std::vector<BatchNormState<T>>& bn_states() { return bn_; }

private:
    int layer_in(int k) const { return k == 0 ? in_dim_ : cfg_.hidden; }
    int layer_out(int k) const { return k == cfg_.depth - 1 ? num_classes_ : cfg_.hidden; }

    Tensor<T> apply_norm(Tape<T>& tape, const Tensor<T>& h, int k, bool training) {
        switch (cfg_.norm) {
            case NormKind::none:
                return h;
            case NormKind::batch:
                return batch_norm(tape, h, bn_[k], training);
            case NormKind::pair:
                return pair_norm(tape, h);
            case NormKind::dgn: {
                Tensor<T> s;
                Tensor<T> out = dgn_forward(tape, h, dgn_[k], training, &s);
                last_assignment_ = s;
                return out;
            }
        }
        return h;
    }

    Tensor<T> forward_conv(Tape<T>& tape, const Tensor<T>& x, const Csr& adj, bool training,
                           double dropout_p, Rng& rng) {
        const int K = cfg_.depth;
        Tensor<T> h = x;
        last_hidden_ = x;
        for (int k = 0; k < K; ++k) {
            const bool last = k == K - 1;
            if (last) last_hidden_ = h;
            h = core::dropout(tape, h, dropout_p, training, rng);
            if (cfg_.kind == ModelKind::gcn) {
                h = core::spmm_sym(tape, adj, core::matmul(tape, h, gcn_[k].w));
                if (!last) h = core::relu(tape, h);
            } else {
                Tensor<T> wh = core::matmul(tape, h, gat_[k].w);
                h = gat_attention(tape, adj, wh, gat_[k].a, GatLayer<T>::kLeakySlope);
                if (!last) h = core::relu(tape, h);
            }
            if (!last) h = apply_norm(tape, h, k, training);
        }
        if (K == 1) last_hidden_ = h;  // no intermediate representation exists
        return h;
    }

    Tensor<T> forward_sgc(Tape<T>& tape, const Tensor<T>& x, const Csr& adj, bool training,
                          double dropout_p, Rng& rng) {
        Tensor<T> h;
        const bool cacheable = cfg_.norm == NormKind::none || cfg_.norm == NormKind::pair;
        if (cacheable && cache_.defined() && cache_key_ == x.id()) {
            h = cache_;
        } else {
            h = x;
            if (cacheable) {
                NoGradGuard<T> guard(tape);
                for (int k = 0; k < cfg_.depth; ++k)
                    h = apply_norm(tape, core::spmm_sym(tape, adj, h), k, training);
                cache_ = h;
                cache_key_ = x.id();
            } else {
                for (int k = 0; k < cfg_.depth; ++k)
                    h = apply_norm(tape, core::spmm_sym(tape, adj, h), k, training);
            }
        }
        last_hidden_ = h;
        h = core::dropout(tape, h, dropout_p, training, rng);
        return core::matmul(tape, h, sgc_w_);
    }

    ModelConfig cfg_;
    int in_dim_;
    int num_classes_;
    std::vector<GcnLayer<T>> gcn_;
    std::vector<GatLayer<T>> gat_;
    Tensor<T> sgc_w_;
    std::vector<BatchNormState<T>> bn_;
    std::vector<DgnState<T>> dgn_;
    Tensor<T> last_hidden_;
    Tensor<T> last_assignment_;
    Tensor<T> cache_;
    const void* cache_key_ = nullptr;
};

}  // namespace dgnn::layers

#endif
