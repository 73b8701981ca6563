#ifndef DGNN_TENSOR_HPP
#define DGNN_TENSOR_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dgnn/error.hpp"

namespace dgnn {

/// Dense row-major matrix with an optional gradient buffer. Tensors are
/// cheap shared handles: ops capture them by value inside backward closures
/// and the storage lives until the last closure is dropped. Constness is
/// shallow, as with shared_ptr — a const Tensor still exposes mutable
/// payload, which backward closures depend on.
template <class T>
class Tensor {
    struct Data {
        int rows = 0;
        int cols = 0;
        bool requires_grad = false;
        std::vector<T> value;
        std::vector<T> grad;  // empty until touched by backward
    };

    std::shared_ptr<Data> d_;

public:
    Tensor() = default;

    Tensor(int rows, int cols, bool requires_grad = false) : d_(std::make_shared<Data>()) {
        if (rows < 0 || cols < 0)
            throw ShapeError("tensor dims must be non-negative, got " + std::to_string(rows) +
                             "x" + std::to_string(cols));
        d_->rows = rows;
        d_->cols = cols;
        d_->requires_grad = requires_grad;
        d_->value.assign(static_cast<std::size_t>(rows) * cols, T(0));
    }

    bool defined() const { return static_cast<bool>(d_); }
    int rows() const { return d_->rows; }
    int cols() const { return d_->cols; }
    std::int64_t size() const { return static_cast<std::int64_t>(d_->rows) * d_->cols; }

    T* data() const { return d_->value.data(); }
    std::vector<T>& values() const { return d_->value; }

    T& at(int i, int j) const { return d_->value[static_cast<std::size_t>(i) * d_->cols + j]; }

    /// Scalar read for 1x1 tensors (losses).
    T item() const {
        if (size() != 1) throw ShapeError("item() requires a 1x1 tensor");
        return d_->value[0];
    }

    bool requires_grad() const { return d_->requires_grad; }
    void set_requires_grad(bool v) const { d_->requires_grad = v; }

    bool has_grad() const { return !d_->grad.empty(); }

    /// Gradient buffer, zero-allocated on first touch.
    T* grad() const {
        if (d_->grad.empty()) d_->grad.assign(d_->value.size(), T(0));
        return d_->grad.data();
    }
    const std::vector<T>& grad_vector() const { return d_->grad; }

    void zero_grad() const {
        if (!d_->grad.empty()) std::fill(d_->grad.begin(), d_->grad.end(), T(0));
    }
    void free_grad() const {
        d_->grad.clear();
        d_->grad.shrink_to_fit();
    }

    void fill(T v) const { std::fill(d_->value.begin(), d_->value.end(), v); }

    /// Identity of the underlying storage; used for cache keying.
    const void* id() const { return d_.get(); }

    bool all_finite() const {
        for (T v : d_->value)
            if (!std::isfinite(static_cast<double>(v))) return false;
        return true;
    }
};

/// Define-by-run gradient tape. Each forward op that participates in
/// differentiation pushes one closure; backward() runs them newest-first and
/// drops each closure as soon as it has fired, so saved activations are
/// released progressively instead of at the end of the pass.
template <class T>
class Tape {
    std::vector<std::function<void()>> nodes_;
    bool recording_ = true;

public:
    bool recording() const { return recording_; }
    void set_recording(bool v) { recording_ = v; }

    void push(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }

    std::size_t node_count() const { return nodes_.size(); }

    void clear() {
        nodes_.clear();
        nodes_.shrink_to_fit();
    }

    /// Seeds d(loss)/d(loss) = 1 and runs the recorded closures in reverse.
    void backward(Tensor<T>& loss) {
        if (loss.size() != 1) throw ShapeError("backward() expects a 1x1 loss tensor");
        loss.grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            (*it)();
            *it = nullptr;  // release captured tensors early
        }
        clear();
    }
};

/// RAII guard that disables tape recording for inference passes.
template <class T>
class NoGradGuard {
    Tape<T>& tape_;
    bool saved_;

public:
    explicit NoGradGuard(Tape<T>& tape) : tape_(tape), saved_(tape.recording()) {
        tape_.set_recording(false);
    }
    ~NoGradGuard() { tape_.set_recording(saved_); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

#ifdef DGNN_CHECK_FINITE
template <class T>
inline void debug_check_finite(const Tensor<T>& t, const char* op) {
    if (!t.all_finite())
        throw std::runtime_error(std::string("non-finite value produced by op: ") + op);
}
#else
template <class T>
inline void debug_check_finite(const Tensor<T>&, const char*) {}
#endif

}  // namespace dgnn

#endif
