#ifndef DGNN_GRAD_CHECK_HPP
#define DGNN_GRAD_CHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dgnn/error.hpp"
#include "dgnn/tensor.hpp"

namespace dgnn::core {

/// Compares analytic gradients against central finite differences.
///
/// `forward` must rebuild the computation on the given tape from the current
/// values of `inputs` and return a scalar loss; it is re-evaluated with
/// perturbed inputs, so it has to be deterministic. Returns the maximum over
/// all input elements of |analytic − cd| / max(|analytic|, |cd|, 1e-8).
inline double grad_check(const std::function<Tensor<double>(Tape<double>&)>& forward,
                         const std::vector<Tensor<double>>& inputs, double eps = 1e-5) {
    if (eps <= 0) throw ParamError("grad_check eps must be positive");

    Tape<double> tape;
    Tensor<double> loss = forward(tape);
    if (loss.size() != 1) throw ShapeError("grad_check: forward must return a 1x1 loss");
    tape.backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (auto in : inputs) {
        analytic.emplace_back(in.grad(), in.grad() + in.size());
        in.free_grad();
    }

    auto eval = [&forward]() {
        Tape<double> t;
        NoGradGuard<double> guard(t);
        return forward(t).item();
    };

    double max_rel = 0.0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        Tensor<double> in = inputs[k];
        double* v = in.data();
        for (std::int64_t i = 0; i < in.size(); ++i) {
            const double saved = v[i];
            v[i] = saved + eps;
            const double up = eval();
            v[i] = saved - eps;
            const double down = eval();
            v[i] = saved;
            const double cd = (up - down) / (2 * eps);
            const double a = analytic[k][static_cast<std::size_t>(i)];
            const double rel = std::abs(a - cd) / std::max({std::abs(a), std::abs(cd), 1e-8});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace dgnn::core

#endif
