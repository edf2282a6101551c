#pragma once

#include <cstddef>
#include <vector>

#include "afc/rng.hpp"

namespace afc {

/// Forward-pass activations kept for the matching backward pass.
struct MlpCache {
    std::vector<double> x, a1, a2, y;
};

/// Two-hidden-layer perceptron with tanh activations and a linear head.
/// Parameters and gradients live in single flat arrays (layout: W1, b1,
/// W2, b2, W3, b3, weights row-major out x in) so optimizers, clipping,
/// and checkpoints can treat them uniformly.
class Mlp {
public:
    Mlp(int in, int hidden, int out);

    /// Xavier-uniform weights, zero biases; the head layer is scaled by
    /// head_scale (small values keep initial outputs near zero).
    void init(Rng& rng, double head_scale = 1.0);

    void forward(const double* x, MlpCache& cache) const;

    /// Accumulate parameter gradients for dL/dy into grads(); optionally
    /// writes dL/dx (length in()) when dx is non-null.
    void backward(const MlpCache& cache, const double* dy, double* dx = nullptr);

    void zero_grads();

    int in() const { return in_; }
    int hidden() const { return hidden_; }
    int out() const { return out_; }

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::vector<double>& grads() { return grads_; }
    const std::vector<double>& grads() const { return grads_; }

private:
    int in_, hidden_, out_;
    size_t oW1_, ob1_, oW2_, ob2_, oW3_, ob3_;
    std::vector<double> params_, grads_;
};

} // namespace afc
