#include "afc/mlp.hpp"

#include <cassert>
#include <cmath>

#include "afc/errors.hpp"

namespace afc {

Mlp::Mlp(int in, int hidden, int out) : in_(in), hidden_(hidden), out_(out) {
    if (in < 1 || hidden < 1 || out < 1)
        throw ConfigError("mlp: all layer sizes must be positive");
    const size_t h = static_cast<size_t>(hidden), ni = static_cast<size_t>(in),
                 no = static_cast<size_t>(out);
    oW1_ = 0;
    ob1_ = oW1_ + h * ni;
    oW2_ = ob1_ + h;
    ob2_ = oW2_ + h * h;
    oW3_ = ob2_ + h;
    ob3_ = oW3_ + no * h;
    params_.assign(ob3_ + no, 0.0);
    grads_.assign(params_.size(), 0.0);
}

void Mlp::init(Rng& rng, double head_scale) {
    auto xavier = [&](size_t off, int rows, int cols, double scale) {
        const double lim = scale * std::sqrt(6.0 / (rows + cols));
        for (int k = 0; k < rows * cols; ++k)
            params_[off + static_cast<size_t>(k)] = lim * (2.0 * rng.uniform() - 1.0);
    };
    xavier(oW1_, hidden_, in_, 1.0);
    xavier(oW2_, hidden_, hidden_, 1.0);
    xavier(oW3_, out_, hidden_, head_scale);
    for (int k = 0; k < hidden_; ++k) params_[ob1_ + k] = params_[ob2_ + k] = 0.0;
    for (int k = 0; k < out_; ++k) params_[ob3_ + k] = 0.0;
}

void Mlp::forward(const double* x, MlpCache& c) const {
    c.x.assign(x, x + in_);
    c.a1.resize(hidden_);
    c.a2.resize(hidden_);
    c.y.resize(out_);
    const double* W1 = params_.data() + oW1_;
    const double* b1 = params_.data() + ob1_;
    const double* W2 = params_.data() + oW2_;
    const double* b2 = params_.data() + ob2_;
    const double* W3 = params_.data() + oW3_;
    const double* b3 = params_.data() + ob3_;

    for (int r = 0; r < hidden_; ++r) {
        double s = b1[r];
        const double* w = W1 + static_cast<size_t>(r) * in_;
        for (int k = 0; k < in_; ++k) s += w[k] * x[k];
        c.a1[r] = std::tanh(s);
    }
    for (int r = 0; r < hidden_; ++r) {
        double s = b2[r];
        const double* w = W2 + static_cast<size_t>(r) * hidden_;
        for (int k = 0; k < hidden_; ++k) s += w[k] * c.a1[k];
        c.a2[r] = std::tanh(s);
    }
    for (int r = 0; r < out_; ++r) {
        double s = b3[r];
        const double* w = W3 + static_cast<size_t>(r) * hidden_;
        for (int k = 0; k < hidden_; ++k) s += w[k] * c.a2[k];
        c.y[r] = s;
    }
}

void Mlp::backward(const MlpCache& c, const double* dy, double* dx) {
    assert(static_cast<int>(c.x.size()) == in_ && static_cast<int>(c.y.size()) == out_);
    const double* W2 = params_.data() + oW2_;
    const double* W3 = params_.data() + oW3_;
    double* gW1 = grads_.data() + oW1_;
    double* gb1 = grads_.data() + ob1_;
    double* gW2 = grads_.data() + oW2_;
    double* gb2 = grads_.data() + ob2_;
    double* gW3 = grads_.data() + oW3_;
    double* gb3 = grads_.data() + ob3_;

    std::vector<double> da2(hidden_, 0.0), da1(hidden_, 0.0);
    for (int r = 0; r < out_; ++r) {
        const double g = dy[r];
        gb3[r] += g;
        double* gw = gW3 + static_cast<size_t>(r) * hidden_;
        const double* w = W3 + static_cast<size_t>(r) * hidden_;
        for (int k = 0; k < hidden_; ++k) {
            gw[k] += g * c.a2[k];
            da2[k] += g * w[k];
        }
    }
    for (int r = 0; r < hidden_; ++r) {
        const double g = da2[r] * (1.0 - c.a2[r] * c.a2[r]);
        gb2[r] += g;
        double* gw = gW2 + static_cast<size_t>(r) * hidden_;
        const double* w = W2 + static_cast<size_t>(r) * hidden_;
        for (int k = 0; k < hidden_; ++k) {
            gw[k] += g * c.a1[k];
            da1[k] += g * w[k];
        }
    }
    const double* W1 = params_.data() + oW1_;
    if (dx != nullptr)
        for (int k = 0; k < in_; ++k) dx[k] = 0.0;
    for (int r = 0; r < hidden_; ++r) {
        const double g = da1[r] * (1.0 - c.a1[r] * c.a1[r]);
        gb1[r] += g;
        double* gw = gW1 + static_cast<size_t>(r) * in_;
        const double* w = W1 + static_cast<size_t>(r) * in_;
        for (int k = 0; k < in_; ++k) {
            gw[k] += g * c.x[k];
            if (dx != nullptr) dx[k] += g * w[k];
        }
    }
}

void Mlp::zero_grads() { std::fill(grads_.begin(), grads_.end(), 0.0); }

} // namespace afc
