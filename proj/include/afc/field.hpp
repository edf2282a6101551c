#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace afc {

/// Dense 2D scalar array, row-major with i (x index) fastest.
class ScalarField {
public:
    ScalarField() : nx_(0), ny_(0) {}
    ScalarField(int nx, int ny, double init = 0.0)
        : nx_(nx), ny_(ny), data_(static_cast<size_t>(nx) * ny, init) {}

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    size_t size() const { return data_.size(); }

    double& operator()(int i, int j) {
        assert(i >= 0 && i < nx_ && j >= 0 && j < ny_);
        return data_[static_cast<size_t>(j) * nx_ + i];
    }
    double operator()(int i, int j) const {
        assert(i >= 0 && i < nx_ && j >= 0 && j < ny_);
        return data_[static_cast<size_t>(j) * nx_ + i];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    void fill(double v) { data_.assign(data_.size(), v); }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const {
        for (double v : data_) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool same_shape(const ScalarField& o) const {
        return nx_ == o.nx_ && ny_ == o.ny_;
    }

private:
    int nx_, ny_;
    std::vector<double> data_;
};

} // namespace afc
