#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace iburd {

/// Dense NCHW tensor of doubles.
struct Tensor4 {
    int n = 0;
    int c = 0;
    int h = 0;
    int w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_, double fill = 0.0)
        : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

    std::size_t size() const noexcept { return data.size(); }
    bool empty() const noexcept { return data.empty(); }
    std::size_t plane_size() const noexcept { return static_cast<std::size_t>(h) * w; }

    double& at(int ni, int ci, int y, int x) {
        return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
    }
    double at(int ni, int ci, int y, int x) const {
        return data[((static_cast<std::size_t>(ni) * c + ci) * h + y) * w + x];
    }

    bool same_shape(const Tensor4& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
    std::string shape_string() const;

    bool operator==(const Tensor4&) const = default;
};

}  // namespace iburd
