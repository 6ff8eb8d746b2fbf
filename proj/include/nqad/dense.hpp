#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nqad {

/// Row-major dense matrix of doubles.
struct Mat {
    uint32_t rows = 0, cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(uint32_t r, uint32_t c) : rows(r), cols(c), v(size_t(r) * c, 0.0) {}

    double* row(uint32_t r) { return v.data() + size_t(r) * cols; }
    const double* row(uint32_t r) const { return v.data() + size_t(r) * cols; }
    double& at(uint32_t r, uint32_t c) { return v[size_t(r) * cols + c]; }
    double at(uint32_t r, uint32_t c) const { return v[size_t(r) * cols + c]; }
    size_t size() const { return v.size(); }
    void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

/// y = x W^T + b with x: B x in, W: out x in, b: out.
inline void linear_forward(const Mat& x, const Mat& w, const std::vector<double>& b, Mat& y) {
    y.rows = x.rows;
    y.cols = w.rows;
    y.v.assign(size_t(y.rows) * y.cols, 0.0);
    for (uint32_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row(r);
        double* yr = y.row(r);
        for (uint32_t o = 0; o < w.rows; ++o) {
            const double* wr = w.row(o);
            double acc = b[o];
            for (uint32_t i = 0; i < w.cols; ++i) acc += xr[i] * wr[i];
            yr[o] = acc;
        }
    }
}

/// dx = dy W.
inline void linear_backward_input(const Mat& dy, const Mat& w, Mat& dx) {
    dx.rows = dy.rows;
    dx.cols = w.cols;
    dx.v.assign(size_t(dx.rows) * dx.cols, 0.0);
    for (uint32_t r = 0; r < dy.rows; ++r) {
        const double* dyr = dy.row(r);
        double* dxr = dx.row(r);
        for (uint32_t o = 0; o < w.rows; ++o) {
            const double g = dyr[o];
            if (g == 0.0) continue;
            const double* wr = w.row(o);
            for (uint32_t i = 0; i < w.cols; ++i) dxr[i] += g * wr[i];
        }
    }
}

/// dW += dy^T x, db += column sums of dy.
inline void linear_backward_params(const Mat& dy, const Mat& x, Mat& dw, std::vector<double>& db) {
    for (uint32_t r = 0; r < dy.rows; ++r) {
        const double* dyr = dy.row(r);
        const double* xr = x.row(r);
        for (uint32_t o = 0; o < dy.cols; ++o) {
            const double g = dyr[o];
            db[o] += g;
            if (g == 0.0) continue;
            double* dwr = dw.row(o);
            for (uint32_t i = 0; i < x.cols; ++i) dwr[i] += g * xr[i];
        }
    }
}

}  // namespace nqad
