#pragma once

// Minimal dense matrix/vector helpers templated over the scalar type, so
// the same assembly code runs on plain doubles and on tape variables.

#include <cassert>
#include <cmath>
#include <span>
#include <vector>

#include "nms/tape.hpp"

namespace nms {

template <class T>
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<T> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(size_t(r) * size_t(c)) {}
    Mat(int r, int c, T fill) : rows(r), cols(c), a(size_t(r) * size_t(c), fill) {}

    T& operator()(int i, int j) { return a[size_t(i) * cols + j]; }
    const T& operator()(int i, int j) const { return a[size_t(i) * cols + j]; }
};

template <class T>
Mat<T> zeros_like(Tape* tape, int r, int c) {
    if constexpr (std::is_same_v<T, Var>) {
        Mat<T> m(r, c, tape->constant(0.0));
        return m;
    } else {
        (void)tape;
        return Mat<T>(r, c, T(0));
    }
}

template <class T>
std::vector<T> matvec(const Mat<T>& m, std::span<const T> v) {
    assert(int(v.size()) == m.cols);
    std::vector<T> out;
    out.reserve(m.rows);
    for (int i = 0; i < m.rows; ++i) {
        T acc = m(i, 0) * v[0];
        for (int j = 1; j < m.cols; ++j) acc = acc + m(i, j) * v[j];
        out.push_back(acc);
    }
    return out;
}

template <class T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
    assert(a.cols == b.rows);
    Mat<T> out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            T acc = a(i, 0) * b(0, j);
            for (int k = 1; k < a.cols; ++k) acc = acc + a(i, k) * b(k, j);
            out(i, j) = acc;
        }
    return out;
}

template <class T>
Mat<T> transpose(const Mat<T>& m) {
    Mat<T> out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

template <class T>
T dot_product(std::span<const T> a, std::span<const T> b) {
    assert(a.size() == b.size());
    T acc = a[0] * b[0];
    for (size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * b[i];
    return acc;
}

template <class T>
T squared_norm(std::span<const T> a) {
    return dot_product(a, a);
}

inline double inf_norm(const Mat<double>& m) {
    double mx = 0.0;
    for (double v : m.a) mx = std::max(mx, std::abs(v));
    return mx;
}

inline double norm2(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace nms
