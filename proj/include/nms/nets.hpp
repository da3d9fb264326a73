#pragma once

// Multilayer perceptrons (tanh hidden layers, linear output) and the
// shape-packing maps that turn flat network outputs into structured
// matrix fields.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nms/errors.hpp"
#include "nms/linalg.hpp"
#include "nms/tape.hpp"

namespace nms {

inline int binom2(int n) { return n * (n - 1) / 2; }

struct Mlp {
    std::vector<int> widths;       // input, hidden..., output
    std::vector<double> params;    // per layer: weights row-major, then biases
};

inline size_t mlp_param_count(const std::vector<int>& widths) {
    size_t count = 0;
    for (size_t l = 0; l + 1 < widths.size(); ++l)
        count += size_t(widths[l] + 1) * size_t(widths[l + 1]);
    return count;
}

// Glorot-uniform weights, zero biases; deterministic for a fixed seed.
inline Mlp mlp_init(const std::vector<int>& widths, uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("mlp requires at least two widths");
    for (int w : widths)
        if (w <= 0) throw ConfigError("mlp width must be positive");
    Mlp net;
    net.widths = widths;
    net.params.resize(mlp_param_count(widths));
    std::mt19937_64 rng(seed);
    size_t k = 0;
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l], fan_out = widths[l + 1];
        const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (int i = 0; i < fan_in * fan_out; ++i) net.params[k++] = dist(rng);
        k += size_t(fan_out);  // biases stay zero
    }
    return net;
}

// Forward pass on a flat parameter span.  Layout per layer: W (out x in,
// row-major), then b.  Templated so the same code runs recorded or plain.
template <class T>
std::vector<T> mlp_forward(const std::vector<int>& widths, std::span<const T> params,
                           std::span<const T> x) {
    if (int(x.size()) != widths.front())
        throw ConfigError("mlp_forward: input length " + std::to_string(x.size()) +
                          " does not match width " + std::to_string(widths.front()));
    if (params.size() != mlp_param_count(widths))
        throw ConfigError("mlp_forward: parameter vector length mismatch");
    std::vector<T> cur(x.begin(), x.end());
    size_t k = 0;
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        const int in = widths[l], out = widths[l + 1];
        std::vector<T> next;
        next.reserve(out);
        const size_t w0 = k, b0 = k + size_t(in) * size_t(out);
        for (int i = 0; i < out; ++i) {
            T acc = params[w0 + size_t(i) * in] * cur[0];
            for (int j = 1; j < in; ++j)
                acc = acc + params[w0 + size_t(i) * in + j] * cur[j];
            acc = acc + params[b0 + size_t(i)];
            if (l + 2 < widths.size()) {
                using std::tanh;
                acc = tanh(acc);
            }
            next.push_back(acc);
        }
        cur = std::move(next);
        k = b0 + size_t(out);
    }
    return cur;
}

// ---------------------------------------------------------------------------
// Packing maps.  Convention: row-major fill of the stored entries.

template <class T>
Mat<T> pack_strict_lower(std::span<const T> v, int n) {
    if (int(v.size()) != binom2(n))
        throw ConfigError("pack_strict_lower: expected length C(n,2)");
    Mat<T> m = [&] {
        if constexpr (std::is_same_v<T, Var>)
            return Mat<T>(n, n, v.empty() ? Var{} : v[0].tape->constant(0.0));
        else
            return Mat<T>(n, n, T(0));
    }();
    size_t k = 0;
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) m(i, j) = v[k++];
    return m;
}

template <class T>
std::vector<T> unpack_strict_lower(const Mat<T>& m) {
    std::vector<T> v;
    v.reserve(size_t(binom2(m.rows)));
    for (int i = 1; i < m.rows; ++i)
        for (int j = 0; j < i; ++j) v.push_back(m(i, j));
    return v;
}

template <class T>
Mat<T> pack_lower(std::span<const T> v, int r) {
    if (int(v.size()) != binom2(r + 1))
        throw ConfigError("pack_lower: expected length C(r+1,2)");
    Mat<T> m = [&] {
        if constexpr (std::is_same_v<T, Var>)
            return Mat<T>(r, r, v.empty() ? Var{} : v[0].tape->constant(0.0));
        else
            return Mat<T>(r, r, T(0));
    }();
    size_t k = 0;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j <= i; ++j) m(i, j) = v[k++];
    return m;
}

template <class T>
std::vector<T> unpack_lower(const Mat<T>& m) {
    std::vector<T> v;
    v.reserve(size_t(binom2(m.rows + 1)));
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j <= i; ++j) v.push_back(m(i, j));
    return v;
}

template <class T>
Mat<T> pack_rect(std::span<const T> v, int n, int r) {
    if (int(v.size()) != n * r) throw ConfigError("pack_rect: expected length n*r");
    Mat<T> m(n, r);
    size_t k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < r; ++j) m(i, j) = v[k++];
    return m;
}

// ---------------------------------------------------------------------------

enum class KParam { cholesky, full };

// Dimensions and per-network hidden layers of a metriplectic model.
struct ModelConfig {
    int n = 0;       // state dimension
    int r = 1;       // rank of the irreversible operator
    int r_inner = 1; // r' for the full K parameterization (>= r)
    KParam k_param = KParam::cholesky;
    bool hamiltonian_mode = false;  // forces M = 0

    std::vector<int> a_hidden{10};
    std::vector<int> b_hidden{10};
    std::vector<int> k_hidden{10};
    std::vector<int> e_hidden{10};
    std::vector<int> s_hidden{10};

    void validate() const {
        if (n < 2) throw ConfigError("ModelConfig: n must be >= 2");
        if (r < 1 || r > n) throw ConfigError("ModelConfig: need 1 <= r <= n");
        if (k_param == KParam::full && r_inner < r)
            throw ConfigError("ModelConfig: need r' >= r in full K mode");
    }

    int k_output_dim() const {
        return k_param == KParam::cholesky ? binom2(r + 1) : r * r_inner;
    }

    std::vector<int> widths_for(char net) const {
        std::vector<int> w{n};
        const std::vector<int>* hidden = nullptr;
        int out = 1;
        switch (net) {
            case 'a': hidden = &a_hidden; out = binom2(n); break;
            case 'b': hidden = &b_hidden; out = n * r; break;
            case 'k': hidden = &k_hidden; out = k_output_dim(); break;
            case 'e': hidden = &e_hidden; out = 1; break;
            case 's': hidden = &s_hidden; out = 1; break;
            default: throw ConfigError("unknown network tag");
        }
        w.insert(w.end(), hidden->begin(), hidden->end());
        w.push_back(out);
        return w;
    }
};

}  // namespace nms
