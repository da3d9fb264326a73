#pragma once

// Assembly of the metriplectic operator fields L(x), M(x) from network
// outputs and gradient fields, and evaluation of the learned vector field
// xdot = L grad(E) + M grad(S).
//
// The production assembly uses the rank-2-correction (exterior) form; the
// full projector-conjugation form lives in test code as an oracle.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nms/errors.hpp"
#include "nms/linalg.hpp"
#include "nms/nets.hpp"
#include "nms/tape.hpp"

namespace nms {

inline constexpr double kDegeneracyEps = 1e-12;

inline void require_nondegenerate(double grad_norm2, double scale, const char* which) {
    const double thresh = kDegeneracyEps * std::max(1.0, scale);
    if (!(grad_norm2 > thresh * thresh))
        throw NondegeneracyError(std::string("gradient of ") + which +
                                 " is degenerate (norm below threshold)");
}

// P = I - g g^T / |g|^2.
template <class T>
Mat<T> projector_complement(std::span<const T> g, double scale = 1.0) {
    const int n = int(g.size());
    std::vector<double> gv(g.size());
    for (size_t i = 0; i < g.size(); ++i) gv[i] = value_of(g[i]);
    double n2 = 0.0;
    for (double v : gv) n2 += v * v;
    require_nondegenerate(n2, scale, "projector argument");
    T g2 = squared_norm(g);
    Mat<T> p(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            T e = -(g[i] * g[j] / g2);
            p(i, j) = i == j ? e + 1.0 : e;
        }
    return p;
}

// L = A - (A g g^T + g g^T A) / |g|^2 for skew A and g = grad S; with
// w = A g and A skew this is A - (w g^T - g w^T) / |g|^2.
template <class T>
Mat<T> assemble_L(const Mat<T>& a, std::span<const T> g, double scale = 1.0) {
    const int n = a.rows;
    double n2 = 0.0;
    for (size_t i = 0; i < g.size(); ++i) n2 += value_of(g[i]) * value_of(g[i]);
    require_nondegenerate(n2, scale, "S");
    T g2 = squared_norm(g);
    std::vector<T> w = matvec(a, g);  // A g
    Mat<T> l(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            l(i, j) = a(i, j) - (w[i] * g[j] - g[i] * w[j]) / g2;
    return l;
}

// M = V D V^T with V = B projected columnwise off g = grad E.
template <class T>
Mat<T> assemble_M(const Mat<T>& b, const Mat<T>& d, std::span<const T> g,
                  double scale = 1.0) {
    const int n = b.rows, r = b.cols;
    double n2 = 0.0;
    for (size_t i = 0; i < g.size(); ++i) n2 += value_of(g[i]) * value_of(g[i]);
    require_nondegenerate(n2, scale, "E");
    T g2 = squared_norm(g);
    Mat<T> v(n, r);
    for (int s = 0; s < r; ++s) {
        T proj = b(0, s) * g[0];
        for (int i = 1; i < n; ++i) proj = proj + b(i, s) * g[i];
        T coef = proj / g2;
        for (int i = 0; i < n; ++i) v(i, s) = b(i, s) - coef * g[i];
    }
    Mat<T> vd = matmul(v, d);
    return matmul(vd, transpose(v));
}

// ---------------------------------------------------------------------------

// The five learnable fields plus dimensions, as one flat parameter vector
// (layout: A_tri net, B net, K net, E net, S net).
struct MetriplecticModel {
    ModelConfig cfg;
    std::vector<double> params;

    size_t offset(char net) const {
        size_t off = 0;
        for (char tag : {'a', 'b', 'k', 'e', 's'}) {
            if (tag == net) return off;
            off += mlp_param_count(cfg.widths_for(tag));
        }
        throw ConfigError("unknown network tag");
    }
    size_t count(char net) const { return mlp_param_count(cfg.widths_for(net)); }
    size_t total_params() const { return offset('s') + count('s'); }

    template <class T>
    std::span<const T> net_params(std::span<const T> all, char net) const {
        return all.subspan(offset(net), count(net));
    }
};

MetriplecticModel model_init(const ModelConfig& cfg, uint64_t seed);

// D = K K^T under either parameterization of K.
template <class T>
Mat<T> model_D(const ModelConfig& cfg, std::span<const T> k_out) {
    Mat<T> k = cfg.k_param == KParam::cholesky
                   ? pack_lower(k_out, cfg.r)
                   : pack_rect(k_out, cfg.r, cfg.r_inner);
    return matmul(k, transpose(k));
}

struct RecordedRhs {
    std::vector<Var> xdot;
    Var energy;
    Var entropy;
    std::vector<Var> grad_E;
    std::vector<Var> grad_S;
};

// Evaluate the learned vector field with every intermediate on the tape.
RecordedRhs metriplectic_rhs_recorded(Tape& tape, const ModelConfig& cfg,
                                      std::span<const Var> params,
                                      std::span<const Var> x);

// Plain-double evaluation backed by a private tape; parameters are
// promoted once, so repeated calls (solver stages) stay cheap.
class ModelEvaluator {
  public:
    explicit ModelEvaluator(const MetriplecticModel& model);

    int dim() const { return model_.cfg.n; }
    std::vector<double> rhs(std::span<const double> x);
    double energy(std::span<const double> x);
    double entropy(std::span<const double> x);
    std::vector<double> grad_energy(std::span<const double> x);
    std::vector<double> grad_entropy(std::span<const double> x);
    Mat<double> operator_L(std::span<const double> x);
    Mat<double> operator_M(std::span<const double> x);

  private:
    RecordedRhs record(std::span<const double> x);

    MetriplecticModel model_;
    Tape tape_;
    std::vector<Var> pvars_;
    size_t mark_ = 0;
};

// Max cyclic-sum residual of the Jacobi identity, with dL/dx by central
// finite differences.  Diagnostic only; never enforced.
double jacobi_residual(const MetriplecticModel& model, std::span<const double> x,
                       double h = 1e-4);

}  // namespace nms
