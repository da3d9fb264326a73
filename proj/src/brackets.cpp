#include "nms/brackets.hpp"

#include <cmath>

namespace nms {

MetriplecticModel model_init(const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    MetriplecticModel model;
    model.cfg = cfg;
    model.params.reserve(1024);
    uint64_t tag = 0;
    for (char net : {'a', 'b', 'k', 'e', 's'}) {
        Mlp mlp = mlp_init(cfg.widths_for(net), seed * 5 + tag++);
        model.params.insert(model.params.end(), mlp.params.begin(), mlp.params.end());
    }
    return model;
}

RecordedRhs metriplectic_rhs_recorded(Tape& tape, const ModelConfig& cfg,
                                      std::span<const Var> params,
                                      std::span<const Var> x) {
    if (int(x.size()) != cfg.n) throw ConfigError("metriplectic_rhs: state length mismatch");
    MetriplecticModel layout;  // offsets only
    layout.cfg = cfg;
    if (params.size() != layout.total_params())
        throw ConfigError("metriplectic_rhs: parameter vector length mismatch");

    double scale = 1.0;
    for (Var xi : x) scale = std::max(scale, std::abs(xi.value()));

    RecordedRhs out;
    out.energy = mlp_forward(cfg.widths_for('e'), layout.net_params(params, 'e'), x)[0];
    out.entropy = mlp_forward(cfg.widths_for('s'), layout.net_params(params, 's'), x)[0];
    out.grad_E = tape.grad(out.energy, x);
    out.grad_S = tape.grad(out.entropy, x);

    std::vector<Var> a_out =
        mlp_forward(cfg.widths_for('a'), layout.net_params(params, 'a'), x);
    Mat<Var> a_tri = pack_strict_lower(std::span<const Var>(a_out), cfg.n);
    Mat<Var> a(cfg.n, cfg.n);
    for (int i = 0; i < cfg.n; ++i)
        for (int j = 0; j < cfg.n; ++j)
            a(i, j) = i == j ? tape.constant(0.0) : a_tri(i, j) - a_tri(j, i);

    Mat<Var> l = assemble_L(a, std::span<const Var>(out.grad_S), scale);
    out.xdot = matvec(l, std::span<const Var>(out.grad_E));

    if (!cfg.hamiltonian_mode) {
        std::vector<Var> b_out =
            mlp_forward(cfg.widths_for('b'), layout.net_params(params, 'b'), x);
        Mat<Var> b = pack_rect(std::span<const Var>(b_out), cfg.n, cfg.r);
        std::vector<Var> k_out =
            mlp_forward(cfg.widths_for('k'), layout.net_params(params, 'k'), x);
        Mat<Var> d = model_D(cfg, std::span<const Var>(k_out));
        Mat<Var> m = assemble_M(b, d, std::span<const Var>(out.grad_E), scale);
        std::vector<Var> irr = matvec(m, std::span<const Var>(out.grad_S));
        for (int i = 0; i < cfg.n; ++i) out.xdot[i] = out.xdot[i] + irr[i];
    }

    for (int i = 0; i < cfg.n; ++i)
        if (!std::isfinite(out.xdot[i].value()))
            throw TapeError("non-finite vector-field component " + std::to_string(i));
    return out;
}

ModelEvaluator::ModelEvaluator(const MetriplecticModel& model) : model_(model) {
    pvars_ = tape_.leaves(model_.params);
    mark_ = tape_.mark();
}

RecordedRhs ModelEvaluator::record(std::span<const double> x) {
    tape_.rewind(mark_);
    std::vector<Var> xv = tape_.leaves(x);
    return metriplectic_rhs_recorded(tape_, model_.cfg, pvars_, xv);
}

std::vector<double> ModelEvaluator::rhs(std::span<const double> x) {
    RecordedRhs rec = record(x);
    std::vector<double> out(rec.xdot.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = rec.xdot[i].value();
    return out;
}

double ModelEvaluator::energy(std::span<const double> x) {
    tape_.rewind(mark_);
    std::vector<Var> xv = tape_.leaves(x);
    MetriplecticModel& m = model_;
    return mlp_forward(m.cfg.widths_for('e'),
                       m.net_params(std::span<const Var>(pvars_), 'e'),
                       std::span<const Var>(xv))[0]
        .value();
}

double ModelEvaluator::entropy(std::span<const double> x) {
    tape_.rewind(mark_);
    std::vector<Var> xv = tape_.leaves(x);
    return mlp_forward(model_.cfg.widths_for('s'),
                       model_.net_params(std::span<const Var>(pvars_), 's'),
                       std::span<const Var>(xv))[0]
        .value();
}

std::vector<double> ModelEvaluator::grad_energy(std::span<const double> x) {
    RecordedRhs rec = record(x);
    std::vector<double> out(rec.grad_E.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = rec.grad_E[i].value();
    return out;
}

std::vector<double> ModelEvaluator::grad_entropy(std::span<const double> x) {
    RecordedRhs rec = record(x);
    std::vector<double> out(rec.grad_S.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = rec.grad_S[i].value();
    return out;
}

Mat<double> ModelEvaluator::operator_L(std::span<const double> x) {
    tape_.rewind(mark_);
    const ModelConfig& cfg = model_.cfg;
    std::vector<Var> xv = tape_.leaves(x);
    std::span<const Var> pv(pvars_);
    std::span<const Var> xs(xv);
    double scale = 1.0;
    for (double v : x) scale = std::max(scale, std::abs(v));

    Var s_out = mlp_forward(cfg.widths_for('s'), model_.net_params(pv, 's'), xs)[0];
    std::vector<Var> g_s = tape_.grad(s_out, xs);
    std::vector<Var> a_out = mlp_forward(cfg.widths_for('a'), model_.net_params(pv, 'a'), xs);
    Mat<Var> a_tri = pack_strict_lower(std::span<const Var>(a_out), cfg.n);
    Mat<Var> a(cfg.n, cfg.n);
    for (int i = 0; i < cfg.n; ++i)
        for (int j = 0; j < cfg.n; ++j)
            a(i, j) = i == j ? tape_.constant(0.0) : a_tri(i, j) - a_tri(j, i);
    Mat<Var> l = assemble_L(a, std::span<const Var>(g_s), scale);
    Mat<double> out(cfg.n, cfg.n);
    for (int i = 0; i < cfg.n; ++i)
        for (int j = 0; j < cfg.n; ++j) out(i, j) = l(i, j).value();
    return out;
}

Mat<double> ModelEvaluator::operator_M(std::span<const double> x) {
    tape_.rewind(mark_);
    const ModelConfig& cfg = model_.cfg;
    if (cfg.hamiltonian_mode) return Mat<double>(cfg.n, cfg.n, 0.0);
    std::vector<Var> xv = tape_.leaves(x);
    std::span<const Var> pv(pvars_);
    std::span<const Var> xs(xv);
    double scale = 1.0;
    for (double v : x) scale = std::max(scale, std::abs(v));

    Var e_out = mlp_forward(cfg.widths_for('e'), model_.net_params(pv, 'e'), xs)[0];
    std::vector<Var> g_e = tape_.grad(e_out, xs);
    std::vector<Var> b_out = mlp_forward(cfg.widths_for('b'), model_.net_params(pv, 'b'), xs);
    Mat<Var> b = pack_rect(std::span<const Var>(b_out), cfg.n, cfg.r);
    std::vector<Var> k_out = mlp_forward(cfg.widths_for('k'), model_.net_params(pv, 'k'), xs);
    Mat<Var> d = model_D(cfg, std::span<const Var>(k_out));
    Mat<Var> m = assemble_M(b, d, std::span<const Var>(g_e), scale);
    Mat<double> out(cfg.n, cfg.n);
    for (int i = 0; i < cfg.n; ++i)
        for (int j = 0; j < cfg.n; ++j) out(i, j) = m(i, j).value();
    return out;
}

double jacobi_residual(const MetriplecticModel& model, std::span<const double> x,
                       double h) {
    const int n = model.cfg.n;
    if (n > 12) throw ConfigError("jacobi_residual: n > 12 not supported (O(n^4) cost)");
    if (h < 1e-6 || h > 1e-3) throw ConfigError("jacobi_residual: h outside [1e-6, 1e-3]");
    ModelEvaluator eval(model);
    Mat<double> l0 = eval.operator_L(x);

    // dL[l](i,j) = d L_ij / d x_l by central differences.
    std::vector<Mat<double>> dl(static_cast<size_t>(n));
    std::vector<double> xp(x.begin(), x.end());
    for (int l = 0; l < n; ++l) {
        xp[l] = x[l] + h;
        Mat<double> plus = eval.operator_L(xp);
        xp[l] = x[l] - h;
        Mat<double> minus = eval.operator_L(xp);
        xp[l] = x[l];
        dl[size_t(l)] = Mat<double>(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                dl[size_t(l)](i, j) = (plus(i, j) - minus(i, j)) / (2.0 * h);
    }

    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                double acc = 0.0;
                for (int l = 0; l < n; ++l)
                    acc += l0(i, l) * dl[size_t(l)](j, k) + l0(j, l) * dl[size_t(l)](k, i) +
                           l0(k, l) * dl[size_t(l)](i, j);
                worst = std::max(worst, std::abs(acc));
            }
    return worst;
}

}  // namespace nms
