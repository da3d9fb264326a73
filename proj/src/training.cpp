#include "nms/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>

namespace nms {
namespace {

// Plain-double view of a trainable model; parameters are promoted once.
struct DoubleRhs {
    const TrainableModel& model;
    Tape tape;
    std::vector<Var> pvars;
    size_t mark = 0;

    explicit DoubleRhs(const TrainableModel& m) : model(m) {
        pvars = tape.leaves(m.params());
        mark = tape.mark();
    }
    std::vector<double> operator()(double, std::span<const double> x) {
        tape.rewind(mark);
        std::vector<Var> xv = tape.leaves(x);
        std::vector<Var> out = model.rhs_recorded(tape, pvars, xv);
        std::vector<double> r(out.size());
        for (size_t i = 0; i < r.size(); ++i) r[i] = out[i].value();
        return r;
    }
};

Var abs_var(Var v) { return v.value() >= 0.0 ? v + 0.0 : -v; }

// Mean loss over observed coordinates of one snapshot pair.
Var snapshot_loss(Tape& tape, std::span<const Var> pred, std::span<const double> target,
                  std::span<const uint8_t> mask, LossMetric metric) {
    Var acc = tape.constant(0.0);
    int count = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        Var d = pred[i] - target[i];
        acc = acc + (metric == LossMetric::mse ? d * d : abs_var(d));
        ++count;
    }
    return count > 0 ? acc / double(count) : acc;
}

double snapshot_loss_plain(std::span<const double> pred, std::span<const double> target,
                           std::span<const uint8_t> mask, LossMetric metric) {
    double acc = 0.0;
    int count = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        const double d = pred[i] - target[i];
        acc += metric == LossMetric::mse ? d * d : std::abs(d);
        ++count;
    }
    return count > 0 ? acc / double(count) : 0.0;
}

// Rows usable as rollout anchors: max_offset further rows exist in the
// same trajectory and stay inside the training segment.
std::vector<size_t> anchor_rows(const Dataset& data, const TrainConfig& cfg) {
    std::vector<size_t> rows;
    for (size_t k = 0; k < data.n_traj(); ++k) {
        const size_t b = data.traj_begin(k), e = data.traj_end(k);
        if (cfg.mode == TrainMode::origin) {
            if (b + size_t(cfg.max_offset) < e && data.in_segment(k, b, Segment::train) &&
                data.in_segment(k, b + size_t(cfg.max_offset), Segment::train))
                rows.push_back(b);
            continue;
        }
        for (size_t r = b; r + size_t(cfg.max_offset) < e; ++r) {
            if (data.in_segment(k, r, Segment::train) &&
                data.in_segment(k, r + size_t(cfg.max_offset), Segment::train))
                rows.push_back(r);
        }
    }
    if (rows.empty()) throw ConfigError("train: no usable rollout anchors in the training segment");
    return rows;
}

// Validation: a single rollout across the validation segment (capped at
// 101 snapshots), falling back to the tail of the training segment when
// the dataset has no validation rows.
double validation_loss(const TrainableModel& model, const Dataset& data,
                       const TrainConfig& cfg) {
    std::vector<size_t> rows;
    for (size_t k = 0; k < data.n_traj() && rows.empty(); ++k)
        for (size_t r = data.traj_begin(k); r < data.traj_end(k); ++r)
            if (data.in_segment(k, r, Segment::val)) rows.push_back(r);
    if (rows.size() < 2) {
        rows.clear();
        for (size_t r = data.traj_begin(0); r < data.traj_end(0); ++r)
            if (data.in_segment(0, r, Segment::train)) rows.push_back(r);
    }
    if (rows.size() < 2) return 0.0;
    // rows within one trajectory are contiguous; subsample to cap cost.
    const size_t stride = std::max<size_t>(1, (rows.size() - 1) / 100);
    std::vector<size_t> keep;
    for (size_t i = 0; i < rows.size(); i += stride) keep.push_back(rows[i]);
    if (keep.back() != rows.back()) keep.push_back(rows.back());

    std::vector<double> t_eval;
    for (size_t r : keep) t_eval.push_back(data.times[r]);
    DoubleRhs f(model);
    Trajectory traj;
    try {
        traj = integrate_recorded<double>(f, data.row(keep.front()), t_eval, cfg.solver);
    } catch (const Error& e) {
        std::fprintf(stderr, "warning: validation rollout failed: %s\n", e.what());
        return std::numeric_limits<double>::infinity();
    }
    double acc = 0.0;
    for (size_t j = 1; j < keep.size(); ++j) {
        std::span<const double> pred(traj.states.a.data() + j * size_t(data.n),
                                     size_t(data.n));
        acc += snapshot_loss_plain(pred, data.row(keep[j]), data.observable, cfg.loss);
    }
    return acc / double(keep.size() - 1);
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

std::vector<double> TrainableModel::rhs(std::span<const double> x) const {
    DoubleRhs f(*this);
    return f(0.0, x);
}

NodeTrainable::NodeTrainable(std::vector<int> widths, uint64_t seed)
    : widths_(std::move(widths)) {
    if (widths_.size() < 2 || widths_.front() != widths_.back())
        throw ConfigError("NodeTrainable: widths must map state to state");
    params_ = mlp_init(widths_, seed).params;
}

NodeTrainable::NodeTrainable(std::vector<int> widths, std::vector<double> params)
    : widths_(std::move(widths)), params_(std::move(params)) {
    if (widths_.size() < 2 || widths_.front() != widths_.back())
        throw ConfigError("NodeTrainable: widths must map state to state");
    if (params_.size() != mlp_param_count(widths_))
        throw ConfigError("NodeTrainable: parameter vector length mismatch");
}

std::vector<Var> NodeTrainable::rhs_recorded(Tape&, std::span<const Var> p,
                                             std::span<const Var> x) const {
    return mlp_forward(widths_, p, x);
}

void adamax_step(AdamaxState& state, std::vector<double>& params,
                 std::span<const double> grad, const TrainConfig& cfg) {
    if (grad.size() != params.size()) throw ConfigError("adamax_step: shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.u.assign(params.size(), 0.0);
    }
    for (double g : grad)
        if (!std::isfinite(g)) {
            ++state.skipped;
            std::fprintf(stderr, "warning: non-finite gradient, update skipped\n");
            return;
        }
    ++state.t;
    const double bias = 1.0 - std::pow(cfg.beta1, double(state.t));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.u[i] = std::max(cfg.beta2 * state.u[i], std::abs(grad[i]));
        params[i] -= cfg.lr / bias * state.m[i] / (state.u[i] + cfg.eps);
    }
}

Checkpoint make_checkpoint(const TrainableModel& model, const TrainConfig& cfg) {
    Checkpoint ckpt;
    ckpt.kind = model.kind();
    if (auto* nms = dynamic_cast<const NmsTrainable*>(&model)) ckpt.cfg = nms->model().cfg;
    if (auto* node = dynamic_cast<const NodeTrainable*>(&model))
        ckpt.node_widths = node->widths();
    ckpt.params = model.params();
    ckpt.seed = cfg.seed;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d|%ld|%d|%d|%d|%.17g|%llu", int(cfg.mode), cfg.n_steps,
                  cfg.batch, cfg.rollout, cfg.max_offset, cfg.lr,
                  (unsigned long long)cfg.seed);
    std::snprintf(buf + std::strlen(buf), sizeof buf - std::strlen(buf), "|%s",
                  model.kind().c_str());
    char hex[32];
    std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)fnv1a(buf));
    ckpt.config_hash = hex;
    return ckpt;
}

std::unique_ptr<TrainableModel> model_from_checkpoint(const Checkpoint& ckpt) {
    if (ckpt.kind == "nms") {
        MetriplecticModel model;
        model.cfg = ckpt.cfg;
        model.cfg.validate();
        if (ckpt.params.size() != model.total_params())
            throw ConfigError("checkpoint: parameter count does not match config");
        model.params = ckpt.params;
        return std::make_unique<NmsTrainable>(std::move(model));
    }
    if (ckpt.kind == "node")
        return std::make_unique<NodeTrainable>(ckpt.node_widths, ckpt.params);
    throw ConfigError("checkpoint: unknown model kind '" + ckpt.kind + "'");
}

TrainResult train(TrainableModel& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    cfg.solver.validate();
    if (model.dim() != data.n) throw ConfigError("train: model/dataset dimension mismatch");

    const std::vector<size_t> anchors = anchor_rows(data, cfg);
    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<size_t> pick_anchor(0, anchors.size() - 1);

    TrainResult result;
    AdamaxState opt;
    Tape tape;
    std::vector<double> adj;
    std::vector<int> offset_pool(size_t(cfg.max_offset));
    std::iota(offset_pool.begin(), offset_pool.end(), 1);

    double best = validation_loss(model, data, cfg);
    std::vector<double> best_params = model.params();
    long best_step = 0;
    result.val_curve.emplace_back(0, best);

    for (long step = 1; step <= cfg.n_steps; ++step) {
        tape.clear();
        std::vector<Var> pvars = tape.leaves(model.params());
        std::span<const Var> pv(pvars);
        Var total = tape.constant(0.0);
        int ok = 0;

        for (int b = 0; b < cfg.batch; ++b) {
            const size_t anchor = anchors[pick_anchor(rng)];
            // l distinct offsets from {1..max_offset}, ascending.
            for (int i = 0; i < cfg.rollout; ++i) {
                std::uniform_int_distribution<int> d(i, cfg.max_offset - 1);
                std::swap(offset_pool[size_t(i)], offset_pool[size_t(d(rng))]);
            }
            std::vector<int> offs(offset_pool.begin(), offset_pool.begin() + cfg.rollout);
            std::sort(offs.begin(), offs.end());

            std::vector<double> t_eval{data.times[anchor]};
            for (int o : offs) t_eval.push_back(data.times[anchor + size_t(o)]);

            const size_t start = tape.mark();
            try {
                std::vector<Var> x0 = tape.leaves(data.row(anchor));
                auto f = [&](double, std::span<const Var> x) {
                    return model.rhs_recorded(tape, pv, x);
                };
                TrajectoryT<Var> traj = integrate_recorded<Var>(f, x0, t_eval, cfg.solver);
                Var elem = tape.constant(0.0);
                for (int j = 1; j <= cfg.rollout; ++j) {
                    std::vector<Var> pred(size_t(data.n), Var{});
                    for (int i = 0; i < data.n; ++i) pred[size_t(i)] = traj.states(j, i);
                    elem = elem + snapshot_loss(tape, pred,
                                                data.row(anchor + size_t(offs[size_t(j - 1)])),
                                                data.observable, cfg.loss);
                }
                total = total + elem / double(cfg.rollout);
                ++ok;
            } catch (const Error& e) {
                tape.rewind(start);
                std::fprintf(stderr, "warning: step %ld batch element failed: %s\n", step,
                             e.what());
            }
        }
        if (ok == 0) throw Error("train: every batch element failed at step " +
                                 std::to_string(step));
        total = total / double(ok);
        result.loss_curve.push_back(total.value());

        tape.backward(total, adj);
        std::vector<double> grad(pvars.size());
        for (size_t i = 0; i < grad.size(); ++i) grad[i] = adj[size_t(pvars[i].idx)];
        adamax_step(opt, model.params(), grad, cfg);

        if (step % cfg.val_cadence == 0 || step == cfg.n_steps) {
            const double v = validation_loss(model, data, cfg);
            result.val_curve.emplace_back(step, v);
            if (v < best) {
                best = v;
                best_params = model.params();
                best_step = step;
            }
            if (cfg.verbose)
                std::fprintf(stderr, "step %ld  loss %.6g  val %.6g\n", step,
                             total.value(), v);
        }
    }

    result.skipped_steps = opt.skipped;
    result.checkpoint = make_checkpoint(model, cfg);
    result.checkpoint.params = best_params;
    result.checkpoint.step = best_step;
    result.checkpoint.best_val = best;
    return result;
}

}  // namespace nms
