#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nms/training.hpp"

using namespace nms;

namespace {

// Single linear decay trajectory x' = -x on [0, 1], temporal split.
Dataset linear_decay_data() {
    SplitSpec split;
    split.t_train = 0.6;
    split.t_val = 0.8;
    split.t_test = 1.0;
    Dataset data;
    data.n = 1;
    data.dt = 0.02;
    data.split = split;
    data.observable = {1};
    data.traj_starts = {0};
    data.truncated_at = {-1};
    const int rows = 51;
    data.states = Mat<double>(rows, 1);
    for (int i = 0; i < rows; ++i) {
        const double t = 0.02 * i;
        data.times.push_back(t);
        data.states(i, 0) = std::exp(-t);
    }
    return data;
}

}  // namespace

TEST_CASE("adamax: zero gradient leaves parameters unchanged") {
    TrainConfig cfg;
    AdamaxState st;
    std::vector<double> params{1.0, -2.0, 0.5};
    std::vector<double> grad(3, 0.0);
    adamax_step(st, params, grad, cfg);
    CHECK(params == std::vector<double>{1.0, -2.0, 0.5});
    CHECK(st.t == 1);
    CHECK(st.skipped == 0);
}

TEST_CASE("adamax: first step moves by lr * sign(g) up to the eps guard") {
    TrainConfig cfg;
    cfg.lr = 0.1;
    AdamaxState st;
    std::vector<double> params{0.0, 0.0};
    std::vector<double> grad{3.0, -0.25};
    adamax_step(st, params, grad, cfg);
    // m = (1-b1) g, u = |g|, update = lr * m / ((1-b1^t) u) = lr * sign(g).
    CHECK(params[0] == doctest::Approx(-0.1).epsilon(1e-6));
    CHECK(params[1] == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("adamax: constant gradient keeps the unit-step property") {
    TrainConfig cfg;
    cfg.lr = 0.05;
    AdamaxState st;
    std::vector<double> params{1.0};
    std::vector<double> grad{2.0};
    for (int i = 0; i < 10; ++i) adamax_step(st, params, grad, cfg);
    // With constant g: m/(1-b1^t) = g and u = |g|, so each step is -lr.
    CHECK(params[0] == doctest::Approx(1.0 - 10 * 0.05).epsilon(1e-6));
}

TEST_CASE("adamax: non-finite gradient is skipped") {
    TrainConfig cfg;
    AdamaxState st;
    std::vector<double> params{1.0};
    std::vector<double> grad{std::nan("")};
    adamax_step(st, params, grad, cfg);
    CHECK(params[0] == 1.0);
    CHECK(st.skipped == 1);
    CHECK(st.t == 0);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.rollout = 20;
    cfg.max_offset = 10;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.n_steps = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("zero training steps returns the initialized model with a score") {
    Dataset data = linear_decay_data();
    NodeTrainable model({1, 5, 1}, 11);
    const std::vector<double> before = model.params();
    TrainConfig cfg;
    cfg.n_steps = 0;
    TrainResult res = train(model, data, cfg);
    CHECK(model.params() == before);
    CHECK(res.checkpoint.params == before);
    CHECK(res.checkpoint.step == 0);
    CHECK(std::isfinite(res.checkpoint.best_val));
    CHECK(res.loss_curve.empty());
    CHECK(res.val_curve.size() == 1);
}

TEST_CASE("node baseline learns 1-D linear decay") {
    Dataset data = linear_decay_data();
    NodeTrainable model({1, 8, 1}, 3);
    TrainConfig cfg;
    cfg.n_steps = 2000;
    cfg.batch = 8;
    cfg.rollout = 3;
    cfg.max_offset = 6;
    cfg.lr = 0.02;
    cfg.seed = 5;
    cfg.solver.method = Method::rk4;
    cfg.solver.dt = 0.02;
    TrainResult res = train(model, data, cfg);

    CHECK(res.loss_curve.size() == 2000);
    CHECK(res.checkpoint.best_val < 1e-4);

    // Best-checkpoint rollout over the full window tracks e^{-t}.
    auto best = model_from_checkpoint(res.checkpoint);
    auto f = [&](double, std::span<const double> x) { return best->rhs(x); };
    SolverConfig sc;
    std::vector<double> ic{1.0};
    auto traj = dopri5_solve<double>(f, ic, data.times, sc);
    double mse = 0.0;
    for (size_t i = 0; i < data.times.size(); ++i) {
        const double d = traj.states(int(i), 0) - std::exp(-data.times[i]);
        mse += d * d;
    }
    mse /= double(data.times.size());
    CHECK(mse < 1e-4);
}

TEST_CASE("training is deterministic for a fixed seed") {
    Dataset data = linear_decay_data();
    TrainConfig cfg;
    cfg.n_steps = 50;
    cfg.batch = 4;
    cfg.rollout = 2;
    cfg.max_offset = 5;
    cfg.seed = 9;
    cfg.solver.method = Method::rk4;
    cfg.solver.dt = 0.02;

    NodeTrainable a({1, 6, 1}, 7), b({1, 6, 1}, 7);
    TrainResult ra = train(a, data, cfg);
    TrainResult rb = train(b, data, cfg);
    CHECK(a.params() == b.params());
    CHECK(ra.loss_curve == rb.loss_curve);
    CHECK(ra.checkpoint.best_val == rb.checkpoint.best_val);
}

TEST_CASE("origin mode anchors rollouts at trajectory starts") {
    // Two short trajectories, by-trajectory split.
    SplitSpec split;
    split.kind = SplitSpec::Kind::by_trajectory;
    split.train_frac = 0.5;
    split.val_frac = 0.5;
    Dataset data;
    data.n = 1;
    data.dt = 0.05;
    data.split = split;
    data.observable = {1};
    data.traj_starts = {0, 11};
    data.truncated_at = {-1, -1};
    data.states = Mat<double>(22, 1);
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i <= 10; ++i) {
            const double t = 0.05 * i;
            data.times.push_back(t);
            data.states(11 * k + i, 0) = (k ? 0.5 : 1.0) * std::exp(-t);
        }

    NodeTrainable model({1, 6, 1}, 2);
    TrainConfig cfg;
    cfg.mode = TrainMode::origin;
    cfg.n_steps = 400;
    cfg.batch = 1;
    cfg.rollout = 4;
    cfg.max_offset = 10;
    cfg.seed = 1;
    cfg.solver.method = Method::rk4;
    cfg.solver.dt = 0.05;
    TrainResult res = train(model, data, cfg);
    CHECK(res.checkpoint.best_val < 1e-2);
}

TEST_CASE("nms model trains on damped-oscillator data (smoke)") {
    // Tiny budget: just confirm the loss decreases and nothing throws.
    ModelConfig mc;
    mc.n = 3;
    mc.r = 1;
    mc.a_hidden = {6};
    mc.b_hidden = {6};
    mc.k_hidden = {6};
    mc.e_hidden = {6};
    mc.s_hidden = {6};
    NmsTrainable model(model_init(mc, 4));

    SystemSpec spec = dno_spec(1);
    SplitSpec split;
    split.t_train = 0.6;
    split.t_val = 0.8;
    split.t_test = 1.0;
    Dataset data = generate_dataset(spec, {{2.0, 0.0, 0.0}}, 0.01, 100, split);

    TrainConfig cfg;
    cfg.n_steps = 60;
    cfg.batch = 4;
    cfg.rollout = 2;
    cfg.max_offset = 4;
    cfg.seed = 2;
    cfg.solver.method = Method::rk4;
    cfg.solver.dt = 0.01;
    TrainResult res = train(model, data, cfg);
    CHECK(res.loss_curve.size() == 60);
    double head = 0.0, tail = 0.0;
    for (int i = 0; i < 10; ++i) {
        head += res.loss_curve[size_t(i)];
        tail += res.loss_curve[res.loss_curve.size() - 1 - size_t(i)];
    }
    CHECK(tail < head);
}

TEST_CASE("checkpoint round-trip reconstructs the model") {
    ModelConfig mc;
    mc.n = 4;
    mc.r = 2;
    NmsTrainable model(model_init(mc, 8));
    TrainConfig cfg;
    Checkpoint ckpt = make_checkpoint(model, cfg);
    CHECK(ckpt.kind == "nms");
    CHECK(!ckpt.config_hash.empty());
    auto back = model_from_checkpoint(ckpt);
    CHECK(back->kind() == "nms");
    CHECK(back->params() == model.params());
    std::vector<double> x{0.1, -0.2, 0.3, 0.4};
    CHECK(model.rhs(x) == back->rhs(x));

    NodeTrainable node({3, 7, 3}, 5);
    Checkpoint nc = make_checkpoint(node, cfg);
    auto nb = model_from_checkpoint(nc);
    CHECK(nb->kind() == "node");
    CHECK(nb->params() == node.params());
    CHECK(static_cast<NodeTrainable&>(*nb).widths() == node.widths());
}
