#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nms/metrics.hpp"

using namespace nms;

namespace {

Trajectory make_traj(const std::vector<double>& times,
                     const std::vector<std::vector<double>>& rows) {
    Trajectory t;
    t.times = times;
    const int n = int(rows.front().size());
    t.states = Mat<double>(int(rows.size()), n);
    for (size_t i = 0; i < rows.size(); ++i)
        for (int j = 0; j < n; ++j) t.states(int(i), j) = rows[i][size_t(j)];
    return t;
}

}  // namespace

TEST_CASE("traj_mse and traj_mae worked examples") {
    auto a = make_traj({0.0, 1.0}, {{1.0, 2.0}, {3.0, 4.0}});
    auto b = make_traj({0.0, 1.0}, {{1.0, 0.0}, {0.0, 4.0}});
    std::vector<uint8_t> all{1, 1};
    // Squared errors: 0, 4, 9, 0 -> mean 13/4.
    CHECK(traj_mse(a, b, all) == doctest::Approx(13.0 / 4.0));
    // Absolute errors: 0, 2, 3, 0 -> mean 5/4.
    CHECK(traj_mae(a, b, all) == doctest::Approx(5.0 / 4.0));

    // Identical trajectories score zero; metrics are symmetric.
    CHECK(traj_mse(a, a, all) == 0.0);
    CHECK(traj_mse(a, b, all) == traj_mse(b, a, all));
    CHECK(traj_mae(a, b, all) == traj_mae(b, a, all));

    // Mask restricts to the first coordinate: errors 0, 9 -> mean 4.5.
    std::vector<uint8_t> first{1, 0};
    CHECK(traj_mse(a, b, first) == doctest::Approx(4.5));

    auto c = make_traj({0.0, 2.0}, {{1.0, 2.0}, {3.0, 4.0}});
    CHECK_THROWS_AS(traj_mse(a, c, all), ConfigError);
    std::vector<uint8_t> none{0, 0};
    CHECK_THROWS_AS(traj_mse(a, b, none), ConfigError);
}

TEST_CASE("param_count closed forms at (4, 2)") {
    CHECK(param_count(Architecture::nms, 4, 2) == 19);
    CHECK(param_count(Architecture::gnode, 4, 2) == 21);
    CHECK(param_count(Architecture::gfinn, 4, 2) == 30);
}

TEST_CASE("param_count ordering at moderate dimension") {
    // nms is always the smallest; the cubic gnode count exceeds gfinn once
    // the C(n,3) term dominates, i.e. for r below roughly (n-2)/3.
    for (int n = 6; n <= 60; n += 6)
        for (int r = 2; r <= n / 2; ++r) {
            CHECK(param_count(Architecture::nms, n, r) <
                  param_count(Architecture::gfinn, n, r));
            CHECK(param_count(Architecture::nms, n, r) <
                  param_count(Architecture::gnode, n, r));
            if (3 * r < n - 2)
                CHECK(param_count(Architecture::gfinn, n, r) <
                      param_count(Architecture::gnode, n, r));
        }
}

TEST_CASE("architecture_from_string") {
    CHECK(architecture_from_string("nms") == Architecture::nms);
    CHECK(architecture_from_string("gnode") == Architecture::gnode);
    CHECK(architecture_from_string("gfinn") == Architecture::gfinn);
    CHECK_THROWS_AS(architecture_from_string("mlp"), ConfigError);
}

TEST_CASE("loglog_slope recovers exact power laws") {
    std::vector<int> ns{10, 20, 30, 50};
    std::vector<long> quad, cubic;
    for (int n : ns) {
        quad.push_back(long(n) * n);
        cubic.push_back(long(n) * n * n);
    }
    CHECK(loglog_slope(ns, quad) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(loglog_slope(ns, cubic) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("asymptotic slopes of the architecture counts") {
    std::vector<int> ns{10, 20, 30, 50};
    // r = 1: with larger fixed r, lower-order terms (2rn etc.) drag the
    // finite-size nms slope visibly below 2 on this small n-grid.
    auto slope = [&](Architecture arch) {
        std::vector<long> counts;
        for (int n : ns) counts.push_back(param_count(arch, n, 1));
        return loglog_slope(ns, counts);
    };
    CHECK(std::abs(slope(Architecture::nms) - 2.0) < 0.15);
    CHECK(std::abs(slope(Architecture::gfinn) - 2.0) < 0.15);
    CHECK(std::abs(slope(Architecture::gnode) - 3.0) < 0.15);
}

TEST_CASE("scaling_table shape and monotone counts") {
    std::vector<int> ns{4, 8};
    auto rows = scaling_table(ns, 2, 3, 1);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].n == 4);
    CHECK(rows[0].nms == 19);
    CHECK(rows[1].nms > rows[0].nms);
    CHECK(rows[1].gnode > rows[0].gnode);
    CHECK(rows[0].rhs_wall_us > 0.0);
}

TEST_CASE("conservation_report on a constant trajectory") {
    auto traj = make_traj({0.0, 1.0, 2.0}, {{1.0, 2.0}, {1.0, 2.0}, {1.0, 2.0}});
    auto energy = [](std::span<const double> x) { return x[0] + x[1]; };
    auto entropy = [](std::span<const double> x) { return x[0] * x[1]; };
    auto grad_s = [](std::span<const double> x) {
        return std::vector<double>{x[1], x[0]};
    };
    auto rhs = [](std::span<const double> x) {
        return std::vector<double>(x.size(), 0.0);
    };
    auto rep = conservation_report(energy, entropy, grad_s, rhs, traj);
    CHECK(rep.energy_drift == 0.0);
    CHECK(rep.entropy_violation == 0.0);
    REQUIRE(rep.s_dot.size() == 3);
    for (double v : rep.s_dot) CHECK(v == 0.0);
}

TEST_CASE("conservation_report tracks drift and violations") {
    auto traj = make_traj({0.0, 1.0, 2.0}, {{0.0}, {0.5}, {0.2}});
    auto energy = [](std::span<const double> x) { return x[0]; };
    auto entropy = [](std::span<const double> x) { return x[0]; };
    auto grad_s = [](std::span<const double>) { return std::vector<double>{1.0}; };
    auto rhs = [](std::span<const double> x) { return std::vector<double>{-x[0]}; };
    auto rep = conservation_report(energy, entropy, grad_s, rhs, traj);
    CHECK(rep.energy_drift == doctest::Approx(0.5));
    CHECK(rep.entropy_violation == doctest::Approx(-0.3));
    CHECK(rep.s_dot[1] == doctest::Approx(-0.5));
}

TEST_CASE("error_growth_probe: zero noise gives zero error, growth is monotone") {
    ModelConfig mc;
    mc.n = 3;
    mc.r = 1;
    MetriplecticModel model = model_init(mc, 12);
    std::vector<double> ic{0.5, -0.2, 0.1};
    std::vector<double> eps{0.0, 1e-3, 1e-2};
    SolverConfig solver;
    auto rows = error_growth_probe(model, ic, eps, 1.0, 3, solver, 7);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].l2_error == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(!rows[0].failed);
    CHECK(rows[1].l2_error > 0.0);
    CHECK(rows[2].l2_error > rows[1].l2_error);
}
