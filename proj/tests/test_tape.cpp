#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nms/tape.hpp"

using namespace nms;

namespace {

// Central finite difference of a scalar function of one coordinate.
template <class F>
double fd(F&& f, std::vector<double> x, size_t i, double h = 1e-6) {
    x[i] += h;
    const double up = f(x);
    x[i] -= 2 * h;
    const double dn = f(x);
    return (up - dn) / (2 * h);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1e-9, std::abs(a), std::abs(b)});
}

template <class F>
std::vector<double> tape_grad(F&& f, const std::vector<double>& x) {
    Tape tape;
    std::vector<Var> xv = tape.leaves(x);
    Var y = f(std::span<const Var>(xv));
    std::vector<double> adj;
    tape.backward(y, adj);
    std::vector<double> g;
    for (Var v : xv) g.push_back(adj[size_t(v.idx)]);
    return g;
}

}  // namespace

TEST_CASE("square derivative") {
    auto g = tape_grad([](std::span<const Var> x) { return x[0] * x[0]; }, {3.0});
    CHECK(g[0] == doctest::Approx(6.0).epsilon(1e-14));
}

TEST_CASE("tanh and unused coordinate") {
    auto g = tape_grad([](std::span<const Var> x) { return tanh(x[0]); }, {0.0, 5.0});
    CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(g[1] == 0.0);
}

TEST_CASE("every primitive matches finite differences") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    struct Prim {
        const char* name;
        double (*plain)(double, double);
        Var (*rec)(Var, Var);
        bool needs_positive_b;
        bool needs_positive_a;
    };
    auto probe = [&](auto plain, auto rec, bool pos_a, bool pos_b) {
        for (int trial = 0; trial < 50; ++trial) {
            double a = dist(rng), b = dist(rng);
            if (pos_a) a = std::abs(a) + 0.1;
            if (pos_b) b = std::abs(b) + 0.1;
            std::vector<double> x{a, b};
            auto f = [&](const std::vector<double>& v) { return plain(v[0], v[1]); };
            auto g = tape_grad(
                [&](std::span<const Var> v) { return rec(v[0], v[1]); }, x);
            for (size_t i = 0; i < 2; ++i)
                CHECK(rel_err(g[i], fd(f, x, i)) < 1e-6);
        }
    };
    probe([](double a, double b) { return a + b; }, [](Var a, Var b) { return a + b; },
          false, false);
    probe([](double a, double b) { return a - b; }, [](Var a, Var b) { return a - b; },
          false, false);
    probe([](double a, double b) { return a * b; }, [](Var a, Var b) { return a * b; },
          false, false);
    probe([](double a, double b) { return a / b; }, [](Var a, Var b) { return a / b; },
          false, true);
    probe([](double a, double b) { return std::tanh(a * b); },
          [](Var a, Var b) { return tanh(a * b); }, false, false);
    probe([](double a, double b) { return std::exp(a) + b; },
          [](Var a, Var b) { return exp(a) + b; }, false, false);
    probe([](double a, double b) { return std::log(a) * b; },
          [](Var a, Var b) { return log(a) * b; }, true, false);
    probe([](double a, double b) { return std::sin(a) * std::cos(b); },
          [](Var a, Var b) { return sin(a) * cos(b); }, false, false);
    probe([](double a, double b) { return std::sqrt(a) + b; },
          [](Var a, Var b) { return sqrt(a) + b; }, true, false);
    probe([](double a, double b) { return std::pow(a, 2.5) - b; },
          [](Var a, Var b) { return pow(a, 2.5) - b; }, true, false);
    probe([](double a, double b) { return 3.0 / b + a; },
          [](Var a, Var b) { return 3.0 / b + a; }, false, true);
    probe([](double a, double b) { return 2.0 - a * b; },
          [](Var a, Var b) { return 2.0 - a * b; }, false, false);
}

TEST_CASE("three-deep random compositions match finite differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dist(-1.5, 1.5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> x{dist(rng), dist(rng), dist(rng)};
        const int sel = trial % 4;
        auto plain = [sel](const std::vector<double>& v) {
            switch (sel) {
                case 0: return std::tanh(std::sin(v[0] * v[1]) + std::cos(v[2]));
                case 1: return std::exp(std::tanh(v[0]) * v[1] - v[2] * v[2]);
                case 2: return std::sin(std::exp(v[0] - v[1]) * std::tanh(v[2]));
                default: return std::tanh(v[0] * v[1] * v[2] + std::sin(v[0] + v[2]));
            }
        };
        auto rec = [sel](std::span<const Var> v) {
            switch (sel) {
                case 0: return tanh(sin(v[0] * v[1]) + cos(v[2]));
                case 1: return exp(tanh(v[0]) * v[1] - v[2] * v[2]);
                case 2: return sin(exp(v[0] - v[1]) * tanh(v[2]));
                default: return tanh(v[0] * v[1] * v[2] + sin(v[0] + v[2]));
            }
        };
        auto g = tape_grad(rec, x);
        for (size_t i = 0; i < 3; ++i) CHECK(rel_err(g[i], fd(plain, x, i)) < 1e-6);
    }
}

TEST_CASE("parameter gradient of a quadratic") {
    // loss = 0.5 ||theta||^2 -> grad = theta
    auto g = tape_grad(
        [](std::span<const Var> t) { return 0.5 * (t[0] * t[0] + t[1] * t[1]); },
        {1.0, -2.0});
    CHECK(g[0] == doctest::Approx(1.0));
    CHECK(g[1] == doctest::Approx(-2.0));
}

TEST_CASE("constant loss has zero gradient") {
    Tape tape;
    std::vector<Var> t = tape.leaves(std::vector<double>{0.3, -0.7});
    Var y = tape.constant(4.0) * 2.0;
    std::vector<double> adj;
    tape.backward(y, adj);
    CHECK(adj[size_t(t[0].idx)] == 0.0);
    CHECK(adj[size_t(t[1].idx)] == 0.0);
}

TEST_CASE("recorded grad supports second derivatives") {
    // f(x) = x^3: grad is 3x^2, second derivative 6x. The recorded first
    // gradient must itself be differentiable.
    Tape tape;
    Var x = tape.leaf(1.7);
    Var y = x * x * x;
    std::vector<Var> wrt{x};
    std::vector<Var> g = tape.grad(y, wrt);
    CHECK(g[0].value() == doctest::Approx(3 * 1.7 * 1.7).epsilon(1e-12));
    std::vector<double> adj;
    tape.backward(g[0], adj);
    CHECK(adj[size_t(x.idx)] == doctest::Approx(6 * 1.7).epsilon(1e-12));
}

TEST_CASE("recorded grad second derivatives across primitives") {
    struct Case {
        double x0;
        Var (*f)(Var);
        double (*d2)(double);
    };
    const Case cases[] = {
        {0.6, [](Var x) { return tanh(x); },
         [](double x) { double t = std::tanh(x); return -2 * t * (1 - t * t); }},
        {0.8, [](Var x) { return exp(x); }, [](double x) { return std::exp(x); }},
        {0.9, [](Var x) { return log(x); }, [](double x) { return -1.0 / (x * x); }},
        {0.7, [](Var x) { return sin(x); }, [](double x) { return -std::sin(x); }},
        {0.5, [](Var x) { return cos(x); }, [](double x) { return -std::cos(x); }},
        {1.3, [](Var x) { return sqrt(x); },
         [](double x) { return -0.25 / (x * std::sqrt(x)); }},
        {1.2, [](Var x) { return pow(x, 3.5); },
         [](double x) { return 3.5 * 2.5 * std::pow(x, 1.5); }},
        {0.8, [](Var x) { return 1.0 / x; }, [](double x) { return 2.0 / (x * x * x); }},
    };
    for (const Case& c : cases) {
        Tape tape;
        Var x = tape.leaf(c.x0);
        Var y = c.f(x);
        std::vector<Var> wrt{x};
        std::vector<Var> g = tape.grad(y, wrt);
        std::vector<double> adj;
        tape.backward(g[0], adj);
        CHECK(rel_err(adj[size_t(x.idx)], c.d2(c.x0)) < 1e-10);
    }
}

TEST_CASE("division of Var by Var second derivative") {
    // f(a,b) = a/b: d2f/db2 = 2a/b^3.
    Tape tape;
    Var a = tape.leaf(1.4), b = tape.leaf(0.7);
    Var y = a / b;
    std::vector<Var> wrt{b};
    std::vector<Var> g = tape.grad(y, wrt);
    std::vector<double> adj;
    tape.backward(g[0], adj);
    CHECK(rel_err(adj[size_t(b.idx)], 2 * 1.4 / std::pow(0.7, 3)) < 1e-12);
}

TEST_CASE("error cases") {
    Tape tape;
    Var a = tape.leaf(1.0), z = tape.leaf(0.0);
    CHECK_THROWS_AS(a / z, TapeError);
    CHECK_THROWS_AS(log(z), TapeError);
    CHECK_THROWS_AS(sqrt(-a), TapeError);
    CHECK_THROWS_AS(tape.leaf(std::numeric_limits<double>::quiet_NaN()), TapeError);
    CHECK_THROWS_AS(tape.leaf(std::numeric_limits<double>::infinity()), TapeError);
}

TEST_CASE("exp saturation counter") {
    Tape tape;
    Var a = tape.leaf(100.0);
    CHECK(tape.saturation_count() == 0);
    Var e = exp(a);
    CHECK(e.value() == doctest::Approx(std::exp(50.0)));
    CHECK(tape.saturation_count() == 1);
    exp(-a);
    CHECK(tape.saturation_count() == 2);
}

TEST_CASE("mark and rewind reuse the tape") {
    Tape tape;
    Var p = tape.leaf(2.0);
    const size_t m = tape.mark();
    for (int i = 0; i < 3; ++i) {
        tape.rewind(m);
        Var x = tape.leaf(double(i));
        Var y = p * x;
        std::vector<double> adj;
        tape.backward(y, adj);
        CHECK(adj[size_t(p.idx)] == doctest::Approx(double(i)));
    }
}

TEST_CASE("dot and sum_sq helpers") {
    Tape tape;
    std::vector<Var> a = tape.leaves(std::vector<double>{1.0, 2.0, 3.0});
    std::vector<Var> b = tape.leaves(std::vector<double>{-1.0, 0.5, 2.0});
    CHECK(dot(std::span<const Var>(a), std::span<const Var>(b)).value() ==
          doctest::Approx(6.0));
    CHECK(sum_sq(std::span<const Var>(a)).value() == doctest::Approx(14.0));
}
