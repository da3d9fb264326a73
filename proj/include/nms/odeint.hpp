#pragma once

// Time integration: classical fixed-step RK4 and adaptive Dormand-Prince
// 5(4) with dense output.  Both are templated over the scalar type, so an
// instantiation with Var records every accepted stage on the tape
// (discretize-then-optimize); the step controller always works on plain
// values, keeping accept/reject decisions out of the recorded graph.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nms/errors.hpp"
#include "nms/linalg.hpp"
#include "nms/tape.hpp"

namespace nms {

enum class Method { rk4, dopri5 };

struct SolverConfig {
    Method method = Method::dopri5;
    double dt = 1e-3;       // rk4 fixed step
    double rtol = 1e-7;
    double atol = 1e-9;
    long max_steps = 1'000'000;

    void validate() const {
        if (dt <= 0 || rtol <= 0 || atol <= 0)
            throw ConfigError("SolverConfig: dt, rtol, atol must be positive");
    }
};

template <class T>
struct TrajectoryT {
    std::vector<double> times;
    Mat<T> states;  // n_t x n
};
using Trajectory = TrajectoryT<double>;

template <class T, class F>
std::vector<T> rk4_step(F&& f, double t, std::span<const T> x, double dt) {
    const size_t n = x.size();
    std::vector<T> k1 = f(t, x);
    std::vector<T> tmp(n, x[0]);
    for (size_t i = 0; i < n; ++i) tmp[i] = x[i] + k1[i] * (dt / 2.0);
    std::vector<T> k2 = f(t + dt / 2.0, std::span<const T>(tmp));
    for (size_t i = 0; i < n; ++i) tmp[i] = x[i] + k2[i] * (dt / 2.0);
    std::vector<T> k3 = f(t + dt / 2.0, std::span<const T>(tmp));
    for (size_t i = 0; i < n; ++i) tmp[i] = x[i] + k3[i] * dt;
    std::vector<T> k4 = f(t + dt, std::span<const T>(tmp));
    std::vector<T> out(n, x[0]);
    for (size_t i = 0; i < n; ++i)
        out[i] = x[i] + (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (dt / 6.0);
    for (size_t i = 0; i < n; ++i)
        if (!std::isfinite(value_of(out[i])))
            throw TapeError("rk4_step: non-finite state component " + std::to_string(i));
    return out;
}

template <class T, class F>
TrajectoryT<T> rk4_solve(F&& f, std::span<const T> x0, double t0, double dt, long steps) {
    TrajectoryT<T> traj;
    const int n = int(x0.size());
    traj.states = Mat<T>(int(steps) + 1, n, x0[0]);
    traj.times.resize(size_t(steps) + 1);
    std::vector<T> x(x0.begin(), x0.end());
    for (int i = 0; i < n; ++i) traj.states(0, i) = x[size_t(i)];
    traj.times[0] = t0;
    for (long s = 0; s < steps; ++s) {
        const double t = t0 + double(s) * dt;
        x = rk4_step<T>(f, t, std::span<const T>(x), dt);
        traj.times[size_t(s) + 1] = t0 + double(s + 1) * dt;
        for (int i = 0; i < n; ++i) traj.states(int(s) + 1, i) = x[size_t(i)];
    }
    return traj;
}

namespace dopri {
// Dormand-Prince 5(4) tableau and dense-output weights.
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                        a53 = 64448.0 / 6561, a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
inline constexpr double d1 = -12715105075.0 / 11282082432.0,
                        d3 = 87487479700.0 / 32700410799.0,
                        d4 = -10690763975.0 / 1880347072.0,
                        d5 = 701980252875.0 / 199316789632.0,
                        d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
inline constexpr double safety = 0.9, fac_min = 0.2, fac_max = 10.0, beta = 0.04;
inline constexpr double alpha = 0.2 - beta * 0.75;
}  // namespace dopri

// Solve to each time in t_eval (sorted, t_eval[0] is the initial time),
// with dense output at the requested times.
template <class T, class F>
TrajectoryT<T> dopri5_solve(F&& f, std::span<const T> x0, std::span<const double> t_eval,
                            const SolverConfig& cfg) {
    using namespace dopri;
    cfg.validate();
    if (t_eval.empty()) throw ConfigError("dopri5_solve: empty t_eval");
    for (size_t i = 1; i < t_eval.size(); ++i)
        if (!(t_eval[i] > t_eval[i - 1]))
            throw ConfigError("dopri5_solve: t_eval must be strictly increasing");

    const int n = int(x0.size());
    const size_t nt = t_eval.size();
    TrajectoryT<T> traj;
    traj.times.assign(t_eval.begin(), t_eval.end());
    traj.states = Mat<T>(int(nt), n, x0[0]);
    for (int i = 0; i < n; ++i) traj.states(0, i) = x0[size_t(i)];
    if (nt == 1) return traj;

    double t = t_eval[0];
    const double t_end = t_eval[nt - 1];
    std::vector<T> x(x0.begin(), x0.end());
    std::vector<T> k1 = f(t, std::span<const T>(x));

    // Initial step: crude norm-based guess, clipped to the span.
    double h;
    {
        double nx = 0, nf = 0;
        for (int i = 0; i < n; ++i) {
            nx = std::max(nx, std::abs(value_of(x[size_t(i)])));
            nf = std::max(nf, std::abs(value_of(k1[size_t(i)])));
        }
        h = nf > 0 ? 0.01 * std::max(nx, 1.0) / nf : 1e-3;
        h = std::min(h, (t_end - t) / 10.0);
        h = std::max(h, 1e-10);
    }

    size_t next_out = 1;
    double err_old = 1e-4;
    std::vector<T> stage(size_t(n), x[0]);
    std::vector<T> k2, k3, k4, k5, k6, k7;
    std::vector<T> x_new(size_t(n), x[0]);

    for (long step = 0;; ++step) {
        if (step >= cfg.max_steps)
            throw StiffnessError("dopri5: exceeded max_steps = " +
                                 std::to_string(cfg.max_steps));
        if (h < 1e-14 * std::max(std::abs(t), 1.0))
            throw StiffnessError("dopri5: step size underflow at t = " + std::to_string(t));
        if (t + h > t_end) h = t_end - t;

        auto combine = [&](std::initializer_list<std::pair<double, const std::vector<T>*>>
                               terms,
                           double tfrac) {
            for (int i = 0; i < n; ++i) {
                T acc = x[size_t(i)];
                for (const auto& [c, kv] : terms) acc = acc + (*kv)[size_t(i)] * (h * c);
                stage[size_t(i)] = acc;
            }
            return f(t + tfrac * h, std::span<const T>(stage));
        };
        k2 = combine({{a21, &k1}}, c2);
        k3 = combine({{a31, &k1}, {a32, &k2}}, c3);
        k4 = combine({{a41, &k1}, {a42, &k2}, {a43, &k3}}, c4);
        k5 = combine({{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}, c5);
        k6 = combine({{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}, 1.0);
        for (int i = 0; i < n; ++i)
            x_new[size_t(i)] = x[size_t(i)] + (k1[size_t(i)] * a71 + k3[size_t(i)] * a73 +
                                               k4[size_t(i)] * a74 + k5[size_t(i)] * a75 +
                                               k6[size_t(i)] * a76) *
                                                  h;
        k7 = f(t + h, std::span<const T>(x_new));

        // Detached error norm: RMS of component error over tolerance.
        double err = 0.0;
        for (int i = 0; i < n; ++i) {
            const double ei = h * (e1 * value_of(k1[size_t(i)]) + e3 * value_of(k3[size_t(i)]) +
                                   e4 * value_of(k4[size_t(i)]) + e5 * value_of(k5[size_t(i)]) +
                                   e6 * value_of(k6[size_t(i)]) + e7 * value_of(k7[size_t(i)]));
            const double sc = cfg.atol + cfg.rtol * std::max(std::abs(value_of(x[size_t(i)])),
                                                             std::abs(value_of(x_new[size_t(i)])));
            err += (ei / sc) * (ei / sc);
        }
        err = std::sqrt(err / double(n));

        if (err <= 1.0) {
            // Dense output for every requested time inside (t, t+h].
            while (next_out < nt && t_eval[next_out] <= t + h + 1e-14 * std::abs(t + h)) {
                const double theta = std::clamp((t_eval[next_out] - t) / h, 0.0, 1.0);
                for (int i = 0; i < n; ++i) {
                    const size_t ii = size_t(i);
                    T dy = x_new[ii] - x[ii];
                    T r3 = k1[ii] * h - dy;
                    T r4 = dy - k7[ii] * h - r3;
                    T r5 = (k1[ii] * d1 + k3[ii] * d3 + k4[ii] * d4 + k5[ii] * d5 +
                            k6[ii] * d6 + k7[ii] * d7) *
                           h;
                    T val = x[ii] + (dy + (1.0 - theta) * (r3 + theta * (r4 + (1.0 - theta) * r5))) *
                                        theta;
                    traj.states(int(next_out), i) = val;
                }
                ++next_out;
            }
            t += h;
            x = x_new;
            k1 = k7;  // FSAL
            if (next_out >= nt || t >= t_end) break;

            double fac = safety * std::pow(err > 0 ? err : 1e-16, -alpha) *
                         std::pow(err_old, beta);
            fac = std::clamp(fac, fac_min, fac_max);
            h *= fac;
            err_old = std::max(err, 1e-4);
        } else {
            const double fac = std::clamp(safety * std::pow(err, -alpha), fac_min, 1.0);
            h *= fac;
        }
    }
    return traj;
}

// Fixed-step RK4 sampled at each requested time; each interval is covered
// by substeps of size close to dt.
template <class T, class F>
TrajectoryT<T> rk4_solve_at(F&& f, std::span<const T> x0, std::span<const double> t_eval,
                            double dt) {
    if (t_eval.empty()) throw ConfigError("rk4_solve_at: empty t_eval");
    if (dt <= 0.0) throw ConfigError("rk4_solve_at: dt must be positive");
    TrajectoryT<T> traj;
    traj.times.assign(t_eval.begin(), t_eval.end());
    traj.states = Mat<T>(int(t_eval.size()), int(x0.size()), x0[0]);
    std::vector<T> x(x0.begin(), x0.end());
    for (size_t i = 0; i < x0.size(); ++i) traj.states(0, int(i)) = x[i];
    for (size_t s = 1; s < t_eval.size(); ++s) {
        double t = t_eval[s - 1];
        const double span = t_eval[s] - t;
        if (!(span > 0.0)) throw ConfigError("rk4_solve_at: t_eval must be increasing");
        const long sub = std::max(1L, std::lround(span / dt));
        const double h = span / double(sub);
        for (long k = 0; k < sub; ++k) {
            x = rk4_step<T>(f, t, std::span<const T>(x), h);
            t += h;
        }
        for (size_t i = 0; i < x.size(); ++i) traj.states(int(s), int(i)) = x[i];
    }
    return traj;
}

template <class T, class F>
TrajectoryT<T> integrate_recorded(F&& f, std::span<const T> x0, std::span<const double> t_eval,
                                  const SolverConfig& cfg) {
    if (cfg.method == Method::dopri5) return dopri5_solve<T>(f, x0, t_eval, cfg);
    return rk4_solve_at<T>(f, x0, t_eval, cfg.dt);
}

template <class F>
Trajectory solve(F&& f, std::span<const double> x0, std::span<const double> t_eval,
                 const SolverConfig& cfg) {
    return integrate_recorded<double>(f, x0, t_eval, cfg);
}

}  // namespace nms
