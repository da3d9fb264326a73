#include "nms/metrics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace nms {
namespace {

double masked_mean(const Trajectory& a, const Trajectory& b, std::span<const uint8_t> mask,
                   bool squared) {
    if (a.times.size() != b.times.size() || a.states.cols != b.states.cols)
        throw ConfigError("trajectory metric: grid mismatch");
    for (size_t i = 0; i < a.times.size(); ++i)
        if (std::abs(a.times[i] - b.times[i]) > 1e-12 * std::max(1.0, std::abs(a.times[i])))
            throw ConfigError("trajectory metric: time grids differ");
    double acc = 0.0;
    long count = 0;
    for (int t = 0; t < a.states.rows; ++t)
        for (int j = 0; j < a.states.cols; ++j) {
            if (!mask.empty() && !mask[size_t(j)]) continue;
            const double d = a.states(t, j) - b.states(t, j);
            acc += squared ? d * d : std::abs(d);
            ++count;
        }
    if (count == 0) throw ConfigError("trajectory metric: mask selects no components");
    return count > 0 ? acc / double(count) : 0.0;
}

long binom3(long n) { return n * (n - 1) * (n - 2) / 6; }

}  // namespace

double traj_mse(const Trajectory& a, const Trajectory& b, std::span<const uint8_t> mask) {
    return masked_mean(a, b, mask, true);
}
double traj_mae(const Trajectory& a, const Trajectory& b, std::span<const uint8_t> mask) {
    return masked_mean(a, b, mask, false);
}

Architecture architecture_from_string(const std::string& name) {
    if (name == "nms") return Architecture::nms;
    if (name == "gnode") return Architecture::gnode;
    if (name == "gfinn") return Architecture::gfinn;
    throw ConfigError("unknown architecture '" + name + "'");
}

long param_count(Architecture arch, int n, int r) {
    if (r < 1 || r > n) throw ConfigError("param_count: need 1 <= r <= n");
    const long ln = n, lr = r;
    switch (arch) {
        case Architecture::nms:
            return ((ln + lr) * (ln + lr) - (ln - lr)) / 2 + 2;
        case Architecture::gnode:
            return binom3(ln) + lr * (ln * (ln - 1) / 2) + lr * (lr + 1) / 2 + 2;
        case Architecture::gfinn:
            return lr * ln * (ln - 1) + lr * lr + 2;
    }
    throw ConfigError("param_count: bad architecture");
}

double loglog_slope(std::span<const int> ns, std::span<const long> counts) {
    if (ns.size() != counts.size() || ns.size() < 2)
        throw ConfigError("loglog_slope: need matching lists of length >= 2");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double m = double(ns.size());
    for (size_t i = 0; i < ns.size(); ++i) {
        const double x = std::log(double(ns[i])), y = std::log(double(counts[i]));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

std::vector<ScalingRow> scaling_table(std::span<const int> n_list, int r, int trials,
                                      uint64_t seed) {
    for (size_t i = 1; i < n_list.size(); ++i)
        if (n_list[i] <= n_list[i - 1]) throw ConfigError("scaling_table: n_list must be sorted");
    std::vector<ScalingRow> table;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int n : n_list) {
        ScalingRow row;
        row.n = n;
        row.nms = param_count(Architecture::nms, n, r);
        row.gnode = param_count(Architecture::gnode, n, r);
        row.gfinn = param_count(Architecture::gfinn, n, r);

        ModelConfig cfg;
        cfg.n = n;
        cfg.r = r;
        MetriplecticModel model = model_init(cfg, seed + uint64_t(n));
        ModelEvaluator eval(model);
        std::vector<double> x(static_cast<size_t>(n), 0.0);
        std::vector<double> samples;
        samples.reserve(size_t(trials));
        for (int t = 0; t < trials; ++t) {
            for (double& v : x) v = dist(rng);
            const auto t0 = std::chrono::steady_clock::now();
            volatile double sink = eval.rhs(x)[0];
            (void)sink;
            const auto t1 = std::chrono::steady_clock::now();
            samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count());
        }
        std::sort(samples.begin(), samples.end());
        row.rhs_wall_us = samples[samples.size() / 2];
        table.push_back(row);
    }
    return table;
}

ConservationReport conservation_report(const ScalarField& energy, const ScalarField& entropy,
                                       const VectorField& grad_S, const VectorField& rhs,
                                       const Trajectory& traj) {
    ConservationReport rep;
    const int nt = traj.states.rows, n = traj.states.cols;
    if (nt == 0) return rep;
    auto row = [&](int t) {
        return std::span<const double>(traj.states.a.data() + size_t(t) * size_t(n),
                                       size_t(n));
    };
    const double e0 = energy(row(0));
    double s_prev = entropy(row(0));
    rep.s_dot.reserve(size_t(nt));
    for (int t = 0; t < nt; ++t) {
        rep.energy_drift = std::max(rep.energy_drift, std::abs(energy(row(t)) - e0));
        const std::vector<double> gs = grad_S(row(t));
        const std::vector<double> v = rhs(row(t));
        double sd = 0.0;
        for (int j = 0; j < n; ++j) sd += gs[size_t(j)] * v[size_t(j)];
        rep.s_dot.push_back(sd);
        if (t > 0) {
            const double s = entropy(row(t));
            rep.entropy_violation = std::min(rep.entropy_violation, s - s_prev);
            s_prev = s;
        }
    }
    return rep;
}

std::vector<ErrorGrowthRow> error_growth_probe(const MetriplecticModel& model,
                                               std::span<const double> ic,
                                               std::span<const double> eps_list, double horizon,
                                               int n_seeds, const SolverConfig& solver,
                                               uint64_t seed) {
    for (size_t i = 0; i < eps_list.size(); ++i)
        if (eps_list[i] < 0.0 || (i > 0 && eps_list[i] <= eps_list[i - 1]))
            throw ConfigError("error_growth_probe: eps_list must be ascending and nonnegative");
    const int grid = 101;
    std::vector<double> t_eval(grid);
    for (int i = 0; i < grid; ++i) t_eval[size_t(i)] = horizon * double(i) / double(grid - 1);

    ModelEvaluator base_eval(model);
    auto base_f = [&](double, std::span<const double> x) { return base_eval.rhs(x); };
    const Trajectory base = dopri5_solve<double>(base_f, ic, t_eval, solver);

    std::vector<ErrorGrowthRow> out;
    for (double eps : eps_list) {
        ErrorGrowthRow row;
        row.eps = eps;
        if (eps == 0.0) {
            out.push_back(row);
            continue;
        }
        double acc = 0.0;
        int ok = 0;
        for (int s = 0; s < n_seeds; ++s) {
            MetriplecticModel noisy = model;
            std::mt19937_64 rng(seed * 1000003ull + uint64_t(s));
            std::normal_distribution<double> gauss(0.0, eps);
            for (double& p : noisy.params) p += gauss(rng);
            try {
                ModelEvaluator eval(noisy);
                auto f = [&](double, std::span<const double> x) { return eval.rhs(x); };
                const Trajectory traj = dopri5_solve<double>(f, ic, t_eval, solver);
                // Trapezoid rule for the squared L2-in-time error.
                double integral = 0.0;
                for (int t = 0; t < grid; ++t) {
                    double d2 = 0.0;
                    for (int j = 0; j < base.states.cols; ++j) {
                        const double d = traj.states(t, j) - base.states(t, j);
                        d2 += d * d;
                    }
                    const double w = (t == 0 || t == grid - 1) ? 0.5 : 1.0;
                    integral += w * d2;
                }
                integral *= horizon / double(grid - 1);
                acc += std::sqrt(integral);
                ++ok;
            } catch (const Error&) {
            }
        }
        if (ok == 0)
            row.failed = true;
        else
            row.l2_error = acc / double(ok);
        out.push_back(row);
    }
    return out;
}

}  // namespace nms
