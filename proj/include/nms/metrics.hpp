#pragma once

// Trajectory error metrics, thermodynamic diagnostics, learnable-function
// counting across architectures, and the parameter-noise error-growth
// probe.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nms/brackets.hpp"
#include "nms/odeint.hpp"

namespace nms {

// Mean over timesteps and masked components of squared (mse) or absolute
// (mae) error.  Throws on mismatched grids.
double traj_mse(const Trajectory& a, const Trajectory& b, std::span<const uint8_t> mask);
double traj_mae(const Trajectory& a, const Trajectory& b, std::span<const uint8_t> mask);

// Count of learnable scalar functions for each architecture.
enum class Architecture { nms, gnode, gfinn };
Architecture architecture_from_string(const std::string& name);
long param_count(Architecture arch, int n, int r);

// Least-squares slope of log(count) against log(n).
double loglog_slope(std::span<const int> ns, std::span<const long> counts);

struct ScalingRow {
    int n = 0;
    long nms = 0, gnode = 0, gfinn = 0;
    double rhs_wall_us = 0.0;  // median single-evaluation wall time
};
std::vector<ScalingRow> scaling_table(std::span<const int> n_list, int r, int trials,
                                      uint64_t seed = 0);

struct ConservationReport {
    double energy_drift = 0.0;     // max_t |E(x_t) - E(x_0)|
    double entropy_violation = 0.0;  // min discrete increment S(x_{t+1}) - S(x_t)
    std::vector<double> s_dot;     // grad S(x_t) . rhs(x_t) at each snapshot
};
using ScalarField = std::function<double(std::span<const double>)>;
using VectorField = std::function<std::vector<double>(std::span<const double>)>;
ConservationReport conservation_report(const ScalarField& energy, const ScalarField& entropy,
                                       const VectorField& grad_S, const VectorField& rhs,
                                       const Trajectory& traj);

struct ErrorGrowthRow {
    double eps = 0.0;
    double l2_error = 0.0;  // ||x - x_tilde||_{L2[0,T]} averaged over seeds
    bool failed = false;
};
// Perturb all parameters with Gaussian noise of scale eps, integrate both
// models from the shared IC over [0, T], and report the averaged L2-in-time
// state error per eps.
std::vector<ErrorGrowthRow> error_growth_probe(const MetriplecticModel& model,
                                               std::span<const double> ic,
                                               std::span<const double> eps_list, double horizon,
                                               int n_seeds, const SolverConfig& solver,
                                               uint64_t seed = 0);

}  // namespace nms
