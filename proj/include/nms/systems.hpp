#pragma once

// Closed-form benchmark systems with exact metriplectic data.  Gradients
// of the closed-form E, S are always computed on the tape, and the right
// hand side is derived as L grad(E) + M grad(S), so self-consistency holds
// by construction.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nms/errors.hpp"
#include "nms/linalg.hpp"
#include "nms/tape.hpp"

namespace nms {

struct SystemSpec {
    std::string name;
    int n = 0;
    std::vector<uint8_t> observable;  // 1 = observed coordinate
    std::vector<double> default_ic;

    std::function<double(std::span<const double>)> energy;
    std::function<double(std::span<const double>)> entropy;
    std::function<std::vector<double>(std::span<const double>)> grad_E;
    std::function<std::vector<double>(std::span<const double>)> grad_S;
    std::function<std::vector<double>(std::span<const double>)> rhs;
    std::function<Mat<double>(std::span<const double>)> exact_L;
    std::function<Mat<double>(std::span<const double>)> exact_M;
    std::function<void(std::span<const double>)> check_domain;  // throws DomainError
};

// Two ideal gas containers separated by a movable wall.
struct TgcConstants {
    double n_kb = 1.0;
    double alpha = 0.5;
    double c_hat = 102.25;
    double half_length = 1.0;  // container spans (0, 2*half_length)
    double mass = 2.0 / 3.0;
    bool literal_ic = false;   // entropy 103.2874 IC instead of the rescaled one
};
SystemSpec tgc_spec(const TgcConstants& c = {});

// Thermoelastic double pendulum (10-dimensional).
struct TdpConstants {
    double kappa = 1.0;
    double m1 = 1.0;
    double m2 = 1.0;
};
SystemSpec tdp_spec(const TdpConstants& c = {});
std::vector<std::vector<double>> tdp_sample_ics(int count, uint64_t seed);

// Damped nonlinear oscillator, position dimension d in {1, 2}.
struct DnoConstants {
    double mass = 1.0;
    double stiffness = 1.0;
    double damping = 0.5;
    double bath_temperature = 1.0;
};
SystemSpec dno_spec(int d, const DnoConstants& c = {});

// Damped thermoelastic rod discretized at N points (dimension 2N+1).
struct RodConstants {
    double mass = 1.0;
    double damping = 0.1;
    double spring = 1.0;
};
SystemSpec rod_spec(int N, const RodConstants& c = {});

// Lookup by CLI name: tgc, tdp, dno1, dno2, rod.
SystemSpec make_system(const std::string& name, int rod_points = 50);

}  // namespace nms
