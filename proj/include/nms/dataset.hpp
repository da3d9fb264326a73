#pragma once

// Snapshot datasets: fixed-step trajectories of a ground-truth system plus
// the bookkeeping needed for training (split boundaries, observability
// mask, per-trajectory extents).

#include <cstdint>
#include <span>
#include <vector>

#include "nms/linalg.hpp"
#include "nms/systems.hpp"

namespace nms {

struct SplitSpec {
    enum class Kind { temporal, by_trajectory };
    Kind kind = Kind::temporal;

    // Temporal boundaries (single long trajectory): train on [0, t_train],
    // validate on (t_train, t_val], test on (t_val, t_test].
    double t_train = 20.0;
    double t_val = 30.0;
    double t_test = 100.0;

    // Trajectory-count fractions (many short trajectories).
    double train_frac = 0.8;
    double val_frac = 0.1;

    void validate() const {
        if (kind == Kind::temporal) {
            if (!(0.0 < t_train && t_train < t_val && t_val < t_test))
                throw ConfigError("SplitSpec: need 0 < t_train < t_val < t_test");
        } else {
            if (!(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0 + 1e-12))
                throw ConfigError("SplitSpec: trajectory fractions out of range");
        }
    }
};

enum class Segment { train, val, test };

struct Dataset {
    int n = 0;
    double dt = 0.0;
    std::vector<double> times;       // concatenated over trajectories
    Mat<double> states;              // n_s x n, same order as times
    std::vector<uint8_t> observable; // 1 = observed coordinate
    SplitSpec split;
    std::vector<size_t> traj_starts; // first row of each trajectory
    std::vector<long> truncated_at;  // per trajectory: truncation row or -1
    uint64_t seed = 0;

    size_t rows() const { return times.size(); }
    size_t n_traj() const { return traj_starts.size(); }
    size_t traj_begin(size_t k) const { return traj_starts[k]; }
    size_t traj_end(size_t k) const {
        return k + 1 < traj_starts.size() ? traj_starts[k + 1] : rows();
    }

    // Trajectory index owning a given segment, and the row range of that
    // segment within it.  Temporal splits slice the single trajectory by
    // time; by-trajectory splits hand out whole trajectories.
    bool in_segment(size_t traj, size_t row, Segment seg) const;
    std::span<const double> row(size_t i) const {
        return std::span<const double>(states.a.data() + i * size_t(n), size_t(n));
    }
};

// Integrate each IC with fixed-step RK4 and record every snapshot.  A
// DomainError mid-trajectory truncates that trajectory with a warning on
// stderr and records the truncation row.
Dataset generate_dataset(const SystemSpec& spec, const std::vector<std::vector<double>>& ics,
                         double dt, long steps, const SplitSpec& split, uint64_t seed = 0);

// Overwrite every unobserved column with the straight line s/T where s is
// time since the trajectory start and T its training horizon.  Observed
// columns are untouched; empty mask is a no-op.
void init_unobserved_linear(Dataset& data);

}  // namespace nms
