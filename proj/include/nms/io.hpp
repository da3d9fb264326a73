#pragma once

// On-disk formats: trajectory/dataset CSV and checkpoint JSON.  CSV uses
// 17 significant digits and LF line endings so float64 values round-trip
// losslessly; checkpoint JSON is schema-versioned and stable under a
// load/save round-trip.

#include <string>

#include "nms/dataset.hpp"
#include "nms/odeint.hpp"
#include "nms/training.hpp"

namespace nms {

// Header t,x0,...,x{n-1}; one row per snapshot.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

// Dataset CSV adds a leading traj column and a metadata comment line
// carrying dt, the mask, and the split, so gen/train round-trip.
void write_dataset_csv(const std::string& path, const Dataset& data);
Dataset read_dataset_csv(const std::string& path);

void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

void write_loss_csv(const std::string& path, const TrainResult& result);

std::string format_double(double v);  // shortest 17-significant-digit form

}  // namespace nms
