#pragma once

// Rollout-based training of dynamics models: windowed mini-batch rollouts
// or from-origin rollouts, Adamax updates, validation-based selection, and
// the unstructured neural-ODE baseline.

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "nms/brackets.hpp"
#include "nms/dataset.hpp"
#include "nms/odeint.hpp"

namespace nms {

enum class TrainMode { windowed, origin };
enum class LossMetric { mse, mae };

struct TrainConfig {
    TrainMode mode = TrainMode::windowed;
    long n_steps = 30000;
    int batch = 8;        // snapshots per step
    int rollout = 4;      // offsets per rollout (l)
    int max_offset = 10;  // offsets drawn from {1, ..., max_offset}
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    SolverConfig solver;
    uint64_t seed = 0;
    long val_cadence = 100;
    LossMetric loss = LossMetric::mse;
    bool verbose = false;

    void validate() const {
        if (n_steps < 0) throw ConfigError("TrainConfig: n_steps must be >= 0");
        if (batch < 1 || rollout < 1) throw ConfigError("TrainConfig: batch, rollout >= 1");
        if (rollout > max_offset)
            throw ConfigError("TrainConfig: rollout length exceeds max_offset");
        if (lr <= 0.0) throw ConfigError("TrainConfig: lr must be positive");
        if (val_cadence < 1) throw ConfigError("TrainConfig: val_cadence must be >= 1");
    }
};

struct AdamaxState {
    std::vector<double> m;  // first moment
    std::vector<double> u;  // infinity-norm accumulator
    long t = 0;
    long skipped = 0;
};

// One Adamax update in place; a non-finite gradient skips the update and
// bumps state.skipped.
void adamax_step(AdamaxState& state, std::vector<double>& params,
                 std::span<const double> grad, const TrainConfig& cfg);

// ---------------------------------------------------------------------------

// Anything the training loop can optimize: a flat parameter vector plus a
// vector field recordable on a tape.
class TrainableModel {
  public:
    virtual ~TrainableModel() = default;
    virtual int dim() const = 0;
    virtual std::string kind() const = 0;
    virtual std::vector<double>& params() = 0;
    virtual const std::vector<double>& params() const = 0;
    virtual std::vector<Var> rhs_recorded(Tape& tape, std::span<const Var> params,
                                          std::span<const Var> x) const = 0;
    // Plain-double evaluation (fresh scratch tape under the hood).
    std::vector<double> rhs(std::span<const double> x) const;
};

class NmsTrainable final : public TrainableModel {
  public:
    explicit NmsTrainable(MetriplecticModel model) : model_(std::move(model)) {}
    int dim() const override { return model_.cfg.n; }
    std::string kind() const override { return "nms"; }
    std::vector<double>& params() override { return model_.params; }
    const std::vector<double>& params() const override { return model_.params; }
    std::vector<Var> rhs_recorded(Tape& tape, std::span<const Var> p,
                                  std::span<const Var> x) const override {
        return metriplectic_rhs_recorded(tape, model_.cfg, p, x).xdot;
    }
    const MetriplecticModel& model() const { return model_; }

  private:
    MetriplecticModel model_;
};

// Unstructured baseline: one MLP from state to velocity.
class NodeTrainable final : public TrainableModel {
  public:
    NodeTrainable(std::vector<int> widths, uint64_t seed);
    NodeTrainable(std::vector<int> widths, std::vector<double> params);
    int dim() const override { return widths_.front(); }
    std::string kind() const override { return "node"; }
    std::vector<double>& params() override { return params_; }
    const std::vector<double>& params() const override { return params_; }
    std::vector<Var> rhs_recorded(Tape& tape, std::span<const Var> p,
                                  std::span<const Var> x) const override;
    const std::vector<int>& widths() const { return widths_; }

  private:
    std::vector<int> widths_;
    std::vector<double> params_;
};

// ---------------------------------------------------------------------------

struct Checkpoint {
    std::string kind;             // "nms" or "node"
    ModelConfig cfg;              // nms only
    std::vector<int> node_widths; // node only
    std::vector<double> params;
    uint64_t seed = 0;
    long step = 0;
    double best_val = 0.0;
    std::string config_hash;
};

struct TrainResult {
    Checkpoint checkpoint;
    std::vector<double> loss_curve;                 // one entry per step
    std::vector<std::pair<long, double>> val_curve; // (step, validation loss)
    long skipped_steps = 0;
};

// Optimize model parameters against the dataset's training segment and
// retain the best-validation parameters.  The model is left holding its
// final (not necessarily best) parameters; the checkpoint holds the best.
TrainResult train(TrainableModel& model, const Dataset& data, const TrainConfig& cfg);

Checkpoint make_checkpoint(const TrainableModel& model, const TrainConfig& cfg);
std::unique_ptr<TrainableModel> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace nms
