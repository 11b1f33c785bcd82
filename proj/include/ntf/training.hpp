#pragma once

// Optimization loop: squared transient loss, Adam with exponential learning
// rate decay, batching over scan entries and the two-stage schedule.

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ntf/neural_field.hpp"
#include "ntf/render.hpp"
#include "ntf/sampling.hpp"
#include "ntf/scene.hpp"

namespace ntf {

struct TrainConfig {
  int epochs_stage_one = 5;
  int epochs_stage_two = 5;
  int batch_size = 4;
  double lr_start = 1e-3;
  double lr_end = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-7;
  int n_c = 32;  // coarse grid side, n_c x n_c nodes
  int n_f = 0;   // fine MH samples per bin; 0 disables hierarchical sampling
  int burn_in = -1;  // -1 means 10 * n_c
  bool occlusion_aware = false;
  int n_march = 16;
  bool nonzero_bins_only = false;
  double spot_epsilon = 0.05;
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
  int effective_burn_in() const { return burn_in < 0 ? 10 * n_c : burn_in; }
};

struct LossResult {
  double total = 0.0;
  std::vector<double> per_entry;
};

// sum (tau_m - tau)^2 with per-entry partial sums.
LossResult transient_loss(const TransientImage& predicted,
                          const TransientImage& measured);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;
  std::uint64_t skipped = 0;  // updates rejected for non-finite gradients

  explicit AdamState(Eigen::Index n = 0)
      : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

// Bias-corrected Adam. A non-finite gradient leaves params and moments
// untouched, bumps `skipped` and returns false.
bool adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state, double lr, const TrainConfig& cfg);

double lr_schedule(std::size_t step, std::size_t total_steps,
                   const TrainConfig& cfg);

struct StageReport {
  int stage = 1;
  std::vector<double> epoch_loss;  // mean per-step loss
  std::vector<std::size_t> entries;  // entry multiset the stage trained on
  std::size_t steps = 0;
  std::uint64_t skipped_updates = 0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<StageReport> stages;
  // Per-entry loss of the field after each stage, rendered with the coarse
  // grid quadrature over every bin.
  std::vector<std::vector<double>> entry_loss;
  SpotLossMap spot_map;  // built from the stage-one entry losses
  std::uint64_t seed = 0;
  double seconds = 0.0;
  std::uint64_t clamp_count = 0;
};

using ProgressFn = std::function<void(const std::string&)>;

// Renderer settings used by training: coarse grid quadrature, the
// configured occlusion model and the data's physics constants.
RenderConfig training_render_config(const TrainConfig& cfg,
                                    const PhysicsConstants& constants);

// Trains on `entries` (indices into measured.scan) for the given number of
// epochs, shuffling the list every epoch. Deterministic in cfg.seed and
// independent of the thread count.
StageReport train_stage(NeuralField& field, const TransientImage& measured,
                        const std::vector<std::size_t>& entries, int epochs,
                        int stage, const TrainConfig& cfg,
                        const ProgressFn& progress = {});

enum class StageSelection { kOne, kTwo, kBoth };
StageSelection parse_stage_selection(const std::string& name);

// Runs the selected stages. Stage two resamples entries in proportion to
// the coarse per-entry losses of the field it starts from, so it can resume
// from a stage-one checkpoint.
TrainReport train_stages(NeuralField& field, const TransientImage& measured,
                         const TrainConfig& cfg, StageSelection stages,
                         const ProgressFn& progress = {});

// Stage one over every entry, then stage two over entries resampled in
// proportion to the stage-one losses, warm-started from stage one.
TrainReport train_two_stage(NeuralField& field, const TransientImage& measured,
                            const TrainConfig& cfg,
                            const ProgressFn& progress = {});

// Accumulates loss gradient for one (entry, bin) and returns its loss.
// `seed` drives the MH chain when cfg.n_f > 0.
double bin_loss_and_grad(const NeuralField& field,
                         const TransientImage& measured, std::size_t entry,
                         int bin, const TrainConfig& cfg, std::uint64_t seed,
                         Eigen::VectorXd& grad);

}  // namespace ntf
