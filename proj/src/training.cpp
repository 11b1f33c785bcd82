#include "ntf/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ntf/error.hpp"
#include "ntf/parallel.hpp"

namespace ntf {

void TrainConfig::validate() const {
  require(epochs_stage_one >= 0 && epochs_stage_two >= 0,
          ErrorCode::kConfig, "epochs must be nonnegative");
  require(batch_size >= 1, ErrorCode::kConfig, "batch_size must be >= 1");
  require(lr_start >= lr_end && lr_end > 0.0, ErrorCode::kConfig,
          "learning rates need lr_start >= lr_end > 0");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 &&
              adam_beta2 < 1.0 && adam_eps > 0.0,
          ErrorCode::kConfig, "invalid Adam hyperparameters");
  require(n_c >= 2, ErrorCode::kConfig, "n_c must be >= 2");
  require(n_f >= 0, ErrorCode::kConfig, "n_f must be >= 0");
  require(!occlusion_aware || n_march >= 2, ErrorCode::kConfig,
          "n_march must be >= 2");
  require(spot_epsilon >= 0.0 && spot_epsilon <= 1.0, ErrorCode::kConfig,
          "spot_epsilon must lie in [0, 1]");
  require(threads >= 1, ErrorCode::kConfig, "threads must be >= 1");
}

LossResult transient_loss(const TransientImage& predicted,
                          const TransientImage& measured) {
  require(predicted.data.rows() == measured.data.rows() &&
              predicted.data.cols() == measured.data.cols(),
          ErrorCode::kShapeMismatch, "transient shapes differ");
  LossResult out;
  out.per_entry.resize(static_cast<std::size_t>(measured.data.rows()));
  for (Eigen::Index e = 0; e < measured.data.rows(); ++e) {
    const double l =
        (predicted.data.row(e) - measured.data.row(e)).squaredNorm();
    out.per_entry[static_cast<std::size_t>(e)] = l;
    out.total += l;
  }
  return out;
}

bool adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state, double lr, const TrainConfig& cfg) {
  require(grads.size() == params.size() && state.m.size() == params.size() &&
              state.v.size() == params.size(),
          ErrorCode::kShapeMismatch, "Adam buffers do not match parameters");
  if (!grads.allFinite()) {
    ++state.skipped;
    return false;
  }
  ++state.step;
  const double b1 = cfg.adam_beta1;
  const double b2 = cfg.adam_beta2;
  state.m = b1 * state.m + (1.0 - b1) * grads;
  state.v = b2 * state.v + (1.0 - b2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  params.array() -= lr * (state.m.array() / c1) /
                    ((state.v.array() / c2).sqrt() + cfg.adam_eps);
  return true;
}

double lr_schedule(std::size_t step, std::size_t total_steps,
                   const TrainConfig& cfg) {
  require(step <= total_steps, ErrorCode::kInvalidArgument,
          "schedule step past the end");
  if (step == 0 || total_steps == 0) return cfg.lr_start;
  if (step == total_steps) return cfg.lr_end;
  const double frac = static_cast<double>(step) / total_steps;
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

RenderConfig training_render_config(const TrainConfig& cfg,
                                    const PhysicsConstants& constants) {
  RenderConfig rc;
  rc.n_theta = cfg.n_c;
  rc.n_phi = cfg.n_c;
  rc.occlusion_aware = cfg.occlusion_aware;
  rc.n_march = cfg.n_march;
  rc.constants = constants;
  rc.threads = cfg.threads;
  return rc;
}

double bin_loss_and_grad(const NeuralField& field,
                         const TransientImage& measured, std::size_t entry,
                         int bin, const TrainConfig& cfg, std::uint64_t seed,
                         Eigen::VectorXd& grad) {
  const ScanEntry& e = measured.scan.entries[entry];
  const double t = measured.bin_center_time(bin);
  const double target = measured.data(static_cast<Eigen::Index>(entry), bin);
  const RenderConfig rc = training_render_config(cfg, measured.constants);
  const Aabb support = field.support();
  BinPlan plan;
  if (!e.collocated()) {
    plan = plan_nonconfocal(support, e, t, rc);
  } else {
    const SampleSet grid = hemisphere_grid(cfg.n_c, cfg.n_c);
    if (cfg.n_f > 0) {
      const AngularPDF pdf =
          coarse_pdf(field, e.detection, t, cfg.n_c, measured.constants);
      if (!pdf.degenerate()) {
        const SampleSet fine =
            mh_sample(pdf, cfg.n_f, cfg.effective_burn_in(), seed);
        plan = plan_importance(support, e.detection, t, rc, grid, fine);
      } else {
        plan = plan_confocal(support, e.detection, t, rc, grid);
      }
    } else {
      plan = plan_confocal(support, e.detection, t, rc, grid);
    }
  }
  plan.scale(measured.path_bin_width());
  double loss = 0.0;
  backprop_plan(
      field, plan,
      [&](double tau) {
        const double d = tau - target;
        loss = d * d;
        return 2.0 * d;
      },
      grad);
  return loss;
}

namespace {

constexpr std::size_t kTasksPerChunk = 4;

struct BinTask {
  std::size_t slot;
  std::size_t entry;
  int bin;
};

LossResult coarse_entry_loss(const NeuralField& field,
                             const TransientImage& measured,
                             const TrainConfig& cfg) {
  const TransientImage predicted =
      render_transient(field, measured.scan, measured.n_bins,
                       measured.bin_width,
                       training_render_config(cfg, measured.constants));
  return transient_loss(predicted, measured);
}

}  // namespace

StageReport train_stage(NeuralField& field, const TransientImage& measured,
                        const std::vector<std::size_t>& entries, int epochs,
                        int stage, const TrainConfig& cfg,
                        const ProgressFn& progress) {
  cfg.validate();
  require(measured.data.rows() == static_cast<Eigen::Index>(measured.scan.size()) &&
              measured.data.cols() == measured.n_bins,
          ErrorCode::kShapeMismatch, "measured transient has inconsistent shape");
  for (std::size_t e : entries) {
    require(e < measured.scan.size(), ErrorCode::kInvalidArgument,
            "training entry index out of range");
  }
  const auto start = std::chrono::steady_clock::now();
  StageReport report;
  report.stage = stage;
  report.entries = entries;
  if (epochs == 0 || entries.empty()) return report;

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = (entries.size() + batch - 1) / batch;
  const std::size_t total_steps = steps_per_epoch * epochs;
  const Eigen::Index n_params = field.params().values().size();
  const Aabb support = field.support();
  AdamState adam(n_params);
  std::vector<std::size_t> order = entries;
  std::size_t global_step = 0;

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed({cfg.seed, 0x5u, static_cast<std::uint64_t>(stage),
                                          static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const std::size_t lo = s * batch;
      const std::size_t hi = std::min(order.size(), lo + batch);
      std::vector<BinTask> tasks;
      double step_loss = 0.0;
      for (std::size_t slot = lo; slot < hi; ++slot) {
        const std::size_t entry = order[slot];
        const auto row = measured.data.row(static_cast<Eigen::Index>(entry));
        auto [first, last] =
            active_bins(support, measured.scan.entries[entry], measured.n_bins,
                        measured.bin_width, measured.constants.c);
        for (int b = 0; b < measured.n_bins; ++b) {
          const bool active = b >= first && b <= last;
          if (cfg.nonzero_bins_only && row[b] == 0.0) continue;
          if (active) {
            tasks.push_back({slot - lo, entry, b});
          } else {
            step_loss += row[b] * row[b];  // prediction is exactly zero here
          }
        }
      }
      const std::size_t n_chunks =
          (tasks.size() + kTasksPerChunk - 1) / kTasksPerChunk;
      std::vector<Eigen::VectorXd> grads(n_chunks);
      std::vector<double> losses(n_chunks, 0.0);
      parallel_for(n_chunks, cfg.threads, [&](std::size_t c) {
        grads[c] = Eigen::VectorXd::Zero(n_params);
        const std::size_t end = std::min(tasks.size(), (c + 1) * kTasksPerChunk);
        for (std::size_t k = c * kTasksPerChunk; k < end; ++k) {
          const BinTask& task = tasks[k];
          const std::uint64_t seed = mix_seed(
              {cfg.seed, static_cast<std::uint64_t>(stage), global_step,
               task.slot, static_cast<std::uint64_t>(task.bin)});
          losses[c] += bin_loss_and_grad(field, measured, task.entry, task.bin,
                                         cfg, seed, grads[c]);
        }
      });
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_params);
      for (std::size_t c = 0; c < n_chunks; ++c) {
        grad += grads[c];
        step_loss += losses[c];
      }
      const double lr = lr_schedule(global_step, total_steps, cfg);
      adam_step(field.params().values(), grad, adam, lr, cfg);
      ++global_step;
      epoch_loss += step_loss;
    }
    report.epoch_loss.push_back(epoch_loss / steps_per_epoch);
    if (progress) {
      std::ostringstream msg;
      msg << "stage " << stage << " epoch " << epoch + 1 << "/" << epochs
          << " mean step loss " << report.epoch_loss.back();
      progress(msg.str());
    }
  }
  report.steps = global_step;
  report.skipped_updates = adam.skipped;
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

TrainReport train_stages(NeuralField& field, const TransientImage& measured,
                         const TrainConfig& cfg, StageSelection stages,
                         const ProgressFn& progress) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = cfg.seed;
  std::vector<std::size_t> all(measured.scan.size());
  std::iota(all.begin(), all.end(), std::size_t{0});

  if (stages != StageSelection::kTwo) {
    report.stages.push_back(train_stage(field, measured, all,
                                        cfg.epochs_stage_one, 1, cfg, progress));
  }
  // Stage two alone resamples by the losses of the field it was handed.
  report.entry_loss.push_back(coarse_entry_loss(field, measured, cfg).per_entry);
  report.spot_map = build_spot_pdf(report.entry_loss.back(), cfg.spot_epsilon);

  if (stages != StageSelection::kOne && cfg.epochs_stage_two > 0) {
    const std::vector<std::size_t> resampled = resample_spots(
        report.spot_map, all.size(), mix_seed({cfg.seed, 0x2u, 0x5907u}));
    report.stages.push_back(train_stage(field, measured, resampled,
                                        cfg.epochs_stage_two, 2, cfg, progress));
    report.entry_loss.push_back(
        coarse_entry_loss(field, measured, cfg).per_entry);
  }
  report.clamp_count = field.clamp_count();
  report.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start)
                       .count();
  return report;
}

TrainReport train_two_stage(NeuralField& field, const TransientImage& measured,
                            const TrainConfig& cfg,
                            const ProgressFn& progress) {
  return train_stages(field, measured, cfg, StageSelection::kBoth, progress);
}

StageSelection parse_stage_selection(const std::string& name) {
  if (name == "one") return StageSelection::kOne;
  if (name == "two") return StageSelection::kTwo;
  if (name == "both") return StageSelection::kBoth;
  fail(ErrorCode::kConfig, "unknown stage '" + name + "' (one|two|both)");
}

}  // namespace ntf
