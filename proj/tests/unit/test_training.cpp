#include <cmath>
#include <random>

#include "doctest.h"
#include "ntf/error.hpp"
#include "ntf/training.hpp"

using namespace ntf;

namespace {

const Vec3 kVoxel(0.04, 0.0, 0.44);
constexpr double kPitch = 0.06;

NetConfig small_net() {
  NetConfig c;
  c.width = 32;
  c.depth = 3;
  c.skip_after = 1;
  c.head_width = 16;
  c.encoding.n_freq_pos = 3;
  c.encoding.n_freq_dir = 1;
  c.encoding.bounds = {(kVoxel.array() - 3 * kPitch).matrix(), (kVoxel.array() + 3 * kPitch).matrix()};
  return c;
}

GroundTruthScene single_voxel() {
  GridSpec g;
  g.nx = g.ny = g.nz = 5;
  g.pitch = kPitch;
  g.origin = (kVoxel.array() - 2 * kPitch).matrix();
  GroundTruthScene s = GroundTruthScene::empty(g);
  std::fill(s.rho.begin(), s.rho.end(), 1.0);
  s.sigma[g.index(2, 2, 2)] = 1.0;
  return s;
}

TransientImage single_voxel_data() {
  return simulate_confocal(single_voxel(), ScanPattern::confocal_grid(8, 0.2), 64,
                           64e-12, PhysicsConstants{});
}

TrainConfig quick_config() {
  TrainConfig t;
  t.n_c = 16;
  t.batch_size = 1;
  t.lr_start = 5e-3;
  t.lr_end = 5e-4;
  t.seed = 3;
  return t;
}

}  // namespace

TEST_SUITE("training") {

TEST_CASE("transient loss") {
  TransientImage a = TransientImage::zeros(ScanPattern::confocal_grid(2, 0.1), 5, 1e-11, {});
  TransientImage b = a;
  CHECK(transient_loss(a, b).total == 0.0);
  b.data(2, 3) = 2.0;
  const LossResult l = transient_loss(a, b);
  CHECK(l.total == 4.0);
  CHECK(l.per_entry[2] == 4.0);
  CHECK(l.per_entry[0] == 0.0);
  TransientImage c = TransientImage::zeros(ScanPattern::confocal_grid(2, 0.1), 6, 1e-11, {});
  CHECK_THROWS_AS(transient_loss(a, c), Error);
}

TEST_CASE("loss gradient with respect to predicted bins") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  TransientImage p = TransientImage::zeros(ScanPattern::confocal_grid(2, 0.1), 4, 1e-11, {});
  TransientImage m = p;
  for (Eigen::Index i = 0; i < p.data.size(); ++i) {
    p.data.data()[i] = n(rng);
    m.data.data()[i] = n(rng);
  }
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.data.size(); ++i) {
    TransientImage a = p, b = p;
    a.data.data()[i] += h;
    b.data.data()[i] -= h;
    const double fd = (transient_loss(a, m).total - transient_loss(b, m).total) / (2 * h);
    CHECK(fd == doctest::Approx(2.0 * (p.data.data()[i] - m.data.data()[i])).epsilon(1e-6));
  }
}

TEST_CASE("Adam arithmetic") {
  TrainConfig cfg;
  Eigen::VectorXd p(1);
  p << 0.5;
  AdamState st(1);
  // Three steps with g = 1: m_t = 1 - b1^t and v_t = 1 - b2^t, so every
  // bias-corrected step is lr * 1 / (1 + eps).
  for (int t = 1; t <= 3; ++t) {
    adam_step(p, Eigen::VectorXd::Ones(1), st, 1e-3, cfg);
    const double m = 1.0 - std::pow(0.9, t);
    const double v = 1.0 - std::pow(0.999, t);
    CHECK(st.m[0] == doctest::Approx(m).epsilon(1e-14));
    CHECK(st.v[0] == doctest::Approx(v).epsilon(1e-14));
  }
  CHECK(p[0] == doctest::Approx(0.5 - 3e-3 / (1.0 + 1e-7)).epsilon(1e-14));
  CHECK(st.step == 3);

  Eigen::VectorXd q = Eigen::VectorXd::Constant(4, 0.25);
  AdamState z(4);
  adam_step(q, Eigen::VectorXd::Zero(4), z, 1e-3, cfg);
  CHECK(q == Eigen::VectorXd::Constant(4, 0.25));
  CHECK(z.step == 1);

  Eigen::VectorXd bad = Eigen::VectorXd::Ones(4);
  bad[2] = std::nan("");
  CHECK_FALSE(adam_step(q, bad, z, 1e-3, cfg));
  CHECK(z.skipped == 1);
  CHECK(z.step == 1);
  CHECK(q == Eigen::VectorXd::Constant(4, 0.25));
}

TEST_CASE("learning-rate schedule") {
  TrainConfig cfg;
  CHECK(lr_schedule(0, 1000, cfg) == 1e-3);
  CHECK(lr_schedule(1000, 1000, cfg) == 1e-4);
  CHECK(lr_schedule(500, 1000, cfg) == doctest::Approx(std::sqrt(1e-3 * 1e-4)).epsilon(1e-12));
  CHECK_THROWS_AS(lr_schedule(1001, 1000, cfg), Error);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = TrainConfig{};
  cfg.lr_end = 1e-2;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("zero epochs leave the field unchanged") {
  const auto data = single_voxel_data();
  NeuralField f(init_params(small_net(), 1));
  const NetParams before = f.params();
  TrainConfig cfg = quick_config();
  cfg.epochs_stage_one = 0;
  cfg.epochs_stage_two = 0;
  train_two_stage(f, data, cfg);
  CHECK(f.params() == before);
}

TEST_CASE("single voxel training converges") {
  const auto data = single_voxel_data();
  NeuralField f(init_params(small_net(), 2));
  TrainConfig cfg = quick_config();
  cfg.epochs_stage_one = 5;
  cfg.epochs_stage_two = 0;
  const double initial =
      transient_loss(render_transient(f, data.scan, data.n_bins, data.bin_width,
                                      training_render_config(cfg, data.constants)),
                     data)
          .total;
  const TrainReport r = train_two_stage(f, data, cfg);
  double final_loss = 0.0;
  for (double l : r.entry_loss[0]) final_loss += l;
  MESSAGE("initial " << initial << " final " << final_loss);
  CHECK(final_loss < 0.05 * initial);
  // Beats the empty field by a wide margin, so the fit is not a collapse to zero.
  CHECK(final_loss < 0.1 * data.data.squaredNorm());
}

TEST_CASE("training is deterministic and thread-count independent") {
  const auto data = single_voxel_data();
  TrainConfig cfg = quick_config();
  cfg.epochs_stage_one = 1;
  cfg.epochs_stage_two = 1;
  cfg.n_f = 64;
  NeuralField a(init_params(small_net(), 5)), b(init_params(small_net(), 5)),
      c(init_params(small_net(), 5));
  const TrainReport ra = train_two_stage(a, data, cfg);
  const TrainReport rb = train_two_stage(b, data, cfg);
  cfg.threads = 3;
  const TrainReport rc = train_two_stage(c, data, cfg);
  CHECK(a.params() == b.params());
  CHECK(ra.stages[1].epoch_loss == rb.stages[1].epoch_loss);
  CHECK(a.params() == c.params());
  double total = 0.0;
  for (double p : ra.spot_map.pdf) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ra.stages[1].entries.size() == data.scan.size());
}

TEST_CASE("full-pipeline gradient matches finite differences") {
  const auto data = single_voxel_data();
  NeuralField f(init_params(small_net(), 7));
  TrainConfig cfg = quick_config();
  for (bool occl : {false, true}) {
    cfg.occlusion_aware = occl;
    cfg.n_march = 6;
    const std::size_t entry = 27;
    const int bin = 35;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(f.params().values().size());
    bin_loss_and_grad(f, data, entry, bin, cfg, 1, g);
    std::mt19937_64 rng(occl ? 4 : 3);
    std::uniform_int_distribution<Eigen::Index> pick(0, g.size() - 1);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Eigen::Index i = pick(rng);
      NeuralField a(f), b(f);
      a.params().values()[i] += 1e-5;
      b.params().values()[i] -= 1e-5;
      Eigen::VectorXd scratch = Eigen::VectorXd::Zero(g.size());
      const double la = bin_loss_and_grad(a, data, entry, bin, cfg, 1, scratch);
      const double lb = bin_loss_and_grad(b, data, entry, bin, cfg, 1, scratch);
      const double fd = (la - lb) / 2e-5;
      worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-12}));
    }
    CHECK(worst < 1e-4);
  }
}

}
