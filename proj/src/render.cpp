#include "ntf/render.hpp"

#include <algorithm>
#include <cmath>

#include "ntf/error.hpp"
#include "ntf/parallel.hpp"

namespace ntf {

void RenderConfig::validate() const {
  require(n_theta >= 1 && n_phi >= 1, ErrorCode::kInvalidArgument,
          "render resolution must be positive");
  require(!occlusion_aware || n_march >= 2, ErrorCode::kInvalidArgument,
          "occlusion-aware rendering needs n_march >= 2");
  require(constants.c > 0.0 && constants.gamma0 > 0.0 &&
              constants.attenuation >= 0.0,
          ErrorCode::kInvalidArgument, "invalid physics constants");
}

namespace {

bool radius_in_support(const Aabb& support, const Vec3& spot, double r) {
  return r > 0.0 && r >= min_distance(support, spot) &&
         r <= max_distance(support, spot);
}

// Adds one node (and its march points when occlusion is on).
class PlanBuilder {
 public:
  PlanBuilder(const Aabb& support, const RenderConfig& cfg, std::size_t reserve)
      : support_(support), cfg_(cfg) {
    positions_.reserve(reserve);
    directions_.reserve(reserve);
    weights_.reserve(reserve);
  }

  void add(const Vec3& origin, const Vec3& q, const ViewAngles& view,
           double weight) {
    if (!support_.contains(q)) return;
    const auto index = static_cast<Eigen::Index>(weights_.size());
    positions_.push_back(q);
    directions_.push_back(view);
    weights_.push_back(weight);
    if (!cfg_.occlusion_aware) return;
    const int n = cfg_.n_march;
    const Vec3 step = (q - origin) / n;
    const double h = step.norm();
    for (int k = 0; k < n; ++k) {
      const Vec3 m = origin + k * step;
      if (!support_.contains(m)) continue;
      march_.push_back(m);
      owner_.push_back(index);
      march_w_.push_back(k == 0 ? 0.5 * h : h);
    }
    self_w_.push_back(0.5 * h);
  }

  BinPlan finish() {
    BinPlan plan;
    const auto n = static_cast<Eigen::Index>(weights_.size());
    plan.nodes.resize(n);
    plan.weights.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      plan.nodes.set(i, positions_[i], directions_[i]);
      plan.weights[i] = weights_[i];
    }
    plan.occlusion = cfg_.occlusion_aware;
    plan.attenuation = cfg_.constants.attenuation;
    if (plan.occlusion) {
      const auto m = static_cast<Eigen::Index>(march_.size());
      plan.march_points.resize(3, m);
      plan.march_weights.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        plan.march_points.col(j) = march_[j];
        plan.march_weights[j] = march_w_[j];
      }
      plan.march_owner = std::move(owner_);
      plan.self_weights =
          Eigen::Map<const Eigen::VectorXd>(self_w_.data(), n);
    }
    return plan;
  }

 private:
  const Aabb& support_;
  const RenderConfig& cfg_;
  std::vector<Vec3> positions_;
  std::vector<ViewAngles> directions_;
  std::vector<double> weights_;
  std::vector<Vec3> march_;
  std::vector<Eigen::Index> owner_;
  std::vector<double> march_w_;
  std::vector<double> self_w_;
};

Vec3 direction_of(double theta, double phi) {
  const double s = std::sin(theta);
  return {s * std::cos(phi), s * std::sin(phi), std::cos(theta)};
}

}  // namespace

BinPlan plan_confocal(const Aabb& support, const WallSpot& spot, double t,
                      const RenderConfig& cfg, const SampleSet& nodes) {
  const Vec3 origin = spot.position();
  const double r = 0.5 * cfg.constants.c * t;
  if (!radius_in_support(support, origin, r)) return {};
  PlanBuilder builder(support, cfg, nodes.size());
  const double scale = cfg.constants.gamma0 / (r * r);
  for (const AngularSample& s : nodes.samples) {
    builder.add(origin, origin + r * direction_of(s.theta, s.phi),
                {s.theta, s.phi}, scale * s.weight);
  }
  return builder.finish();
}

BinPlan plan_confocal(const Aabb& support, const WallSpot& spot, double t,
                      const RenderConfig& cfg) {
  return plan_confocal(support, spot, t, cfg,
                       hemisphere_grid(cfg.n_theta, cfg.n_phi));
}

BinPlan plan_nonconfocal(const Aabb& support, const ScanEntry& pair, double t,
                         const RenderConfig& cfg) {
  const Vec3 p = pair.illumination.position();
  const Vec3 pp = pair.detection.position();
  const double gamma = 0.5 * (p - pp).norm();
  if (gamma < kConfocalGammaThreshold) {
    RenderConfig plain = cfg;
    plain.occlusion_aware = false;
    return plan_confocal(support, pair.detection, t, plain);
  }
  const double s = cfg.constants.c * t;
  if (s <= 2.0 * gamma) return {};
  if (!support.is_unbounded()) {
    const double smin = min_distance(support, p) + min_distance(support, pp);
    const double smax = max_distance(support, p) + max_distance(support, pp);
    if (s < smin || s > smax) return {};
  }
  RenderConfig plain = cfg;
  plain.occlusion_aware = false;
  const EllipsoidFrame frame(pair.illumination, pair.detection, s);
  const double mu = ellipsoid_mu(frame);
  const double dnu = kPi / cfg.n_theta;
  const double dvarphi = kPi / cfg.n_phi;
  const double scale = cfg.constants.gamma0 * dnu * dvarphi /
                       (frame.gamma() * std::sinh(mu));
  PlanBuilder builder(support, plain,
                      static_cast<std::size_t>(cfg.n_theta) * cfg.n_phi);
  for (int i = 0; i < cfg.n_theta; ++i) {
    const double nu = (i + 0.5) * dnu;
    for (int j = 0; j < cfg.n_phi; ++j) {
      const EllipsoidalPoint ep{mu, nu, (j + 0.5) * dvarphi};
      const Vec3 q = ellipsoidal_to_cartesian(ep, frame);
      if (!support.contains(q)) continue;
      const SphericalPoint view = cartesian_to_spherical(q, pair.detection);
      const double r1 = (q - p).norm();
      const double r2 = view.r;
      const double w =
          scale * ellipsoidal_jacobian(ep, frame) / (r1 * r1 * r2 * r2);
      builder.add(p, q, {view.theta, view.phi}, w);
    }
  }
  return builder.finish();
}

BinPlan plan_importance(const Aabb& support, const WallSpot& spot, double t,
                        const RenderConfig& cfg, const SampleSet& coarse,
                        const SampleSet& fine) {
  require(fine.pdf.size() == fine.samples.size(), ErrorCode::kInvalidArgument,
          "importance samples need one pdf value each");
  for (double k : fine.pdf) {
    require(k > 0.0 && std::isfinite(k), ErrorCode::kInvalidArgument,
            "importance sample has zero pdf");
  }
  const Vec3 origin = spot.position();
  const double r = 0.5 * cfg.constants.c * t;
  if (!radius_in_support(support, origin, r)) return {};
  PlanBuilder builder(support, cfg, coarse.size() + fine.size());
  const double scale = cfg.constants.gamma0 / (r * r);
  const double half = fine.samples.empty() ? 1.0 : 0.5;
  for (const AngularSample& s : coarse.samples) {
    builder.add(origin, origin + r * direction_of(s.theta, s.phi),
                {s.theta, s.phi}, half * scale * s.weight);
  }
  const double inv_n = fine.samples.empty() ? 0.0 : 1.0 / fine.samples.size();
  for (std::size_t i = 0; i < fine.samples.size(); ++i) {
    const AngularSample& s = fine.samples[i];
    builder.add(origin, origin + r * direction_of(s.theta, s.phi),
                {s.theta, s.phi},
                half * scale * std::sin(s.theta) * inv_n / fine.pdf[i]);
  }
  return builder.finish();
}

namespace {

// Per-node transmittance from node and march densities.
Eigen::VectorXd transmittance(const BinPlan& plan, const Eigen::VectorXd& sigma,
                              const Eigen::VectorXd& march_sigma) {
  Eigen::VectorXd integral = plan.self_weights.cwiseProduct(sigma);
  for (std::size_t j = 0; j < plan.march_owner.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    integral[plan.march_owner[j]] += plan.march_weights[jj] * march_sigma[jj];
  }
  return (-2.0 * plan.attenuation * integral).array().exp();
}

}  // namespace

double evaluate_plan(const Field& field, const BinPlan& plan) {
  if (plan.empty()) return 0.0;
  FieldValues v;
  field.evaluate(plan.nodes, v);
  Eigen::ArrayXd contrib = plan.weights.array() * v.sigma.array() * v.rho.array();
  if (plan.occlusion) {
    Eigen::VectorXd march_sigma;
    if (plan.march_points.cols() > 0) field.density(plan.march_points, march_sigma);
    contrib *= transmittance(plan, v.sigma, march_sigma).array();
  }
  return contrib.sum();
}

double backprop_plan(const NeuralField& field, const BinPlan& plan,
                     const std::function<double(double)>& dloss_dtau,
                     Eigen::VectorXd& grad) {
  if (plan.empty()) {
    dloss_dtau(0.0);
    return 0.0;
  }
  ForwardTape tape;
  FieldValues v;
  field.forward(plan.nodes, tape, v);
  const Eigen::Index n = plan.nodes.size();
  Eigen::VectorXd T = Eigen::VectorXd::Ones(n);
  ForwardTape march_tape;
  Eigen::VectorXd march_sigma;
  const bool march = plan.occlusion && plan.march_points.cols() > 0;
  if (plan.occlusion) {
    if (march) field.forward_density(plan.march_points, march_tape, march_sigma);
    T = transmittance(plan, v.sigma, march_sigma);
  }
  const Eigen::ArrayXd wT = plan.weights.array() * T.array();
  const Eigen::ArrayXd contrib = wT * v.sigma.array() * v.rho.array();
  const double tau = contrib.sum();
  const double upstream = dloss_dtau(tau);
  if (upstream == 0.0) return tau;

  Eigen::VectorXd drho = upstream * (wT * v.sigma.array()).matrix();
  Eigen::VectorXd dsigma = upstream * (wT * v.rho.array()).matrix();
  if (plan.occlusion) {
    const double k = -2.0 * plan.attenuation;
    // d tau / d integral_i = k * contrib_i
    const Eigen::ArrayXd dint = upstream * k * contrib;
    dsigma.array() += dint * plan.self_weights.array();
    if (march) {
      Eigen::VectorXd dmarch(plan.march_points.cols());
      for (std::size_t j = 0; j < plan.march_owner.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        dmarch[jj] = dint[plan.march_owner[j]] * plan.march_weights[jj];
      }
      field.backward(march_tape, dmarch, Eigen::VectorXd(), grad);
    }
  }
  field.backward(tape, dsigma, drho, grad);
  return tau;
}

RenderedBin render_confocal_bin(const Field& field, const WallSpot& spot,
                                double t, const RenderConfig& cfg) {
  cfg.validate();
  RenderedBin out;
  out.tau = evaluate_plan(field, plan_confocal(field.support(), spot, t, cfg));
  return out;
}

RenderedBin render_nonconfocal_bin(const Field& field, const ScanEntry& pair,
                                   double t, const RenderConfig& cfg) {
  cfg.validate();
  RenderedBin out;
  out.tau = evaluate_plan(field, plan_nonconfocal(field.support(), pair, t, cfg));
  return out;
}

RenderedBin render_with_importance(const Field& field, const WallSpot& spot,
                                   double t, const RenderConfig& cfg,
                                   const SampleSet& coarse,
                                   const SampleSet& fine) {
  cfg.validate();
  RenderedBin out;
  out.tau = evaluate_plan(
      field, plan_importance(field.support(), spot, t, cfg, coarse, fine));
  out.provenance =
      fine.samples.empty() ? Provenance::kCoarseOnly : Provenance::kCombined;
  return out;
}

std::pair<int, int> active_bins(const Aabb& support, const ScanEntry& entry,
                                int n_bins, double bin_width, double c) {
  const double path_bin = c * bin_width;
  if (support.is_unbounded()) return {0, n_bins - 1};
  const Vec3 p = entry.illumination.position();
  const Vec3 pp = entry.detection.position();
  const double smin = min_distance(support, p) + min_distance(support, pp);
  const double smax = max_distance(support, p) + max_distance(support, pp);
  const int first =
      std::max(0, static_cast<int>(std::floor(smin / path_bin - 0.5)));
  const int last = std::min(
      n_bins - 1, static_cast<int>(std::ceil(smax / path_bin - 0.5)));
  return {first, last};
}

TransientImage render_transient(const Field& field, const ScanPattern& scan,
                                int n_bins, double bin_width,
                                const RenderConfig& cfg) {
  cfg.validate();
  TransientImage img =
      TransientImage::zeros(scan, n_bins, bin_width, cfg.constants);
  const Aabb support = field.support();
  const SampleSet grid = hemisphere_grid(cfg.n_theta, cfg.n_phi);
  const double path_bin = img.path_bin_width();
  parallel_for(scan.size(), cfg.threads, [&](std::size_t e) {
    const ScanEntry& entry = scan.entries[e];
    const auto [first, last] =
        active_bins(support, entry, n_bins, bin_width, cfg.constants.c);
    for (int b = first; b <= last; ++b) {
      const double t = img.bin_center_time(b);
      const BinPlan plan =
          entry.collocated()
              ? plan_confocal(support, entry.detection, t, cfg, grid)
              : plan_nonconfocal(support, entry, t, cfg);
      img.data(static_cast<Eigen::Index>(e), b) =
          path_bin * evaluate_plan(field, plan);
    }
  });
  return img;
}

}  // namespace ntf
