#pragma once

// Differentiable transient rendering from a field.
//
// Every rendered bin reduces to a weighted sum over field queries,
//   tau = sum_i w_i * sigma_i * rho_i * T_i,
// where T_i is the two-way transmittance exp(-2 A int sigma) along the ray
// from the wall spot to node i (1 when occlusion is off). A BinPlan holds the
// nodes, weights and march points; the same plan drives the value and the
// reverse pass.

#include <Eigen/Core>
#include <functional>
#include <vector>

#include "ntf/field.hpp"
#include "ntf/geometry.hpp"
#include "ntf/neural_field.hpp"
#include "ntf/scene.hpp"

namespace ntf {

struct RenderConfig {
  int n_theta = 64;
  int n_phi = 64;
  bool occlusion_aware = false;
  int n_march = 32;
  PhysicsConstants constants;
  int threads = 1;

  void validate() const;
};

enum class Provenance { kCoarseOnly, kCombined };

struct RenderedBin {
  std::size_t entry = 0;
  int bin = 0;
  double tau = 0.0;
  Provenance provenance = Provenance::kCoarseOnly;
};

struct BinPlan {
  QueryBatch nodes;
  Eigen::VectorXd weights;

  bool occlusion = false;
  double attenuation = 0.0;
  // Trapezoid pieces of the transmittance integral of each node: march
  // points owned by the node plus the node's own density at the far end.
  Eigen::Matrix3Xd march_points;
  std::vector<Eigen::Index> march_owner;
  Eigen::VectorXd march_weights;
  Eigen::VectorXd self_weights;

  bool empty() const { return nodes.size() == 0; }
  void scale(double factor) { weights *= factor; }
};

// Plan builders. `t` is the bin-center time. Nodes outside the field support
// are dropped (zero density there); out-of-range times give an empty plan.
BinPlan plan_confocal(const Aabb& support, const WallSpot& spot, double t,
                      const RenderConfig& cfg, const SampleSet& nodes);
BinPlan plan_confocal(const Aabb& support, const WallSpot& spot, double t,
                      const RenderConfig& cfg);
// Collocated pairs (gamma below kConfocalGammaThreshold) use the confocal
// plan with occlusion off.
BinPlan plan_nonconfocal(const Aabb& support, const ScanEntry& pair, double t,
                         const RenderConfig& cfg);
// (tau_c + tau_f) / 2 with tau_f = (1/N_f) sum sin(theta) sigma rho / (r^2 K).
// Throws kInvalidArgument when a fine sample has K <= 0.
BinPlan plan_importance(const Aabb& support, const WallSpot& spot, double t,
                        const RenderConfig& cfg, const SampleSet& coarse,
                        const SampleSet& fine);

double evaluate_plan(const Field& field, const BinPlan& plan);

// Returns tau and accumulates dL/dparams into grad, where the caller supplies
// dL/dtau as a function of the rendered tau.
double backprop_plan(const NeuralField& field, const BinPlan& plan,
                     const std::function<double(double)>& dloss_dtau,
                     Eigen::VectorXd& grad);

RenderedBin render_confocal_bin(const Field& field, const WallSpot& spot,
                                double t, const RenderConfig& cfg);
RenderedBin render_nonconfocal_bin(const Field& field, const ScanEntry& pair,
                                   double t, const RenderConfig& cfg);
RenderedBin render_with_importance(const Field& field, const WallSpot& spot,
                                   double t, const RenderConfig& cfg,
                                   const SampleSet& coarse,
                                   const SampleSet& fine);

// Full predicted image, bin values scaled by the round-trip bin path c * dt
// to match the simulator's convention.
TransientImage render_transient(const Field& field, const ScanPattern& scan,
                                int n_bins, double bin_width,
                                const RenderConfig& cfg);

// Bins [first, last] whose shell (or ellipsoid) can meet the support.
std::pair<int, int> active_bins(const Aabb& support, const ScanEntry& entry,
                                int n_bins, double bin_width, double c);

}  // namespace ntf
