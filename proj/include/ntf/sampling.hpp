#pragma once

// Spot-level resampling for two-stage training and hemisphere-level
// Metropolis-Hastings sampling for hierarchical rendering.

#include <Eigen/Core>
#include <cstdint>
#include <random>
#include <vector>

#include "ntf/field.hpp"
#include "ntf/geometry.hpp"
#include "ntf/scene.hpp"

namespace ntf {

struct SpotLossMap {
  std::vector<double> losses;
  std::vector<double> pdf;
  double epsilon = 0.05;
  bool all_zero = false;  // losses were all zero; pdf is uniform
};

// pdf_i = (1 - eps) * loss_i / sum + eps / N.
SpotLossMap build_spot_pdf(const std::vector<double>& losses, double epsilon);

// n i.i.d. draws with replacement; deterministic in seed.
std::vector<std::size_t> resample_spots(const SpotLossMap& map, std::size_t n,
                                        std::uint64_t seed);

// Density over (theta, phi) in [0, pi/2] x [0, 2 pi), with respect to
// d(theta) d(phi). Values sit at cell midpoints; evaluation is bilinear,
// constant past the outermost theta nodes and periodic in phi, so the
// integral is exactly dtheta * dphi * sum(values).
class AngularPDF {
 public:
  AngularPDF() = default;
  // Values are floored at floor_fraction * max and normalized. An all-zero
  // grid yields the uniform pdf with degenerate() set.
  AngularPDF(int n_theta, int n_phi, const Eigen::VectorXd& raw,
             double floor_fraction = 1e-6);

  int n_theta() const { return n_theta_; }
  int n_phi() const { return n_phi_; }
  double dtheta() const { return kHalfPi / n_theta_; }
  double dphi() const { return kTwoPi / n_phi_; }
  bool degenerate() const { return degenerate_; }
  // Node values, theta-major (index i * n_phi + j).
  const Eigen::VectorXd& values() const { return values_; }

  double operator()(double theta, double phi) const;
  double integral() const { return dtheta() * dphi() * values_.sum(); }

 private:
  int n_theta_ = 0;
  int n_phi_ = 0;
  Eigen::VectorXd values_;
  bool degenerate_ = false;
};

// Coarse pass: sin(theta) sigma rho / r^2 on the n_c x n_c midpoint grid of
// the shell of radius c t / 2. Nodes outside the field support count as 0.
AngularPDF coarse_pdf(const Field& field, const WallSpot& spot, double t,
                      int n_c, const PhysicsConstants& constants = {});

struct ChainState {
  double theta = 0.0;
  double phi = 0.0;
  double sigma_theta = kPi / 16.0;
  double sigma_phi = kPi / 8.0;
  std::uint64_t accepted = 0;
  std::uint64_t total = 0;
  std::mt19937_64 rng;

  double acceptance_rate() const {
    return total == 0 ? 0.0 : static_cast<double>(accepted) / total;
  }
};

// Chain seeded from `seed`, started at a draw from the grid masses.
ChainState start_chain(const AngularPDF& pdf, std::uint64_t seed);

// Symmetric proposal moves: theta reflected into [0, pi/2], phi wrapped.
double reflect_theta(double theta);
double wrap_phi(double phi);

// min(1, proposed / current); a zero current density always accepts.
double mh_accept_probability(double current, double proposed);

// n_f post-burn-in states; pdf holds K at each sample and weight is 1 / n_f.
// Throws kDegenerate on a degenerate pdf.
SampleSet mh_sample(const AngularPDF& pdf, int n_f, int burn_in,
                    ChainState& chain);
SampleSet mh_sample(const AngularPDF& pdf, int n_f, int burn_in,
                    std::uint64_t seed);

// Stable 64-bit mix of several integers, used to derive per-chain seeds.
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts);

}  // namespace ntf
