#include "ntf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ntf/error.hpp"

namespace ntf {

SpotLossMap build_spot_pdf(const std::vector<double>& losses, double epsilon) {
  require(!losses.empty(), ErrorCode::kInvalidArgument, "no spot losses");
  require(epsilon >= 0.0 && epsilon <= 1.0, ErrorCode::kInvalidArgument,
          "mixture weight must lie in [0, 1]");
  SpotLossMap map;
  map.losses = losses;
  map.epsilon = epsilon;
  double total = 0.0;
  for (double l : losses) {
    require(l >= 0.0 && std::isfinite(l), ErrorCode::kInvalidArgument,
            "spot losses must be finite and nonnegative");
    total += l;
  }
  const double n = static_cast<double>(losses.size());
  map.pdf.resize(losses.size());
  if (total <= 0.0) {
    map.all_zero = true;
    std::fill(map.pdf.begin(), map.pdf.end(), 1.0 / n);
    return map;
  }
  for (std::size_t i = 0; i < losses.size(); ++i) {
    map.pdf[i] = (1.0 - epsilon) * losses[i] / total + epsilon / n;
  }
  return map;
}

std::vector<std::size_t> resample_spots(const SpotLossMap& map, std::size_t n,
                                        std::uint64_t seed) {
  require(!map.pdf.empty(), ErrorCode::kInvalidArgument, "empty spot pdf");
  std::vector<double> cdf(map.pdf.size());
  std::partial_sum(map.pdf.begin(), map.pdf.end(), cdf.begin());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, cdf.back());
  std::vector<std::size_t> out(n);
  for (auto& idx : out) {
    const double u = uni(rng);
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    idx = std::min<std::size_t>(it - cdf.begin(), cdf.size() - 1);
  }
  return out;
}

AngularPDF::AngularPDF(int n_theta, int n_phi, const Eigen::VectorXd& raw,
                       double floor_fraction)
    : n_theta_(n_theta), n_phi_(n_phi), values_(raw) {
  require(n_theta >= 2 && n_phi >= 2, ErrorCode::kInvalidArgument,
          "angular pdf grid needs at least 2 x 2 nodes");
  require(raw.size() == static_cast<Eigen::Index>(n_theta) * n_phi,
          ErrorCode::kShapeMismatch, "angular pdf value count mismatch");
  require(raw.allFinite() && (raw.array() >= 0.0).all(),
          ErrorCode::kInvalidArgument, "angular pdf values must be >= 0");
  const double peak = values_.maxCoeff();
  if (peak <= 0.0) {
    degenerate_ = true;
    values_.setOnes();
  } else {
    values_ = values_.cwiseMax(floor_fraction * peak);
  }
  values_ /= integral();
}

double AngularPDF::operator()(double theta, double phi) const {
  const double u = std::clamp(theta / dtheta() - 0.5, 0.0, n_theta_ - 1.0);
  const int i0 = std::min(static_cast<int>(u), n_theta_ - 2);
  const double fu = u - i0;
  double v = wrap_phi(phi) / dphi() - 0.5;
  if (v < 0.0) v += n_phi_;
  const int j0 = static_cast<int>(v) % n_phi_;
  const double fv = v - std::floor(v);
  const int j1 = (j0 + 1) % n_phi_;
  auto at = [&](int i, int j) { return values_[i * n_phi_ + j]; };
  return (1.0 - fu) * ((1.0 - fv) * at(i0, j0) + fv * at(i0, j1)) +
         fu * ((1.0 - fv) * at(i0 + 1, j0) + fv * at(i0 + 1, j1));
}

AngularPDF coarse_pdf(const Field& field, const WallSpot& spot, double t,
                      int n_c, const PhysicsConstants& constants) {
  require(n_c >= 2, ErrorCode::kInvalidArgument, "coarse grid needs n_c >= 2");
  const double r = 0.5 * constants.c * t;
  require(r > 0.0, ErrorCode::kInvalidArgument, "coarse pass needs t > 0");
  const SampleSet grid = hemisphere_grid(n_c, n_c);
  const Aabb support = field.support();
  std::vector<Eigen::Index> inside;
  std::vector<Vec3> points;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const AngularSample& s = grid.samples[k];
    const Vec3 q = spherical_to_cartesian({r, s.theta, s.phi, spot});
    if (!support.contains(q)) continue;
    inside.push_back(static_cast<Eigen::Index>(k));
    points.push_back(q);
  }
  Eigen::VectorXd raw = Eigen::VectorXd::Zero(grid.size());
  if (inside.empty()) return AngularPDF(n_c, n_c, raw);
  QueryBatch q;
  q.resize(static_cast<Eigen::Index>(inside.size()));
  for (std::size_t m = 0; m < inside.size(); ++m) {
    const AngularSample& s = grid.samples[inside[m]];
    q.set(static_cast<Eigen::Index>(m), points[m], {s.theta, s.phi});
  }
  FieldValues v;
  field.evaluate(q, v);
  for (std::size_t m = 0; m < inside.size(); ++m) {
    const auto mm = static_cast<Eigen::Index>(m);
    raw[inside[m]] = std::max(0.0, std::sin(grid.samples[inside[m]].theta) *
                                       v.sigma[mm] * v.rho[mm] / (r * r));
  }
  return AngularPDF(n_c, n_c, raw);
}

double reflect_theta(double theta) {
  const double period = kPi;  // reflection about 0 and pi/2
  theta = std::fmod(theta, period);
  if (theta < 0.0) theta += period;
  return theta > kHalfPi ? period - theta : theta;
}

double wrap_phi(double phi) {
  phi = std::fmod(phi, kTwoPi);
  if (phi < 0.0) phi += kTwoPi;
  return phi >= kTwoPi ? 0.0 : phi;
}

ChainState start_chain(const AngularPDF& pdf, std::uint64_t seed) {
  ChainState chain;
  chain.rng.seed(seed);
  const Eigen::VectorXd& v = pdf.values();
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double u = uni(chain.rng) * v.sum();
  Eigen::Index cell = 0;
  for (; cell < v.size() - 1; ++cell) {
    u -= v[cell];
    if (u < 0.0) break;
  }
  const int i = static_cast<int>(cell / pdf.n_phi());
  const int j = static_cast<int>(cell % pdf.n_phi());
  chain.theta = (i + uni(chain.rng)) * pdf.dtheta();
  chain.phi = wrap_phi((j + uni(chain.rng)) * pdf.dphi());
  return chain;
}

double mh_accept_probability(double current, double proposed) {
  if (!(current > 0.0)) return 1.0;
  return std::min(1.0, proposed / current);
}

SampleSet mh_sample(const AngularPDF& pdf, int n_f, int burn_in,
                    ChainState& chain) {
  require(n_f >= 0 && burn_in >= 0, ErrorCode::kInvalidArgument,
          "sample and burn-in counts must be nonnegative");
  require(!pdf.degenerate(), ErrorCode::kDegenerate,
          "importance pdf carries no mass above its floor");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double current = pdf(chain.theta, chain.phi);
  SampleSet out;
  out.samples.reserve(n_f);
  out.pdf.reserve(n_f);
  const double w = n_f > 0 ? 1.0 / n_f : 0.0;
  for (int step = 0; step < burn_in + n_f; ++step) {
    const double th =
        reflect_theta(chain.theta + chain.sigma_theta * normal(chain.rng));
    const double ph = wrap_phi(chain.phi + chain.sigma_phi * normal(chain.rng));
    const double proposed = pdf(th, ph);
    const double u = uni(chain.rng);
    ++chain.total;
    if (u < mh_accept_probability(current, proposed)) {
      chain.theta = th;
      chain.phi = ph;
      current = proposed;
      ++chain.accepted;
    }
    if (step >= burn_in) {
      out.samples.push_back({chain.theta, chain.phi, w});
      out.pdf.push_back(current);
    }
  }
  return out;
}

SampleSet mh_sample(const AngularPDF& pdf, int n_f, int burn_in,
                    std::uint64_t seed) {
  ChainState chain = start_chain(pdf, seed);
  return mh_sample(pdf, n_f, burn_in, chain);
}

std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
  // splitmix64 chained over the parts
  std::uint64_t h = 0x9e3779b97f4a7c15ULL;
  for (std::uint64_t p : parts) {
    std::uint64_t z = h + p + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    h = z ^ (z >> 31);
  }
  return h;
}

}  // namespace ntf
