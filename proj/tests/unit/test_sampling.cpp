#include <cmath>
#include <map>

#include "doctest.h"
#include "ntf/error.hpp"
#include "ntf/sampling.hpp"

using namespace ntf;

namespace {

// Cell masses of an AngularPDF on an m x m grid by sub-sampled integration.
std::vector<double> cell_masses(const AngularPDF& pdf, int m, int sub = 8) {
  std::vector<double> mass(static_cast<std::size_t>(m) * m, 0.0);
  const double dt = kHalfPi / m, dp = kTwoPi / m;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      double s = 0.0;
      for (int a = 0; a < sub; ++a) {
        for (int b = 0; b < sub; ++b) {
          s += pdf((i + (a + 0.5) / sub) * dt, (j + (b + 0.5) / sub) * dp);
        }
      }
      mass[static_cast<std::size_t>(i) * m + j] = s * dt * dp / (sub * sub);
    }
  }
  return mass;
}

double chain_tv(const AngularPDF& pdf, const SampleSet& samples, int m) {
  const std::vector<double> target = cell_masses(pdf, m);
  std::vector<double> hist(target.size(), 0.0);
  for (const auto& s : samples.samples) {
    const int i = std::min(m - 1, static_cast<int>(s.theta / (kHalfPi / m)));
    const int j = std::min(m - 1, static_cast<int>(s.phi / (kTwoPi / m)));
    hist[static_cast<std::size_t>(i) * m + j] += 1.0 / samples.size();
  }
  double tv = 0.0, total = 0.0;
  for (std::size_t k = 0; k < hist.size(); ++k) total += target[k];
  for (std::size_t k = 0; k < hist.size(); ++k) tv += std::abs(hist[k] - target[k] / total);
  return 0.5 * tv;
}

}  // namespace

TEST_SUITE("sampling") {

TEST_CASE("spot pdf") {
  const SpotLossMap eq = build_spot_pdf({2.0, 2.0, 2.0, 2.0}, 0.05);
  for (double p : eq.pdf) CHECK(p == doctest::Approx(0.25));
  const SpotLossMap m = build_spot_pdf({3.0, 1.0}, 0.0);
  CHECK(m.pdf[0] == doctest::Approx(0.75));
  CHECK(m.pdf[1] == doctest::Approx(0.25));
  const SpotLossMap mixed = build_spot_pdf({1.0, 0.0, 0.0, 0.0}, 0.05);
  double total = 0.0;
  for (double p : mixed.pdf) {
    CHECK(p >= 0.05 / 4 - 1e-15);
    total += p;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  const SpotLossMap zero = build_spot_pdf({0.0, 0.0}, 0.05);
  CHECK(zero.all_zero);
  CHECK(zero.pdf[0] == 0.5);
  CHECK_THROWS_AS(build_spot_pdf({-1.0, 1.0}, 0.05), Error);
}

TEST_CASE("resampling reproduces the pdf") {
  const SpotLossMap m = build_spot_pdf({5.0, 1.0, 3.0, 0.5, 0.0, 2.0}, 0.05);
  const auto draws = resample_spots(m, 1000000, 17);
  std::vector<double> freq(m.pdf.size(), 0.0);
  for (auto d : draws) freq[d] += 1e-6;
  double tv = 0.0;
  for (std::size_t i = 0; i < freq.size(); ++i) tv += 0.5 * std::abs(freq[i] - m.pdf[i]);
  CHECK(tv < 0.01);
  CHECK(draws == resample_spots(m, 1000000, 17));
  CHECK(resample_spots(build_spot_pdf({0.0, 1.0, 0.0}, 0.0), 500, 3) ==
        std::vector<std::size_t>(500, 1));
}

TEST_CASE("uniform resampling stays inside binomial bands") {
  const std::size_t n = 100000, k = 10;
  const auto draws = resample_spots(build_spot_pdf(std::vector<double>(k, 1.0), 0.05), n, 99);
  std::vector<double> count(k, 0.0);
  for (auto d : draws) count[d] += 1.0;
  const double p = 1.0 / k;
  const double sd = std::sqrt(n * p * (1 - p));
  for (double c : count) CHECK(std::abs(c - n * p) < 3.0 * sd);
}

TEST_CASE("angular pdf normalization and interpolation") {
  Eigen::VectorXd raw(4 * 6);
  for (int i = 0; i < raw.size(); ++i) raw[i] = 1.0 + (i % 5);
  const AngularPDF pdf(4, 6, raw);
  CHECK(pdf.integral() == doctest::Approx(1.0).epsilon(1e-12));
  // Node values are reproduced and the dense integral matches the closed form.
  CHECK(pdf(pdf.dtheta() * 1.5, pdf.dphi() * 2.5) == doctest::Approx(pdf.values()[1 * 6 + 2]));
  double dense = 0.0;
  for (double m : cell_masses(pdf, 40, 6)) dense += m;
  CHECK(dense == doctest::Approx(1.0).epsilon(1e-6));
  // Periodic in phi.
  CHECK(pdf(0.3, 0.01) == doctest::Approx(pdf(0.3, 0.01 + kTwoPi)));
  const AngularPDF zero(3, 3, Eigen::VectorXd::Zero(9));
  CHECK(zero.degenerate());
  CHECK(zero.integral() == doctest::Approx(1.0));
  CHECK_THROWS_AS(mh_sample(zero, 10, 0, 1), Error);
}

TEST_CASE("coarse pdf follows sin(theta) for a constant field") {
  const FunctionField field([](const Vec3&, const ViewAngles&, double& s, double& r) {
    s = 2.0;
    r = 0.5;
  });
  const AngularPDF pdf = coarse_pdf(field, {0.0, 0.0}, 2e-9, 16);
  CHECK(pdf.integral() == doctest::Approx(1.0).epsilon(1e-12));
  const double norm = 1.0 / (kTwoPi * (kHalfPi / 16) *
                             [] { double s = 0; for (int i = 0; i < 16; ++i) s += std::sin((i + 0.5) * kHalfPi / 16); return s; }());
  for (int i = 0; i < 16; ++i) {
    const double theta = (i + 0.5) * kHalfPi / 16;
    CHECK(pdf.values()[i * 16 + 3] == doctest::Approx(std::sin(theta) * norm).epsilon(1e-12));
  }
  const FunctionField none([](const Vec3&, const ViewAngles&, double& s, double& r) {
    s = 0.0;
    r = 0.0;
  });
  const AngularPDF flat = coarse_pdf(none, {0.0, 0.0}, 2e-9, 8);
  CHECK(flat.degenerate());
  CHECK(flat.values().maxCoeff() == doctest::Approx(flat.values().minCoeff()));
}

TEST_CASE("proposal moves and acceptance") {
  CHECK(reflect_theta(-0.2) == doctest::Approx(0.2));
  CHECK(reflect_theta(kHalfPi + 0.1) == doctest::Approx(kHalfPi - 0.1));
  CHECK(reflect_theta(0.4) == 0.4);
  CHECK(wrap_phi(-0.5) == doctest::Approx(kTwoPi - 0.5));
  CHECK(wrap_phi(kTwoPi + 0.25) == doctest::Approx(0.25));
  CHECK(mh_accept_probability(2.0, 1.0) == 0.5);
  CHECK(mh_accept_probability(1.0, 3.0) == 1.0);
  CHECK(mh_accept_probability(0.4, 0.1) == doctest::Approx(0.25));
}

TEST_CASE("uniform target accepts every proposal") {
  const AngularPDF pdf(8, 8, Eigen::VectorXd::Ones(64));
  ChainState chain = start_chain(pdf, 5);
  const SampleSet s = mh_sample(pdf, 2000, 100, chain);
  CHECK(chain.acceptance_rate() == 1.0);
  CHECK(s.size() == 2000u);
  for (double k : s.pdf) CHECK(k == doctest::Approx(1.0 / (kHalfPi * kTwoPi)));
}

TEST_CASE("chains converge on a bimodal target") {
  const int n = 16;
  Eigen::VectorXd raw(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double t = (i + 0.5) * kHalfPi / n, p = (j + 0.5) * kTwoPi / n;
      raw[i * n + j] = std::exp(-std::pow((t - 0.4) / 0.2, 2) - std::pow((p - 1.0) / 0.5, 2)) +
                       0.7 * std::exp(-std::pow((t - 1.2) / 0.2, 2) - std::pow((p - 4.5) / 0.5, 2));
    }
  }
  const AngularPDF pdf(n, n, raw);
  const SampleSet s = mh_sample(pdf, 100000, 10 * n, 2024);
  CHECK(chain_tv(pdf, s, 8) < 0.05);
  for (double k : s.pdf) CHECK(k > 0.0);
  const SampleSet again = mh_sample(pdf, 100000, 10 * n, 2024);
  CHECK(again.samples.back().theta == s.samples.back().theta);
  CHECK(again.samples.back().phi == s.samples.back().phi);
}

TEST_CASE("seed mixing") {
  CHECK(mix_seed({1, 2, 3}) == mix_seed({1, 2, 3}));
  CHECK(mix_seed({1, 2, 3}) != mix_seed({1, 3, 2}));
}

}
