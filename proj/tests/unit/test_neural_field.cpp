#include <cmath>
#include <random>

#include "doctest.h"
#include "ntf/error.hpp"
#include "ntf/neural_field.hpp"

using namespace ntf;

namespace {

NetConfig small_config() {
  NetConfig c;
  c.width = 16;
  c.depth = 4;
  c.skip_after = 2;
  c.head_width = 8;
  c.encoding.n_freq_pos = 4;
  c.encoding.n_freq_dir = 3;
  c.encoding.bounds = {Vec3(-0.5, -0.5, 0.1), Vec3(0.5, 0.5, 0.9)};
  return c;
}

std::vector<FieldQuery> random_queries(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FieldQuery> q(n);
  for (auto& x : q) {
    x.position = Vec3(u(rng) - 0.5, u(rng) - 0.5, 0.1 + 0.8 * u(rng));
    x.direction = {kHalfPi * u(rng), kTwoPi * u(rng)};
  }
  return q;
}

// Independent straight-line evaluation of the documented architecture.
FieldOutput reference_forward(const NetParams& p, const FieldQuery& q) {
  const NetConfig& c = p.config();
  const Eigen::VectorXd& v = p.values();
  std::size_t off = 0;
  auto layer = [&](int in, int out, const Eigen::VectorXd& x) {
    Eigen::VectorXd y(out);
    for (int r = 0; r < out; ++r) {
      double s = v[static_cast<Eigen::Index>(off + static_cast<std::size_t>(in) * out + r)];
      for (int k = 0; k < in; ++k) {
        s += v[static_cast<Eigen::Index>(off + static_cast<std::size_t>(k) * out + r)] * x[k];
      }
      y[r] = std::max(0.0, s);
    }
    off += static_cast<std::size_t>(in + 1) * out;
    return y;
  };
  auto enc = [](const std::vector<double>& us, int L) {
    Eigen::VectorXd e(2 * L * us.size());
    int i = 0;
    for (double u : us) {
      for (int k = 0; k < L; ++k) {
        e[i++] = std::sin(std::ldexp(kPi, k) * u);
        e[i++] = std::cos(std::ldexp(kPi, k) * u);
      }
    }
    return e;
  };
  const Aabb& b = c.encoding.bounds;
  std::vector<double> up;
  for (int a = 0; a < 3; ++a) {
    up.push_back(2.0 * (q.position[a] - b.lo[a]) / (b.hi[a] - b.lo[a]) - 1.0);
  }
  const Eigen::VectorXd ep = enc(up, c.encoding.n_freq_pos);
  const Eigen::VectorXd ed =
      enc({q.direction.theta / kHalfPi * 2.0 - 1.0, q.direction.phi / kTwoPi * 2.0 - 1.0},
          c.encoding.n_freq_dir);
  Eigen::VectorXd h = ep;
  for (int l = 0; l < c.depth; ++l) {
    if (l == c.skip_after && l > 0) {
      Eigen::VectorXd cat(h.size() + ep.size());
      cat << h, ep;
      h = cat;
    }
    h = layer(static_cast<int>(h.size()), c.width, h);
  }
  const Eigen::VectorXd head = layer(c.width, c.width + 1, h);
  Eigen::VectorXd cat(c.width + ed.size());
  cat << head.head(c.width), ed;
  const Eigen::VectorXd hidden = layer(static_cast<int>(cat.size()), c.head_width, cat);
  const Eigen::VectorXd out = layer(c.head_width, 1, hidden);
  return {head[c.width], out[0]};
}

}  // namespace

TEST_SUITE("neural-field") {

TEST_CASE("parameter count of the reference architecture") {
  NetConfig c;  // 10 frequencies, eight 256-wide layers, skip at four
  CHECK(c.encoding.position_dims() == 60);
  CHECK(c.encoding.direction_dims() == 40);
  CHECK(c.parameter_count() == 595714u);
  CHECK(NetParams(c).size() == 595714u);
}

TEST_CASE("encoding") {
  EncodingConfig e;
  e.bounds = {Vec3(-1, -1, -1), Vec3(1, 1, 1)};
  const Eigen::VectorXd z = encode_position(Vec3::Zero(), e);
  REQUIRE(z.size() == 60);
  for (int i = 0; i < 60; i += 2) {
    CHECK(z[i] == 0.0);
    CHECK(z[i + 1] == 1.0);
  }
  std::uint64_t clamped = 0;
  const Eigen::VectorXd a = encode_position(Vec3(0.3, -2.0, 0.1), e, &clamped);
  CHECK(clamped == 1);
  CHECK(a == encode_position(Vec3(0.3, -2.0, 0.1), e));
  CHECK(encode_direction({0.2, 1.0}, e).size() == 40);
  CHECK(encode({Vec3::Zero(), {0.2, 1.0}}, e).size() == 100);
  for (int k = 0; k < 10; ++k) {
    CHECK(a[2 * k] == doctest::Approx(std::sin(std::ldexp(kPi, k) * 0.3)).epsilon(1e-11));
  }
}

TEST_CASE("initialization") {
  const NetConfig c = small_config();
  CHECK(init_params(c, 4) == init_params(c, 4));
  CHECK_FALSE(init_params(c, 4) == init_params(c, 5));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NetParams p = init_params(c, seed);
    int alive = 0;
    for (const auto& q : random_queries(1000, 2)) {
      const FieldOutput o = forward(p, q);
      CHECK(std::isfinite(o.sigma));
      CHECK(std::isfinite(o.rho));
      CHECK(o.sigma >= 0.0);
      CHECK(o.rho >= 0.0);
      alive += o.sigma > 0.0 && o.rho > 0.0;
    }
    // Outputs start positive nearly everywhere so every region gets gradient.
    CHECK(alive >= 900);
  }
}

TEST_CASE("zero output weights give zero outputs") {
  const NetConfig c = small_config();
  NetParams p = init_params(c, 1, 0.0);
  const int head = c.depth;
  const int out = c.depth + 2;
  for (std::size_t i = p.weight_offset(out); i < p.layer_end(out); ++i) {
    p.values()[static_cast<Eigen::Index>(i)] = 0.0;
  }
  for (int in = 0; in <= c.input_dims(head); ++in) {
    // sigma row of the head layer, weights and bias
    const std::size_t idx =
        in < c.input_dims(head)
            ? p.weight_offset(head) + static_cast<std::size_t>(in) * (c.width + 1) + c.width
            : p.bias_offset(head) + c.width;
    p.values()[static_cast<Eigen::Index>(idx)] = 0.0;
  }
  for (const auto& q : random_queries(20, 3)) {
    const FieldOutput o = forward(p, q);
    CHECK(o.sigma == 0.0);
    CHECK(o.rho == 0.0);
  }
}

TEST_CASE("density ignores the viewing direction") {
  const NeuralField f(init_params(small_config(), 9));
  QueryBatch a, b;
  a.resize(50);
  b.resize(50);
  const auto qs = random_queries(50, 4);
  for (int i = 0; i < 50; ++i) {
    a.set(i, qs[i].position, {0.1, 0.2});
    b.set(i, qs[i].position, {1.4, 5.0});
  }
  FieldValues va, vb;
  f.evaluate(a, va);
  f.evaluate(b, vb);
  CHECK(va.sigma == vb.sigma);
  Eigen::VectorXd d;
  f.density(a.positions, d);
  CHECK(d == va.sigma);
}

TEST_CASE("forward matches a straight-line evaluation") {
  const NetParams p = init_params(small_config(), 21);
  for (const auto& q : random_queries(10, 5)) {
    const FieldOutput a = forward(p, q);
    const FieldOutput b = reference_forward(p, q);
    CHECK(std::abs(a.sigma - b.sigma) < 1e-12);
    CHECK(std::abs(a.rho - b.rho) < 1e-12);
  }
  NetParams bad = p;
  bad.values()[3] = std::nan("");
  CHECK_THROWS_AS(forward(bad, random_queries(1, 1)[0]), Error);
}

TEST_CASE("reverse-mode gradient matches central differences") {
  const NetParams p = init_params(small_config(), 33);
  const auto qs = random_queries(1, 6);
  const std::vector<FieldOutput> adj{{0.7, -1.3}};
  const Eigen::VectorXd g = forward_with_grad(p, qs, adj);
  const double h = 1e-4;
  std::size_t checked = 0;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.values().size(); ++i) {
    NetParams a = p, b = p;
    a.values()[i] += h;
    b.values()[i] -= h;
    const FieldOutput fa = forward(a, qs[0]);
    const FieldOutput fb = forward(b, qs[0]);
    const double fd =
        (0.7 * (fa.sigma - fb.sigma) - 1.3 * (fa.rho - fb.rho)) / (2.0 * h);
    const double err = std::abs(g[i] - fd) / std::max({std::abs(g[i]), std::abs(fd), 1e-6});
    worst = std::max(worst, err);
    ++checked;
  }
  CHECK(checked == p.size());
  CHECK(worst < 1e-4);
}

TEST_CASE("gradient structure") {
  const NetConfig c = small_config();
  const NetParams p = init_params(c, 8);
  const auto qs = random_queries(5, 7);
  const Eigen::VectorXd zero =
      forward_with_grad(p, qs, std::vector<FieldOutput>(5, {0.0, 0.0}));
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd gs =
      forward_with_grad(p, qs, std::vector<FieldOutput>(5, {1.0, 0.0}));
  for (std::size_t i = p.weight_offset(c.depth + 1); i < p.size(); ++i) {
    CHECK(gs[static_cast<Eigen::Index>(i)] == 0.0);
  }
  CHECK_THROWS_AS(forward_with_grad(p, qs, std::vector<FieldOutput>(4)), Error);
}

TEST_CASE("out-of-range positions are clamped and counted") {
  const NeuralField f(init_params(small_config(), 1));
  QueryBatch q;
  q.resize(2);
  q.set(0, Vec3(0.0, 0.0, 0.5), {0.1, 0.1});
  q.set(1, Vec3(3.0, 0.0, 0.5), {0.1, 0.1});
  FieldValues v;
  f.evaluate(q, v);
  CHECK(f.clamp_count() == 1);
}

}
