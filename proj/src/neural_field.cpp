#include "ntf/neural_field.hpp"

#include <cmath>
#include <random>

#include "ntf/error.hpp"

namespace ntf {

void EncodingConfig::validate() const {
  require(n_freq_pos >= 1 && n_freq_dir >= 1, ErrorCode::kInvalidArgument,
          "encoding needs at least one frequency");
  require(bounds.lo.allFinite() && bounds.hi.allFinite() &&
              (bounds.hi.array() > bounds.lo.array()).all(),
          ErrorCode::kInvalidArgument, "encoding bounds are degenerate");
}

void NetConfig::validate() const {
  encoding.validate();
  require(width >= 1 && depth >= 1 && head_width >= 1,
          ErrorCode::kInvalidArgument, "network sizes must be positive");
  require(skip_after >= 0, ErrorCode::kInvalidArgument,
          "skip_after must be non-negative");
}

int NetConfig::input_dims(int layer) const {
  const int dp = encoding.position_dims();
  if (layer == 0) return dp;
  if (layer < depth) return layer == skip_after ? width + dp : width;
  if (layer == depth) return width;
  if (layer == depth + 1) return width + encoding.direction_dims();
  return head_width;
}

int NetConfig::output_dims(int layer) const {
  if (layer < depth) return width;
  if (layer == depth) return width + 1;
  if (layer == depth + 1) return head_width;
  return 1;
}

std::size_t NetConfig::parameter_count() const {
  std::size_t n = 0;
  for (int l = 0; l < layer_count(); ++l) {
    n += static_cast<std::size_t>(input_dims(l) + 1) * output_dims(l);
  }
  return n;
}

NetParams::NetParams(const NetConfig& config) : config_(config) {
  config_.validate();
  offsets_.resize(static_cast<std::size_t>(config_.layer_count()) + 1);
  std::size_t off = 0;
  for (int l = 0; l < config_.layer_count(); ++l) {
    offsets_[l] = off;
    off += static_cast<std::size_t>(config_.input_dims(l) + 1) *
           config_.output_dims(l);
  }
  offsets_.back() = off;
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(off));
}

std::size_t NetParams::bias_offset(int layer) const {
  return offsets_[layer] + static_cast<std::size_t>(config_.input_dims(layer)) *
                               config_.output_dims(layer);
}

NetParams::MatrixMap NetParams::weights(int layer) const {
  return MatrixMap(values_.data() + weight_offset(layer),
                   config_.output_dims(layer), config_.input_dims(layer));
}

NetParams::VectorMap NetParams::bias(int layer) const {
  return VectorMap(values_.data() + bias_offset(layer),
                   config_.output_dims(layer));
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

double normalize(double v, double lo, double hi, std::uint64_t& clamped) {
  double u = 2.0 * (v - lo) / (hi - lo) - 1.0;
  if (u < -1.0) {
    u = -1.0;
    ++clamped;
  } else if (u > 1.0) {
    u = 1.0;
    ++clamped;
  }
  return u;
}

double wrap_phi(double phi) {
  double p = std::fmod(phi, kTwoPi);
  if (p < 0.0) p += kTwoPi;
  return p;
}

template <typename Out>
void encode_scalar(double u, int n_freq, Out&& out, int offset) {
  // Double-angle recurrence from one sin/cos pair; the error roughly doubles
  // per octave, staying near 1e-13 at ten octaves.
  double s = std::sin(kPi * u);
  double c = std::cos(kPi * u);
  for (int k = 0; k < n_freq; ++k) {
    out[offset + 2 * k] = s;
    out[offset + 2 * k + 1] = c;
    const double s2 = 2.0 * s * c;
    c = (c - s) * (c + s);
    s = s2;
  }
}

void encode_positions(const Eigen::Matrix3Xd& positions,
                      const EncodingConfig& cfg, Eigen::MatrixXd& out,
                      std::uint64_t& clamped) {
  const int L = cfg.n_freq_pos;
  out.resize(cfg.position_dims(), positions.cols());
  for (Eigen::Index i = 0; i < positions.cols(); ++i) {
    double* col = out.col(i).data();
    for (int a = 0; a < 3; ++a) {
      const double u = normalize(positions(a, i), cfg.bounds.lo[a],
                                 cfg.bounds.hi[a], clamped);
      encode_scalar(u, L, col, 2 * L * a);
    }
  }
}

void encode_directions(const Eigen::Matrix2Xd& directions,
                       const EncodingConfig& cfg, Eigen::MatrixXd& out,
                       std::uint64_t& clamped) {
  const int L = cfg.n_freq_dir;
  out.resize(cfg.direction_dims(), directions.cols());
  for (Eigen::Index i = 0; i < directions.cols(); ++i) {
    double* col = out.col(i).data();
    const double ut = normalize(directions(0, i), 0.0, kHalfPi, clamped);
    const double up = normalize(wrap_phi(directions(1, i)), 0.0, kTwoPi, clamped);
    encode_scalar(ut, L, col, 0);
    encode_scalar(up, L, col, 2 * L);
  }
}

}  // namespace

Eigen::VectorXd encode_position(const Vec3& p, const EncodingConfig& cfg,
                                std::uint64_t* clamped) {
  Eigen::MatrixXd out;
  std::uint64_t count = 0;
  encode_positions(Eigen::Matrix3Xd(p), cfg, out, count);
  if (clamped) *clamped += count;
  return out.col(0);
}

Eigen::VectorXd encode_direction(const ViewAngles& d, const EncodingConfig& cfg,
                                 std::uint64_t* clamped) {
  Eigen::Matrix2Xd dir(2, 1);
  dir << d.theta, d.phi;
  Eigen::MatrixXd out;
  std::uint64_t count = 0;
  encode_directions(dir, cfg, out, count);
  if (clamped) *clamped += count;
  return out.col(0);
}

Eigen::VectorXd encode(const FieldQuery& q, const EncodingConfig& cfg) {
  const Eigen::VectorXd p = encode_position(q.position, cfg);
  const Eigen::VectorXd d = encode_direction(q.direction, cfg);
  Eigen::VectorXd out(p.size() + d.size());
  out << p, d;
  return out;
}

NetParams init_params(const NetConfig& config, std::uint64_t seed,
                      double output_bias, double output_scale) {
  NetParams params(config);
  std::mt19937_64 rng(seed);
  Eigen::VectorXd& v = params.values();
  for (int l = 0; l < config.layer_count(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.input_dims(l)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = params.weight_offset(l); i < params.layer_end(l); ++i) {
      v[static_cast<Eigen::Index>(i)] = dist(rng);
    }
  }
  const int head = config.depth;
  const int rho_out = config.depth + 2;
  const auto rows = static_cast<std::size_t>(config.output_dims(head));
  for (std::size_t i = params.weight_offset(head) + config.width;
       i < params.bias_offset(head); i += rows) {
    v[static_cast<Eigen::Index>(i)] *= output_scale;
  }
  for (std::size_t i = params.weight_offset(rho_out); i < params.bias_offset(rho_out); ++i) {
    v[static_cast<Eigen::Index>(i)] *= output_scale;
  }
  v[static_cast<Eigen::Index>(params.bias_offset(head)) + config.width] = output_bias;
  v[static_cast<Eigen::Index>(params.bias_offset(rho_out))] = output_bias;
  return params;
}

// ---------------------------------------------------------------------------
// Network

NeuralField::NeuralField(NetParams params) : params_(std::move(params)) {}

void NeuralField::run(const Eigen::Matrix3Xd& positions,
                      const Eigen::Matrix2Xd* directions,
                      ForwardTape& tape) const {
  const NetConfig& cfg = config();
  const Eigen::Index n = positions.cols();
  std::uint64_t clamped = 0;
  encode_positions(positions, cfg.encoding, tape.enc_pos, clamped);
  tape.density_only = directions == nullptr;
  if (directions) encode_directions(*directions, cfg.encoding, tape.enc_dir, clamped);
  if (clamped) clamped_.fetch_add(clamped);

  const int dp = cfg.encoding.position_dims();
  tape.trunk.resize(static_cast<std::size_t>(cfg.depth));
  for (int l = 0; l < cfg.depth; ++l) {
    const auto W = params_.weights(l);
    Eigen::MatrixXd& h = tape.trunk[l];
    if (l == 0) {
      h.noalias() = W * tape.enc_pos;
    } else if (l == cfg.skip_after) {
      h.noalias() = W.leftCols(cfg.width) * tape.trunk[l - 1];
      h.noalias() += W.rightCols(dp) * tape.enc_pos;
    } else {
      h.noalias() = W * tape.trunk[l - 1];
    }
    h.colwise() += params_.bias(l);
    h = h.cwiseMax(0.0);
  }

  const int head = cfg.depth;
  tape.head.noalias() = params_.weights(head) * tape.trunk.back();
  tape.head.colwise() += params_.bias(head);
  tape.head = tape.head.cwiseMax(0.0);

  if (!directions) return;
  const int hidden = cfg.depth + 1;
  const auto Wh = params_.weights(hidden);
  tape.rho_hidden.noalias() = Wh.leftCols(cfg.width) * tape.head.topRows(cfg.width);
  tape.rho_hidden.noalias() += Wh.rightCols(cfg.encoding.direction_dims()) * tape.enc_dir;
  tape.rho_hidden.colwise() += params_.bias(hidden);
  tape.rho_hidden = tape.rho_hidden.cwiseMax(0.0);

  const int out = cfg.depth + 2;
  tape.rho_out.noalias() = params_.weights(out) * tape.rho_hidden;
  tape.rho_out.array() += params_.bias(out)[0];
  tape.rho_out = tape.rho_out.cwiseMax(0.0);
  (void)n;
}

void NeuralField::forward(const QueryBatch& queries, ForwardTape& tape,
                          FieldValues& out) const {
  run(queries.positions, &queries.directions, tape);
  out.sigma = tape.head.row(config().width).transpose();
  out.rho = tape.rho_out.transpose();
}

void NeuralField::forward_density(const Eigen::Matrix3Xd& positions,
                                  ForwardTape& tape,
                                  Eigen::VectorXd& sigma) const {
  run(positions, nullptr, tape);
  sigma = tape.head.row(config().width).transpose();
}

void NeuralField::evaluate(const QueryBatch& queries, FieldValues& out) const {
  ForwardTape tape;
  forward(queries, tape, out);
}

void NeuralField::density(const Eigen::Matrix3Xd& positions,
                          Eigen::VectorXd& sigma) const {
  ForwardTape tape;
  forward_density(positions, tape, sigma);
}

namespace {

using GradMatrix = Eigen::Map<Eigen::MatrixXd>;
using GradVector = Eigen::Map<Eigen::VectorXd>;

// ReLU derivative applied in place: zero where the activation is not positive.
void relu_backward(Eigen::MatrixXd& grad, const double* activation) {
  double* g = grad.data();
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > 0.0)) g[i] = 0.0;
  }
}

}  // namespace

void NeuralField::backward(const ForwardTape& tape, const Eigen::VectorXd& dsigma,
                           const Eigen::VectorXd& drho,
                           Eigen::VectorXd& grad) const {
  const NetConfig& cfg = config();
  const Eigen::Index n = tape.size();
  require(dsigma.size() == n && (tape.density_only || drho.size() == n),
          ErrorCode::kShapeMismatch, "backward: adjoint size mismatch");
  require(grad.size() == params_.values().size(), ErrorCode::kShapeMismatch,
          "backward: gradient buffer size mismatch");
  auto gW = [&](int l) {
    return GradMatrix(grad.data() + params_.weight_offset(l), cfg.output_dims(l),
                      cfg.input_dims(l));
  };
  auto gb = [&](int l) {
    return GradVector(grad.data() + params_.bias_offset(l), cfg.output_dims(l));
  };

  const int head = cfg.depth;
  Eigen::MatrixXd d_head = Eigen::MatrixXd::Zero(cfg.width + 1, n);
  d_head.row(cfg.width) = dsigma.transpose();

  if (!tape.density_only) {
    const int hidden = cfg.depth + 1;
    const int out = cfg.depth + 2;
    Eigen::MatrixXd d_out = drho.transpose();
    relu_backward(d_out, tape.rho_out.data());
    gW(out).noalias() += d_out * tape.rho_hidden.transpose();
    gb(out)[0] += d_out.sum();
    Eigen::MatrixXd d_hidden = params_.weights(out).transpose() * d_out;
    relu_backward(d_hidden, tape.rho_hidden.data());
    auto gWh = gW(hidden);
    gWh.leftCols(cfg.width).noalias() +=
        d_hidden * tape.head.topRows(cfg.width).transpose();
    gWh.rightCols(cfg.encoding.direction_dims()).noalias() +=
        d_hidden * tape.enc_dir.transpose();
    gb(hidden) += d_hidden.rowwise().sum();
    d_head.topRows(cfg.width).noalias() +=
        params_.weights(hidden).leftCols(cfg.width).transpose() * d_hidden;
  }

  relu_backward(d_head, tape.head.data());
  gW(head).noalias() += d_head * tape.trunk.back().transpose();
  gb(head) += d_head.rowwise().sum();
  Eigen::MatrixXd d = params_.weights(head).transpose() * d_head;

  const int dp = cfg.encoding.position_dims();
  for (int l = cfg.depth - 1; l >= 0; --l) {
    relu_backward(d, tape.trunk[l].data());
    auto g = gW(l);
    gb(l) += d.rowwise().sum();
    if (l == 0) {
      g.noalias() += d * tape.enc_pos.transpose();
      break;
    }
    const auto W = params_.weights(l);
    if (l == cfg.skip_after) {
      g.leftCols(cfg.width).noalias() += d * tape.trunk[l - 1].transpose();
      g.rightCols(dp).noalias() += d * tape.enc_pos.transpose();
      d = W.leftCols(cfg.width).transpose() * d;
    } else {
      g.noalias() += d * tape.trunk[l - 1].transpose();
      d = W.transpose() * d;
    }
  }
}

FieldOutput forward(const NetParams& params, const FieldQuery& q) {
  require(params.values().allFinite(), ErrorCode::kNonFinite,
          "forward: non-finite parameters");
  NeuralField field(params);
  QueryBatch batch;
  batch.resize(1);
  batch.set(0, q.position, q.direction);
  FieldValues v;
  field.evaluate(batch, v);
  return {v.sigma[0], v.rho[0]};
}

Eigen::VectorXd forward_with_grad(const NetParams& params,
                                  const std::vector<FieldQuery>& queries,
                                  const std::vector<FieldOutput>& adjoints) {
  require(!queries.empty(), ErrorCode::kInvalidArgument,
          "forward_with_grad: empty batch");
  require(queries.size() == adjoints.size(), ErrorCode::kShapeMismatch,
          "forward_with_grad: one adjoint per query is required");
  NeuralField field(params);
  QueryBatch batch;
  batch.resize(static_cast<Eigen::Index>(queries.size()));
  Eigen::VectorXd ds(batch.size());
  Eigen::VectorXd dr(batch.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    batch.set(k, queries[i].position, queries[i].direction);
    ds[k] = adjoints[i].sigma;
    dr[k] = adjoints[i].rho;
  }
  ForwardTape tape;
  FieldValues v;
  field.forward(batch, tape, v);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(params.values().size());
  field.backward(tape, ds, dr, grad);
  return grad;
}

}  // namespace ntf
