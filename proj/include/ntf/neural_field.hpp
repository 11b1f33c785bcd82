#pragma once

// Neural transient field: positional encoding followed by an MLP that maps
// an encoded position to density and, together with an encoded viewing
// direction, to reflectance.
//
// Layer order (also the parameter and checkpoint order):
//   trunk[0 .. depth-1]   width-wide ReLU layers on the encoded position; the
//                         layer at index skip_after also receives the encoded
//                         position again
//   head                  width -> width + 1; rows [0, width) are the feature,
//                         row width is sigma (ReLU on all rows)
//   rho_hidden            (width + direction dims) -> head_width, ReLU
//   rho_out               head_width -> 1, ReLU
// Each layer stores its weight matrix (out x in, column-major) then its bias.

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <vector>

#include "ntf/field.hpp"
#include "ntf/geometry.hpp"

namespace ntf {

struct EncodingConfig {
  int n_freq_pos = 10;
  int n_freq_dir = 10;
  // Positions inside this box map to [-1, 1] per axis.
  Aabb bounds{Vec3(-1.0, -1.0, 0.0), Vec3(1.0, 1.0, 2.0)};

  int position_dims() const { return 2 * n_freq_pos * 3; }
  int direction_dims() const { return 2 * n_freq_dir * 2; }
  void validate() const;
};

struct NetConfig {
  EncodingConfig encoding;
  int width = 256;
  int depth = 8;
  int skip_after = 4;
  int head_width = 128;

  void validate() const;
  int layer_count() const { return depth + 3; }
  int input_dims(int layer) const;
  int output_dims(int layer) const;
  std::size_t parameter_count() const;
};

struct FieldQuery {
  Vec3 position = Vec3::Zero();
  ViewAngles direction;
};

struct FieldOutput {
  double sigma = 0.0;
  double rho = 0.0;
};

// Flat parameter vector plus the config that gives it shape.
class NetParams {
 public:
  NetParams() = default;
  explicit NetParams(const NetConfig& config);

  const NetConfig& config() const { return config_; }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }

  std::size_t weight_offset(int layer) const { return offsets_[layer]; }
  std::size_t bias_offset(int layer) const;
  std::size_t layer_end(int layer) const { return offsets_[layer + 1]; }

  using MatrixMap = Eigen::Map<const Eigen::MatrixXd>;
  using VectorMap = Eigen::Map<const Eigen::VectorXd>;
  MatrixMap weights(int layer) const;
  VectorMap bias(int layer) const;

  friend bool operator==(const NetParams& a, const NetParams& b) {
    return a.values_.size() == b.values_.size() && a.values_ == b.values_;
  }

 private:
  NetConfig config_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd values_;
};

// Sinusoidal features [sin(2^k pi u), cos(2^k pi u)] for k < L, per scalar.
// Coordinates are normalized into [-1, 1] first and clamped; `clamped` is
// incremented once per clamped scalar when non-null.
Eigen::VectorXd encode_position(const Vec3& p, const EncodingConfig& cfg,
                                std::uint64_t* clamped = nullptr);
Eigen::VectorXd encode_direction(const ViewAngles& d, const EncodingConfig& cfg,
                                 std::uint64_t* clamped = nullptr);
// Position features followed by direction features.
Eigen::VectorXd encode(const FieldQuery& q, const EncodingConfig& cfg);

// Fan-in scaled uniform initialization, U(-1/sqrt(in), 1/sqrt(in)) for
// weights and biases alike. The sigma and rho output weights are then scaled
// by `output_scale` and their biases set to `output_bias`, so the ReLU
// outputs start alive almost everywhere instead of dead on random half-spaces.
// Deterministic in (config, seed).
inline constexpr double kDefaultOutputBias = 0.1;
inline constexpr double kDefaultOutputScale = 0.3;
NetParams init_params(const NetConfig& config, std::uint64_t seed,
                      double output_bias = kDefaultOutputBias,
                      double output_scale = kDefaultOutputScale);

// Activations kept for the reverse pass.
struct ForwardTape {
  Eigen::MatrixXd enc_pos;
  Eigen::MatrixXd enc_dir;
  std::vector<Eigen::MatrixXd> trunk;
  Eigen::MatrixXd head;
  Eigen::MatrixXd rho_hidden;
  Eigen::RowVectorXd rho_out;
  bool density_only = false;

  Eigen::Index size() const { return enc_pos.cols(); }
};

class NeuralField final : public Field {
 public:
  explicit NeuralField(NetParams params);
  NeuralField(const NeuralField& other) : Field(other), params_(other.params_) {}

  const NetParams& params() const { return params_; }
  NetParams& params() { return params_; }
  const NetConfig& config() const { return params_.config(); }

  Aabb support() const override { return config().encoding.bounds; }
  void evaluate(const QueryBatch& queries, FieldValues& out) const override;
  void density(const Eigen::Matrix3Xd& positions,
               Eigen::VectorXd& sigma) const override;

  // Forward passes that record activations.
  void forward(const QueryBatch& queries, ForwardTape& tape,
               FieldValues& out) const;
  void forward_density(const Eigen::Matrix3Xd& positions, ForwardTape& tape,
                       Eigen::VectorXd& sigma) const;

  // Accumulates d(sum dsigma * sigma + drho * rho)/d(params) into grad.
  // drho is ignored for density-only tapes.
  void backward(const ForwardTape& tape, const Eigen::VectorXd& dsigma,
                const Eigen::VectorXd& drho, Eigen::VectorXd& grad) const;

  std::uint64_t clamp_count() const { return clamped_.load(); }

 private:
  void run(const Eigen::Matrix3Xd& positions, const Eigen::Matrix2Xd* directions,
           ForwardTape& tape) const;

  NetParams params_;
  mutable std::atomic<std::uint64_t> clamped_{0};
};

// Single-query forward pass. Throws kNonFinite on non-finite parameters.
FieldOutput forward(const NetParams& params, const FieldQuery& q);

// Reverse-mode gradient of sum_i (adjoint_sigma_i * sigma_i +
// adjoint_rho_i * rho_i) with respect to every parameter.
Eigen::VectorXd forward_with_grad(const NetParams& params,
                                  const std::vector<FieldQuery>& queries,
                                  const std::vector<FieldOutput>& adjoints);

}  // namespace ntf
