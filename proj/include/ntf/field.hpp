#pragma once

#include <Eigen/Core>
#include <functional>

#include "ntf/geometry.hpp"

namespace ntf {

// A batch of field queries: world positions and viewing angles, one column
// per query.
struct QueryBatch {
  Eigen::Matrix3Xd positions;
  Eigen::Matrix2Xd directions;  // rows: theta, phi

  Eigen::Index size() const { return positions.cols(); }
  void resize(Eigen::Index n) {
    positions.resize(3, n);
    directions.resize(2, n);
  }
  void set(Eigen::Index i, const Vec3& p, const ViewAngles& d) {
    positions.col(i) = p;
    directions(0, i) = d.theta;
    directions(1, i) = d.phi;
  }
};

struct FieldValues {
  Eigen::VectorXd sigma;
  Eigen::VectorXd rho;
};

// Anything that maps (x, y, z, theta, phi) to (sigma, rho). Outside
// support() the density is zero and renderers skip the query entirely.
class Field {
 public:
  virtual ~Field() = default;

  virtual Aabb support() const { return Aabb::unbounded(); }
  virtual void evaluate(const QueryBatch& queries, FieldValues& out) const = 0;

  // Density only; the default evaluates the full field.
  virtual void density(const Eigen::Matrix3Xd& positions,
                       Eigen::VectorXd& sigma) const;
};

// Field defined by a plain function, mainly for analytic test fields.
class FunctionField final : public Field {
 public:
  using Fn = std::function<void(const Vec3&, const ViewAngles&, double& sigma,
                                double& rho)>;

  explicit FunctionField(Fn fn, Aabb support = Aabb::unbounded())
      : fn_(std::move(fn)), support_(support) {}

  Aabb support() const override { return support_; }
  void evaluate(const QueryBatch& queries, FieldValues& out) const override;

 private:
  Fn fn_;
  Aabb support_;
};

}  // namespace ntf
