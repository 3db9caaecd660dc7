#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

// Shared field, camera and grid types used by every other flowsub module.
//
// Conventions, fixed once and relied on everywhere:
//  - pixel (u,v) coordinates are sample centers: u = column + 0.5, v = row + 0.5
//  - camera axes: +x right, +y down, +z forward (into the scene)
//  - a flow field flattens to a 2HW column vector, row-major over pixels,
//    with the (u,v) components interleaved per pixel

namespace flowsub {

struct ImageShape {
  int height = 0;
  int width = 0;

  int pixel_count() const { return height * width; }
  int flat_size() const { return 2 * height * width; }
  bool operator==(const ImageShape&) const = default;
};

void require_valid(const ImageShape& shape);
void require_same_shape(const ImageShape& a, const ImageShape& b, const char* what);

/// Pinhole parameters. fx, fy in pixels; the principal point may lie
/// outside the image rectangle.
struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

void require_valid(const Intrinsics& K);

/// Rigid velocity: translation in scene units per frame, rotation as an
/// angular-velocity vector in radians per frame (right-handed about the
/// camera axes above).
struct CameraMotion {
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  Eigen::Vector3d rotation = Eigen::Vector3d::Zero();
};

/// Per-pixel scalar, row-major. `values[r*W + c]` is pixel (row r, col c).
struct ScalarField {
  ImageShape shape;
  Eigen::VectorXd values;

  ScalarField() = default;
  ScalarField(ImageShape s, Eigen::VectorXd v);

  double at(int r, int c) const { return values[r * shape.width + c]; }
  double& at(int r, int c) { return values[r * shape.width + c]; }
};

ScalarField constant_field(ImageShape shape, double value);

/// Per-pixel inverse depth, d >= 0 and finite everywhere.
struct DisparityMap {
  ImageShape shape;
  Eigen::VectorXd values;

  DisparityMap() = default;
  DisparityMap(ImageShape s, Eigen::VectorXd v);

  double at(int r, int c) const { return values[r * shape.width + c]; }
};

/// Binary per-pixel mask; values are exactly 0 or 1 (stored as doubles so
/// they can be used directly in pointwise products).
struct ObjectMask {
  ImageShape shape;
  Eigen::VectorXd values;

  ObjectMask() = default;
  ObjectMask(ImageShape s, Eigen::VectorXd v);

  bool at(int r, int c) const { return values[r * shape.width + c] != 0.0; }
  int area() const { return static_cast<int>(values.sum()); }
};

/// Per-pixel unit vector in an A-dimensional embedding space, A in
/// [1, 16] (6 covers a handful of movers plus the background).
/// Row p of `values` is the embedding of pixel p (row-major pixel order).
struct ObjectEmbedding {
  static constexpr double kNormTolerance = 1e-6;
  static constexpr int kDefaultDim = 6;
  static constexpr int kMaxDim = 16;

  ImageShape shape;
  int dim = 0;
  Eigen::MatrixXd values;  // pixel_count x dim

  ObjectEmbedding() = default;
  // A wider tolerance admits slightly off-unit vectors, e.g. numerically
  // perturbed embeddings inside a finite-difference probe.
  ObjectEmbedding(ImageShape s, Eigen::MatrixXd v, double norm_tolerance = kNormTolerance);

  Eigen::RowVectorXd at(int r, int c) const { return values.row(r * shape.width + c); }
};

/// Normalize each pixel's embedding vector to unit length. Throws if any
/// pixel vector is numerically zero.
ObjectEmbedding renormalize(ImageShape shape, const Eigen::MatrixXd& raw);

/// Per-pixel 2-vector (du, dv) in pixels. `data` holds the canonical
/// flattened layout described at the top of this header, so flatten() is
/// just a copy.
struct FlowField {
  ImageShape shape;
  Eigen::VectorXd data;  // 2 * pixel_count, interleaved (u, v)

  FlowField() = default;
  FlowField(ImageShape s, Eigen::VectorXd d);

  double u(int r, int c) const { return data[2 * (r * shape.width + c)]; }
  double v(int r, int c) const { return data[2 * (r * shape.width + c) + 1]; }
  double& u(int r, int c) { return data[2 * (r * shape.width + c)]; }
  double& v(int r, int c) { return data[2 * (r * shape.width + c) + 1]; }

  double norm() const { return data.norm(); }
};

FlowField zero_flow(ImageShape shape);

Eigen::VectorXd flatten(const FlowField& field);
FlowField unflatten(ImageShape shape, const Eigen::VectorXd& column);

/// Sample-center coordinate arrays for every pixel, row-major.
/// u[p] = column + 0.5, v[p] = row + 0.5.
struct PixelGrid {
  ImageShape shape;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

PixelGrid make_grid(ImageShape shape);

/// Median of the coefficients (average of the two middle values for even
/// sizes). Throws on an empty vector.
double median(const Eigen::VectorXd& values);

}  // namespace flowsub
