#pragma once

#include <optional>

#include "flowsub/core.hpp"
#include "flowsub/projection.hpp"

// Interprets projection coefficients. Camera velocities are read off the
// 6-field coefficients by inverting camera_coefficients; recovered
// translations carry the usual scale ambiguity against disparity, so they
// are reported together with the median disparity as a gauge (translation
// times median disparity is scale-invariant). The 8-field family also
// yields a focal-length estimate from the split rotation pairs, and the
// embedding family yields the 3 x A matrix mapping embedding space to
// per-axis apparent translation.

namespace flowsub {

enum class BasisFamily { CameraKnownFocal, CameraUnknownFocal };

struct FocalEstimate {
  double value = 0.0;  // geometric mean of the available pair estimates
  std::optional<double> from_x_pair;  // sqrt(c_R1x / c_R2x)
  std::optional<double> from_y_pair;  // sqrt(c_R1y / c_R2y)
  // Ratio of the two pair estimates when both exist, else 1. The basis
  // cannot enforce equal focal lengths, so this measures how consistently
  // the projected flow respects that assumption.
  double consistency_ratio = 1.0;
};

struct RecoveredMotion {
  CameraMotion camera;
  // Median of the disparity the basis was built from, when known; the
  // gauge for reporting translation magnitudes.
  std::optional<double> disparity_median;
  bool degenerate = false;  // coefficients are a minimum-norm representative
  std::optional<FocalEstimate> focal;
};

/// Reads camera velocity off a camera-family projection. For the unknown
/// focal family, rotations come from the split pairs and the x/y
/// translations are divided by the focal estimate when one is available.
RecoveredMotion recover_camera_motion(const ProjectionResult& result, BasisFamily family,
                                      std::optional<double> disparity_median = std::nullopt);

/// Angular velocity alone; works for any projection whose basis carries
/// the rotation fields (camera or embedding families).
Eigen::Vector3d recover_rotation(const ProjectionResult& result, bool known_focal);

/// Focal length from the split rotation-pair coefficients; absent when the
/// flow carries no usable rotation (near-zero or sign-inconsistent pairs).
std::optional<FocalEstimate> recover_focal(const ProjectionResult& result);

struct RecoveredObjectMotion {
  Eigen::MatrixXd matrix;  // 3 x A; rows are x/y/z apparent translation
  bool degenerate = false;
};

/// Reads the embedding-to-translation matrix off an embedding-family
/// projection ("E{i}.T{axis}" coefficients).
RecoveredObjectMotion recover_object_matrix(const ProjectionResult& result, int embed_dim);

/// Per-pixel apparent translation M * phi(p); 3 x pixel_count.
Eigen::Matrix3Xd per_pixel_translation(const RecoveredObjectMotion& motion,
                                       const ObjectEmbedding& phi);

}  // namespace flowsub
