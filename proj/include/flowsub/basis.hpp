#pragma once

#include <optional>
#include <string>
#include <vector>

#include "flowsub/core.hpp"

// Analytic flow bases. Camera translation induces disparity-scaled flow,
// camera rotation induces depth-independent flow, and rigid object motion
// is camera motion restricted to a mask. An object embedding generalizes
// masks to soft per-pixel weights.
//
// Field formulas at pixel coordinates (u, v), disparity d, intrinsics
// (fx, fy, cx, cy):
//
//   Tx  = ( d*fx,            0 )
//   Ty  = ( 0,               d*fy )
//   Tz  = ( d*(cx-u),        d*(cy-v) )
//   Rx  = ( (u-cx)(v-cy)/fy, fy + (v-cy)^2/fy )
//   Ry  = ( fx + (u-cx)^2/fx, (u-cx)(v-cy)/fx )
//   Rz  = ( (fx/fy)(v-cy),   (fy/fx)(cx-u) )
//
// When the (assumed equal) focal lengths are unknown, Rx and Ry split into
// focal-free pairs, giving an 8-field family {Tx,Ty,Tz,R1x,R2x,R1y,R2y,Rz}
// with unit focal lengths used wherever one would appear:
//
//   R1x = ( 0, 1 )            R2x = ( (u-cx)(v-cy), (v-cy)^2 )
//   R1y = ( 1, 0 )            R2y = ( (u-cx)^2,     (u-cx)(v-cy) )

namespace flowsub {

enum class FieldKind { Rotational, Translational };

struct BasisField {
  std::string label;
  FieldKind kind = FieldKind::Rotational;
  int embed_index = -1;  // which embedding channel scales this field, -1 if none

  FlowField field;

  // Norm of the field evaluated with d == 1 (translational fields only);
  // drives the norm-2 column normalization during assembly.
  double template_norm = 0.0;

  // field evaluated with d == 1; present on translational fields built
  // in-process (absent after deserialization).
  std::optional<FlowField> disparity_template;

  // field evaluated with the embedding channel == 1; present on
  // embedding-weighted fields built in-process.
  std::optional<FlowField> embed_template;
};

struct FlowBasis {
  ImageShape shape;
  std::vector<BasisField> fields;

  int size() const { return static_cast<int>(fields.size()); }
  void add(BasisField field);
  std::vector<std::string> labels() const;
  const BasisField& at(const std::string& label) const;
};

std::vector<BasisField> translation_basis(const PixelGrid& grid, const Intrinsics& K,
                                          const DisparityMap& d);
std::vector<BasisField> rotation_basis(const PixelGrid& grid, const Intrinsics& K);

/// Focal-free rotation fields {R1x, R2x, R1y, R2y}; only the principal
/// point of `pp` is used.
std::vector<BasisField> rotation_basis_unknown_focal(const PixelGrid& grid, const Intrinsics& pp);

/// 6-field camera basis {Tx,Ty,Tz,Rx,Ry,Rz}.
FlowBasis camera_basis(const PixelGrid& grid, const Intrinsics& K, const DisparityMap& d);

/// 8-field camera basis {Tx,Ty,Tz,R1x,R2x,R1y,R2y,Rz} for unknown (assumed
/// equal) focal lengths. Translation fields and Rz use unit focals, whose
/// scale the coefficients absorb.
FlowBasis camera_basis_unknown_focal(const PixelGrid& grid, const Intrinsics& pp,
                                     const DisparityMap& d);

/// Pointwise-masked copy of a basis; labels gain a "M{k}." prefix.
FlowBasis masked_basis(const ObjectMask& mask, const FlowBasis& base, int mask_index = 0);

/// Translation-only masked fields {m*Tx, m*Ty, m*Tz} selected from `base`.
FlowBasis masked_translation_basis(const ObjectMask& mask, const FlowBasis& base,
                                   int mask_index = 0);

/// Embedding-weighted translation fields {phi_i*Tx, phi_i*Ty, phi_i*Tz}
/// for every channel i, followed by the rotation fields: 3A+3 fields for
/// known focal lengths, 3A+5 otherwise.
FlowBasis embedding_basis(const PixelGrid& grid, const Intrinsics& K, const DisparityMap& d,
                          const ObjectEmbedding& phi, bool known_focal);

/// Optional embedding-weighted copies of the given rotation fields
/// ({phi_i * R.} for every channel); off by default everywhere.
std::vector<BasisField> object_rotation_fields(const ObjectEmbedding& phi,
                                               const std::vector<BasisField>& rotation_fields);

/// One-stop builder covering the camera, masked, and embedding families.
struct BasisConfig {
  bool known_focal = true;
  Intrinsics intrinsics;            // cx, cy only when known_focal is false
  bool object_rotations = false;    // add phi_i-weighted rotation fields
  std::vector<ObjectMask> masks;    // extra per-mask fields
  bool masked_rotations = false;    // masked rotations too, not just translations
};

FlowBasis build_basis(const PixelGrid& grid, const BasisConfig& config, const DisparityMap& d,
                      const ObjectEmbedding* phi = nullptr);

/// Coefficients of the instantaneous flow induced by the camera's own
/// velocity, in {Tx,Ty,Tz,Rx,Ry,Rz} order under this library's axis
/// conventions: (-tx, -ty, -tz, +wx, -wy, +wz).
Eigen::Matrix<double, 6, 1> camera_coefficients(const CameraMotion& motion);

/// Coefficients for a rigid motion of scene content (about the camera
/// origin) seen by a static camera; the exact negation of
/// camera_coefficients.
Eigen::Matrix<double, 6, 1> scene_motion_coefficients(const CameraMotion& motion);

/// Linear combination of basis fields (coefficients in basis order).
FlowField combine(const FlowBasis& basis, const Eigen::VectorXd& coefficients);

}  // namespace flowsub
