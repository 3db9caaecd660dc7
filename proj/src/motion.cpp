#include "flowsub/motion.hpp"

#include <cmath>
#include <map>
#include <string>

namespace flowsub {

namespace {

std::map<std::string, double> coefficient_map(const ProjectionResult& result) {
  if (static_cast<Eigen::Index>(result.labels.size()) != result.coefficients.size()) {
    throw std::invalid_argument("projection result: label/coefficient size mismatch");
  }
  std::map<std::string, double> out;
  for (size_t j = 0; j < result.labels.size(); ++j) {
    out[result.labels[j]] = result.coefficients[j];
  }
  return out;
}

double get(const std::map<std::string, double>& coeffs, const std::string& label) {
  const auto it = coeffs.find(label);
  if (it == coeffs.end()) {
    throw std::invalid_argument("projection result lacks basis field " + label);
  }
  return it->second;
}

// Solve w from the pair (c1, c2) = (w*f, w/f): w = sign(c1)*sqrt(c1*c2).
double rotation_from_pair(double c1, double c2) {
  const double product = c1 * c2;
  if (product <= 0.0) return 0.0;
  return std::copysign(std::sqrt(product), c1);
}

}  // namespace

Eigen::Vector3d recover_rotation(const ProjectionResult& result, bool known_focal) {
  const auto coeffs = coefficient_map(result);
  if (known_focal) {
    // Invert camera_coefficients: (cRx, cRy, cRz) = (wx, -wy, wz).
    return {get(coeffs, "Rx"), -get(coeffs, "Ry"), get(coeffs, "Rz")};
  }
  const double wx = rotation_from_pair(get(coeffs, "R1x"), get(coeffs, "R2x"));
  const double wy = -rotation_from_pair(get(coeffs, "R1y"), get(coeffs, "R2y"));
  return {wx, wy, get(coeffs, "Rz")};
}

RecoveredMotion recover_camera_motion(const ProjectionResult& result, BasisFamily family,
                                      std::optional<double> disparity_median) {
  const auto coeffs = coefficient_map(result);
  RecoveredMotion out;
  out.degenerate = result.rank_deficient;
  out.disparity_median = disparity_median;

  if (family == BasisFamily::CameraKnownFocal) {
    // Invert camera_coefficients: (cTx, cTy, cTz) = (-tx, -ty, -tz).
    out.camera.translation =
        Eigen::Vector3d(-get(coeffs, "Tx"), -get(coeffs, "Ty"), -get(coeffs, "Tz"));
    out.camera.rotation = recover_rotation(result, true);
    return out;
  }

  out.focal = recover_focal(result);
  out.camera.rotation = recover_rotation(result, false);

  // Translation fields use unit focals, so the x/y coefficients absorb the
  // true focal length; undo it when an estimate exists.
  const double f = out.focal ? out.focal->value : 1.0;
  out.camera.translation =
      Eigen::Vector3d(-get(coeffs, "Tx") / f, -get(coeffs, "Ty") / f, -get(coeffs, "Tz"));
  return out;
}

std::optional<FocalEstimate> recover_focal(const ProjectionResult& result) {
  const auto coeffs = coefficient_map(result);
  const double floor = 1e-9 * (1.0 + result.coefficients.cwiseAbs().maxCoeff());

  const auto pair_estimate = [floor](double c1, double c2) -> std::optional<double> {
    if (std::abs(c1) <= floor || std::abs(c2) <= floor) return std::nullopt;
    if (c1 * c2 <= 0.0) return std::nullopt;  // a real focal has matching signs
    return std::sqrt(c1 / c2);
  };

  FocalEstimate est;
  est.from_x_pair = pair_estimate(get(coeffs, "R1x"), get(coeffs, "R2x"));
  est.from_y_pair = pair_estimate(get(coeffs, "R1y"), get(coeffs, "R2y"));
  if (!est.from_x_pair && !est.from_y_pair) return std::nullopt;

  if (est.from_x_pair && est.from_y_pair) {
    est.value = std::sqrt(*est.from_x_pair * *est.from_y_pair);
    est.consistency_ratio = *est.from_y_pair / *est.from_x_pair;
  } else {
    est.value = est.from_x_pair ? *est.from_x_pair : *est.from_y_pair;
  }
  return est;
}

RecoveredObjectMotion recover_object_matrix(const ProjectionResult& result, int embed_dim) {
  if (embed_dim < 1) {
    throw std::invalid_argument("recover_object_matrix: embedding dimension must be positive");
  }
  const auto coeffs = coefficient_map(result);
  RecoveredObjectMotion out;
  out.degenerate = result.rank_deficient;
  out.matrix.resize(3, embed_dim);
  const char* axes[3] = {"Tx", "Ty", "Tz"};
  for (int i = 0; i < embed_dim; ++i) {
    for (int a = 0; a < 3; ++a) {
      out.matrix(a, i) = get(coeffs, "E" + std::to_string(i) + "." + axes[a]);
    }
  }
  return out;
}

Eigen::Matrix3Xd per_pixel_translation(const RecoveredObjectMotion& motion,
                                       const ObjectEmbedding& phi) {
  if (motion.matrix.cols() != phi.dim) {
    throw std::invalid_argument("per_pixel_translation: embedding dimension mismatch");
  }
  return motion.matrix * phi.values.transpose();
}

}  // namespace flowsub
