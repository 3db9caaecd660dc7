#pragma once

#include <string>
#include <vector>

#include "flowsub/basis.hpp"
#include "flowsub/core.hpp"

// Projection of an observed flow onto the span of a basis. The basis is
// assembled into a 2HW x n matrix with rotational columns normalized to
// norm 1 and translational columns scaled so their disparity-free template
// has norm 2, then orthonormalized by SVD, discarding singular values at or
// below a threshold. The reconstruction is U_s U_s^T flow and the loss is
// the Euclidean norm of what the subspace cannot explain.

namespace flowsub {

inline constexpr double kDefaultSingularThreshold = 1e-5;

enum class ThresholdMode { Absolute, Relative };

struct BasisMatrix {
  ImageShape shape;
  Eigen::MatrixXd columns;  // 2HW x n, normalized
  std::vector<std::string> labels;
  Eigen::VectorXd scales;  // column j equals scales[j] * (original field j)
};

BasisMatrix assemble(const FlowBasis& basis);

/// Retained singular triplets of an assembled basis; enough to both apply
/// the projector and recover least-squares coefficients.
struct SubspaceProjector {
  ImageShape shape;
  Eigen::MatrixXd left_vectors;     // U_s, 2HW x r
  Eigen::MatrixXd right_vectors;    // V_s, n x r
  Eigen::VectorXd retained_values;  // r
  Eigen::VectorXd singular_values;  // all n, descending
  std::vector<std::string> labels;
  Eigen::VectorXd scales;
  double threshold = kDefaultSingularThreshold;

  int rank() const { return static_cast<int>(left_vectors.cols()); }
  int dropped() const { return static_cast<int>(singular_values.size()) - rank(); }
};

/// Thin SVD of the basis matrix, keeping directions with singular value
/// strictly greater than the threshold (absolute by default; relative
/// multiplies the threshold by the largest singular value).
SubspaceProjector orthonormalize(const BasisMatrix& matrix,
                                 double epsilon = kDefaultSingularThreshold,
                                 ThresholdMode mode = ThresholdMode::Absolute);

struct ProjectionResult {
  FlowField reconstructed;
  double residual_norm = 0.0;
  // Minimum-norm least-squares coefficients mapped back to the original
  // (pre-normalization) basis fields, in basis order.
  Eigen::VectorXd coefficients;
  int rank = 0;
  Eigen::VectorXd singular_values;
  std::vector<std::string> labels;
  bool rank_deficient = false;
};

ProjectionResult project(const SubspaceProjector& projector, const FlowField& flow);

/// assemble + orthonormalize + project, returning only the loss.
double flow_reconstruction_loss(const FlowBasis& basis, const FlowField& flow,
                                double epsilon = kDefaultSingularThreshold);

/// Two-solve loss: one projection against a camera-only basis, one against
/// the full basis, combined with fixed weights.
struct DualLossWeights {
  double camera = 0.5;
  double full = 1.0;
};

struct DualLossResult {
  double camera_loss = 0.0;
  double full_loss = 0.0;
  double total = 0.0;
};

DualLossResult dual_reconstruction_loss(const FlowBasis& camera_basis, const FlowBasis& full_basis,
                                        const FlowField& flow,
                                        double epsilon = kDefaultSingularThreshold,
                                        const DualLossWeights& weights = {});

}  // namespace flowsub
