#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "flowsub/basis.hpp"
#include "flowsub/core.hpp"
#include "flowsub/projection.hpp"

// Gradients of the flow-reconstruction loss with respect to the disparity
// map and the object embedding, plus the clamp-style regularizer terms.
//
// With residual r = flow - reconstruction, loss L = |r|, and column scales
// frozen (the loss is exactly invariant to per-column scaling while the
// retained rank is stable), the derivative along any basis-matrix direction
// A is  dL = -(r^T A c) / L  where c are the least-squares coefficients.
// Basis columns are linear in the disparity and in each embedding channel,
// so the per-pixel gradients reduce to pointwise products of r with
// coefficient-weighted templates.

namespace flowsub {

/// Raised when a singular value lies within the guard band of the
/// truncation threshold: the retained rank may change under an
/// infinitesimal perturbation, making the loss locally non-smooth.
class NearThresholdSingularValue : public std::runtime_error {
 public:
  NearThresholdSingularValue(double value, double threshold, double band);

  double singular_value;
  double threshold;
  double band;
};

struct GradientOptions {
  double epsilon = kDefaultSingularThreshold;
  double guard_factor = 10.0;  // band half-width = guard_factor * epsilon
};

struct LossGradients {
  double loss = 0.0;
  ScalarField wrt_disparity;                      // dL/dd per pixel
  std::optional<Eigen::MatrixXd> wrt_embedding;   // dL/dphi, pixel_count x A
};

/// Analytic gradients of flow_reconstruction_loss for the basis described
/// by `config` (embedding family when `phi` is non-null).
LossGradients loss_gradients(const BasisConfig& config, const DisparityMap& d,
                             const ObjectEmbedding* phi, const FlowField& observed,
                             const GradientOptions& options = {});

/// Central-difference gradients of the same loss; the independent check
/// for loss_gradients. Steps are scaled per coordinate. Coordinates may be
/// evaluated on `threads` workers; the result does not depend on the count.
LossGradients finite_difference_gradients(const BasisConfig& config, const DisparityMap& d,
                                          const ObjectEmbedding* phi, const FlowField& observed,
                                          double epsilon = kDefaultSingularThreshold,
                                          double step_scale = 1e-4, int threads = 1);

/// Seeded randomized comparison of loss_gradients against the
/// finite-difference oracle over the camera, masked, and embedding basis
/// families. A trial's error is max_i |a_i - f_i| normalized by the larger
/// gradient magnitude. Guard-band trials are skipped and counted.
struct GradientCheckOptions {
  int trials = 100;
  int min_size = 4;
  int max_size = 12;
  std::uint64_t seed = 7;
  double tolerance = 1e-4;
  double epsilon = kDefaultSingularThreshold;
  double step_scale = 1e-4;
  int threads = 1;
};

struct GradientCheckSummary {
  int trials_run = 0;
  int trials_skipped = 0;
  int failures = 0;
  double max_relative_error = 0.0;
  int worst_trial = -1;
  std::string worst_coordinate;

  bool passed(double tolerance) const {
    return trials_run > 0 && max_relative_error <= tolerance;
  }
};

GradientCheckSummary gradient_check(const GradientCheckOptions& options = {});

inline constexpr double kDefaultRegularizerWeight = 1e-6;
inline constexpr double kDisparityPreactivationCap = 5.0;

/// Hinge penalty on pre-activation disparity: weight * mean(max(0, z - 5)).
/// The subgradient at the kink is taken as 0.
struct RegularizerTerm {
  double loss = 0.0;
  Eigen::VectorXd gradient;  // per pixel
};

RegularizerTerm disparity_regularizer(const ScalarField& z,
                                      double weight = kDefaultRegularizerWeight);

/// Hinge penalty on pre-normalization embedding length:
/// weight * mean(max(0, |z|^2 - 1)), gradient 2z where active.
struct EmbeddingRegularizerTerm {
  double loss = 0.0;
  Eigen::MatrixXd gradient;  // pixel_count x A
};

EmbeddingRegularizerTerm embedding_regularizer(const Eigen::MatrixXd& z,
                                               double weight = kDefaultRegularizerWeight);

}  // namespace flowsub
