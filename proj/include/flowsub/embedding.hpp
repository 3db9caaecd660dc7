#pragma once

#include <vector>

#include "flowsub/core.hpp"

// Visualization and probing of a per-pixel object embedding: PCA over the
// pixel population, spatial gradient magnitude (which highlights instance
// edges), and nearest-seed segmentation in bilateral space.

namespace flowsub {

struct SeedPoint {
  int label = 0;
  double u = 0.0;  // pixel coordinates, same convention as PixelGrid
  double v = 0.0;
};

struct BilateralConfig {
  // Spatial distances are squared Euclidean in pixels, normalized by the
  // squared image diagonal so the weight is resolution-independent.
  double lambda_spatial = 1.0;
  double lambda_embed = 10.0;
};

struct EmbeddingPca {
  Eigen::MatrixXd projected;           // pixel_count x k component scores
  Eigen::MatrixXd visual;              // scores affinely mapped to [0,1] per channel
  Eigen::VectorXd explained_variance;  // all A variances, descending
  bool degenerate = false;             // some requested component has no variance
};

/// Principal components of the pixel population of phi, k <= A. Component
/// signs are fixed so each component's largest-magnitude loading is
/// positive.
EmbeddingPca embedding_pca(const ObjectEmbedding& phi, int k);

/// Frobenius norm of the forward-difference spatial Jacobian of phi.
ScalarField embedding_gradient_magnitude(const ObjectEmbedding& phi);

struct LabelMap {
  ImageShape shape;
  Eigen::VectorXi labels;  // row-major pixels

  int at(int r, int c) const { return labels[r * shape.width + c]; }
};

/// Assigns each pixel the label of the seed minimizing
/// lambda_spatial * |p - s|^2 / diag^2 + lambda_embed * |phi(p) - phi(s)|^2,
/// ties broken by lowest seed index.
LabelMap segment_from_seeds(const ObjectEmbedding& phi, const std::vector<SeedPoint>& seeds,
                            const BilateralConfig& config = {});

}  // namespace flowsub
