#include "flowsub/embedding.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace flowsub {

EmbeddingPca embedding_pca(const ObjectEmbedding& phi, int k) {
  if (k < 1 || k > phi.dim) {
    throw std::invalid_argument("embedding_pca: k must be in [1, A]");
  }
  const Eigen::Index pixels = phi.values.rows();
  const Eigen::RowVectorXd mean = phi.values.colwise().mean();
  const Eigen::MatrixXd centered = phi.values.rowwise() - mean;
  const Eigen::MatrixXd covariance =
      centered.transpose() * centered / static_cast<double>(pixels);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(covariance);
  if (eigen.info() != Eigen::Success) {
    throw std::runtime_error("embedding_pca: eigendecomposition failed");
  }

  // Eigen orders eigenvalues ascending; flip to descending.
  EmbeddingPca out;
  out.explained_variance = eigen.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd components = eigen.eigenvectors().rowwise().reverse().leftCols(k);
  for (int j = 0; j < k; ++j) {
    Eigen::Index largest;
    components.col(j).cwiseAbs().maxCoeff(&largest);
    if (components(largest, j) < 0.0) components.col(j) = -components.col(j);
  }

  out.projected = centered * components;
  out.visual.resize(pixels, k);
  constexpr double kZeroVariance = 1e-24;
  for (int j = 0; j < k; ++j) {
    if (out.explained_variance[j] <= kZeroVariance) out.degenerate = true;
    const double lo = out.projected.col(j).minCoeff();
    const double hi = out.projected.col(j).maxCoeff();
    if (hi - lo > 0.0) {
      out.visual.col(j) = (out.projected.col(j).array() - lo) / (hi - lo);
    } else {
      out.visual.col(j).setConstant(0.5);
    }
  }
  return out;
}

ScalarField embedding_gradient_magnitude(const ObjectEmbedding& phi) {
  const int height = phi.shape.height;
  const int width = phi.shape.width;
  ScalarField out = constant_field(phi.shape, 0.0);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const int p = r * width + c;
      double sq = 0.0;
      if (c + 1 < width) sq += (phi.values.row(p + 1) - phi.values.row(p)).squaredNorm();
      if (r + 1 < height) sq += (phi.values.row(p + width) - phi.values.row(p)).squaredNorm();
      out.values[p] = std::sqrt(sq);
    }
  }
  return out;
}

LabelMap segment_from_seeds(const ObjectEmbedding& phi, const std::vector<SeedPoint>& seeds,
                            const BilateralConfig& config) {
  if (seeds.empty()) {
    throw std::invalid_argument("segment_from_seeds: at least one seed required");
  }
  if (config.lambda_spatial < 0.0 || config.lambda_embed < 0.0 ||
      (config.lambda_spatial == 0.0 && config.lambda_embed == 0.0)) {
    throw std::invalid_argument("segment_from_seeds: weights must be nonnegative, not both zero");
  }
  const int height = phi.shape.height;
  const int width = phi.shape.width;
  for (const auto& seed : seeds) {
    if (!(seed.u >= 0.0) || !(seed.u < width) || !(seed.v >= 0.0) || !(seed.v < height)) {
      throw std::invalid_argument("segment_from_seeds: seed position outside the image");
    }
  }

  const double inv_diag_sq = 1.0 / (static_cast<double>(height) * height +
                                    static_cast<double>(width) * width);
  std::vector<Eigen::RowVectorXd> seed_embedding;
  seed_embedding.reserve(seeds.size());
  for (const auto& seed : seeds) {
    const int sc = static_cast<int>(seed.u);
    const int sr = static_cast<int>(seed.v);
    seed_embedding.push_back(phi.at(sr, sc));
  }

  LabelMap out;
  out.shape = phi.shape;
  out.labels.resize(phi.shape.pixel_count());
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const int p = r * width + c;
      double best = std::numeric_limits<double>::infinity();
      int best_label = seeds.front().label;
      for (size_t s = 0; s < seeds.size(); ++s) {
        const double du = (c + 0.5) - seeds[s].u;
        const double dv = (r + 0.5) - seeds[s].v;
        const double score =
            config.lambda_spatial * (du * du + dv * dv) * inv_diag_sq +
            config.lambda_embed * (phi.values.row(p) - seed_embedding[s]).squaredNorm();
        if (score < best) {
          best = score;
          best_label = seeds[s].label;
        }
      }
      out.labels[p] = best_label;
    }
  }
  return out;
}

}  // namespace flowsub
