#include "flowsub/projection.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace flowsub {

BasisMatrix assemble(const FlowBasis& basis) {
  if (basis.fields.empty()) {
    throw std::invalid_argument("assemble: empty basis");
  }
  require_valid(basis.shape);

  BasisMatrix out;
  out.shape = basis.shape;
  const int rows = basis.shape.flat_size();
  const int n = basis.size();
  out.columns.resize(rows, n);
  out.scales.resize(n);
  out.labels.reserve(n);

  for (int j = 0; j < n; ++j) {
    const BasisField& f = basis.fields[j];
    require_same_shape(basis.shape, f.field.shape, "assemble");
    if (!f.field.data.allFinite()) {
      throw std::invalid_argument("assemble: non-finite entries in field " + f.label);
    }
    double scale = 1.0;
    if (f.kind == FieldKind::Translational) {
      // Norm-2 rule on the disparity-free template; an identically zero
      // template (e.g. an empty mask) is kept as a zero column for the
      // SVD threshold to drop.
      if (f.template_norm > 0.0) scale = 2.0 / f.template_norm;
    } else {
      const double norm = f.field.norm();
      if (norm > 0.0) scale = 1.0 / norm;
    }
    out.columns.col(j) = scale * f.field.data;
    out.scales[j] = scale;
    out.labels.push_back(f.label);
  }
  return out;
}

SubspaceProjector orthonormalize(const BasisMatrix& matrix, double epsilon, ThresholdMode mode) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
    throw std::invalid_argument("orthonormalize: threshold must be finite and nonnegative");
  }
  if (!matrix.columns.allFinite()) {
    throw std::invalid_argument("orthonormalize: non-finite basis matrix");
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix.columns,
                                        Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw std::runtime_error("orthonormalize: SVD did not converge");
  }

  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cutoff = (mode == ThresholdMode::Relative && sigma.size() > 0)
                            ? epsilon * sigma[0]
                            : epsilon;
  int rank = 0;
  while (rank < sigma.size() && sigma[rank] > cutoff) ++rank;

  SubspaceProjector proj;
  proj.shape = matrix.shape;
  proj.left_vectors = svd.matrixU().leftCols(rank);
  proj.right_vectors = svd.matrixV().leftCols(rank);
  proj.retained_values = sigma.head(rank);
  proj.singular_values = sigma;
  proj.labels = matrix.labels;
  proj.scales = matrix.scales;
  proj.threshold = cutoff;
  return proj;
}

ProjectionResult project(const SubspaceProjector& projector, const FlowField& flow) {
  require_same_shape(projector.shape, flow.shape, "project");

  const Eigen::VectorXd scores = projector.left_vectors.transpose() * flow.data;
  Eigen::VectorXd reconstructed = projector.left_vectors * scores;

  ProjectionResult result;
  result.residual_norm = (flow.data - reconstructed).norm();
  result.reconstructed = FlowField(flow.shape, std::move(reconstructed));
  result.rank = projector.rank();
  result.singular_values = projector.singular_values;
  result.labels = projector.labels;
  result.rank_deficient = projector.rank() < projector.singular_values.size();

  // Minimum-norm coefficients V_s diag(1/sigma) U_s^T flow, mapped back to
  // the unnormalized fields so that sum_j c_j * field_j reproduces the
  // reconstruction exactly.
  const Eigen::VectorXd normalized =
      projector.right_vectors * (scores.array() / projector.retained_values.array()).matrix();
  result.coefficients = projector.scales.asDiagonal() * normalized;
  return result;
}

double flow_reconstruction_loss(const FlowBasis& basis, const FlowField& flow, double epsilon) {
  return project(orthonormalize(assemble(basis), epsilon), flow).residual_norm;
}

DualLossResult dual_reconstruction_loss(const FlowBasis& camera_basis,
                                        const FlowBasis& full_basis, const FlowField& flow,
                                        double epsilon, const DualLossWeights& weights) {
  DualLossResult out;
  out.camera_loss = flow_reconstruction_loss(camera_basis, flow, epsilon);
  out.full_loss = flow_reconstruction_loss(full_basis, flow, epsilon);
  out.total = weights.camera * out.camera_loss + weights.full * out.full_loss;
  return out;
}

}  // namespace flowsub
