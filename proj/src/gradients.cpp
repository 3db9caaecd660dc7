#include "flowsub/gradients.hpp"

#include <cmath>
#include <random>
#include <thread>
#include <vector>

namespace flowsub {

NearThresholdSingularValue::NearThresholdSingularValue(double value, double thresh, double b)
    : std::runtime_error("singular value " + std::to_string(value) + " lies within " +
                         std::to_string(b) + " of the truncation threshold " +
                         std::to_string(thresh) + "; the loss may be non-smooth here"),
      singular_value(value),
      threshold(thresh),
      band(b) {}

namespace {

double loss_at(const BasisConfig& config, const DisparityMap& d, const ObjectEmbedding* phi,
               const FlowField& observed, double epsilon) {
  const PixelGrid grid = make_grid(d.shape);
  const FlowBasis basis = build_basis(grid, config, d, phi);
  return flow_reconstruction_loss(basis, observed, epsilon);
}

}  // namespace

LossGradients loss_gradients(const BasisConfig& config, const DisparityMap& d,
                             const ObjectEmbedding* phi, const FlowField& observed,
                             const GradientOptions& options) {
  require_same_shape(d.shape, observed.shape, "loss_gradients");
  const PixelGrid grid = make_grid(d.shape);
  const FlowBasis basis = build_basis(grid, config, d, phi);
  const SubspaceProjector projector = orthonormalize(assemble(basis), options.epsilon);

  const double band = options.guard_factor * options.epsilon;
  for (Eigen::Index i = 0; i < projector.singular_values.size(); ++i) {
    const double sv = projector.singular_values[i];
    if (std::abs(sv - options.epsilon) <= band) {
      throw NearThresholdSingularValue(sv, options.epsilon, band);
    }
  }

  const ProjectionResult result = project(projector, observed);
  const int pixels = d.shape.pixel_count();
  const int embed_dim = phi != nullptr ? phi->dim : 0;

  LossGradients out;
  out.loss = result.residual_norm;
  out.wrt_disparity = constant_field(d.shape, 0.0);
  if (phi != nullptr) {
    out.wrt_embedding = Eigen::MatrixXd::Zero(pixels, embed_dim);
  }

  // At an exact zero of the loss the norm is not differentiable but the
  // minimum is attained, so the zero (sub)gradient is returned.
  if (result.residual_norm <= 1e-14 * std::max(1.0, observed.data.norm())) {
    return out;
  }

  const Eigen::VectorXd residual = observed.data - result.reconstructed.data;
  const double inv_loss = 1.0 / result.residual_norm;

  Eigen::VectorXd disparity_direction = Eigen::VectorXd::Zero(d.shape.flat_size());
  Eigen::MatrixXd embed_direction;  // flat_size x A, built on demand
  if (phi != nullptr) {
    embed_direction = Eigen::MatrixXd::Zero(d.shape.flat_size(), embed_dim);
  }

  for (int j = 0; j < basis.size(); ++j) {
    const BasisField& f = basis.fields[j];
    const double c = result.coefficients[j];
    if (f.kind == FieldKind::Translational) {
      if (!f.disparity_template) {
        throw std::logic_error("loss_gradients: basis field lacks its disparity template");
      }
      disparity_direction += c * f.disparity_template->data;
    }
    if (f.embed_index >= 0) {
      if (!f.embed_template) {
        throw std::logic_error("loss_gradients: basis field lacks its embedding template");
      }
      embed_direction.col(f.embed_index) += c * f.embed_template->data;
    }
  }

  for (int p = 0; p < pixels; ++p) {
    out.wrt_disparity.values[p] = -inv_loss * (residual[2 * p] * disparity_direction[2 * p] +
                                               residual[2 * p + 1] * disparity_direction[2 * p + 1]);
  }
  if (phi != nullptr) {
    for (int i = 0; i < embed_dim; ++i) {
      for (int p = 0; p < pixels; ++p) {
        (*out.wrt_embedding)(p, i) =
            -inv_loss * (residual[2 * p] * embed_direction(2 * p, i) +
                         residual[2 * p + 1] * embed_direction(2 * p + 1, i));
      }
    }
  }
  return out;
}

LossGradients finite_difference_gradients(const BasisConfig& config, const DisparityMap& d,
                                          const ObjectEmbedding* phi, const FlowField& observed,
                                          double epsilon, double step_scale, int threads) {
  require_same_shape(d.shape, observed.shape, "finite_difference_gradients");
  const int pixels = d.shape.pixel_count();
  const int embed_dim = phi != nullptr ? phi->dim : 0;

  LossGradients out;
  out.loss = loss_at(config, d, phi, observed, epsilon);
  out.wrt_disparity = constant_field(d.shape, 0.0);
  if (phi != nullptr) {
    out.wrt_embedding = Eigen::MatrixXd::Zero(pixels, embed_dim);
  }

  const int total = pixels + pixels * embed_dim;
  const auto evaluate = [&](int coord) {
    if (coord < pixels) {
      const int p = coord;
      const double h = step_scale * (1.0 + std::abs(d.values[p]));
      Eigen::VectorXd lo = d.values;
      Eigen::VectorXd hi = d.values;
      lo[p] -= h;
      hi[p] += h;
      const double f_lo = loss_at(config, DisparityMap(d.shape, lo), phi, observed, epsilon);
      const double f_hi = loss_at(config, DisparityMap(d.shape, hi), phi, observed, epsilon);
      out.wrt_disparity.values[p] = (f_hi - f_lo) / (2.0 * h);
    } else {
      const int p = (coord - pixels) % pixels;
      const int i = (coord - pixels) / pixels;
      const double h = step_scale * (1.0 + std::abs(phi->values(p, i)));
      Eigen::MatrixXd lo = phi->values;
      Eigen::MatrixXd hi = phi->values;
      lo(p, i) -= h;
      hi(p, i) += h;
      // Perturbed embeddings are slightly off unit length; admit them.
      const ObjectEmbedding phi_lo(phi->shape, std::move(lo), 1.0);
      const ObjectEmbedding phi_hi(phi->shape, std::move(hi), 1.0);
      const double f_lo = loss_at(config, d, &phi_lo, observed, epsilon);
      const double f_hi = loss_at(config, d, &phi_hi, observed, epsilon);
      (*out.wrt_embedding)(p, i) = (f_hi - f_lo) / (2.0 * h);
    }
  };

  threads = std::max(1, threads);
  if (threads == 1) {
    for (int coord = 0; coord < total; ++coord) evaluate(coord);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        for (int coord = t; coord < total; coord += threads) evaluate(coord);
      });
    }
    for (auto& worker : pool) worker.join();
  }
  return out;
}

namespace {

struct CheckProblem {
  BasisConfig config;
  DisparityMap d;
  std::optional<ObjectEmbedding> phi;
  FlowField flow;
};

CheckProblem make_check_problem(std::mt19937_64& rng, const GradientCheckOptions& options) {
  std::uniform_int_distribution<int> size_dist(options.min_size, options.max_size);
  std::uniform_real_distribution<double> disparity_dist(0.2, 2.0);
  std::uniform_real_distribution<double> flow_dist(-1.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  CheckProblem problem;
  const ImageShape shape{size_dist(rng), size_dist(rng)};
  const int pixels = shape.pixel_count();

  problem.config.known_focal = unit(rng) < 0.5;
  problem.config.intrinsics.fx = 0.5 * shape.width * (0.5 + unit(rng));
  problem.config.intrinsics.fy = problem.config.intrinsics.fx * (0.9 + 0.2 * unit(rng));
  problem.config.intrinsics.cx = shape.width / 2.0 + (unit(rng) - 0.5);
  problem.config.intrinsics.cy = shape.height / 2.0 + (unit(rng) - 0.5);

  Eigen::VectorXd d(pixels);
  for (int p = 0; p < pixels; ++p) d[p] = disparity_dist(rng);
  problem.d = DisparityMap(shape, std::move(d));

  const int family = static_cast<int>(rng() % 3);
  if (family == 1) {
    // Masked family: a random rectangle covering at least one pixel.
    Eigen::VectorXd mask = Eigen::VectorXd::Zero(pixels);
    const int r0 = static_cast<int>(rng() % shape.height);
    const int c0 = static_cast<int>(rng() % shape.width);
    const int r1 = r0 + 1 + static_cast<int>(rng() % (shape.height - r0));
    const int c1 = c0 + 1 + static_cast<int>(rng() % (shape.width - c0));
    for (int r = r0; r < r1; ++r) {
      for (int c = c0; c < c1; ++c) mask[r * shape.width + c] = 1.0;
    }
    problem.config.masks.push_back(ObjectMask(shape, std::move(mask)));
    problem.config.masked_rotations = unit(rng) < 0.5;
  } else if (family == 2) {
    const int dim = 2 + static_cast<int>(rng() % 2);
    Eigen::MatrixXd raw(pixels, dim);
    std::uniform_real_distribution<double> entry(0.3, 1.0);
    for (int p = 0; p < pixels; ++p) {
      for (int i = 0; i < dim; ++i) {
        raw(p, i) = entry(rng) * (unit(rng) < 0.5 ? -1.0 : 1.0);
      }
    }
    problem.phi = renormalize(shape, raw);
    problem.config.object_rotations = unit(rng) < 0.25;
  }

  Eigen::VectorXd flow(shape.flat_size());
  for (Eigen::Index i = 0; i < flow.size(); ++i) flow[i] = flow_dist(rng);
  problem.flow = FlowField(shape, std::move(flow));
  return problem;
}

}  // namespace

GradientCheckSummary gradient_check(const GradientCheckOptions& options) {
  GradientCheckSummary summary;
  std::mt19937_64 rng(options.seed);

  for (int trial = 0; trial < options.trials; ++trial) {
    const CheckProblem problem = make_check_problem(rng, options);
    const ObjectEmbedding* phi = problem.phi ? &*problem.phi : nullptr;

    LossGradients analytic;
    try {
      GradientOptions grad_options;
      grad_options.epsilon = options.epsilon;
      analytic = loss_gradients(problem.config, problem.d, phi, problem.flow, grad_options);
    } catch (const NearThresholdSingularValue&) {
      ++summary.trials_skipped;
      continue;
    }
    const LossGradients fd =
        finite_difference_gradients(problem.config, problem.d, phi, problem.flow,
                                    options.epsilon, options.step_scale, options.threads);

    double scale = std::max(analytic.wrt_disparity.values.cwiseAbs().maxCoeff(),
                            fd.wrt_disparity.values.cwiseAbs().maxCoeff());
    if (phi != nullptr) {
      scale = std::max({scale, analytic.wrt_embedding->cwiseAbs().maxCoeff(),
                        fd.wrt_embedding->cwiseAbs().maxCoeff()});
    }
    scale = std::max(scale, 1e-10);

    double worst = 0.0;
    std::string worst_coord;
    const int width = problem.d.shape.width;
    for (int p = 0; p < problem.d.shape.pixel_count(); ++p) {
      const double err =
          std::abs(analytic.wrt_disparity.values[p] - fd.wrt_disparity.values[p]) / scale;
      if (err > worst) {
        worst = err;
        worst_coord = "d(" + std::to_string(p / width) + "," + std::to_string(p % width) + ")";
      }
    }
    if (phi != nullptr) {
      for (int i = 0; i < phi->dim; ++i) {
        for (int p = 0; p < problem.d.shape.pixel_count(); ++p) {
          const double err =
              std::abs((*analytic.wrt_embedding)(p, i) - (*fd.wrt_embedding)(p, i)) / scale;
          if (err > worst) {
            worst = err;
            worst_coord = "phi(" + std::to_string(p) + "," + std::to_string(i) + ")";
          }
        }
      }
    }

    ++summary.trials_run;
    if (worst > options.tolerance) ++summary.failures;
    if (worst > summary.max_relative_error) {
      summary.max_relative_error = worst;
      summary.worst_trial = trial;
      summary.worst_coordinate = worst_coord;
    }
  }
  return summary;
}

RegularizerTerm disparity_regularizer(const ScalarField& z, double weight) {
  const int pixels = z.shape.pixel_count();
  RegularizerTerm out;
  out.gradient = Eigen::VectorXd::Zero(pixels);
  double sum = 0.0;
  for (int p = 0; p < pixels; ++p) {
    const double excess = z.values[p] - kDisparityPreactivationCap;
    if (excess > 0.0) {
      sum += excess;
      out.gradient[p] = weight / pixels;
    }
  }
  out.loss = weight * sum / pixels;
  return out;
}

EmbeddingRegularizerTerm embedding_regularizer(const Eigen::MatrixXd& z, double weight) {
  if (z.rows() == 0) {
    throw std::invalid_argument("embedding_regularizer: empty field");
  }
  if (!z.allFinite()) {
    throw std::invalid_argument("embedding_regularizer: non-finite entries");
  }
  const Eigen::Index pixels = z.rows();
  EmbeddingRegularizerTerm out;
  out.gradient = Eigen::MatrixXd::Zero(z.rows(), z.cols());
  double sum = 0.0;
  for (Eigen::Index p = 0; p < pixels; ++p) {
    const double excess = z.row(p).squaredNorm() - 1.0;
    if (excess > 0.0) {
      sum += excess;
      out.gradient.row(p) = (2.0 * weight / static_cast<double>(pixels)) * z.row(p);
    }
  }
  out.loss = weight * sum / static_cast<double>(pixels);
  return out;
}

}  // namespace flowsub
