#include <doctest.h>

#include <random>

#include "flowsub/basis.hpp"
#include "flowsub/gradients.hpp"
#include "flowsub/projection.hpp"
#include "test_support.hpp"

using namespace flowsub;

namespace {

BasisConfig centered_config(ImageShape shape, double f = 4.0, bool known_focal = true) {
  BasisConfig config;
  config.known_focal = known_focal;
  config.intrinsics = Intrinsics{f, f, shape.width / 2.0, shape.height / 2.0};
  return config;
}

}  // namespace

TEST_CASE("in-span flow has zero loss and zero gradient") {
  std::mt19937_64 rng(3);
  const ImageShape shape{6, 6};
  const BasisConfig config = centered_config(shape);
  const DisparityMap d = testing::random_disparity(shape, rng);

  const FlowBasis basis = build_basis(make_grid(shape), config, d);
  Eigen::VectorXd coeff(6);
  for (int i = 0; i < 6; ++i) coeff[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
  const FlowField flow = combine(basis, coeff);

  const LossGradients g = loss_gradients(config, d, nullptr, flow);
  CHECK(g.loss <= 1e-10 * flow.norm());
  CHECK(g.wrt_disparity.values.isZero(0.0));
}

TEST_CASE("constant flow against a single horizontal field is scale invariant") {
  // Basis {Tx} only with constant disparity: the loss is 0 for every d > 0
  // because the span never changes, so dL/dd vanishes. Confirmed against
  // finite differences.
  const ImageShape shape{4, 4};
  const PixelGrid grid = make_grid(shape);
  const Intrinsics K{1.0, 1.0, 2.0, 2.0};
  const DisparityMap d(shape, Eigen::VectorXd::Constant(shape.pixel_count(), 0.8));

  FlowBasis only_tx;
  only_tx.shape = shape;
  only_tx.add(translation_basis(grid, K, d)[0]);

  FlowField flow = zero_flow(shape);
  for (int r = 0; r < shape.height; ++r) {
    for (int c = 0; c < shape.width; ++c) flow.u(r, c) = 0.37;
  }
  CHECK(flow_reconstruction_loss(only_tx, flow) <= 1e-12 * flow.norm());

  // The loss vanishes identically along the scalar family t -> t * d, so
  // its central difference along the uniform direction is zero too.
  const double h = 1e-4;
  const auto scaled_loss = [&](double t) {
    FlowBasis b;
    b.shape = shape;
    b.add(translation_basis(grid, K, DisparityMap(shape, t * d.values))[0]);
    return flow_reconstruction_loss(b, flow);
  };
  CHECK(std::abs(scaled_loss(1.0 + h) - scaled_loss(1.0 - h)) / (2.0 * h) <= 1e-10);

  // The analytic gradient reports the zero (sub)gradient at the minimum.
  BasisConfig config = centered_config(shape, 1.0);
  const LossGradients g = loss_gradients(config, d, nullptr, flow);
  CHECK(g.loss <= 1e-12 * flow.norm());
  CHECK(g.wrt_disparity.values.isZero(0.0));
}

TEST_CASE("analytic gradient matches finite differences on the 8-field family") {
  std::mt19937_64 rng(7);
  const ImageShape shape{8, 8};
  const BasisConfig config = centered_config(shape, 1.0, /*known_focal=*/false);
  const DisparityMap d = testing::random_disparity(shape, rng);
  const FlowField flow = testing::random_flow(shape, rng);

  const LossGradients analytic = loss_gradients(config, d, nullptr, flow);
  const LossGradients fd = finite_difference_gradients(config, d, nullptr, flow);

  const double scale = std::max({analytic.wrt_disparity.values.cwiseAbs().maxCoeff(),
                                 fd.wrt_disparity.values.cwiseAbs().maxCoeff(), 1e-10});
  const double err =
      (analytic.wrt_disparity.values - fd.wrt_disparity.values).cwiseAbs().maxCoeff() / scale;
  CHECK(err <= 1e-4);
}

TEST_CASE("analytic embedding gradient matches finite differences") {
  std::mt19937_64 rng(11);
  const ImageShape shape{6, 6};
  BasisConfig config = centered_config(shape, 3.0);
  const DisparityMap d = testing::random_disparity(shape, rng);
  const ObjectEmbedding phi = testing::random_embedding(shape, 2, rng);
  const FlowField flow = testing::random_flow(shape, rng);

  const LossGradients analytic = loss_gradients(config, d, &phi, flow);
  const LossGradients fd = finite_difference_gradients(config, d, &phi, flow);
  REQUIRE(analytic.wrt_embedding.has_value());
  REQUIRE(fd.wrt_embedding.has_value());

  const double scale =
      std::max({analytic.wrt_embedding->cwiseAbs().maxCoeff(),
                fd.wrt_embedding->cwiseAbs().maxCoeff(),
                analytic.wrt_disparity.values.cwiseAbs().maxCoeff(), 1e-10});
  CHECK((*analytic.wrt_embedding - *fd.wrt_embedding).cwiseAbs().maxCoeff() / scale <= 1e-4);
  CHECK((analytic.wrt_disparity.values - fd.wrt_disparity.values).cwiseAbs().maxCoeff() /
            scale <=
        1e-4);
}

TEST_CASE("object-rotation fields participate in the embedding gradient") {
  std::mt19937_64 rng(13);
  const ImageShape shape{5, 5};
  BasisConfig config = centered_config(shape, 2.0);
  config.object_rotations = true;
  const DisparityMap d = testing::random_disparity(shape, rng);
  const ObjectEmbedding phi = testing::random_embedding(shape, 2, rng);
  const FlowField flow = testing::random_flow(shape, rng);

  const LossGradients analytic = loss_gradients(config, d, &phi, flow);
  const LossGradients fd = finite_difference_gradients(config, d, &phi, flow);
  const double scale = std::max({analytic.wrt_embedding->cwiseAbs().maxCoeff(),
                                 fd.wrt_embedding->cwiseAbs().maxCoeff(), 1e-10});
  CHECK((*analytic.wrt_embedding - *fd.wrt_embedding).cwiseAbs().maxCoeff() / scale <= 1e-4);
}

TEST_CASE("a duplicated column triggers the guard band") {
  std::mt19937_64 rng(17);
  const ImageShape shape{5, 5};
  BasisConfig config = centered_config(shape, 2.0);
  // Two identical masks produce identical columns and an exactly zero
  // singular value, which lies inside the guard band around the threshold.
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(shape.pixel_count());
  for (int p = 0; p < 8; ++p) mask[p] = 1.0;
  config.masks.push_back(ObjectMask(shape, mask));
  config.masks.push_back(ObjectMask(shape, mask));

  const DisparityMap d = testing::random_disparity(shape, rng);
  const FlowField flow = testing::random_flow(shape, rng);
  CHECK_THROWS_AS(loss_gradients(config, d, nullptr, flow), NearThresholdSingularValue);
}

TEST_CASE("translation-only bases have no gradient along global disparity scale") {
  std::mt19937_64 rng(19);
  const ImageShape shape{6, 6};
  const PixelGrid grid = make_grid(shape);
  const Intrinsics K{3.0, 3.0, 3.0, 3.0};
  const DisparityMap d = testing::random_disparity(shape, rng);
  const FlowField flow = testing::random_flow(shape, rng);

  // Assemble the translation-only loss by hand and differentiate it the
  // same way loss_gradients does, then test the scale direction.
  FlowBasis basis;
  basis.shape = shape;
  for (auto& f : translation_basis(grid, K, d)) basis.add(std::move(f));
  const SubspaceProjector projector = orthonormalize(assemble(basis));
  const ProjectionResult result = project(projector, flow);

  Eigen::VectorXd direction = Eigen::VectorXd::Zero(shape.flat_size());
  for (int j = 0; j < basis.size(); ++j) {
    direction += result.coefficients[j] * basis.fields[j].disparity_template->data;
  }
  const Eigen::VectorXd residual = flow.data - result.reconstructed.data;
  double along_scale = 0.0;
  for (int p = 0; p < shape.pixel_count(); ++p) {
    const double g = -(residual[2 * p] * direction[2 * p] +
                       residual[2 * p + 1] * direction[2 * p + 1]) /
                     result.residual_norm;
    along_scale += d.values[p] * g;
  }
  CHECK(std::abs(along_scale) <= 1e-6 * result.residual_norm);
}

TEST_CASE("randomized gradient check stays within tolerance") {
  GradientCheckOptions options;
  options.trials = 30;
  options.max_size = 10;
  options.seed = 99;
  options.threads = 2;
  const GradientCheckSummary summary = gradient_check(options);
  CHECK(summary.trials_run >= 25);
  CHECK(summary.failures == 0);
  CHECK(summary.max_relative_error <= 1e-4);
}

TEST_CASE("disparity regularizer") {
  const ImageShape shape{2, 3};

  SUBCASE("inactive below the cap") {
    const RegularizerTerm term = disparity_regularizer(constant_field(shape, 4.0), 1.0);
    CHECK(term.loss == 0.0);
    CHECK(term.gradient.isZero(0.0));
  }

  SUBCASE("active region") {
    const RegularizerTerm term = disparity_regularizer(constant_field(shape, 7.0), 1.0);
    CHECK(term.loss == doctest::Approx(2.0));
    for (int p = 0; p < shape.pixel_count(); ++p) {
      CHECK(term.gradient[p] == doctest::Approx(1.0 / shape.pixel_count()));
    }
  }

  SUBCASE("weight scales both parts; the kink subgradient is zero") {
    const RegularizerTerm weighted = disparity_regularizer(constant_field(shape, 7.0));
    CHECK(kDefaultRegularizerWeight == 1e-6);
    CHECK(weighted.loss == doctest::Approx(2e-6));
    CHECK(weighted.gradient[0] == doctest::Approx(1e-6 / shape.pixel_count()));

    const RegularizerTerm at_kink =
        disparity_regularizer(constant_field(shape, kDisparityPreactivationCap), 1.0);
    CHECK(at_kink.loss == 0.0);
    CHECK(at_kink.gradient.isZero(0.0));
  }
}

TEST_CASE("embedding regularizer") {
  SUBCASE("unit-norm rows are feasible") {
    Eigen::MatrixXd z(4, 2);
    z << 1, 0, 0, 1, 0.6, 0.8, -1, 0;
    const EmbeddingRegularizerTerm term = embedding_regularizer(z, 1.0);
    CHECK(term.loss == 0.0);
    CHECK(term.gradient.isZero(0.0));
  }

  SUBCASE("squared norm 3 everywhere gives loss 2") {
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(4, 3);
    z.col(0).setConstant(1.0);
    z.col(1).setConstant(1.0);
    z.col(2).setConstant(1.0);  // squared norm 3 per pixel
    const EmbeddingRegularizerTerm term = embedding_regularizer(z, 1.0);
    CHECK(term.loss == doctest::Approx(2.0));
    // Gradient is 2z / HW where active.
    CHECK(term.gradient(0, 0) == doctest::Approx(2.0 / 4.0));
  }

  SUBCASE("zero field is feasible") {
    const EmbeddingRegularizerTerm term = embedding_regularizer(Eigen::MatrixXd::Zero(4, 2));
    CHECK(term.loss == 0.0);
  }

  SUBCASE("nonnegative on random inputs") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd z(6, 3);
      for (int p = 0; p < 6; ++p) {
        for (int i = 0; i < 3; ++i) z(p, i) = dist(rng);
      }
      CHECK(embedding_regularizer(z, 1.0).loss >= 0.0);
    }
  }
}
