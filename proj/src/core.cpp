#include "flowsub/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace flowsub {

void require_valid(const ImageShape& shape) {
  if (shape.height < 1 || shape.width < 1) {
    throw std::invalid_argument("image shape must be at least 1x1, got " +
                                std::to_string(shape.height) + "x" + std::to_string(shape.width));
  }
}

void require_same_shape(const ImageShape& a, const ImageShape& b, const char* what) {
  if (!(a == b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch (" +
                                std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                                std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
  }
}

void require_valid(const Intrinsics& K) {
  if (!(K.fx > 0.0) || !(K.fy > 0.0)) {
    throw std::invalid_argument("focal lengths must be positive");
  }
  if (!std::isfinite(K.fx) || !std::isfinite(K.fy) || !std::isfinite(K.cx) ||
      !std::isfinite(K.cy)) {
    throw std::invalid_argument("intrinsics must be finite");
  }
}

namespace {

void require_size(const ImageShape& shape, Eigen::Index got, Eigen::Index want, const char* what) {
  require_valid(shape);
  if (got != want) {
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(want) +
                                " values, got " + std::to_string(got));
  }
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw std::invalid_argument(std::string(what) + ": non-finite entries");
  }
}

}  // namespace

ScalarField::ScalarField(ImageShape s, Eigen::VectorXd v) : shape(s), values(std::move(v)) {
  require_size(shape, values.size(), shape.pixel_count(), "scalar field");
  require_finite(values, "scalar field");
}

ScalarField constant_field(ImageShape shape, double value) {
  require_valid(shape);
  return ScalarField(shape, Eigen::VectorXd::Constant(shape.pixel_count(), value));
}

DisparityMap::DisparityMap(ImageShape s, Eigen::VectorXd v) : shape(s), values(std::move(v)) {
  require_size(shape, values.size(), shape.pixel_count(), "disparity map");
  require_finite(values, "disparity map");
  if ((values.array() < 0.0).any()) {
    throw std::invalid_argument("disparity map: negative entries");
  }
}

ObjectMask::ObjectMask(ImageShape s, Eigen::VectorXd v) : shape(s), values(std::move(v)) {
  require_size(shape, values.size(), shape.pixel_count(), "object mask");
  if (!((values.array() == 0.0) || (values.array() == 1.0)).all()) {
    throw std::invalid_argument("object mask: entries must be exactly 0 or 1");
  }
}

ObjectEmbedding::ObjectEmbedding(ImageShape s, Eigen::MatrixXd v, double norm_tolerance)
    : shape(s), dim(static_cast<int>(v.cols())), values(std::move(v)) {
  require_valid(shape);
  if (values.rows() != shape.pixel_count()) {
    throw std::invalid_argument("object embedding: row count must equal pixel count");
  }
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("object embedding: dimension must be in [1, " +
                                std::to_string(kMaxDim) + "]");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("object embedding: non-finite entries");
  }
  const Eigen::VectorXd norms = values.rowwise().norm();
  if (((norms.array() - 1.0).abs() > norm_tolerance).any()) {
    throw std::invalid_argument("object embedding: pixel vectors must be unit length");
  }
}

ObjectEmbedding renormalize(ImageShape shape, const Eigen::MatrixXd& raw) {
  require_valid(shape);
  if (raw.rows() != shape.pixel_count()) {
    throw std::invalid_argument("renormalize: row count must equal pixel count");
  }
  Eigen::MatrixXd out = raw;
  for (Eigen::Index p = 0; p < out.rows(); ++p) {
    const double n = out.row(p).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw std::invalid_argument("renormalize: zero or non-finite embedding vector at pixel " +
                                  std::to_string(p));
    }
    out.row(p) /= n;
  }
  return ObjectEmbedding(shape, std::move(out));
}

FlowField::FlowField(ImageShape s, Eigen::VectorXd d) : shape(s), data(std::move(d)) {
  require_size(shape, data.size(), shape.flat_size(), "flow field");
  require_finite(data, "flow field");
}

FlowField zero_flow(ImageShape shape) {
  require_valid(shape);
  return FlowField(shape, Eigen::VectorXd::Zero(shape.flat_size()));
}

Eigen::VectorXd flatten(const FlowField& field) { return field.data; }

FlowField unflatten(ImageShape shape, const Eigen::VectorXd& column) {
  require_valid(shape);
  if (column.size() != shape.flat_size()) {
    throw std::invalid_argument("unflatten: expected " + std::to_string(shape.flat_size()) +
                                " values, got " + std::to_string(column.size()));
  }
  return FlowField(shape, column);
}

PixelGrid make_grid(ImageShape shape) {
  require_valid(shape);
  PixelGrid grid;
  grid.shape = shape;
  grid.u.resize(shape.pixel_count());
  grid.v.resize(shape.pixel_count());
  for (int r = 0; r < shape.height; ++r) {
    for (int c = 0; c < shape.width; ++c) {
      const int p = r * shape.width + c;
      grid.u[p] = c + 0.5;
      grid.v[p] = r + 0.5;
    }
  }
  return grid;
}

double median(const Eigen::VectorXd& values) {
  if (values.size() == 0) {
    throw std::invalid_argument("median of empty vector");
  }
  std::vector<double> v(values.data(), values.data() + values.size());
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 1) {
    return hi;
  }
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

}  // namespace flowsub
