#include "flowsub/basis.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace flowsub {

namespace {

FlowField from_components(ImageShape shape, const Eigen::ArrayXd& uc, const Eigen::ArrayXd& vc) {
  Eigen::VectorXd data(shape.flat_size());
  for (int p = 0; p < shape.pixel_count(); ++p) {
    data[2 * p] = uc[p];
    data[2 * p + 1] = vc[p];
  }
  return FlowField(shape, std::move(data));
}

FlowField pointwise_scale(const FlowField& field, const Eigen::VectorXd& per_pixel) {
  Eigen::VectorXd data(field.shape.flat_size());
  for (int p = 0; p < field.shape.pixel_count(); ++p) {
    data[2 * p] = field.data[2 * p] * per_pixel[p];
    data[2 * p + 1] = field.data[2 * p + 1] * per_pixel[p];
  }
  return FlowField(field.shape, std::move(data));
}

BasisField make_translational(std::string label, const FlowField& dfree_template,
                              const DisparityMap& d, int embed_index = -1,
                              std::optional<FlowField> embed_template = std::nullopt) {
  BasisField out;
  out.label = std::move(label);
  out.kind = FieldKind::Translational;
  out.embed_index = embed_index;
  out.field = pointwise_scale(dfree_template, d.values);
  out.template_norm = dfree_template.norm();
  out.disparity_template = dfree_template;
  out.embed_template = std::move(embed_template);
  return out;
}

BasisField make_rotational(std::string label, FlowField field, int embed_index = -1,
                           std::optional<FlowField> embed_template = std::nullopt) {
  BasisField out;
  out.label = std::move(label);
  out.kind = FieldKind::Rotational;
  out.embed_index = embed_index;
  out.field = std::move(field);
  out.embed_template = std::move(embed_template);
  return out;
}

}  // namespace

void FlowBasis::add(BasisField field) {
  require_same_shape(shape, field.field.shape, "basis field");
  for (const auto& existing : fields) {
    if (existing.label == field.label) {
      throw std::invalid_argument("duplicate basis field label: " + field.label);
    }
  }
  fields.push_back(std::move(field));
}

std::vector<std::string> FlowBasis::labels() const {
  std::vector<std::string> out;
  out.reserve(fields.size());
  for (const auto& f : fields) out.push_back(f.label);
  return out;
}

const BasisField& FlowBasis::at(const std::string& label) const {
  for (const auto& f : fields) {
    if (f.label == label) return f;
  }
  throw std::invalid_argument("no basis field labeled " + label);
}

std::vector<BasisField> translation_basis(const PixelGrid& grid, const Intrinsics& K,
                                          const DisparityMap& d) {
  require_valid(K);
  require_same_shape(grid.shape, d.shape, "translation basis");
  const ImageShape shape = grid.shape;
  const int n = shape.pixel_count();
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(n);

  const FlowField tx = from_components(shape, Eigen::ArrayXd::Constant(n, K.fx), zero);
  const FlowField ty = from_components(shape, zero, Eigen::ArrayXd::Constant(n, K.fy));
  const FlowField tz = from_components(shape, K.cx - grid.u.array(), K.cy - grid.v.array());

  return {make_translational("Tx", tx, d), make_translational("Ty", ty, d),
          make_translational("Tz", tz, d)};
}

std::vector<BasisField> rotation_basis(const PixelGrid& grid, const Intrinsics& K) {
  require_valid(K);
  const ImageShape shape = grid.shape;
  const Eigen::ArrayXd du = grid.u.array() - K.cx;
  const Eigen::ArrayXd dv = grid.v.array() - K.cy;

  const FlowField rx = from_components(shape, du * dv / K.fy, K.fy + dv.square() / K.fy);
  const FlowField ry = from_components(shape, K.fx + du.square() / K.fx, du * dv / K.fx);
  const FlowField rz = from_components(shape, (K.fx / K.fy) * dv, (K.fy / K.fx) * (-du));

  return {make_rotational("Rx", rx), make_rotational("Ry", ry), make_rotational("Rz", rz)};
}

std::vector<BasisField> rotation_basis_unknown_focal(const PixelGrid& grid,
                                                     const Intrinsics& pp) {
  const ImageShape shape = grid.shape;
  const int n = shape.pixel_count();
  const Eigen::ArrayXd du = grid.u.array() - pp.cx;
  const Eigen::ArrayXd dv = grid.v.array() - pp.cy;
  const Eigen::ArrayXd zero = Eigen::ArrayXd::Zero(n);
  const Eigen::ArrayXd one = Eigen::ArrayXd::Ones(n);

  return {make_rotational("R1x", from_components(shape, zero, one)),
          make_rotational("R2x", from_components(shape, du * dv, dv.square())),
          make_rotational("R1y", from_components(shape, one, zero)),
          make_rotational("R2y", from_components(shape, du.square(), du * dv))};
}

FlowBasis camera_basis(const PixelGrid& grid, const Intrinsics& K, const DisparityMap& d) {
  FlowBasis basis;
  basis.shape = grid.shape;
  for (auto& f : translation_basis(grid, K, d)) basis.add(std::move(f));
  for (auto& f : rotation_basis(grid, K)) basis.add(std::move(f));
  return basis;
}

FlowBasis camera_basis_unknown_focal(const PixelGrid& grid, const Intrinsics& pp,
                                     const DisparityMap& d) {
  Intrinsics unit = pp;
  unit.fx = 1.0;
  unit.fy = 1.0;

  FlowBasis basis;
  basis.shape = grid.shape;
  for (auto& f : translation_basis(grid, unit, d)) basis.add(std::move(f));
  for (auto& f : rotation_basis_unknown_focal(grid, pp)) basis.add(std::move(f));
  // Rz with the focal ratio fixed to 1; a common coefficient absorbs the scale.
  basis.add(std::move(rotation_basis(grid, unit)[2]));
  return basis;
}

namespace {

BasisField mask_field(const ObjectMask& mask, const BasisField& f, int mask_index) {
  BasisField out;
  out.label = "M" + std::to_string(mask_index) + "." + f.label;
  out.kind = f.kind;
  out.embed_index = f.embed_index;
  out.field = pointwise_scale(f.field, mask.values);
  if (f.disparity_template) {
    out.disparity_template = pointwise_scale(*f.disparity_template, mask.values);
    out.template_norm = out.disparity_template->norm();
  }
  if (f.embed_template) {
    out.embed_template = pointwise_scale(*f.embed_template, mask.values);
  }
  return out;
}

}  // namespace

FlowBasis masked_basis(const ObjectMask& mask, const FlowBasis& base, int mask_index) {
  require_same_shape(mask.shape, base.shape, "masked basis");
  FlowBasis out;
  out.shape = base.shape;
  for (const auto& f : base.fields) out.add(mask_field(mask, f, mask_index));
  return out;
}

FlowBasis masked_translation_basis(const ObjectMask& mask, const FlowBasis& base,
                                   int mask_index) {
  require_same_shape(mask.shape, base.shape, "masked basis");
  FlowBasis out;
  out.shape = base.shape;
  for (const auto& f : base.fields) {
    if (f.kind == FieldKind::Translational) out.add(mask_field(mask, f, mask_index));
  }
  return out;
}

FlowBasis embedding_basis(const PixelGrid& grid, const Intrinsics& K, const DisparityMap& d,
                          const ObjectEmbedding& phi, bool known_focal) {
  require_same_shape(grid.shape, phi.shape, "embedding basis");
  require_same_shape(grid.shape, d.shape, "embedding basis");

  Intrinsics eff = K;
  if (!known_focal) {
    eff.fx = 1.0;
    eff.fy = 1.0;
  }
  // Built with d == 1, so each field equals its disparity-free template.
  const std::vector<BasisField> camera_translations = translation_basis(
      grid, eff, DisparityMap(grid.shape, Eigen::VectorXd::Ones(grid.shape.pixel_count())));

  FlowBasis basis;
  basis.shape = grid.shape;
  for (int i = 0; i < phi.dim; ++i) {
    const Eigen::VectorXd channel = phi.values.col(i);
    for (const auto& cam : camera_translations) {
      const FlowField& camera_template = *cam.disparity_template;
      BasisField f = make_translational(
          "E" + std::to_string(i) + "." + cam.label, pointwise_scale(camera_template, channel),
          d, i, pointwise_scale(camera_template, d.values));
      basis.add(std::move(f));
    }
  }
  if (known_focal) {
    for (auto& f : rotation_basis(grid, K)) basis.add(std::move(f));
  } else {
    for (auto& f : rotation_basis_unknown_focal(grid, K)) basis.add(std::move(f));
    Intrinsics unit = K;
    unit.fx = 1.0;
    unit.fy = 1.0;
    basis.add(std::move(rotation_basis(grid, unit)[2]));
  }
  return basis;
}

std::vector<BasisField> object_rotation_fields(const ObjectEmbedding& phi,
                                               const std::vector<BasisField>& rotation_fields) {
  std::vector<BasisField> out;
  out.reserve(static_cast<size_t>(phi.dim) * rotation_fields.size());
  for (int i = 0; i < phi.dim; ++i) {
    const Eigen::VectorXd channel = phi.values.col(i);
    for (const auto& rot : rotation_fields) {
      if (rot.kind != FieldKind::Rotational) {
        throw std::invalid_argument("object_rotation_fields: expected rotational fields");
      }
      require_same_shape(phi.shape, rot.field.shape, "object rotation fields");
      out.push_back(make_rotational("E" + std::to_string(i) + "." + rot.label,
                                    pointwise_scale(rot.field, channel), i, rot.field));
    }
  }
  return out;
}

FlowBasis build_basis(const PixelGrid& grid, const BasisConfig& config, const DisparityMap& d,
                      const ObjectEmbedding* phi) {
  FlowBasis basis;
  if (phi != nullptr) {
    basis = embedding_basis(grid, config.intrinsics, d, *phi, config.known_focal);
    if (config.object_rotations) {
      const std::vector<BasisField> rotations =
          config.known_focal ? rotation_basis(grid, config.intrinsics)
                             : rotation_basis_unknown_focal(grid, config.intrinsics);
      for (auto& f : object_rotation_fields(*phi, rotations)) basis.add(std::move(f));
    }
  } else {
    basis = config.known_focal ? camera_basis(grid, config.intrinsics, d)
                               : camera_basis_unknown_focal(grid, config.intrinsics, d);
  }
  int mask_index = 0;
  for (const auto& mask : config.masks) {
    const FlowBasis whole = config.known_focal
                                ? camera_basis(grid, config.intrinsics, d)
                                : camera_basis_unknown_focal(grid, config.intrinsics, d);
    const FlowBasis masked = config.masked_rotations
                                 ? masked_basis(mask, whole, mask_index)
                                 : masked_translation_basis(mask, whole, mask_index);
    for (const auto& f : masked.fields) basis.add(f);
    ++mask_index;
  }
  return basis;
}

Eigen::Matrix<double, 6, 1> camera_coefficients(const CameraMotion& motion) {
  Eigen::Matrix<double, 6, 1> c;
  c << -motion.translation.x(), -motion.translation.y(), -motion.translation.z(),
      motion.rotation.x(), -motion.rotation.y(), motion.rotation.z();
  return c;
}

Eigen::Matrix<double, 6, 1> scene_motion_coefficients(const CameraMotion& motion) {
  return -camera_coefficients(motion);
}

FlowField combine(const FlowBasis& basis, const Eigen::VectorXd& coefficients) {
  if (coefficients.size() != basis.size()) {
    throw std::invalid_argument("combine: coefficient count does not match basis size");
  }
  require_valid(basis.shape);
  Eigen::VectorXd data = Eigen::VectorXd::Zero(basis.shape.flat_size());
  for (int j = 0; j < basis.size(); ++j) {
    data += coefficients[j] * basis.fields[j].field.data;
  }
  return FlowField(basis.shape, std::move(data));
}

}  // namespace flowsub
