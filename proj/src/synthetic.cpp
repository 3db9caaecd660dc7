#include "flowsub/synthetic.hpp"

#include <Eigen/Geometry>

#include <cmath>

namespace flowsub {

DisparityMap Scene::disparity() const {
  return DisparityMap(shape, depth.values.cwiseInverse());
}

void require_valid(const Scene& scene) {
  require_valid(scene.shape);
  require_valid(scene.intrinsics);
  require_same_shape(scene.shape, scene.depth.shape, "scene depth");
  if ((scene.depth.values.array() <= 0.0).any()) {
    throw std::invalid_argument("scene: depth must be positive everywhere");
  }
  Eigen::VectorXd coverage = Eigen::VectorXd::Zero(scene.shape.pixel_count());
  for (const auto& object : scene.objects) {
    require_same_shape(scene.shape, object.mask.shape, "scene object mask");
    coverage += object.mask.values;
  }
  if ((coverage.array() > 1.0).any()) {
    throw std::invalid_argument("scene: object masks overlap");
  }
}

namespace {

ObjectMask rectangle_mask(ImageShape shape, int r0, int c0, int rows, int cols) {
  Eigen::VectorXd values = Eigen::VectorXd::Zero(shape.pixel_count());
  for (int r = r0; r < r0 + rows; ++r) {
    for (int c = c0; c < c0 + cols; ++c) {
      values[r * shape.width + c] = 1.0;
    }
  }
  return ObjectMask(shape, std::move(values));
}

void stamp_depth(ScalarField& depth, const ObjectMask& mask, double value) {
  for (int p = 0; p < depth.shape.pixel_count(); ++p) {
    if (mask.values[p] != 0.0) depth.values[p] = value;
  }
}

Eigen::Matrix3d rotation_matrix(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

Eigen::Vector3d unproject(const Intrinsics& K, double u, double v, double z) {
  return {(u - K.cx) * z / K.fx, (v - K.cy) * z / K.fy, z};
}

Eigen::Vector3d mask_centroid(const Scene& scene, const ObjectMask& mask) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  int count = 0;
  for (int r = 0; r < scene.shape.height; ++r) {
    for (int c = 0; c < scene.shape.width; ++c) {
      const int p = r * scene.shape.width + c;
      if (mask.values[p] == 0.0) continue;
      sum += unproject(scene.intrinsics, c + 0.5, r + 0.5, scene.depth.values[p]);
      ++count;
    }
  }
  return count > 0 ? Eigen::Vector3d(sum / count) : Eigen::Vector3d::Zero();
}

}  // namespace

Scene cube_scene(ImageShape shape, const Intrinsics& K) {
  require_valid(shape);
  require_valid(K);
  Scene scene;
  scene.shape = shape;
  scene.intrinsics = K;
  scene.depth = constant_field(shape, kBackgroundDepth);

  const int rows = shape.height / 3;
  const int cols = shape.width / 3;
  const ObjectMask cube =
      rectangle_mask(shape, (shape.height - rows) / 2, (shape.width - cols) / 2, rows, cols);
  stamp_depth(scene.depth, cube, kCubeDepth);
  scene.objects.push_back({cube, CameraMotion{}});
  return scene;
}

Scene plane_scene(ImageShape shape, const Intrinsics& K, double depth) {
  require_valid(shape);
  require_valid(K);
  if (!(depth > 0.0)) {
    throw std::invalid_argument("plane_scene: depth must be positive");
  }
  Scene scene;
  scene.shape = shape;
  scene.intrinsics = K;
  scene.depth = constant_field(shape, depth);
  return scene;
}

Scene two_object_scene(ImageShape shape, const Intrinsics& K, const CameraMotion& first,
                       const CameraMotion& second) {
  require_valid(shape);
  require_valid(K);
  Scene scene;
  scene.shape = shape;
  scene.intrinsics = K;
  scene.depth = constant_field(shape, kBackgroundDepth);

  const int rows = std::max(1, shape.height / 4);
  const int cols = std::max(1, shape.width / 4);
  const ObjectMask a = rectangle_mask(shape, shape.height / 6, shape.width / 8, rows, cols);
  const ObjectMask b =
      rectangle_mask(shape, shape.height / 2, (5 * shape.width) / 8, rows, cols);
  stamp_depth(scene.depth, a, 3.0);
  stamp_depth(scene.depth, b, 5.0);
  scene.objects.push_back({a, first});
  scene.objects.push_back({b, second});
  require_valid(scene);
  return scene;
}

FlowField reproject_flow(const Scene& scene, double step) {
  require_valid(scene);

  std::vector<Eigen::Matrix3d> object_rotation(scene.objects.size());
  std::vector<Eigen::Vector3d> object_center(scene.objects.size());
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    object_rotation[i] = rotation_matrix(step * scene.objects[i].motion.rotation);
    object_center[i] = mask_centroid(scene, scene.objects[i].mask);
  }
  const Eigen::Matrix3d camera_rotation = rotation_matrix(step * scene.camera_motion.rotation);
  const Eigen::Vector3d camera_center = step * scene.camera_motion.translation;

  const Intrinsics& K = scene.intrinsics;
  FlowField flow = zero_flow(scene.shape);
  for (int r = 0; r < scene.shape.height; ++r) {
    for (int c = 0; c < scene.shape.width; ++c) {
      const int p = r * scene.shape.width + c;
      const double u = c + 0.5;
      const double v = r + 0.5;
      Eigen::Vector3d point = unproject(K, u, v, scene.depth.values[p]);

      for (size_t i = 0; i < scene.objects.size(); ++i) {
        if (scene.objects[i].mask.values[p] == 0.0) continue;
        point = object_rotation[i] * (point - object_center[i]) + object_center[i] +
                step * scene.objects[i].motion.translation;
        break;  // masks are disjoint
      }
      point = camera_rotation.transpose() * (point - camera_center);

      if (!(point.z() > 0.0)) {
        throw ReprojectionError("reproject_flow: pixel (" + std::to_string(r) + "," +
                                std::to_string(c) + ") moved behind the camera");
      }
      flow.u(r, c) = K.fx * point.x() / point.z() + K.cx - u;
      flow.v(r, c) = K.fy * point.y() / point.z() + K.cy - v;
    }
  }
  return flow;
}

FlowField instantaneous_flow(const Scene& scene) {
  require_valid(scene);
  const PixelGrid grid = make_grid(scene.shape);
  const DisparityMap d = scene.disparity();
  const FlowBasis camera = camera_basis(grid, scene.intrinsics, d);

  FlowField flow = combine(camera, camera_coefficients(scene.camera_motion));
  int index = 0;
  for (const auto& object : scene.objects) {
    const Eigen::Vector3d center = mask_centroid(scene, object.mask);
    // Rigid velocity about the centroid, rewritten about the origin.
    CameraMotion about_origin;
    about_origin.rotation = object.motion.rotation;
    about_origin.translation = object.motion.translation - object.motion.rotation.cross(center);

    const FlowBasis masked = masked_basis(object.mask, camera, index++);
    flow.data += combine(masked, scene_motion_coefficients(about_origin)).data;
  }
  return flow;
}

}  // namespace flowsub
