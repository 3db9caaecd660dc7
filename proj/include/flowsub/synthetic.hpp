#pragma once

#include <stdexcept>
#include <vector>

#include "flowsub/basis.hpp"
#include "flowsub/core.hpp"

// Ground-truth scenes and their two-frame flow by exact pinhole
// reprojection: unproject each pixel through the depth map, apply the rigid
// motions (objects about their 3D centroid, then the inverse camera
// motion), and reproject. Flow is defined per source pixel with no
// occlusion reasoning. These exact flows are the independent check for the
// analytic bases: reproject_flow(s) = s * instantaneous_flow + O(s^2).

namespace flowsub {

struct SceneObject {
  ObjectMask mask;
  CameraMotion motion;  // the object's rigid velocity in the camera frame
};

struct Scene {
  ImageShape shape;
  Intrinsics intrinsics;
  ScalarField depth;  // > 0 everywhere
  std::vector<SceneObject> objects;  // masks pairwise disjoint
  CameraMotion camera_motion;

  DisparityMap disparity() const;
};

void require_valid(const Scene& scene);

inline constexpr double kDefaultMotionStep = 1e-2;
inline constexpr double kBackgroundDepth = 10.0;
inline constexpr double kCubeDepth = 2.0;

/// Background plane at depth 10 with the front face of a cube at depth 2
/// covering the center ninth of the image (floor(H/3) x floor(W/3)
/// pixels). The cube region is registered as objects[0] with zero motion.
Scene cube_scene(ImageShape shape, const Intrinsics& K);

/// Fronto-parallel plane only: constant disparity.
Scene plane_scene(ImageShape shape, const Intrinsics& K, double depth = kBackgroundDepth);

/// Background plane plus two disjoint fronto-parallel rectangles at depths
/// 3 and 5 with the given rigid velocities.
Scene two_object_scene(ImageShape shape, const Intrinsics& K, const CameraMotion& first = {},
                       const CameraMotion& second = {});

class ReprojectionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exact finite-displacement flow for all motions scaled by `step`.
/// Throws ReprojectionError if any point lands behind the camera.
FlowField reproject_flow(const Scene& scene, double step);

/// First-order flow: the scene's velocities applied to the analytic basis
/// fields built from the scene's true disparity.
FlowField instantaneous_flow(const Scene& scene);

}  // namespace flowsub
