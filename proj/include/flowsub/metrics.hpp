#pragma once

#include "flowsub/core.hpp"

// Monocular depth evaluation: mean absolute relative error, mean |log10
// ratio|, RMS error, and the three threshold accuracies (fraction of pixels
// with max(p/g, g/p) below 1.25^i). Predictions with a free global scale
// are aligned by the median ratio median(gt/pred) before scoring.

namespace flowsub {

enum class DepthAlignment { None, MedianRatio };

struct DepthEvalReport {
  double rel = 0.0;
  double log10 = 0.0;
  double rms = 0.0;
  double sigma[3] = {0.0, 0.0, 0.0};
  long n_pixels = 0;
  double scale_applied = 1.0;
};

DepthEvalReport evaluate_depth(const ScalarField& pred, const ScalarField& gt,
                               const ObjectMask* valid = nullptr,
                               DepthAlignment alignment = DepthAlignment::MedianRatio);

/// Inverts disparity to depth with a floor that keeps near-zero
/// disparities from blowing up.
ScalarField disparity_to_depth(const DisparityMap& disparity, double floor = 1e-6);

}  // namespace flowsub
