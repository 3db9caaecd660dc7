#include "flowsub/metrics.hpp"

#include <cmath>
#include <vector>

namespace flowsub {

DepthEvalReport evaluate_depth(const ScalarField& pred, const ScalarField& gt,
                               const ObjectMask* valid, DepthAlignment alignment) {
  require_same_shape(pred.shape, gt.shape, "evaluate_depth");
  if (valid != nullptr) {
    require_same_shape(pred.shape, valid->shape, "evaluate_depth mask");
  }

  std::vector<int> picked;
  picked.reserve(pred.shape.pixel_count());
  for (int p = 0; p < pred.shape.pixel_count(); ++p) {
    if (valid == nullptr || valid->values[p] != 0.0) picked.push_back(p);
  }
  if (picked.empty()) {
    throw std::invalid_argument("evaluate_depth: no valid pixels");
  }
  for (const int p : picked) {
    if (!(pred.values[p] > 0.0) || !(gt.values[p] > 0.0)) {
      throw std::invalid_argument("evaluate_depth: nonpositive depth on a valid pixel");
    }
  }

  DepthEvalReport report;
  report.n_pixels = static_cast<long>(picked.size());
  if (alignment == DepthAlignment::MedianRatio) {
    Eigen::VectorXd ratios(picked.size());
    for (size_t i = 0; i < picked.size(); ++i) {
      ratios[static_cast<Eigen::Index>(i)] = gt.values[picked[i]] / pred.values[picked[i]];
    }
    report.scale_applied = median(ratios);
  }

  const double thresholds[3] = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
  double sum_rel = 0.0, sum_log = 0.0, sum_sq = 0.0;
  long within[3] = {0, 0, 0};
  for (const int p : picked) {
    const double pd = report.scale_applied * pred.values[p];
    const double gd = gt.values[p];
    sum_rel += std::abs(pd - gd) / gd;
    sum_log += std::abs(std::log10(pd / gd));
    sum_sq += (pd - gd) * (pd - gd);
    const double ratio = std::max(pd / gd, gd / pd);
    for (int i = 0; i < 3; ++i) {
      if (ratio < thresholds[i]) ++within[i];
    }
  }
  const double n = static_cast<double>(picked.size());
  report.rel = sum_rel / n;
  report.log10 = sum_log / n;
  report.rms = std::sqrt(sum_sq / n);
  for (int i = 0; i < 3; ++i) report.sigma[i] = within[i] / n;
  return report;
}

ScalarField disparity_to_depth(const DisparityMap& disparity, double floor) {
  if (!(floor > 0.0)) {
    throw std::invalid_argument("disparity_to_depth: floor must be positive");
  }
  return ScalarField(disparity.shape, disparity.values.cwiseMax(floor).cwiseInverse());
}

}  // namespace flowsub
