#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vesselnet/volume.hpp"

namespace vesselnet {

// Class 1 is vessel (segmentation) or glaucoma (diagnosis).
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

// Voxelwise; dims must match.
ConfusionCounts confusion_counts(const MaskVolume& pred, const MaskVolume& truth);
// Samplewise over {0,1} labels of equal length.
ConfusionCounts confusion_counts(std::span<const int> pred, std::span<const int> truth);

// 2TP / (2TP + FP + FN); 1.0 when both masks are empty.
double dice(const ConfusionCounts& c);
// TP / (TP + FP + FN); 1.0 when both masks are empty.
double jaccard(const ConfusionCounts& c);

// A metric whose denominator is zero is std::nullopt, never NaN.
struct ClassificationMetrics {
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

ClassificationMetrics classification_metrics(const ConfusionCounts& c);

struct RocPoint {
  double fpr;
  double tpr;
  double threshold;  // scores >= threshold are called positive; +inf at (0,0)
};

struct RocCurve {
  std::vector<RocPoint> points;  // (0,0) first, (1,1) last
  double auc = 0.0;
};

// Sweeps the distinct scores in descending order, one point per tie group,
// and integrates by the trapezoid rule. Ties therefore earn half credit and
// the area equals the Mann-Whitney U statistic / (P * N). Throws
// std::invalid_argument unless both classes are present.
RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels);

std::string roc_points_csv(const RocCurve& curve);
std::string roc_svg(const RocCurve& curve, const std::string& title);

// "NA" for undefined values.
std::string format_metric(const std::optional<double>& v);

}  // namespace vesselnet
