#include "vesselnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vesselnet/io.hpp"

namespace vesselnet {

ConfusionCounts confusion_counts(const MaskVolume& pred, const MaskVolume& truth) {
  if (!(pred.dims() == truth.dims())) {
    throw std::invalid_argument("confusion_counts: prediction dims " + pred.dims().to_string() +
                                " differ from truth dims " + truth.dims().to_string());
  }
  ConfusionCounts c;
  const auto p = pred.voxels();
  const auto t = truth.voxels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const unsigned key = (p[i] << 1) | t[i];
    switch (key) {
      case 3:
        ++c.tp;
        break;
      case 2:
        ++c.fp;
        break;
      case 1:
        ++c.fn;
        break;
      default:
        ++c.tn;
    }
  }
  return c;
}

ConfusionCounts confusion_counts(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw std::invalid_argument("confusion_counts: " + std::to_string(pred.size()) + " predictions vs " +
                                std::to_string(truth.size()) + " labels");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if ((pred[i] != 0 && pred[i] != 1) || (truth[i] != 0 && truth[i] != 1)) {
      throw std::invalid_argument("confusion_counts: labels must be 0 or 1");
    }
    if (pred[i] && truth[i]) ++c.tp;
    else if (pred[i]) ++c.fp;
    else if (truth[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double dice(const ConfusionCounts& c) {
  const std::uint64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

double jaccard(const ConfusionCounts& c) {
  const std::uint64_t denom = c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(denom);
}

ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(c.tp + c.tn, c.total()), ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp)};
}

RocCurve roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: scores and labels differ in length");
  std::uint64_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) ++pos;
    else if (labels[i] == 0) ++neg;
    else throw std::invalid_argument("roc_auc: labels must be 0 or 1");
    if (std::isnan(scores[i])) throw std::invalid_argument("roc_auc: NaN score");
  }
  if (pos == 0 || neg == 0) throw std::invalid_argument("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::uint64_t tp = 0, fp = 0;
  // Twice the trapezoid area in (count x count) units keeps the sum exact.
  std::uint64_t area2 = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    std::uint64_t gp = 0, gn = 0;
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      if (labels[order[i]] == 1) ++gp;
      else ++gn;
    }
    area2 += gn * (2 * tp + gp);
    tp += gp;
    fp += gn;
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  curve.auc = static_cast<double>(area2) / static_cast<double>(2 * pos * neg);
  return curve;
}

std::string roc_points_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : curve.points) out += format_number(p.fpr) + "," + format_number(p.tpr) + "\n";
  return out;
}

std::string roc_svg(const RocCurve& curve, const std::string& title) {
  constexpr double size = 360.0, margin = 40.0;
  auto px = [&](double f) { return margin + f * size; };
  auto py = [&](double t) { return margin + (1.0 - t) * size; };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * margin << "\" height=\""
     << size + 2 * margin << "\">\n";
  os << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << size << "\" height=\"" << size
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << px(0) << "\" y1=\"" << py(0) << "\" x2=\"" << px(1) << "\" y2=\"" << py(1)
     << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (i) os << ' ';
    os << format_number(px(curve.points[i].fpr)) << ',' << format_number(py(curve.points[i].tpr));
  }
  os << "\"/>\n";
  os << "<text x=\"" << margin << "\" y=\"" << margin - 12 << "\" font-family=\"sans-serif\" font-size=\"14\">"
     << title << " (AUC " << format_number(std::round(curve.auc * 1000.0) / 1000.0) << ")</text>\n";
  os << "<text x=\"" << px(0.5) << "\" y=\"" << py(0) + 28
     << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">false positive rate</text>\n";
  os << "<text x=\"" << margin - 24 << "\" y=\"" << py(0.5) << "\" font-family=\"sans-serif\" font-size=\"12\""
     << " text-anchor=\"middle\" transform=\"rotate(-90 " << margin - 24 << ' ' << py(0.5)
     << ")\">true positive rate</text>\n";
  os << "</svg>\n";
  return os.str();
}

std::string format_metric(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

}  // namespace vesselnet
