#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "hideprint/common.hpp"

namespace hideprint::learn {

/// counts[true][predicted].
struct ConfusionMatrix {
  int classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(int num_classes = 0);
  void add(int truth, int predicted);
  std::uint64_t at(int truth, int predicted) const { return counts[std::size_t(truth) * classes + predicted]; }
  std::uint64_t total() const;
  std::uint64_t row_sum(int truth) const;
  double accuracy() const;
  /// One-vs-rest rates per class; 0 where the denominator is empty.
  std::vector<double> false_positive_rates() const;
  std::vector<double> false_negative_rates() const;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int num_classes);

struct RocPoint {
  double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0, 0) to (1, 1), non-decreasing FPR
  double auc = 0.0;
  RocPoint best;  // maximises TPR - FPR
};

/// Higher score = more likely positive. A sample is called positive when its
/// score is >= the threshold. Throws on empty input or a single class.
RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive);

struct Projection2d {
  std::vector<double> x, y;
  double explained[2] = {0.0, 0.0};  // fraction of total variance per component
};

/// Top-two principal components of the rows (n x d, row-major). Signs are
/// fixed so that the largest-magnitude loading of each component is positive.
Projection2d pca_project(std::span<const double> rows, std::size_t n, std::size_t d);

/// Mean silhouette coefficient of 2-D points under the given labels.
double silhouette(const Projection2d& p, std::span<const int> labels);

struct EvalReport {
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> fpr, fnr;
  std::optional<RocCurve> roc;
  std::optional<Projection2d> projection;
};

/// Throws ValidationError on an empty test set.
EvalReport evaluate(std::span<const int> truth, std::span<const int> predicted, int num_classes);

/// Sections: summary, confusion matrix, per-class rates, ROC and projection
/// rows when present.
void write_csv(const std::filesystem::path& path, const EvalReport& report);

}  // namespace hideprint::learn
