#include "hideprint/learn/metrics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace hideprint::learn {

ConfusionMatrix::ConfusionMatrix(int num_classes)
    : classes(num_classes), counts(std::size_t(num_classes) * std::size_t(std::max(num_classes, 0)), 0) {}

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= classes || predicted < 0 || predicted >= classes)
    throw ValidationError("confusion matrix: class index out of range");
  ++counts[std::size_t(truth) * classes + predicted];
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::uint64_t ConfusionMatrix::row_sum(int truth) const {
  std::uint64_t s = 0;
  for (int p = 0; p < classes; ++p) s += at(truth, p);
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::uint64_t n = total();
  if (n == 0) return 0.0;
  std::uint64_t hit = 0;
  for (int c = 0; c < classes; ++c) hit += at(c, c);
  return double(hit) / double(n);
}

std::vector<double> ConfusionMatrix::false_positive_rates() const {
  std::vector<double> out(std::size_t(classes), 0.0);
  const std::uint64_t n = total();
  for (int c = 0; c < classes; ++c) {
    std::uint64_t fp = 0;
    for (int t = 0; t < classes; ++t)
      if (t != c) fp += at(t, c);
    const std::uint64_t negatives = n - row_sum(c);
    out[std::size_t(c)] = negatives ? double(fp) / double(negatives) : 0.0;
  }
  return out;
}

std::vector<double> ConfusionMatrix::false_negative_rates() const {
  std::vector<double> out(std::size_t(classes), 0.0);
  for (int c = 0; c < classes; ++c) {
    const std::uint64_t positives = row_sum(c);
    out[std::size_t(c)] = positives ? double(positives - at(c, c)) / double(positives) : 0.0;
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted,
                                 int num_classes) {
  if (truth.size() != predicted.size()) throw ValidationError("confusion matrix: length mismatch");
  ConfusionMatrix m(num_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return m;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.empty() || scores.size() != positive.size())
    throw ValidationError("roc_curve: need equally long, non-empty scores and labels");
  const std::size_t n = scores.size();
  const auto pos = std::size_t(std::count(positive.begin(), positive.end(), true));
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) throw ValidationError("roc_curve: need both classes");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < n;) {
    const double thr = scores[order[i]];
    while (i < n && scores[order[i]] == thr) {
      positive[order[i]] ? ++tp : ++fp;
      ++i;
    }
    roc.points.push_back({double(fp) / double(neg), double(tp) / double(pos), thr});
  }
  roc.best = roc.points.front();
  for (std::size_t i = 1; i < roc.points.size(); ++i) {
    const auto& a = roc.points[i - 1];
    const auto& b = roc.points[i];
    roc.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    if (b.tpr - b.fpr > roc.best.tpr - roc.best.fpr) roc.best = b;
  }
  return roc;
}

Projection2d pca_project(std::span<const double> rows, std::size_t n, std::size_t d) {
  if (n < 3) throw ValidationError("pca_project: need at least 3 samples");
  if (d < 1 || rows.size() != n * d) throw ValidationError("pca_project: shape mismatch");
  using Mat = Eigen::MatrixXd;
  Mat X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      rows.data(), Eigen::Index(n), Eigen::Index(d));
  X.rowwise() -= X.colwise().mean();
  const double total = X.squaredNorm();

  // Loadings (d x 2) and eigenvalues, via the smaller of the two Gram matrices.
  Mat V(Eigen::Index(d), 2);
  V.setZero();
  double lambda[2] = {0.0, 0.0};
  const int comps = int(std::min<std::size_t>(2, std::min(n, d)));
  if (d <= n) {
    Eigen::SelfAdjointEigenSolver<Mat> es(X.transpose() * X);
    for (int c = 0; c < comps; ++c) {
      const Eigen::Index k = Eigen::Index(d) - 1 - c;
      lambda[c] = std::max(0.0, es.eigenvalues()(k));
      V.col(c) = es.eigenvectors().col(k);
    }
  } else {
    Eigen::SelfAdjointEigenSolver<Mat> es(X * X.transpose());
    for (int c = 0; c < comps; ++c) {
      const Eigen::Index k = Eigen::Index(n) - 1 - c;
      lambda[c] = std::max(0.0, es.eigenvalues()(k));
      if (lambda[c] > 0.0) V.col(c) = X.transpose() * es.eigenvectors().col(k) / std::sqrt(lambda[c]);
    }
  }
  const double tiny = 1e-12 * std::max(total, 1e-300);
  Projection2d p;
  for (int c = 0; c < 2; ++c) {
    if (lambda[c] <= tiny) {
      V.col(c).setZero();
      lambda[c] = 0.0;
      continue;
    }
    Eigen::Index arg;
    V.col(c).cwiseAbs().maxCoeff(&arg);
    if (V(arg, c) < 0.0) V.col(c) = -V.col(c);
    p.explained[c] = total > 0.0 ? lambda[c] / total : 0.0;
  }
  const Mat S = X * V;
  p.x.resize(n);
  p.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    p.x[i] = S(Eigen::Index(i), 0);
    p.y[i] = S(Eigen::Index(i), 1);
  }
  return p;
}

double silhouette(const Projection2d& p, std::span<const int> labels) {
  const std::size_t n = p.x.size();
  if (labels.size() != n || n < 2) throw ValidationError("silhouette: shape mismatch");
  const int k = 1 + *std::max_element(labels.begin(), labels.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> dist(std::size_t(k), 0.0);
    std::vector<std::size_t> cnt(std::size_t(k), 0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist[std::size_t(labels[j])] += std::hypot(p.x[i] - p.x[j], p.y[i] - p.y[j]);
      ++cnt[std::size_t(labels[j])];
    }
    const auto own = std::size_t(labels[i]);
    if (cnt[own] == 0) continue;  // singleton cluster scores 0
    const double a = dist[own] / double(cnt[own]);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < std::size_t(k); ++c)
      if (c != own && cnt[c] > 0) b = std::min(b, dist[c] / double(cnt[c]));
    if (std::isfinite(b) && std::max(a, b) > 0.0) sum += (b - a) / std::max(a, b);
  }
  return sum / double(n);
}

EvalReport evaluate(std::span<const int> truth, std::span<const int> predicted, int num_classes) {
  if (truth.empty()) throw ValidationError("evaluate: empty test set");
  EvalReport r;
  r.confusion = confusion_matrix(truth, predicted, num_classes);
  r.accuracy = r.confusion.accuracy();
  r.fpr = r.confusion.false_positive_rates();
  r.fnr = r.confusion.false_negative_rates();
  return r;
}

void write_csv(const std::filesystem::path& path, const EvalReport& r) {
  std::ofstream os(path);
  if (!os) throw RuntimeFailure("write_csv: cannot open " + path.string());
  os.precision(10);
  os << "section,key,value\n";
  os << "summary,accuracy," << r.accuracy << "\n";
  os << "summary,classes," << r.confusion.classes << "\n";
  if (r.roc) os << "summary,auc," << r.roc->auc << "\n";
  os << "confusion,true,predicted,count\n";
  for (int t = 0; t < r.confusion.classes; ++t)
    for (int p = 0; p < r.confusion.classes; ++p)
      os << "confusion," << t << ',' << p << ',' << r.confusion.at(t, p) << "\n";
  os << "rates,class,fpr,fnr\n";
  for (std::size_t c = 0; c < r.fpr.size(); ++c) os << "rates," << c << ',' << r.fpr[c] << ',' << r.fnr[c] << "\n";
  if (r.roc) {
    os << "roc,fpr,tpr,threshold\n";
    for (const auto& pt : r.roc->points) os << "roc," << pt.fpr << ',' << pt.tpr << ',' << pt.threshold << "\n";
    os << "roc_best," << r.roc->best.fpr << ',' << r.roc->best.tpr << ',' << r.roc->best.threshold << "\n";
  }
  if (r.projection) {
    os << "projection,index,x,y\n";
    for (std::size_t i = 0; i < r.projection->x.size(); ++i)
      os << "projection," << i << ',' << r.projection->x[i] << ',' << r.projection->y[i] << "\n";
  }
  if (!os) throw RuntimeFailure("write_csv: write failed for " + path.string());
}

}  // namespace hideprint::learn
