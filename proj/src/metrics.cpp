#include "crest/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crest/errors.hpp"

namespace crest {

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) throw InvalidArgument("confusion shape mismatch");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  return *this;
}

long ConfusionMatrix::row_total(std::size_t truth) const {
  long s = 0;
  for (std::size_t j = 0; j < num_classes_; ++j) s += at(truth, j);
  return s;
}

long ConfusionMatrix::col_total(std::size_t pred) const {
  long s = 0;
  for (std::size_t i = 0; i < num_classes_; ++i) s += at(i, pred);
  return s;
}

long ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths,
                          std::size_t num_classes) {
  if (preds.size() != truths.size()) throw InvalidArgument("prediction/truth length mismatch");
  ConfusionMatrix cm(num_classes);
  const auto in_range = [num_classes](int c) {
    return c >= 0 && static_cast<std::size_t>(c) < num_classes;
  };
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (!in_range(preds[i]) || !in_range(truths[i])) {
      throw InvalidArgument("class index out of range at position " + std::to_string(i));
    }
    cm.add(static_cast<std::size_t>(truths[i]), static_cast<std::size_t>(preds[i]));
  }
  return cm;
}

PerClassStats per_class_precision_recall(const ConfusionMatrix& cm) {
  const std::size_t n = cm.num_classes();
  PerClassStats s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                  std::vector<bool>(n, false), std::vector<bool>(n, false),
                  std::vector<long>(n, 0), std::vector<long>(n, 0)};
  for (std::size_t l = 0; l < n; ++l) {
    const long tp = cm.at(l, l);
    s.n_true[l] = cm.row_total(l);
    s.n_pred[l] = cm.col_total(l);
    if (s.n_true[l] > 0) {
      s.recall[l] = static_cast<double>(tp) / static_cast<double>(s.n_true[l]);
      s.recall_defined[l] = true;
    }
    if (s.n_pred[l] > 0) {
      s.precision[l] = static_cast<double>(tp) / static_cast<double>(s.n_pred[l]);
      s.precision_defined[l] = true;
    }
  }
  return s;
}

double mean_recall(const ConfusionMatrix& cm) {
  const auto stats = per_class_precision_recall(cm);
  for (std::size_t l = 0; l < cm.num_classes(); ++l) {
    if (!stats.recall_defined[l]) {
      throw InvalidArgument("class " + std::to_string(l) + " has no true examples");
    }
  }
  return std::accumulate(stats.recall.begin(), stats.recall.end(), 0.0) /
         static_cast<double>(cm.num_classes());
}

double accuracy(const ConfusionMatrix& cm) {
  const long total = cm.total();
  if (total == 0) return 0.0;
  long diag = 0;
  for (std::size_t l = 0; l < cm.num_classes(); ++l) diag += cm.at(l, l);
  return static_cast<double>(diag) / static_cast<double>(total);
}

PerClassStats pseudo_label_quality(std::span<const int> pseudo, std::span<const int> truths,
                                   std::size_t num_classes) {
  return per_class_precision_recall(confusion(pseudo, truths, num_classes));
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("spearman needs paired samples");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    cov += (ra[i] - ma) * (rb[i] - mb);
    va += (ra[i] - ma) * (ra[i] - ma);
    vb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

}  // namespace crest
