#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crest {

/// L x L counts; entry (i, j) counts examples of true class i predicted as j.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t num_classes)
      : num_classes_(num_classes), counts_(num_classes * num_classes, 0) {}

  [[nodiscard]] std::size_t num_classes() const { return num_classes_; }
  [[nodiscard]] long at(std::size_t truth, std::size_t pred) const {
    return counts_[truth * num_classes_ + pred];
  }
  void add(std::size_t truth, std::size_t pred, long n = 1) {
    counts_[truth * num_classes_ + pred] += n;
  }
  /// Integer merge of two shards of the same evaluation.
  ConfusionMatrix& operator+=(const ConfusionMatrix& other);

  [[nodiscard]] long row_total(std::size_t truth) const;
  [[nodiscard]] long col_total(std::size_t pred) const;
  [[nodiscard]] long total() const;

  bool operator==(const ConfusionMatrix&) const = default;

 private:
  std::size_t num_classes_;
  std::vector<long> counts_;
};

ConfusionMatrix confusion(std::span<const int> preds, std::span<const int> truths,
                          std::size_t num_classes);

/// 0/0 ratios are reported as 0 with the matching `*_defined` flag cleared.
struct PerClassStats {
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<bool> precision_defined;
  std::vector<bool> recall_defined;
  std::vector<long> n_true;
  std::vector<long> n_pred;
};

PerClassStats per_class_precision_recall(const ConfusionMatrix& cm);

/// Unweighted mean of per-class recall. Throws InvalidArgument if some class has
/// no true examples.
double mean_recall(const ConfusionMatrix& cm);

double accuracy(const ConfusionMatrix& cm);

/// Precision/recall of pseudo-labels against the hidden true labels. An empty
/// selection gives all-zero stats with every flag cleared.
PerClassStats pseudo_label_quality(std::span<const int> pseudo, std::span<const int> truths,
                                   std::size_t num_classes);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace crest
