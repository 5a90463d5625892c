#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace crest {

/// Per-class sample counts of a long-tailed dataset, sorted non-increasing.
/// Class index 0 is the largest class (rank 1 in the usual notation).
class ClassProfile {
 public:
  explicit ClassProfile(std::vector<long> counts);

  [[nodiscard]] std::size_t num_classes() const { return counts_.size(); }
  [[nodiscard]] const std::vector<long>& counts() const { return counts_; }
  [[nodiscard]] long count(std::size_t cls) const { return counts_.at(cls); }
  [[nodiscard]] long total() const;
  /// N_1 / N_L
  [[nodiscard]] double imbalance_ratio() const;
  /// Class frequencies counts / total.
  [[nodiscard]] std::vector<double> distribution() const;

  bool operator==(const ClassProfile&) const = default;

 private:
  std::vector<long> counts_;
};

/// Feature vectors of a fixed dimension with 0-based class labels.
/// Features are stored row-major in one contiguous buffer.
class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::size_t num_classes, std::vector<double> features,
          std::vector<int> labels);

  [[nodiscard]] std::size_t size() const { return labels_.size(); }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t num_classes() const { return num_classes_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  [[nodiscard]] int label(std::size_t i) const { return labels_[i]; }
  [[nodiscard]] const std::vector<int>& labels() const { return labels_; }
  [[nodiscard]] const std::vector<double>& features() const { return features_; }
  [[nodiscard]] std::vector<long> class_counts() const;
  /// Throws InvalidArgument when the class counts are not a valid profile
  /// (unsorted, or an empty class).
  [[nodiscard]] ClassProfile profile() const;

  /// Rows `indices` of this dataset, in that order.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dim_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
};

/// Labeled / unlabeled partition of one source dataset. The unlabeled part keeps
/// its true labels for diagnostics only.
struct SplitPair {
  Dataset labeled;
  Dataset unlabeled;
  std::vector<std::size_t> labeled_source;    // row indices into the source dataset
  std::vector<std::size_t> unlabeled_source;

  [[nodiscard]] double label_fraction() const {
    return static_cast<double>(labeled.size()) /
           static_cast<double>(labeled.size() + unlabeled.size());
  }
};

struct SynthParams {
  std::size_t dim = 16;
  double separation = 4.0;
  double noise_sigma = 1.0;
};

/// Counts N_l = round(n1 * gamma^(-l/(L-1))) for l = 0..L-1, rounding half to even,
/// with both endpoints pinned (n1 and round(n1/gamma)).
ClassProfile build_longtail_profile(std::size_t num_classes, double gamma, long n1);

/// Gaussian blobs around the vertices of a randomly rotated regular simplex with
/// edge length `separation`. Class means depend only on (seed, dim, L); the noise
/// draws additionally depend on `sample_stream`, so a test set drawn with another
/// stream shares the training set's means. Rows are emitted class by class.
/// Requires dim >= L - 1 so the simplex fits.
Dataset synth_gaussian_dataset(const ClassProfile& profile, const SynthParams& params,
                               std::uint64_t seed, std::uint64_t sample_stream = 0);

/// Class means used by synth_gaussian_dataset, one row of `dim` values per class.
std::vector<std::vector<double>> simplex_class_means(std::size_t num_classes,
                                                     const SynthParams& params,
                                                     std::uint64_t seed);

/// Stratified split: class l contributes max(1, round(beta * N_l)) labeled rows
/// drawn uniformly without replacement; the rest are unlabeled.
SplitPair split_labeled_unlabeled(const Dataset& dataset, double beta, std::uint64_t seed);

struct LoadedCsv {
  Dataset dataset;
  /// original_label[c] is the 1-based file label of canonical class c.
  std::vector<int> original_label;
};

/// Reads `label,f0,...,f{d-1}` rows. Classes are renumbered in count-descending
/// order (ties keep file label order); the mapping is returned alongside.
LoadedCsv load_csv_dataset(const std::filesystem::path& path);
LoadedCsv parse_csv_dataset(const std::string& text);

/// Writes the format read by load_csv_dataset with 1-based labels and
/// shortest round-trip decimal features.
void write_csv_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string format_csv_dataset(const Dataset& dataset);

/// Re-sampling baseline: every example of class l is drawn with weight
/// proportional to 1/N_l, so each class carries mass 1/L.
struct ResampleWeights {
  std::vector<double> per_example;  // weight of one example of class l
  std::vector<double> class_mass;   // per_example[l] * N_l
};
ResampleWeights resample_weights(const ClassProfile& profile);

}  // namespace crest
