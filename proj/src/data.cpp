#include "crest/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <system_error>

#include "crest/errors.hpp"
#include "crest/rng.hpp"

namespace crest {

ClassProfile::ClassProfile(std::vector<long> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw InvalidArgument("class profile needs at least one class");
  for (std::size_t l = 0; l < counts_.size(); ++l) {
    if (counts_[l] < 1) {
      throw InvalidArgument("class " + std::to_string(l) + " has count " +
                            std::to_string(counts_[l]) + " (< 1)");
    }
    if (l > 0 && counts_[l] > counts_[l - 1]) {
      throw InvalidArgument("class counts must be sorted non-increasing (class " +
                            std::to_string(l) + ")");
    }
  }
}

long ClassProfile::total() const { return std::accumulate(counts_.begin(), counts_.end(), 0L); }

double ClassProfile::imbalance_ratio() const {
  return static_cast<double>(counts_.front()) / static_cast<double>(counts_.back());
}

std::vector<double> ClassProfile::distribution() const {
  const auto n = static_cast<double>(total());
  std::vector<double> p(counts_.size());
  std::transform(counts_.begin(), counts_.end(), p.begin(),
                 [n](long c) { return static_cast<double>(c) / n; });
  return p;
}

Dataset::Dataset(std::size_t dim, std::size_t num_classes, std::vector<double> features,
                 std::vector<int> labels)
    : dim_(dim), num_classes_(num_classes), features_(std::move(features)),
      labels_(std::move(labels)) {
  if (dim_ == 0) throw InvalidArgument("dataset dimension must be positive");
  if (num_classes_ == 0) throw InvalidArgument("dataset needs at least one class");
  if (features_.size() != labels_.size() * dim_) {
    throw InvalidArgument("feature buffer size does not match labels x dim");
  }
  for (int y : labels_) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes_) {
      throw InvalidArgument("label " + std::to_string(y) + " out of range");
    }
  }
  for (double v : features_) {
    if (!std::isfinite(v)) throw InvalidArgument("non-finite feature value");
  }
}

std::vector<long> Dataset::class_counts() const {
  std::vector<long> counts(num_classes_, 0);
  for (int y : labels_) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

ClassProfile Dataset::profile() const { return ClassProfile(class_counts()); }

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  std::vector<double> features;
  features.reserve(indices.size() * dim_);
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto r = row(i);
    features.insert(features.end(), r.begin(), r.end());
    labels.push_back(labels_[i]);
  }
  return Dataset(dim_, num_classes_, std::move(features), std::move(labels));
}

ClassProfile build_longtail_profile(std::size_t num_classes, double gamma, long n1) {
  if (num_classes < 2) throw InvalidArgument("long-tail profile needs L >= 2");
  if (!(gamma >= 1.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be >= 1");
  if (static_cast<double>(n1) < gamma) throw InvalidArgument("n1 must be >= gamma");

  const auto last = static_cast<double>(num_classes - 1);
  std::vector<long> counts(num_classes);
  for (std::size_t l = 0; l < num_classes; ++l) {
    const double exact = static_cast<double>(n1) * std::pow(gamma, -static_cast<double>(l) / last);
    counts[l] = static_cast<long>(std::nearbyint(exact));  // default mode: half to even
  }
  counts.front() = n1;
  counts.back() = static_cast<long>(std::nearbyint(static_cast<double>(n1) / gamma));
  return ClassProfile(std::move(counts));
}

namespace {

// Random orthogonal matrix (rows orthonormal) by Gram-Schmidt on Gaussian rows.
std::vector<std::vector<double>> random_rotation(std::size_t dim, RngStream rng) {
  std::vector<std::vector<double>> q(dim, std::vector<double>(dim));
  for (std::size_t i = 0; i < dim; ++i) {
    for (;;) {
      auto& v = q[i];
      for (double& x : v) x = rng.normal();
      // Two passes of modified Gram-Schmidt for numerical orthogonality.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t j = 0; j < i; ++j) {
          const double d = std::inner_product(v.begin(), v.end(), q[j].begin(), 0.0);
          for (std::size_t k = 0; k < dim; ++k) v[k] -= d * q[j][k];
        }
      }
      const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
      if (norm > 1e-8) {
        for (double& x : v) x /= norm;
        break;
      }
    }
  }
  return q;
}

}  // namespace

std::vector<std::vector<double>> simplex_class_means(std::size_t num_classes,
                                                     const SynthParams& params,
                                                     std::uint64_t seed) {
  if (params.dim < 2) throw InvalidArgument("synthetic dim must be >= 2");
  if (!(params.separation > 0.0)) throw InvalidArgument("separation must be positive");
  if (num_classes > params.dim + 1) {
    throw InvalidArgument("synthetic dim must be >= L - 1 to place a regular simplex");
  }
  const std::size_t n = num_classes;
  const double scale = params.separation / std::sqrt(2.0);

  // Vertex c of the centred simplex is scale * (e_c - 1/n); express it in the
  // Helmert basis of the sum-zero hyperplane, giving n - 1 coordinates.
  std::vector<std::vector<double>> coords(n, std::vector<double>(params.dim, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t k = 1; k < n; ++k) {
      const double norm = std::sqrt(static_cast<double>(k * (k + 1)));
      double dot = 0.0;
      for (std::size_t i = 0; i <= k; ++i) {
        const double basis = (i < k) ? 1.0 : -static_cast<double>(k);
        const double vertex = ((i == c) ? 1.0 : 0.0) - 1.0 / static_cast<double>(n);
        dot += basis * vertex;
      }
      coords[c][k - 1] = scale * dot / norm;
    }
  }

  const auto rot = random_rotation(params.dim, RngStream(seed).derive("class-means"));
  std::vector<std::vector<double>> means(n, std::vector<double>(params.dim, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t i = 0; i < params.dim; ++i) {
      means[c][i] = std::inner_product(rot[i].begin(), rot[i].end(), coords[c].begin(), 0.0);
    }
  }
  return means;
}

Dataset synth_gaussian_dataset(const ClassProfile& profile, const SynthParams& params,
                               std::uint64_t seed, std::uint64_t sample_stream) {
  if (!(params.noise_sigma > 0.0)) throw InvalidArgument("noise_sigma must be positive");
  const auto means = simplex_class_means(profile.num_classes(), params, seed);

  RngStream noise = RngStream(seed).derive("noise").derive(sample_stream);
  std::vector<double> features;
  features.reserve(static_cast<std::size_t>(profile.total()) * params.dim);
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(profile.total()));
  for (std::size_t c = 0; c < profile.num_classes(); ++c) {
    for (long j = 0; j < profile.count(c); ++j) {
      for (std::size_t i = 0; i < params.dim; ++i) {
        features.push_back(means[c][i] + params.noise_sigma * noise.normal());
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  return Dataset(params.dim, profile.num_classes(), std::move(features), std::move(labels));
}

SplitPair split_labeled_unlabeled(const Dataset& dataset, double beta, std::uint64_t seed) {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidArgument("beta must lie in (0, 1)");
  const std::size_t num_classes = dataset.num_classes();

  std::vector<std::vector<std::size_t>> members(num_classes);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    members[static_cast<std::size_t>(dataset.label(i))].push_back(i);
  }

  SplitPair out;
  RngStream base = RngStream(seed).derive("split");
  for (std::size_t c = 0; c < num_classes; ++c) {
    auto& idx = members[c];
    if (idx.size() < 2) {
      throw InvalidArgument("class " + std::to_string(c) + " needs >= 2 examples to split");
    }
    const auto n = static_cast<double>(idx.size());
    const auto take = std::max<std::size_t>(1, static_cast<std::size_t>(std::nearbyint(beta * n)));

    // Partial Fisher-Yates: the first `take` slots become a uniform sample.
    RngStream rng = base.derive(c);
    for (std::size_t k = 0; k < take; ++k) {
      const auto j = k + static_cast<std::size_t>(rng.below(idx.size() - k));
      std::swap(idx[k], idx[j]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take));
    std::sort(idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
    out.labeled_source.insert(out.labeled_source.end(), idx.begin(),
                              idx.begin() + static_cast<std::ptrdiff_t>(take));
    out.unlabeled_source.insert(out.unlabeled_source.end(),
                                idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end());
  }
  out.labeled = dataset.subset(out.labeled_source);
  out.unlabeled = dataset.subset(out.unlabeled_source);
  return out;
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

}  // namespace

LoadedCsv parse_csv_dataset(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  std::size_t dim = 0;
  bool have_header = false;
  std::vector<double> features;
  std::vector<int> file_labels;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    const auto fields = split_fields(content);
    if (!have_header) {
      if (fields.size() < 2 || trim(fields[0]) != "label") {
        throw ParseError(line_no, "expected header 'label,f0,...'");
      }
      for (std::size_t i = 1; i < fields.size(); ++i) {
        if (trim(fields[i]) != "f" + std::to_string(i - 1)) {
          throw ParseError(line_no, "header column " + std::to_string(i) + " should be f" +
                                        std::to_string(i - 1));
        }
      }
      dim = fields.size() - 1;
      have_header = true;
      continue;
    }
    if (fields.size() != dim + 1) {
      throw ParseError(line_no, "expected " + std::to_string(dim + 1) + " fields, found " +
                                    std::to_string(fields.size()));
    }
    int label = 0;
    if (!parse_number(fields[0], label) || label < 1) {
      throw ParseError(line_no, "label must be an integer >= 1");
    }
    file_labels.push_back(label);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      double v = 0.0;
      if (!parse_number(fields[i], v) || !std::isfinite(v)) {
        throw ParseError(line_no, "malformed feature value in column " + std::to_string(i));
      }
      features.push_back(v);
    }
  }
  if (!have_header) throw ParseError(line_no == 0 ? 1 : line_no, "empty file");
  if (file_labels.empty()) throw ParseError(line_no, "no data rows");

  const int max_label = *std::max_element(file_labels.begin(), file_labels.end());
  std::vector<long> counts(static_cast<std::size_t>(max_label), 0);
  for (int y : file_labels) ++counts[static_cast<std::size_t>(y - 1)];
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] == 0) {
      throw ParseError(line_no, "label " + std::to_string(c + 1) + " has no rows");
    }
  }

  std::vector<int> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)]; });
  std::vector<int> canonical(counts.size());
  LoadedCsv out;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    canonical[static_cast<std::size_t>(order[rank])] = static_cast<int>(rank);
    out.original_label.push_back(order[rank] + 1);
  }
  for (int& y : file_labels) y = canonical[static_cast<std::size_t>(y - 1)];
  out.dataset = Dataset(dim, counts.size(), std::move(features), std::move(file_labels));
  return out;
}

LoadedCsv load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv_dataset(buf.str());
}

std::string format_csv_dataset(const Dataset& dataset) {
  std::string out = "label";
  for (std::size_t i = 0; i < dataset.dim(); ++i) out += ",f" + std::to_string(i);
  out += '\n';
  char buf[64];
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    out += std::to_string(dataset.label(r) + 1);
    for (double v : dataset.row(r)) {
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out += ',';
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

void write_csv_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << format_csv_dataset(dataset);
  if (!out) throw IoError("write failed: " + path.string());
}

ResampleWeights resample_weights(const ClassProfile& profile) {
  const auto num_classes = static_cast<double>(profile.num_classes());
  ResampleWeights w;
  for (long n : profile.counts()) {
    const double per = 1.0 / (num_classes * static_cast<double>(n));
    w.per_example.push_back(per);
    w.class_mass.push_back(per * static_cast<double>(n));
  }
  return w;
}

}  // namespace crest
