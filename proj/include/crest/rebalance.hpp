#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace crest {

/// Lower bound applied to the running marginal before it is used as a divisor.
inline constexpr double kMarginalFloor = 1e-6;

/// Normalize(p^t). t = 1 returns p, t = 0 returns the uniform distribution.
std::vector<double> scaled_target(std::span<const double> p, double t);

/// Linear temperature schedule over generations 0..final_generation:
/// t_g = (1 - g/G) * 1.0 + (g/G) * t_min.
double temperature_schedule(int generation, int final_generation, double t_min);

/// Running estimate of the model's average (pre-alignment) prediction.
struct MarginalState {
  std::vector<double> probs;
  double decay = 0.99;
  long updates = 0;

  static MarginalState uniform(std::size_t num_classes, double decay = 0.99);
};

/// Base class distribution p(y) raised to a temperature and renormalized.
class TargetDistribution {
 public:
  TargetDistribution(std::vector<double> base, double temperature);

  [[nodiscard]] const std::vector<double>& base() const { return base_; }
  [[nodiscard]] double temperature() const { return temperature_; }
  [[nodiscard]] const std::vector<double>& target() const { return target_; }

 private:
  std::vector<double> base_;
  double temperature_;
  std::vector<double> target_;
};

/// probs <- decay * probs + (1 - decay) * batch_mean, then floor at
/// kMarginalFloor and renormalize.
void update_marginal(MarginalState& state, std::span<const double> batch_mean);

/// q~_i proportional to q_i * target_i / marginal_i.
std::vector<double> align(std::span<const double> q, const TargetDistribution& target,
                          const MarginalState& state);
void align_inplace(std::span<double> q, std::span<const double> target,
                   std::span<const double> marginal);

/// Throws InvalidArgument unless `p` is a finite non-negative vector summing to
/// 1 within `tol`.
void require_distribution(std::span<const double> p, const char* what, double tol = 1e-9);

}  // namespace crest
