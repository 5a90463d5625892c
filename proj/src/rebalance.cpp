#include "crest/rebalance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "crest/errors.hpp"

namespace crest {

void require_distribution(std::span<const double> p, const char* what, double tol) {
  if (p.empty()) throw InvalidArgument(std::string(what) + " is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) {
      throw InvalidArgument(std::string(what) + " has a negative or non-finite entry");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > tol) throw InvalidArgument(std::string(what) + " does not sum to 1");
}

std::vector<double> scaled_target(std::span<const double> p, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw InvalidArgument("temperature must lie in [0, 1]");
  require_distribution(p, "base distribution");
  if (t == 1.0) return {p.begin(), p.end()};
  std::vector<double> out(p.size());
  std::transform(p.begin(), p.end(), out.begin(), [t](double v) { return std::pow(v, t); });
  const double sum = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& v : out) v /= sum;
  return out;
}

double temperature_schedule(int generation, int final_generation, double t_min) {
  if (final_generation < 1) throw InvalidArgument("final generation index must be >= 1");
  if (generation < 0 || generation > final_generation) {
    throw InvalidArgument("generation " + std::to_string(generation) + " outside [0, " +
                          std::to_string(final_generation) + "]");
  }
  if (!(t_min >= 0.0 && t_min <= 1.0)) throw InvalidArgument("t_min must lie in [0, 1]");
  const double frac = static_cast<double>(generation) / static_cast<double>(final_generation);
  return (1.0 - frac) * 1.0 + frac * t_min;
}

MarginalState MarginalState::uniform(std::size_t num_classes, double decay) {
  if (num_classes == 0) throw InvalidArgument("marginal needs at least one class");
  if (!(decay >= 0.0 && decay < 1.0)) throw InvalidArgument("marginal decay must lie in [0, 1)");
  return MarginalState{std::vector<double>(num_classes, 1.0 / static_cast<double>(num_classes)),
                       decay, 0};
}

TargetDistribution::TargetDistribution(std::vector<double> base, double temperature)
    : base_(std::move(base)), temperature_(temperature), target_(scaled_target(base_, temperature)) {}

void update_marginal(MarginalState& state, std::span<const double> batch_mean) {
  if (batch_mean.size() != state.probs.size()) throw InvalidArgument("marginal shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < batch_mean.size(); ++i) {
    double v = state.decay * state.probs[i] + (1.0 - state.decay) * batch_mean[i];
    v = std::max(v, kMarginalFloor);
    state.probs[i] = v;
    sum += v;
  }
  for (double& v : state.probs) v /= sum;
  ++state.updates;
}

void align_inplace(std::span<double> q, std::span<const double> target,
                   std::span<const double> marginal) {
  double sum = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    q[i] = q[i] * target[i] / std::max(marginal[i], kMarginalFloor);
    sum += q[i];
  }
  for (double& v : q) v /= sum;
}

std::vector<double> align(std::span<const double> q, const TargetDistribution& target,
                          const MarginalState& state) {
  if (q.size() != target.target().size() || q.size() != state.probs.size()) {
    throw InvalidArgument("alignment shape mismatch");
  }
  std::vector<double> out(q.begin(), q.end());
  align_inplace(out, target.target(), state.probs);
  return out;
}

}  // namespace crest
