#include "mfaimd/model.hpp"

#include <algorithm>

#include "mfaimd/error.hpp"

namespace mfaimd {

AllocationMatrix::AllocationMatrix(std::size_t nodes, std::size_t classes,
                                   std::vector<double> row_major)
    : nodes_(nodes), classes_(classes), a_(std::move(row_major)) {
  if (a_.size() != nodes_ * classes_)
    throw ConfigError("allocation", "expected " + std::to_string(nodes_ * classes_) +
                                        " entries, got " + std::to_string(a_.size()));
}

std::optional<double> ClassParams::growth_bound() const noexcept {
  if (a_bound) return a_bound;
  return a.global_bound();
}

std::vector<double> node_loads(const std::vector<std::vector<UserState>>& states,
                               const AllocationMatrix& allocation, std::optional<double> scale) {
  if (states.size() != allocation.classes())
    throw ConfigError("states", "got " + std::to_string(states.size()) + " classes, allocation has " +
                                    std::to_string(allocation.classes()));
  if (scale && !(*scale > 0.0)) throw ConfigError("scale", "must be positive");
  std::vector<double> u(allocation.nodes(), 0.0);
  for (std::size_t k = 0; k < states.size(); ++k) {
    double sum = 0.0;
    for (const auto& s : states[k]) sum += s.plus();
    for (std::size_t j = 0; j < u.size(); ++j) u[j] += allocation(j, k) * sum;
  }
  if (scale)
    for (auto& x : u) x /= *scale;
  return u;
}

RateSet eval_rates(const ModelConfig& cfg, std::size_t k, const UserState& w,
                   std::span<const double> u) {
  const ClassParams& c = cfg.classes.at(k);
  const double x = w.plus();
  RateSet r;
  r.lambda = c.lambda(0.0, u);
  r.mu = c.mu(x, u);
  r.b = c.b(x, u);
  r.a = c.a(x, u);
  if (const auto bound = c.growth_bound()) r.a = std::min(r.a, *bound);
  return r;
}

std::vector<double> apriori_load_bound(const ModelConfig& cfg,
                                       std::span<const double> initial_mean_wplus, double t) {
  std::vector<double> out(cfg.nodes, 0.0);
  for (std::size_t k = 0; k < cfg.class_count(); ++k) {
    const ClassParams& c = cfg.classes[k];
    const double start = std::max(k < initial_mean_wplus.size() ? initial_mean_wplus[k] : 0.0,
                                  c.alpha.mean());
    const double per_user = start + c.growth_bound().value_or(0.0) * t;
    for (std::size_t j = 0; j < cfg.nodes; ++j)
      out[j] += cfg.allocation(j, k) * cfg.proportions[k] * per_user;
  }
  return out;
}

}  // namespace mfaimd
