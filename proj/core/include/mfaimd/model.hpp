#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfaimd/rates.hpp"
#include "mfaimd/user_state.hpp"

namespace mfaimd {

/// J x K nonnegative matrix; entry (j, k) weights the throughput of a class-k
/// user at node j.
class AllocationMatrix {
 public:
  AllocationMatrix() = default;
  /// `row_major` has J*K entries, row j holding A(j, 0..K-1).
  AllocationMatrix(std::size_t nodes, std::size_t classes, std::vector<double> row_major);

  std::size_t nodes() const noexcept { return nodes_; }
  std::size_t classes() const noexcept { return classes_; }
  double operator()(std::size_t j, std::size_t k) const noexcept { return a_[j * classes_ + k]; }
  const std::vector<double>& row_major() const noexcept { return a_; }

 private:
  std::size_t nodes_ = 0;
  std::size_t classes_ = 0;
  std::vector<double> a_;
};

struct ClassParams {
  std::string name;
  RateFamily lambda;  ///< OFF -> ON rate, a function of the load only
  RateFamily mu;      ///< ON -> OFF rate
  RateFamily a;       ///< window growth speed
  RateFamily b;       ///< loss rate
  double r = 0.5;     ///< multiplicative-decrease factor
  InitialLaw alpha;   ///< window law on switching ON
  /// Declared upper bound of `a`. When absent the family's own global bound
  /// is used; families without one are rejected by validation.
  std::optional<double> a_bound;
  /// Default fraction of users ON at time 0 (windows drawn from alpha).
  double initial_on_fraction = 0.0;

  /// Effective bound of `a` (declared, else the family's own bound).
  std::optional<double> growth_bound() const noexcept;
};

struct ModelConfig {
  std::size_t nodes = 1;
  AllocationMatrix allocation;
  std::vector<double> proportions;
  std::vector<ClassParams> classes;
  /// Upper corner of the load box [0, hi]^J over which hypotheses are checked.
  std::vector<double> load_box;

  std::size_t class_count() const noexcept { return classes.size(); }
};

struct RateSet {
  double lambda = 0.0;
  double mu = 0.0;
  double a = 0.0;
  double b = 0.0;
};

/// u_j = sum_k sum_n A(j,k) * plus(state[k][n]), divided by `scale` when given.
/// Throws ConfigError on a dimension mismatch or a nonpositive scale.
std::vector<double> node_loads(const std::vector<std::vector<UserState>>& states,
                               const AllocationMatrix& allocation,
                               std::optional<double> scale = std::nullopt);

/// Rates of class k at (plus(w), u). `a` is clipped to its declared bound.
RateSet eval_rates(const ModelConfig& cfg, std::size_t k, const UserState& w,
                   std::span<const double> u);

/// sum_k A(j,k) p_k (max(initial mean of w+, m_k) + abar_k * t): the a-priori
/// bound on the mean-field load at time t.
std::vector<double> apriori_load_bound(const ModelConfig& cfg,
                                       std::span<const double> initial_mean_wplus, double t);

}  // namespace mfaimd
