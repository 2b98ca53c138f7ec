#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mfaimd/path.hpp"
#include "mfaimd/trajectory.hpp"
#include "mfaimd/user_state.hpp"

namespace mfaimd::analysis {

/// Finite weighted atom set; empty weights mean uniform.
struct WeightedAtoms {
  std::vector<UserState> atoms;
  std::vector<double> weights;
};

/// Time-t marginal of the per-class empirical measures.
struct EmpiricalSnapshot {
  double t = 0.0;
  std::vector<std::vector<UserState>> classes;

  WeightedAtoms class_marginal(std::size_t k) const { return {classes.at(k), {}}; }
};

/// Snapshot of replica r at grid index ti (requires stored snapshots).
EmpiricalSnapshot snapshot_of(const TrajectoryEnsemble& ens, std::size_t replica, std::size_t ti);

/// Class-k states at grid index ti pooled over all replicas.
WeightedAtoms pooled_marginal(const TrajectoryEnsemble& ens, std::size_t ti, std::size_t k);

/// Wasserstein-1 distance for the trace metric, computed as 1-d optimal
/// transport with OFF placed at -1. Throws ConfigError on empty input.
double wasserstein1(const WeightedAtoms& p, const WeightedAtoms& q);

struct TimeAverage {
  double mean = 0.0;
  double std_error = 0.0;     ///< batch-means standard error
  double ci_half_width = 0.0;  ///< 95% Student-t interval over the batches
  std::size_t batches = 0;
};

/// (1/(T - burn_in)) * integral of f over [burn_in, T], with a batch-means
/// interval. Throws ConfigError unless the path is longer than 2 * burn_in.
TimeAverage ergodic_average(const Path& path, const std::function<double(const UserState&)>& f,
                            double burn_in, std::size_t batches = 20);

/// Regenerative estimate: sum over complete OFF-to-OFF cycles of the
/// integral of f, divided by the total cycle length; ratio-estimator error.
TimeAverage cycle_average(const Path& path, const std::function<double(const UserState&)>& f);

struct ChaosInput {
  std::size_t total_users = 0;
  const TrajectoryEnsemble* ensemble = nullptr;  ///< needs stored snapshots
};

struct ChaosRow {
  std::size_t total_users = 0;
  double t = 0.0;
  std::size_t class_a = 0;
  std::size_t class_b = 0;
  /// Root-mean-square over replicas of (class mean of w+ - reference mean);
  /// only on diagonal rows (class_a == class_b) with a reference.
  std::optional<double> mean_error;
  std::optional<double> mean_error_se;
  /// Average covariance of w+ between distinct users of classes a and b.
  double pair_cov = 0.0;
  double pair_cov_se = 0.0;
  double pair_cov_lo = 0.0;  ///< 99% interval
  double pair_cov_hi = 0.0;
  bool zero_cov_accepted = false;  ///< |cov| / se below the two-sided 1% point
};

struct SlopeFit {
  double slope = 0.0;
  double slope_error = 0.0;
  std::size_t points = 0;
};

struct ChaosReport {
  std::vector<ChaosRow> rows;
  /// Fits of log(value) against log(total users), per time index, pooled
  /// over diagonal class pairs.
  std::vector<double> times;
  std::vector<std::optional<SlopeFit>> mean_error_fit;
  std::vector<std::optional<SlopeFit>> pair_cov_fit;
};

struct ChaosOptions {
  /// Grid indices (into each ensemble's times) to analyse; all must share times.
  std::vector<std::size_t> time_indices;
  /// Reference mean of w+ per class at each analysed time: [k][time position].
  std::optional<std::vector<std::vector<double>>> reference_mean;
  /// Number of random user pairs per class pair; 0 uses every pair.
  std::size_t pair_sample = 0;
  std::uint64_t seed = 0;
  std::size_t jackknife_groups = 20;
};

/// Propagation-of-chaos diagnostics across a sweep of system sizes. Throws
/// ConfigError with fewer than three sizes.
ChaosReport chaoticity_report(const std::vector<ChaosInput>& inputs, const ChaosOptions& opts);

}  // namespace mfaimd::analysis
