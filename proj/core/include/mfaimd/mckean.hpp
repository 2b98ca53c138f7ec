#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mfaimd/model.hpp"
#include "mfaimd/trajectory.hpp"

namespace mfaimd::mckean {

/// Deterministic load path on the uniform grid t_i = i*T/M, linearly
/// interpolated in between.
class LoadTrajectory {
 public:
  LoadTrajectory() = default;
  /// Zero trajectory with M intervals on [0, horizon] for J nodes.
  LoadTrajectory(double horizon, std::size_t intervals, std::size_t nodes);
  /// `values` holds (M+1) x J entries, grid point by grid point.
  LoadTrajectory(double horizon, std::size_t intervals, std::size_t nodes,
                 std::vector<double> values);
  static LoadTrajectory constant(double horizon, std::size_t intervals,
                                 std::span<const double> u);

  double horizon() const noexcept { return horizon_; }
  std::size_t intervals() const noexcept { return intervals_; }
  std::size_t nodes() const noexcept { return nodes_; }
  double step() const noexcept { return horizon_ / static_cast<double>(intervals_); }
  double time(std::size_t i) const noexcept { return step() * static_cast<double>(i); }
  std::vector<double> times() const;

  double value(std::size_t i, std::size_t j) const noexcept { return values_[i * nodes_ + j]; }
  double& value(std::size_t i, std::size_t j) noexcept { return values_[i * nodes_ + j]; }
  const std::vector<double>& values() const noexcept { return values_; }

  /// u(t) for t in [0, T] (clamped outside).
  void at(double t, std::span<double> out) const noexcept;
  /// Componentwise min and max of u over [t0, t1].
  void bounds(double t0, double t1, std::span<double> lo, std::span<double> hi) const noexcept;

  /// max over grid points and nodes of |u - v|.
  double sup_distance(const LoadTrajectory& other) const;

 private:
  double horizon_ = 1.0;
  std::size_t intervals_ = 1;
  std::size_t nodes_ = 0;
  std::vector<double> values_;
};

/// Initial law of one class: ON with probability on_fraction, window drawn
/// from `law`; or a fixed state.
struct SingleUserInit {
  std::optional<UserState> state;
  double on_fraction = 0.0;
  std::optional<InitialLaw> law;

  static SingleUserInit fixed(UserState s) {
    SingleUserInit i;
    i.state = s;
    return i;
  }
  static SingleUserInit mixed(double on_fraction, std::optional<InitialLaw> law = std::nullopt) {
    SingleUserInit i;
    i.on_fraction = on_fraction;
    i.law = std::move(law);
    return i;
  }
};

struct FrozenLoadOptions {
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  bool record_paths = false;
  unsigned workers = 0;
  double micro_step_factor = 0.1;
  double max_micro_step = 0.05;
};

/// M independent copies of one class-k user driven by the exogenous load
/// u(t). Output grid = the trajectory's grid. Replica r of class k draws
/// from the same streams as user 0 of class k in replica r of a particle run.
TrajectoryEnsemble simulate_frozen_load(const ModelConfig& cfg, std::size_t k,
                                        const LoadTrajectory& u, const SingleUserInit& init,
                                        const FrozenLoadOptions& opts);

struct PicardOptions {
  double horizon = 10.0;
  std::size_t grid_intervals = 50;
  std::size_t replicas = 1000;
  double tolerance = 1e-3;
  double damping = 0.7;
  std::size_t max_iterations = 50;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::optional<LoadTrajectory> initial_guess;
};

struct PicardReport {
  std::size_t iterations = 0;
  /// ||u^(m+1) - u^(m)|| for m = 0, 1, ...
  std::vector<double> distances;
  /// u^(0), u^(1), ..., the last one being the returned solution.
  std::vector<LoadTrajectory> iterates;
  LoadTrajectory solution;
  /// Replica mean and standard error of w+ per class at each grid point,
  /// from the last evaluation of the map: [k][i].
  std::vector<std::vector<double>> class_mean;
  std::vector<std::vector<double>> class_mean_error;
  bool converged = false;
};

/// Damped Picard iteration u <- (1 - rho) u + rho F(u), where
/// F(u)_j(t_i) = sum_k A(j,k) p_k E[W_k(t_i)+] under the frozen load u,
/// with common random numbers across iterations. Non-convergence is reported,
/// not thrown; a NaN load throws NumericalError.
PicardReport picard_solve(const ModelConfig& cfg, const std::vector<SingleUserInit>& init,
                          const PicardOptions& opts);

/// One evaluation of the Picard map, also returning the per-class means.
LoadTrajectory picard_map(const ModelConfig& cfg, const std::vector<SingleUserInit>& init,
                          const LoadTrajectory& u, std::size_t replicas, std::uint64_t seed,
                          unsigned workers, std::vector<std::vector<double>>* class_mean = nullptr,
                          std::vector<std::vector<double>>* class_mean_error = nullptr);

struct CouplingEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

/// Monte-Carlo mean over M replicas of sup_{s <= T} d(X(s), X'(s)) where X and
/// X' start from init1 and init2 and share every driving stream.
CouplingEstimate coupling_distance(const ModelConfig& cfg, std::size_t k,
                                   const SingleUserInit& init1, const SingleUserInit& init2,
                                   const LoadTrajectory& u, std::size_t replicas,
                                   std::uint64_t seed, unsigned workers = 0);

}  // namespace mfaimd::mckean
