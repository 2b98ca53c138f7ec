#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "mfaimd/model.hpp"
#include "mfaimd/trajectory.hpp"

namespace mfaimd::particle {

struct SimulationOptions {
  double horizon = 1.0;
  /// Output grid: `samples` equal intervals on [0, horizon].
  std::size_t samples = 100;
  std::size_t replicas = 1;
  std::uint64_t seed = 0;
  /// Divide loads by the total user count |N|.
  bool scaled = false;
  bool store_snapshots = false;
  bool record_paths = false;
  unsigned workers = 0;

  /// Thinning micro-step is min(max_micro_step, micro_step_factor / max rate),
  /// recomputed after every candidate event.
  double micro_step_factor = 0.1;
  double max_micro_step = 0.05;
};

/// Exact event-driven simulation of the finite-N system. Between events each
/// ON window follows dw/dt = a_k(w, u(t)) (classical RK4 on the micro-step
/// when the drift is not constant); events are drawn by thinning per user
/// and channel against majorants built from w + abar*h and the matching load
/// upper bound.
TrajectoryEnsemble simulate_exact(const ModelConfig& cfg, const std::vector<std::size_t>& counts,
                                  const InitialCondition& init, const SimulationOptions& opts);

/// Fixed-step scheme: per step the load is frozen, each ON user gains
/// a*dt, and each user fires at most one event with probability rate*dt
/// (departure before loss before activation). The effective step is the
/// largest value <= dt that divides every output interval.
/// Throws ConfigError if dt <= 0 or max-rate*dt > 0.5 at time 0.
TrajectoryEnsemble simulate_euler(const ModelConfig& cfg, const std::vector<std::size_t>& counts,
                                  const InitialCondition& init, double dt,
                                  const SimulationOptions& opts);

/// Initial per-class states of one replica, drawn from the Init streams.
std::vector<std::vector<UserState>> initial_states(const ModelConfig& cfg,
                                                   const std::vector<std::size_t>& counts,
                                                   const InitialCondition& init,
                                                   std::uint64_t seed, std::size_t replica);

/// Largest single-user total event rate in the given states
/// (lambda for OFF users, b + mu for ON users).
double initial_max_rate(const ModelConfig& cfg, const std::vector<std::vector<UserState>>& states,
                        bool scaled);

}  // namespace mfaimd::particle
