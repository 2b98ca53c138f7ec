#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <vector>

#include "mfaimd/mckean.hpp"
#include "mfaimd/model.hpp"
#include "mfaimd/path.hpp"
#include "mfaimd/rng.hpp"
#include "mfaimd/trajectory.hpp"

namespace mfaimd::detail {

/// Exact simulation of a set of users sharing one load, either computed from
/// their own windows (endogenous) or read from an exogenous trajectory.
///
/// Every (user, channel) pair owns a unit-rate clock: its integrated
/// majorant advances by R*dt and a candidate fires when it reaches the next
/// Exp(1) threshold drawn from the pair's own stream. A candidate is kept
/// with probability true_rate / R. Majorants are constant over a micro-step
/// [t, t + h] and dominate the rate there because windows grow by at most
/// abar*h and rates are monotone in the window and the load.
class ThinningEngine {
 public:
  struct Params {
    const ModelConfig* cfg = nullptr;
    /// Loads are divided by this (|N| for the scaled system, else 1).
    double scale = 1.0;
    /// When set the load is read from here instead of the users.
    const mckean::LoadTrajectory* exogenous = nullptr;
    double micro_step_factor = 0.1;
    double max_micro_step = 0.05;
    bool record_paths = false;
    std::uint64_t seed = 0;
    std::size_t replica = 0;
  };

  ThinningEngine(const Params& params, const std::vector<std::vector<UserState>>& initial);

  /// Runs until `t_target` (>= time()); the state is right-continuous there.
  void advance_to(double t_target);
  /// Appends the final knot of every recorded path.
  void finish();

  double time() const noexcept { return t_; }
  std::size_t users() const noexcept { return w_.size(); }
  UserState state(std::size_t i) const;
  std::vector<ClassSummary> summary() const;
  std::vector<Path>& paths() noexcept { return paths_; }
  std::size_t accepted_events() const noexcept { return accepted_; }
  std::size_t candidate_events() const noexcept { return candidates_; }

 private:
  struct ClassInfo {
    double abar = 0.0;
    bool a_constant = false;
    double a_value = 0.0;
    bool b_window = false;
    bool mu_window = false;
    std::size_t first = 0;  // flat index of the first user
    std::size_t count = 0;
  };

  void compute_loads(double t, std::span<const double> w, std::span<double> out) const;
  void drift_rates(double t, std::span<const double> w, std::span<double> out);
  void advance_drift(double step);
  void record_all(double t);
  double true_rate(std::size_t i, int channel) const;
  void apply_event(std::size_t i, int channel);

  // Event-queue path for models whose rates depend only on the class and
  // the ON/OFF status: O(log n) per event, users synchronised lazily.
  void advance_independent(double t_target);
  void sync_user(std::size_t i, double t);
  void schedule(std::size_t i);
  double channel_rate(std::size_t i, int channel) const;

  Params p_;
  const ModelConfig& cfg_;
  std::size_t J_ = 0;
  std::vector<ClassInfo> classes_;
  bool needs_micro_steps_ = false;
  bool linear_drift_ = true;

  double t_ = 0.0;
  std::vector<std::uint32_t> cls_;
  std::vector<std::uint8_t> on_;
  std::vector<double> w_;
  std::vector<double> clock_;      // [3*i + channel]
  std::vector<double> threshold_;  // [3*i + channel]
  std::vector<CounterRng> rng_;    // [3*i + channel]
  std::vector<Path> paths_;

  std::vector<double> u_, u_lo_, u_hi_, u_stage_;
  std::vector<double> majorant_;  // [3*i + channel]
  std::vector<double> k1_, k2_, k3_, k4_, w_stage_;
  std::vector<double> lam_bar_, b_bar_, mu_bar_;

  struct QueueEntry {
    double time;
    std::size_t user;
    int channel;
    std::uint64_t version;
    bool operator>(const QueueEntry& o) const noexcept {
      return time != o.time ? time > o.time : user > o.user;
    }
  };
  std::priority_queue<QueueEntry, std::vector<QueueEntry>, std::greater<>> queue_;
  bool queue_ready_ = false;
  std::vector<double> last_;              // time each user was last synchronised
  std::vector<std::uint64_t> version_;    // invalidates stale queue entries
  std::vector<double> const_rate_;        // [3*k + channel] fixed class rates

  std::size_t accepted_ = 0;
  std::size_t candidates_ = 0;
};

}  // namespace mfaimd::detail
