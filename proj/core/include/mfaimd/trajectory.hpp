#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfaimd/path.hpp"
#include "mfaimd/rates.hpp"
#include "mfaimd/user_state.hpp"

namespace mfaimd {

struct ClassSummary {
  double mean_wplus = 0.0;
  double on_fraction = 0.0;
};

/// Initial data of a run: explicit per-class states, or independent draws
/// where each user is ON with probability `on_fraction[k]` and then has a
/// window drawn from `law[k]` (defaults: the model's initial_on_fraction and
/// alpha).
struct InitialCondition {
  std::optional<std::vector<std::vector<UserState>>> states;
  std::vector<double> on_fraction;
  std::vector<std::optional<InitialLaw>> law;

  static InitialCondition from_model() { return {}; }
  static InitialCondition explicit_states(std::vector<std::vector<UserState>> s) {
    InitialCondition ic;
    ic.states = std::move(s);
    return ic;
  }
  static InitialCondition all_on(std::size_t classes, std::optional<InitialLaw> l = std::nullopt) {
    InitialCondition ic;
    ic.on_fraction.assign(classes, 1.0);
    ic.law.assign(classes, l);
    return ic;
  }
};

/// Sampled view of a replica ensemble on a uniform output grid.
struct TrajectoryEnsemble {
  std::vector<double> times;
  std::size_t replicas = 0;
  std::vector<std::size_t> class_sizes;
  /// [(replica * times + time_index) * K + k]
  std::vector<ClassSummary> summaries;
  /// Per-user states on the grid when requested:
  /// [(replica * times + time_index) * total_users + user]
  std::vector<UserState> snapshots;
  /// Event-resolved paths when requested: [replica * total_users + user]
  std::vector<Path> paths;

  std::uint64_t seed = 0;
  std::string scheme;
  bool scaled = false;
  std::vector<std::string> warnings;

  std::size_t classes() const noexcept { return class_sizes.size(); }
  std::size_t total_users() const noexcept;
  /// Index of user n of class k in the flat user numbering.
  std::size_t user_index(std::size_t k, std::size_t n) const noexcept;

  const ClassSummary& summary(std::size_t replica, std::size_t ti, std::size_t k) const {
    return summaries[(replica * times.size() + ti) * classes() + k];
  }
  bool has_snapshots() const noexcept { return !snapshots.empty(); }
  const UserState& snapshot(std::size_t replica, std::size_t ti, std::size_t user) const {
    return snapshots[(replica * times.size() + ti) * total_users() + user];
  }
  bool has_paths() const noexcept { return !paths.empty(); }
  const Path& path(std::size_t replica, std::size_t user) const {
    return paths[replica * total_users() + user];
  }
};

/// Per-class summary of a set of user states laid out class by class.
std::vector<ClassSummary> summarize(const std::vector<std::vector<UserState>>& states);

}  // namespace mfaimd
