#include "mfaimd/trajectory.hpp"

#include <numeric>

namespace mfaimd {

std::size_t TrajectoryEnsemble::total_users() const noexcept {
  return std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
}

std::size_t TrajectoryEnsemble::user_index(std::size_t k, std::size_t n) const noexcept {
  std::size_t first = 0;
  for (std::size_t c = 0; c < k; ++c) first += class_sizes[c];
  return first + n;
}

std::vector<ClassSummary> summarize(const std::vector<std::vector<UserState>>& states) {
  std::vector<ClassSummary> out(states.size());
  for (std::size_t k = 0; k < states.size(); ++k) {
    if (states[k].empty()) continue;
    double sum = 0.0;
    std::size_t on = 0;
    for (const auto& s : states[k]) {
      sum += s.plus();
      on += s.is_on() ? 1 : 0;
    }
    const auto n = static_cast<double>(states[k].size());
    out[k] = {sum / n, static_cast<double>(on) / n};
  }
  return out;
}

}  // namespace mfaimd
