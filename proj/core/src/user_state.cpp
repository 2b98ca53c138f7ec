#include "mfaimd/user_state.hpp"

#include <cmath>
#include <ostream>

#include "mfaimd/error.hpp"

namespace mfaimd {

UserState UserState::on(double w) {
  if (!(w >= 0.0) || !std::isfinite(w))
    throw ConfigError("", "window must be finite and nonnegative, got " + std::to_string(w));
  return UserState{true, w};
}

UserState UserState::from_coordinate(double x) {
  if (std::isnan(x)) throw ConfigError("", "state coordinate is NaN");
  return x < 0.0 ? off() : on(x);
}

double trace_distance(const UserState& x, const UserState& y) noexcept {
  return std::abs(x.coordinate() - y.coordinate());
}

std::ostream& operator<<(std::ostream& os, const UserState& s) {
  if (s.is_off()) return os << "Off";
  return os << "On(" << s.window() << ")";
}

}  // namespace mfaimd
