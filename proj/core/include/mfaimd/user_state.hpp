#pragma once

#include <iosfwd>

namespace mfaimd {

/// State of one user: either OFF, or ON with a window w >= 0.
class UserState {
 public:
  constexpr UserState() noexcept = default;

  static constexpr UserState off() noexcept { return UserState{}; }
  /// Throws ConfigError when w is negative or not finite.
  static UserState on(double w);

  constexpr bool is_on() const noexcept { return on_; }
  constexpr bool is_off() const noexcept { return !on_; }

  /// Window of an ON user; 0 for OFF.
  constexpr double window() const noexcept { return w_; }
  /// w+ : the window when ON, 0 when OFF.
  constexpr double plus() const noexcept { return on_ ? w_ : 0.0; }

  /// Position on the real line used by the file format and the trace metric:
  /// OFF -> -1, ON(w) -> w.
  constexpr double coordinate() const noexcept { return on_ ? w_ : -1.0; }
  /// Inverse of coordinate(): any negative value decodes to OFF.
  static UserState from_coordinate(double x);

  friend constexpr bool operator==(const UserState&, const UserState&) = default;

 private:
  constexpr UserState(bool on, double w) noexcept : on_(on), w_(w) {}

  bool on_ = false;
  double w_ = 0.0;
};

/// Trace of the line metric on {-1} U R+: d(OFF, ON(w)) = 1 + w,
/// d(ON(w), ON(w')) = |w - w'|.
double trace_distance(const UserState& x, const UserState& y) noexcept;

std::ostream& operator<<(std::ostream& os, const UserState& s);

}  // namespace mfaimd
