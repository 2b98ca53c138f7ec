#pragma once

#include <functional>
#include <vector>

#include "mfaimd/user_state.hpp"

namespace mfaimd {

struct PathPoint {
  double t = 0.0;
  UserState state;
};

/// Sampled cadlag path of one user. Knots are in nondecreasing time; two
/// knots at the same time encode a jump (left limit, then new value). Between
/// knots at distinct times an ON window is linear in t and OFF stays OFF.
class Path {
 public:
  Path() = default;
  explicit Path(std::vector<PathPoint> knots) : knots_(std::move(knots)) {}

  void push(double t, const UserState& s) { knots_.push_back({t, s}); }
  void reserve(std::size_t n) { knots_.reserve(n); }

  const std::vector<PathPoint>& knots() const noexcept { return knots_; }
  bool empty() const noexcept { return knots_.empty(); }
  double start() const noexcept { return knots_.front().t; }
  double end() const noexcept { return knots_.back().t; }

  /// Right-continuous value at t in [start, end].
  UserState at(double t) const;
  /// Left limit at t in (start, end].
  UserState left_limit(double t) const;

  /// Integral of f(state(s)) over [t0, t1]; exact for f affine in the window,
  /// three-point Gauss-Legendre per linear piece otherwise.
  double integrate(const std::function<double(const UserState&)>& f, double t0,
                   double t1) const;

 private:
  std::vector<PathPoint> knots_;
};

/// sup over s in [start, end] of the trace distance between two paths,
/// evaluated over both left limits and values at every knot of either path.
double sup_trace_distance(const Path& x, const Path& y);

}  // namespace mfaimd
