#include "mfaimd/path.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mfaimd/error.hpp"

namespace mfaimd {
namespace {

// Linear interpolation of the window between two knots at distinct times.
UserState interpolate(const PathPoint& a, const PathPoint& b, double t) {
  if (a.state.is_off()) return a.state;
  if (b.state.is_off() || b.t <= a.t) return a.state;
  const double s = (t - a.t) / (b.t - a.t);
  return UserState::on(std::max(0.0, a.state.window() + s * (b.state.window() - a.state.window())));
}

}  // namespace

UserState Path::at(double t) const {
  if (knots_.empty()) throw ConfigError("path", "empty path");
  if (t <= knots_.front().t) {
    // Right-continuous: the last knot sharing the start time.
    auto it = std::upper_bound(knots_.begin(), knots_.end(), knots_.front().t,
                               [](double x, const PathPoint& p) { return x < p.t; });
    return std::prev(it)->state;
  }
  if (t >= knots_.back().t) return knots_.back().state;
  // First knot strictly after t.
  auto hi = std::upper_bound(knots_.begin(), knots_.end(), t,
                             [](double x, const PathPoint& p) { return x < p.t; });
  auto lo = std::prev(hi);
  if (lo->t == t) return lo->state;
  return interpolate(*lo, *hi, t);
}

UserState Path::left_limit(double t) const {
  if (knots_.empty()) throw ConfigError("path", "empty path");
  if (t <= knots_.front().t) return knots_.front().state;
  // First knot with time >= t.
  auto hi = std::lower_bound(knots_.begin(), knots_.end(), t,
                             [](const PathPoint& p, double x) { return p.t < x; });
  if (hi == knots_.end()) return knots_.back().state;
  return interpolate(*std::prev(hi), *hi, t);
}

double Path::integrate(const std::function<double(const UserState&)>& f, double t0,
                       double t1) const {
  if (knots_.empty() || t1 <= t0) return 0.0;
  // Gauss-Legendre nodes on [-1, 1].
  static constexpr std::array<double, 3> x = {-0.7745966692414834, 0.0, 0.7745966692414834};
  static constexpr std::array<double, 3> w = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
    const PathPoint& a = knots_[i];
    const PathPoint& b = knots_[i + 1];
    const double lo = std::max(a.t, t0);
    const double hi = std::min(b.t, t1);
    if (hi <= lo) continue;
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (std::size_t q = 0; q < 3; ++q) s += w[q] * f(interpolate(a, b, mid + half * x[q]));
    total += half * s;
  }
  return total;
}

double sup_trace_distance(const Path& x, const Path& y) {
  if (x.empty() || y.empty()) throw ConfigError("path", "empty path");
  std::vector<double> ts;
  ts.reserve(x.knots().size() + y.knots().size());
  for (const auto& p : x.knots()) ts.push_back(p.t);
  for (const auto& p : y.knots()) ts.push_back(p.t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  const double t0 = std::max(x.start(), y.start());
  const double t1 = std::min(x.end(), y.end());
  double sup = 0.0;
  for (double t : ts) {
    if (t < t0 || t > t1) continue;
    sup = std::max(sup, trace_distance(x.at(t), y.at(t)));
    if (t > t0) sup = std::max(sup, trace_distance(x.left_limit(t), y.left_limit(t)));
  }
  return sup;
}

}  // namespace mfaimd
