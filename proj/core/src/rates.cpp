#include "mfaimd/rates.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfaimd/rng.hpp"
#include "overloaded.hpp"

namespace mfaimd {

using detail::overloaded;
namespace {

double dot(const std::vector<double>& c, std::span<const double> u) noexcept {
  double s = 0.0;
  const std::size_t n = std::min(c.size(), u.size());
  for (std::size_t j = 0; j < n; ++j) s += c[j] * u[j];
  return s;
}

bool all_zero(const std::vector<double>& c) noexcept {
  return std::all_of(c.begin(), c.end(), [](double x) { return x == 0.0; });
}

}  // namespace

std::string_view RateFamily::name() const noexcept {
  return std::visit(overloaded{
                        [](const family::Constant&) { return std::string_view("constant"); },
                        [](const family::LoadAffine&) { return std::string_view("load_affine"); },
                        [](const family::WindowTimesLoadAffine&) {
                          return std::string_view("window_times_load_affine");
                        },
                        [](const family::ReciprocalLoadAffine&) {
                          return std::string_view("reciprocal_load_affine");
                        },
                    },
                    form_);
}

double RateFamily::operator()(double w, std::span<const double> u) const noexcept {
  return std::visit(
      overloaded{
          [](const family::Constant& f) { return f.c; },
          [&](const family::LoadAffine& f) { return f.c0 + dot(f.coeff, u); },
          [&](const family::WindowTimesLoadAffine& f) { return w * (f.delta + dot(f.coeff, u)); },
          [&](const family::ReciprocalLoadAffine& f) { return 1.0 / (f.tau + dot(f.coeff, u)); },
      },
      form_);
}

double RateFamily::upper_bound(double w_hi, std::span<const double> u_lo,
                               std::span<const double> u_hi) const noexcept {
  return std::visit(
      overloaded{
          [](const family::Constant& f) { return f.c; },
          [&](const family::LoadAffine& f) { return f.c0 + dot(f.coeff, u_hi); },
          [&](const family::WindowTimesLoadAffine& f) {
            return w_hi * (f.delta + dot(f.coeff, u_hi));
          },
          [&](const family::ReciprocalLoadAffine& f) { return 1.0 / (f.tau + dot(f.coeff, u_lo)); },
      },
      form_);
}

double RateFamily::inf_over_window(std::span<const double> u) const noexcept {
  if (std::holds_alternative<family::WindowTimesLoadAffine>(form_)) return 0.0;
  return (*this)(0.0, u);
}

bool RateFamily::depends_on_window() const noexcept {
  if (const auto* f = std::get_if<family::WindowTimesLoadAffine>(&form_))
    return f->delta != 0.0 || !all_zero(f->coeff);
  return false;
}

bool RateFamily::depends_on_load() const noexcept {
  return std::visit(overloaded{
                        [](const family::Constant&) { return false; },
                        [](const family::LoadAffine& f) { return !all_zero(f.coeff); },
                        [](const family::WindowTimesLoadAffine& f) { return !all_zero(f.coeff); },
                        [](const family::ReciprocalLoadAffine& f) { return !all_zero(f.coeff); },
                    },
                    form_);
}

bool RateFamily::is_lipschitz() const noexcept { return !depends_on_window(); }

std::optional<double> RateFamily::global_bound() const noexcept {
  return std::visit(overloaded{
                        [](const family::Constant& f) -> std::optional<double> { return f.c; },
                        [](const family::LoadAffine& f) -> std::optional<double> {
                          if (all_zero(f.coeff)) return f.c0;
                          return std::nullopt;
                        },
                        [](const family::WindowTimesLoadAffine& f) -> std::optional<double> {
                          if (f.delta == 0.0 && all_zero(f.coeff)) return 0.0;
                          return std::nullopt;
                        },
                        [](const family::ReciprocalLoadAffine& f) -> std::optional<double> {
                          if (f.tau > 0.0) return 1.0 / f.tau;
                          return std::nullopt;
                        },
                    },
                    form_);
}

std::optional<double> RateFamily::constant_value() const noexcept {
  if (depends_on_window() || depends_on_load()) return std::nullopt;
  return (*this)(0.0, std::span<const double>{});
}

std::optional<double> RateFamily::linear_window_coefficient() const noexcept {
  if (const auto* f = std::get_if<family::WindowTimesLoadAffine>(&form_))
    if (all_zero(f->coeff)) return f->delta;
  return std::nullopt;
}

std::vector<std::pair<std::string, double>> RateFamily::parameters() const {
  std::vector<std::pair<std::string, double>> out;
  auto add_coeff = [&](const char* name, const std::vector<double>& c) {
    for (std::size_t j = 0; j < c.size(); ++j)
      out.emplace_back(std::string(name) + "[" + std::to_string(j) + "]", c[j]);
  };
  std::visit(overloaded{
                 [&](const family::Constant& f) { out.emplace_back("c", f.c); },
                 [&](const family::LoadAffine& f) {
                   out.emplace_back("c0", f.c0);
                   add_coeff("c", f.coeff);
                 },
                 [&](const family::WindowTimesLoadAffine& f) {
                   out.emplace_back("delta", f.delta);
                   add_coeff("d", f.coeff);
                 },
                 [&](const family::ReciprocalLoadAffine& f) {
                   out.emplace_back("tau", f.tau);
                   add_coeff("t", f.coeff);
                 },
             },
             form_);
  return out;
}

std::size_t RateFamily::coefficient_count() const noexcept {
  return std::visit(overloaded{
                        [](const family::Constant&) -> std::size_t { return 0; },
                        [](const auto& f) -> std::size_t { return f.coeff.size(); },
                    },
                    form_);
}

std::string_view InitialLaw::name() const noexcept {
  return std::visit(overloaded{
                        [](const law::Dirac&) { return std::string_view("dirac"); },
                        [](const law::Exponential&) { return std::string_view("exponential"); },
                        [](const law::Uniform&) { return std::string_view("uniform"); },
                    },
                    form_);
}

double InitialLaw::mean() const noexcept {
  return std::visit(overloaded{
                        [](const law::Dirac& l) { return l.w0; },
                        [](const law::Exponential& l) { return l.mean; },
                        [](const law::Uniform& l) { return 0.5 * (l.lo + l.hi); },
                    },
                    form_);
}

double InitialLaw::sample(CounterRng& rng) const {
  return std::visit(overloaded{
                        [](const law::Dirac& l) { return l.w0; },
                        [&](const law::Exponential& l) { return l.mean * rng.exponential(); },
                        [&](const law::Uniform& l) { return l.lo + (l.hi - l.lo) * rng.uniform(); },
                    },
                    form_);
}

std::optional<std::string> InitialLaw::check() const {
  auto finite_nonneg = [](double x) { return std::isfinite(x) && x >= 0.0; };
  return std::visit(
      overloaded{
          [&](const law::Dirac& l) -> std::optional<std::string> {
            if (!finite_nonneg(l.w0)) return "dirac w0 must be finite and >= 0";
            return std::nullopt;
          },
          [&](const law::Exponential& l) -> std::optional<std::string> {
            if (!(std::isfinite(l.mean) && l.mean > 0.0)) return "exponential mean must be > 0";
            return std::nullopt;
          },
          [&](const law::Uniform& l) -> std::optional<std::string> {
            if (!finite_nonneg(l.lo) || !finite_nonneg(l.hi) || l.hi < l.lo)
              return "uniform bounds must satisfy 0 <= lo <= hi";
            return std::nullopt;
          },
      },
      form_);
}

}  // namespace mfaimd
