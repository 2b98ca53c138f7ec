#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace mfaimd {

class CounterRng;

/// Parametric rate families f(w, u) >= 0 of a window w >= 0 and a load
/// vector u in R+^J. Per-node coefficient vectors are either empty (all
/// zero) or of length J.
namespace family {

/// f = c
struct Constant {
  double c = 0.0;
};

/// f = c0 + sum_j c_j u_j, independent of w
struct LoadAffine {
  double c0 = 0.0;
  std::vector<double> coeff;
};

/// f = w * (delta + sum_j d_j u_j)
struct WindowTimesLoadAffine {
  double delta = 0.0;
  std::vector<double> coeff;
};

/// f = 1 / (tau + sum_j t_j u_j), tau > 0; the round-trip-time form
struct ReciprocalLoadAffine {
  double tau = 1.0;
  std::vector<double> coeff;
};

}  // namespace family

class RateFamily {
 public:
  using Form = std::variant<family::Constant, family::LoadAffine,
                            family::WindowTimesLoadAffine, family::ReciprocalLoadAffine>;

  RateFamily() : form_(family::Constant{0.0}) {}
  RateFamily(Form form) : form_(std::move(form)) {}  // NOLINT(google-explicit-constructor)

  static RateFamily constant(double c) { return RateFamily(family::Constant{c}); }
  static RateFamily load_affine(double c0, std::vector<double> coeff) {
    return RateFamily(family::LoadAffine{c0, std::move(coeff)});
  }
  static RateFamily window_times(double delta, std::vector<double> coeff = {}) {
    return RateFamily(family::WindowTimesLoadAffine{delta, std::move(coeff)});
  }
  static RateFamily reciprocal(double tau, std::vector<double> coeff = {}) {
    return RateFamily(family::ReciprocalLoadAffine{tau, std::move(coeff)});
  }

  const Form& form() const noexcept { return form_; }
  std::string_view name() const noexcept;

  double operator()(double w, std::span<const double> u) const noexcept;

  /// Upper bound over windows in [0, w_hi] and loads in the box [u_lo, u_hi].
  /// All families are nondecreasing in w and monotone in each u_j.
  double upper_bound(double w_hi, std::span<const double> u_lo,
                     std::span<const double> u_hi) const noexcept;

  /// inf over w >= 0 at fixed u.
  double inf_over_window(std::span<const double> u) const noexcept;

  bool depends_on_window() const noexcept;
  bool depends_on_load() const noexcept;
  /// Globally Lipschitz in (w, u) on R+ x R+^J.
  bool is_lipschitz() const noexcept;
  /// Bounded over R+ x R+^J; returns the bound when it is.
  std::optional<double> global_bound() const noexcept;
  /// Value when the family ignores both w and u.
  std::optional<double> constant_value() const noexcept;
  /// Coefficient of w when the family is exactly w * c with c independent of u.
  std::optional<double> linear_window_coefficient() const noexcept;

  /// Parameters in declaration order, for nonnegativity checks.
  std::vector<std::pair<std::string, double>> parameters() const;
  std::size_t coefficient_count() const noexcept;

 private:
  Form form_;
};

/// Law of the window a user starts with when switching ON.
namespace law {
struct Dirac {
  double w0 = 0.0;
};
struct Exponential {
  double mean = 1.0;
};
struct Uniform {
  double lo = 0.0;
  double hi = 1.0;
};
}  // namespace law

class InitialLaw {
 public:
  using Form = std::variant<law::Dirac, law::Exponential, law::Uniform>;

  InitialLaw() : form_(law::Dirac{0.0}) {}
  InitialLaw(Form form) : form_(form) {}  // NOLINT(google-explicit-constructor)

  static InitialLaw dirac(double w0) { return InitialLaw(law::Dirac{w0}); }
  static InitialLaw exponential(double mean) { return InitialLaw(law::Exponential{mean}); }
  static InitialLaw uniform(double lo, double hi) { return InitialLaw(law::Uniform{lo, hi}); }

  const Form& form() const noexcept { return form_; }
  std::string_view name() const noexcept;

  double mean() const noexcept;
  double sample(CounterRng& rng) const;
  /// Empty when the law is well formed, otherwise a description of the problem.
  std::optional<std::string> check() const;

 private:
  Form form_;
};

}  // namespace mfaimd
