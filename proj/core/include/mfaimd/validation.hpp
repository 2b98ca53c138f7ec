#pragma once

#include <string>
#include <vector>

#include "mfaimd/model.hpp"

namespace mfaimd {

/// Which alternative of the well-posedness moment condition the loss and
/// departure families fall under.
enum class ConditionBranch {
  LipschitzExponentialMoment = 1,  ///< b, mu Lipschitz; needs an exponential moment
  WindowProportionalGaussian = 2,  ///< b or mu of the form w * beta(u); Gaussian moment
};

struct Issue {
  std::string field;
  std::string message;
};

struct ClassDiagnostics {
  ConditionBranch branch = ConditionBranch::LipschitzExponentialMoment;
  bool growth_positive = false;    ///< inf_w a(w, u) > 0 on the load box
  bool growth_bounded = false;     ///< a has a finite (declared or intrinsic) bound
  bool loss_recurrent = false;     ///< inf_{w >= x0} b(w, u) > 0 for some x0, on the box
  bool activation_positive = false;  ///< lambda(u) > 0 on the box
  bool finite_mass_guaranteed = false;  ///< inf_w mu(w, u) > 0 on the box
};

struct ValidationReport {
  std::vector<Issue> errors;    ///< structural: the model cannot be simulated
  std::vector<Issue> warnings;  ///< hypotheses of the limit theory not guaranteed
  std::vector<ClassDiagnostics> classes;

  bool ok() const noexcept { return errors.empty(); }
};

ValidationReport validate_config(const ModelConfig& cfg);

/// Throws ConfigError naming the first structural error.
void require_valid(const ModelConfig& cfg);

std::string to_string(ConditionBranch branch);

}  // namespace mfaimd
