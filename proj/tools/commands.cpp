#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "cli.hpp"
#include "mfaimd/analysis.hpp"
#include "mfaimd/equilibrium.hpp"
#include "mfaimd/error.hpp"
#include "mfaimd/mckean.hpp"
#include "mfaimd/particle_sim.hpp"
#include "mfaimd/validation.hpp"

namespace mfaimd::cli {

using nlohmann::json;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

namespace {

std::ofstream open_output(RunContext& ctx, const std::string& name) {
  std::ofstream f(ctx.out_dir / name, std::ios::binary);
  if (!f) throw ConfigError("out-dir", "cannot write " + (ctx.out_dir / name).string());
  ctx.outputs.push_back(name);
  return f;
}

void write_json(RunContext& ctx, const std::string& name, const json& doc) {
  auto f = open_output(ctx, name);
  f << doc.dump(2) << '\n';
}

/// JSON has no NaN or infinity; those become null.
json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::vector<mckean::SingleUserInit> model_init(const ModelConfig& cfg) {
  std::vector<mckean::SingleUserInit> init;
  for (const auto& c : cfg.classes) init.push_back(mckean::SingleUserInit::mixed(c.initial_on_fraction));
  return init;
}

}  // namespace

int simulate(RunContext& ctx, const SimulateArgs& a) {
  std::vector<std::size_t> counts = a.n;
  if (counts.size() == 1 && ctx.cfg.class_count() > 1) counts.assign(ctx.cfg.class_count(), a.n[0]);
  particle::SimulationOptions o;
  o.horizon = a.horizon;
  o.samples = a.samples;
  o.replicas = a.replicas;
  o.seed = ctx.seed;
  o.scaled = a.scaled;
  o.workers = ctx.workers;
  const auto ens = a.dt ? particle::simulate_euler(ctx.cfg, counts, InitialCondition::from_model(), *a.dt, o)
                        : particle::simulate_exact(ctx.cfg, counts, InitialCondition::from_model(), o);
  for (const auto& w : ens.warnings) *ctx.err << "warning: " << w << '\n';

  ctx.params = {{"n", counts},          {"horizon", a.horizon}, {"replicas", a.replicas},
                {"samples", a.samples}, {"scaled", a.scaled},   {"scheme", ens.scheme}};
  if (a.dt) ctx.params["dt"] = *a.dt;

  auto f = open_output(ctx, "trajectories.csv");
  f << "replica,t,class,mean_wplus,on_fraction\n";
  for (std::size_t r = 0; r < ens.replicas; ++r)
    for (std::size_t ti = 0; ti < ens.times.size(); ++ti)
      for (std::size_t k = 0; k < ens.classes(); ++k) {
        const auto& s = ens.summary(r, ti, k);
        f << r << ',' << format_double(ens.times[ti]) << ',' << k << ','
          << format_double(s.mean_wplus) << ',' << format_double(s.on_fraction) << '\n';
      }
  return kOk;
}

int picard(RunContext& ctx, const PicardArgs& a) {
  mckean::PicardOptions o;
  o.horizon = a.horizon;
  o.grid_intervals = a.grid;
  o.replicas = a.replicas;
  o.tolerance = a.tol;
  o.damping = a.damping;
  o.max_iterations = a.max_iter;
  o.seed = ctx.seed;
  o.workers = ctx.workers;
  const auto rep = mckean::picard_solve(ctx.cfg, model_init(ctx.cfg), o);
  ctx.params = {{"horizon", a.horizon}, {"grid", a.grid},         {"replicas", a.replicas},
                {"tol", a.tol},         {"damping", a.damping},   {"max_iter", a.max_iter}};

  auto f = open_output(ctx, "load_trajectory.csv");
  f << "iteration,t";
  for (std::size_t j = 0; j < ctx.cfg.nodes; ++j) f << ",u_" << j + 1;
  f << '\n';
  for (std::size_t m = 0; m < rep.iterates.size(); ++m) {
    const auto& u = rep.iterates[m];
    for (std::size_t i = 0; i <= u.intervals(); ++i) {
      f << m << ',' << format_double(u.time(i));
      for (std::size_t j = 0; j < u.nodes(); ++j) f << ',' << format_double(u.value(i, j));
      f << '\n';
    }
  }

  json doc;
  doc["iterations"] = rep.iterations;
  doc["distances"] = rep.distances;
  doc["converged"] = rep.converged;
  doc["tolerance"] = a.tol;
  doc["damping"] = a.damping;
  doc["times"] = rep.solution.times();
  doc["class_mean"] = rep.class_mean;
  doc["class_mean_error"] = rep.class_mean_error;
  write_json(ctx, "picard.json", doc);
  if (!rep.converged) {
    *ctx.err << "picard: not converged after " << rep.iterations << " iterations (last distance "
             << (rep.distances.empty() ? 0.0 : rep.distances.back()) << ")\n";
    return kNotConverged;
  }
  return kOk;
}

int equilibrium(RunContext& ctx, const EquilibriumArgs& a) {
  equilibrium::FixedPointOptions o;
  if (!a.u0.empty()) o.initial_guess = a.u0;
  o.tolerance = a.tol;
  o.damping = a.damping;
  o.max_iterations = a.max_iter;
  o.starts = a.starts;
  o.hazard.replicas = a.replicas;
  o.hazard.hazard_cap = a.hmax;
  o.hazard.time_cap = a.tmax;
  o.hazard.seed = ctx.seed;
  o.hazard.workers = ctx.workers;
  ctx.params = {{"u0", a.u0},     {"tol", a.tol},         {"damping", a.damping},
                {"max_iter", a.max_iter}, {"replicas", a.replicas}, {"hmax", a.hmax},
                {"tmax", a.tmax}, {"starts", a.starts}};
  const auto rep = equilibrium::fixed_point_solve(ctx.cfg, o);

  const std::size_t J = ctx.cfg.nodes;
  auto f = open_output(ctx, "iteration_trace.csv");
  f << "start,iteration";
  for (std::size_t j = 0; j < J; ++j) f << ",u_" << j + 1;
  for (std::size_t j = 0; j < J; ++j) f << ",F_" << j + 1;
  f << ",residual\n";
  for (const auto& t : rep.trace) {
    f << t.start << ',' << t.iteration;
    for (double x : t.u) f << ',' << format_double(x);
    for (double x : t.image) f << ',' << format_double(x);
    f << ',' << format_double(t.residual) << '\n';
  }

  json doc;
  doc["u_star"] = rep.u_star;
  doc["u_star_error"] = rep.u_star_error;
  doc["residual"] = number(rep.residual);
  doc["converged"] = rep.converged;
  doc["oscillating"] = rep.oscillating;
  doc["iterations"] = rep.iterations;
  doc["possibly_infinite_mass"] = rep.possibly_infinite;
  doc["diagnostic"] = rep.diagnostic;
  json classes = json::array();
  for (std::size_t k = 0; k < rep.classes.size(); ++k) {
    const auto& c = rep.classes[k];
    classes.push_back({{"name", ctx.cfg.classes[k].name},
                       {"Z", c.normalization},
                       {"Z_error", c.normalization_error},
                       {"lambda", c.activation_rate},
                       {"on_probability", c.on_probability},
                       {"off_probability", 1.0 - c.on_probability},
                       {"mean_window", c.mean_window},
                       {"mean_window_error", c.mean_window_error}});
  }
  doc["classes"] = classes;
  json starts = json::array();
  for (const auto& s : rep.starts)
    starts.push_back({{"initial", s.initial},
                      {"limit", s.limit},
                      {"residual", number(s.residual)},
                      {"iterations", s.iterations},
                      {"converged", s.converged},
                      {"oscillating", s.oscillating}});
  doc["restarts"] = starts;
  doc["distinct_limits"] = rep.distinct_limits;
  if (const auto cf = equilibrium::closed_form_fixed_point(ctx.cfg))
    doc["closed_form"] = {{"u_star", cf->u_star}, {"Z", cf->normalization}, {"numerator", cf->numerator}};
  else
    doc["closed_form"] = nullptr;
  write_json(ctx, "fixed_point.json", doc);

  if (rep.possibly_infinite) {
    *ctx.err << "equilibrium: possibly infinite mass: " << rep.diagnostic << '\n';
    return kInfiniteMass;
  }
  if (!rep.converged) {
    *ctx.err << "equilibrium: " << rep.diagnostic << '\n';
    return kNotConverged;
  }
  if (rep.distinct_limits.size() > 1)
    *ctx.err << "equilibrium: " << rep.distinct_limits.size() << " distinct limits found\n";
  return kOk;
}

int chaos_study(RunContext& ctx, const ChaosArgs& a) {
  if (a.samples == 0 || a.grid % a.samples != 0)
    throw ConfigError("grid", "must be a positive multiple of --samples");
  ctx.params = {{"n_grid", a.n_grid},   {"horizon", a.horizon},
                {"replicas", a.replicas}, {"samples", a.samples},
                {"grid", a.grid},       {"picard_replicas", a.picard_replicas},
                {"pair_sample", a.pair_sample}, {"scheme", "exact"}};

  mckean::PicardOptions po;
  po.horizon = a.horizon;
  po.grid_intervals = a.grid;
  po.replicas = a.picard_replicas;
  // The CRN map is piecewise constant in u, so iterates settle into a cycle at
  // the Monte-Carlo resolution; stop there instead of at a fixed tolerance.
  po.tolerance = std::max(1e-4, 0.02 / std::sqrt(static_cast<double>(a.picard_replicas)));
  po.seed = ctx.seed ^ 0x5eedULL;
  po.workers = ctx.workers;
  const auto ref = mckean::picard_solve(ctx.cfg, model_init(ctx.cfg), po);

  const std::size_t K = ctx.cfg.class_count();
  std::vector<TrajectoryEnsemble> ensembles;
  std::vector<std::size_t> totals;
  for (std::size_t N : a.n_grid) {
    std::vector<std::size_t> counts(K);
    for (std::size_t k = 0; k < K; ++k)
      counts[k] = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(ctx.cfg.proportions[k] * static_cast<double>(N))));
    particle::SimulationOptions o;
    o.horizon = a.horizon;
    o.samples = a.samples;
    o.replicas = a.replicas;
    o.seed = ctx.seed;
    o.scaled = true;
    o.store_snapshots = true;
    o.workers = ctx.workers;
    ensembles.push_back(particle::simulate_exact(ctx.cfg, counts, InitialCondition::from_model(), o));
    totals.push_back(ensembles.back().total_users());
  }

  analysis::ChaosOptions co;
  co.pair_sample = a.pair_sample;
  co.seed = ctx.seed;
  std::vector<std::vector<double>> reference(K);
  const std::size_t stride = a.grid / a.samples;
  for (std::size_t ti = 1; ti <= a.samples; ++ti) {
    co.time_indices.push_back(ti);
    for (std::size_t k = 0; k < K; ++k) reference[k].push_back(ref.class_mean[k][ti * stride]);
  }
  co.reference_mean = reference;
  std::vector<analysis::ChaosInput> inputs;
  for (std::size_t i = 0; i < ensembles.size(); ++i) inputs.push_back({totals[i], &ensembles[i]});
  const auto rep = analysis::chaoticity_report(inputs, co);

  auto f = open_output(ctx, "chaos.csv");
  f << "N,t,class_a,class_b,mean_error,mean_error_se,pair_cov,pair_cov_se,pair_cov_lo,pair_cov_hi,"
       "zero_cov_accepted\n";
  for (const auto& r : rep.rows) {
    f << r.total_users << ',' << format_double(r.t) << ',' << r.class_a << ',' << r.class_b << ','
      << (r.mean_error ? format_double(*r.mean_error) : "") << ','
      << (r.mean_error_se ? format_double(*r.mean_error_se) : "") << ',' << format_double(r.pair_cov)
      << ',' << format_double(r.pair_cov_se) << ',' << format_double(r.pair_cov_lo) << ','
      << format_double(r.pair_cov_hi) << ',' << (r.zero_cov_accepted ? 1 : 0) << '\n';
  }

  auto fit_json = [](const std::optional<analysis::SlopeFit>& s) -> json {
    if (!s) return nullptr;
    return {{"slope", s->slope}, {"slope_error", s->slope_error}, {"points", s->points}};
  };
  json fits = json::array();
  for (std::size_t i = 0; i < rep.times.size(); ++i)
    fits.push_back({{"t", rep.times[i]},
                    {"mean_error", fit_json(rep.mean_error_fit[i])},
                    {"pair_cov", fit_json(rep.pair_cov_fit[i])}});
  json doc;
  doc["n_grid"] = totals;
  doc["fits"] = fits;
  doc["picard_converged"] = ref.converged;
  doc["picard_iterations"] = ref.iterations;
  doc["picard_tolerance"] = po.tolerance;
  write_json(ctx, "chaos.json", doc);
  if (!ref.converged) {
    *ctx.err << "chaos-study: reference Picard iteration did not converge\n";
    return kNotConverged;
  }
  return kOk;
}

int validate(RunContext& ctx) {
  const auto rep = validate_config(ctx.cfg);
  json doc;
  doc["ok"] = rep.ok();
  json errors = json::array(), warnings = json::array(), classes = json::array();
  for (const auto& e : rep.errors) errors.push_back({{"field", e.field}, {"message", e.message}});
  for (const auto& w : rep.warnings) warnings.push_back({{"field", w.field}, {"message", w.message}});
  for (std::size_t k = 0; k < rep.classes.size(); ++k) {
    const auto& d = rep.classes[k];
    classes.push_back({{"class", k},
                       {"branch", static_cast<int>(d.branch)},
                       {"branch_name", to_string(d.branch)},
                       {"growth_positive", d.growth_positive},
                       {"growth_bounded", d.growth_bounded},
                       {"loss_recurrent", d.loss_recurrent},
                       {"activation_positive", d.activation_positive},
                       {"finite_mass_guaranteed", d.finite_mass_guaranteed}});
  }
  doc["errors"] = errors;
  doc["warnings"] = warnings;
  doc["classes"] = classes;
  write_json(ctx, "validation.json", doc);

  for (const auto& w : rep.warnings) *ctx.err << "warning: " << w.field << ": " << w.message << '\n';
  for (const auto& e : rep.errors) *ctx.err << "error: " << e.field << ": " << e.message << '\n';
  if (!rep.ok()) return kConfig;
  *ctx.out << "ok";
  for (std::size_t k = 0; k < rep.classes.size(); ++k)
    *ctx.out << (k ? ", " : ": ") << ctx.cfg.classes[k].name << " branch "
             << static_cast<int>(rep.classes[k].branch);
  *ctx.out << '\n';
  return kOk;
}

}  // namespace mfaimd::cli
