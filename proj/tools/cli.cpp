#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iterator>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "commands.hpp"
#include "mfaimd/config_io.hpp"
#include "mfaimd/error.hpp"
#include "mfaimd/parallel.hpp"
#include "mfaimd/validation.hpp"

#ifndef MFAIMD_VERSION
#define MFAIMD_VERSION "0.0.0"
#endif

namespace mfaimd::cli {

using nlohmann::json;

namespace {

std::string utc_stamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("config", "cannot read " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned workers = 0;
};

void add_common(CLI::App& sub, Common& c) {
  sub.add_option("--config", c.config, "Model configuration (JSON)")->required();
  sub.add_option("--seed", c.seed, "Master seed (default: $MFAIMD_SEED, else 0)");
  sub.add_option("--out-dir", c.out_dir, "Output directory (default: ./runs/<timestamp>-<digest8>)");
  sub.add_option("--workers", c.workers, "Concurrent replicas (0 = available parallelism)");
}

std::uint64_t resolve_seed(const CLI::App& sub, const Common& c) {
  if (sub.count("--seed") > 0) return c.seed;
  if (const char* env = std::getenv("MFAIMD_SEED")) {
    try {
      std::size_t used = 0;
      const std::string s(env);
      const auto v = std::stoull(s, &used, 0);
      if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("MFAIMD_SEED", "not an unsigned integer");
  }
  return 0;
}

int execute(const std::string& name, const CLI::App& sub, const Common& common,
            const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            const std::function<int(RunContext&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  RunContext ctx;
  ctx.out = &out;
  ctx.err = &err;
  ctx.seed = resolve_seed(sub, common);
  ctx.workers = common.workers;

  const std::string text = read_file(common.config);
  ctx.config_text = canonical_json(text);
  const std::string digest = digest_hex(ctx.config_text);
  ctx.cfg = parse_config(text);

  ctx.out_dir = common.out_dir.empty()
                    ? std::filesystem::path("runs") / (utc_stamp() + "-" + digest.substr(0, 8))
                    : std::filesystem::path(common.out_dir);
  std::error_code ec;
  std::filesystem::create_directories(ctx.out_dir, ec);
  if (ec) throw ConfigError("out-dir", "cannot create " + ctx.out_dir.string() + ": " + ec.message());

  int code = kOk;
  std::string failure;
  try {
    if (name != "validate") {
      const auto rep = validate_config(ctx.cfg);
      for (const auto& w : rep.warnings) err << "warning: " << w.field << ": " << w.message << '\n';
      if (!rep.ok()) throw ConfigError(rep.errors.front().field, rep.errors.front().message);
    }
    code = body(ctx);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    failure = e.what();
    code = kConfig;
  } catch (const InfiniteMassError& e) {
    err << "error: possibly infinite mass: " << e.what() << '\n';
    failure = e.what();
    code = kInfiniteMass;
  } catch (const NumericalError& e) {
    err << "error: numerical: " << e.what() << '\n';
    failure = e.what();
    code = kNumerical;
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json manifest;
  manifest["tool"] = "mfaimd";
  manifest["version"] = MFAIMD_VERSION;
  manifest["subcommand"] = name;
  manifest["argv"] = args;
  manifest["params"] = ctx.params;
  manifest["seed"] = ctx.seed;
  manifest["workers"] = resolve_workers(ctx.workers);
  manifest["config_digest"] = digest;
  manifest["config"] = json::parse(ctx.config_text);
  manifest["wall_seconds"] = wall;
  manifest["started_utc"] = utc_stamp();
  manifest["outputs"] = ctx.outputs;
  manifest["exit_code"] = code;
  if (!failure.empty()) manifest["error"] = failure;
  std::ofstream f(ctx.out_dir / "run.json", std::ios::binary);
  f << manifest.dump(2) << '\n';
  if (!f) {
    err << "error: cannot write " << (ctx.out_dir / "run.json").string() << '\n';
    if (code == kOk) code = kConfig;
  }
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field AIMD simulator and equilibrium solver", "mfaimd"};
  app.set_version_flag("--version", std::string(MFAIMD_VERSION));
  app.require_subcommand(1);

  Common common;
  SimulateArgs sim;
  PicardArgs pic;
  EquilibriumArgs eq;
  ChaosArgs chaos;

  auto* s = app.add_subcommand("simulate", "Simulate the finite-N particle system");
  add_common(*s, common);
  s->add_option("--n", sim.n, "Users per class (comma separated; one value applies to all)")
      ->required()
      ->delimiter(',');
  s->add_option("--horizon", sim.horizon, "Final time")->capture_default_str();
  s->add_option("--dt", sim.dt, "Euler step; absent selects the exact scheme");
  s->add_option("--replicas", sim.replicas, "Independent replicas")->capture_default_str();
  s->add_option("--samples", sim.samples, "Output intervals on [0, horizon]")->capture_default_str();
  s->add_flag("--scaled", sim.scaled, "Divide loads by the total user count");

  auto* p = app.add_subcommand("picard", "Solve the limit load trajectory by Picard iteration");
  add_common(*p, common);
  p->add_option("--horizon", pic.horizon)->capture_default_str();
  p->add_option("--grid", pic.grid, "Grid intervals")->capture_default_str();
  p->add_option("--replicas", pic.replicas)->capture_default_str();
  p->add_option("--tol", pic.tol)->capture_default_str();
  p->add_option("--damping", pic.damping)->capture_default_str();
  p->add_option("--max-iter", pic.max_iter)->capture_default_str();

  auto* e = app.add_subcommand("equilibrium", "Solve the stationary load fixed point");
  add_common(*e, common);
  e->add_option("--u0", eq.u0, "Initial load guess per node (comma separated)")->delimiter(',');
  e->add_option("--tol", eq.tol)->capture_default_str();
  e->add_option("--damping", eq.damping)->capture_default_str();
  e->add_option("--max-iter", eq.max_iter)->capture_default_str();
  e->add_option("--replicas", eq.replicas, "Killed paths per class")->capture_default_str();
  e->add_option("--hmax", eq.hmax, "Cumulative hazard truncation")->capture_default_str();
  e->add_option("--tmax", eq.tmax, "Path length cap")->capture_default_str();
  e->add_option("--starts", eq.starts, "Restarts (first from --u0 or 0)")->capture_default_str();

  auto* c = app.add_subcommand("chaos-study", "Propagation-of-chaos diagnostics over a grid of N");
  add_common(*c, common);
  c->add_option("--n-grid", chaos.n_grid, "Total user counts (comma separated)")->delimiter(',');
  c->add_option("--horizon", chaos.horizon)->capture_default_str();
  c->add_option("--replicas", chaos.replicas)->capture_default_str();
  c->add_option("--samples", chaos.samples, "Analysed time intervals")->capture_default_str();
  c->add_option("--grid", chaos.grid, "Picard grid intervals (multiple of --samples)")
      ->capture_default_str();
  c->add_option("--picard-replicas", chaos.picard_replicas)->capture_default_str();
  c->add_option("--pair-sample", chaos.pair_sample, "Random pairs per class pair (0 = all)")
      ->capture_default_str();

  auto* v = app.add_subcommand("validate", "Check a configuration and report hypothesis diagnostics");
  add_common(*v, common);

  std::vector<std::string> rest(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kUsage;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    std::function<int(RunContext&)> body = [](RunContext& x) { return validate(x); };
    if (name == "simulate") body = [&](RunContext& x) { return simulate(x, sim); };
    if (name == "picard") body = [&](RunContext& x) { return picard(x, pic); };
    if (name == "equilibrium") body = [&](RunContext& x) { return equilibrium(x, eq); };
    if (name == "chaos-study") body = [&](RunContext& x) { return chaos_study(x, chaos); };
    return execute(name, *sub, common, args, out, err, body);
  } catch (const ConfigError& ex) {
    err << "error: " << ex.what() << '\n';
    return kConfig;
  } catch (const NumericalError& ex) {
    err << "error: numerical: " << ex.what() << '\n';
    return kNumerical;
  }
}

}  // namespace mfaimd::cli
