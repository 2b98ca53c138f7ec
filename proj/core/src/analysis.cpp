#include "mfaimd/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mfaimd/error.hpp"
#include "mfaimd/rng.hpp"
#include "mfaimd/stats.hpp"

namespace mfaimd::analysis {
namespace {

void require_snapshots(const TrajectoryEnsemble& ens) {
  if (!ens.has_snapshots()) throw ConfigError("ensemble", "per-user snapshots were not stored");
}

std::vector<double> normalized_weights(const WeightedAtoms& p) {
  if (p.atoms.empty()) throw ConfigError("measure", "empty atom set");
  if (p.weights.empty())
    return std::vector<double>(p.atoms.size(), 1.0 / static_cast<double>(p.atoms.size()));
  if (p.weights.size() != p.atoms.size())
    throw ConfigError("measure", "weights and atoms differ in length");
  double total = 0.0;
  for (double w : p.weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("measure", "weights must be finite and >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("measure", "total weight is 0");
  std::vector<double> out(p.weights);
  for (double& w : out) w /= total;
  return out;
}

/// One class pair at one time: the per-replica ingredients of the pair
/// covariance, kept so that grouped jackknife replicates are cheap.
struct PairSums {
  std::vector<double> pair_product;  // mean over pairs of x_n y_m, per replica
  std::vector<double> mean_a;        // class-a mean of w+, per replica
  std::vector<double> mean_b;
};

/// mean_r P_r - (sum_{r != r'} mean_a[r] mean_b[r']) / (R (R - 1)) over the
/// replicas r with keep[r].
double pair_covariance(const PairSums& s, const std::vector<std::uint8_t>& keep) {
  double p = 0.0, sa = 0.0, sb = 0.0, sab = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < s.pair_product.size(); ++r) {
    if (!keep[r]) continue;
    p += s.pair_product[r];
    sa += s.mean_a[r];
    sb += s.mean_b[r];
    sab += s.mean_a[r] * s.mean_b[r];
    ++n;
  }
  const double R = static_cast<double>(n);
  return p / R - (sa * sb - sab) / (R * (R - 1.0));
}

std::optional<SlopeFit> fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 3) return std::nullopt;
  const auto f = stats::ols(x, y);
  return SlopeFit{f.slope, f.slope_error, x.size()};
}

}  // namespace

EmpiricalSnapshot snapshot_of(const TrajectoryEnsemble& ens, std::size_t replica, std::size_t ti) {
  require_snapshots(ens);
  if (replica >= ens.replicas || ti >= ens.times.size())
    throw ConfigError("snapshot", "index out of range");
  EmpiricalSnapshot snap;
  snap.t = ens.times[ti];
  snap.classes.resize(ens.classes());
  for (std::size_t k = 0; k < ens.classes(); ++k)
    for (std::size_t n = 0; n < ens.class_sizes[k]; ++n)
      snap.classes[k].push_back(ens.snapshot(replica, ti, ens.user_index(k, n)));
  return snap;
}

WeightedAtoms pooled_marginal(const TrajectoryEnsemble& ens, std::size_t ti, std::size_t k) {
  require_snapshots(ens);
  if (k >= ens.classes() || ti >= ens.times.size()) throw ConfigError("marginal", "index out of range");
  WeightedAtoms out;
  out.atoms.reserve(ens.replicas * ens.class_sizes[k]);
  for (std::size_t r = 0; r < ens.replicas; ++r)
    for (std::size_t n = 0; n < ens.class_sizes[k]; ++n)
      out.atoms.push_back(ens.snapshot(r, ti, ens.user_index(k, n)));
  return out;
}

double wasserstein1(const WeightedAtoms& p, const WeightedAtoms& q) {
  const auto wp = normalized_weights(p);
  const auto wq = normalized_weights(q);
  // Signed mass at each coordinate; W1 is the integral of |F_P - F_Q|.
  std::vector<std::pair<double, double>> events;
  events.reserve(wp.size() + wq.size());
  for (std::size_t i = 0; i < wp.size(); ++i) events.emplace_back(p.atoms[i].coordinate(), wp[i]);
  for (std::size_t i = 0; i < wq.size(); ++i) events.emplace_back(q.atoms[i].coordinate(), -wq[i]);
  std::sort(events.begin(), events.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double cdf_gap = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < events.size(); ++i) {
    cdf_gap += events[i].second;
    total += std::abs(cdf_gap) * (events[i + 1].first - events[i].first);
  }
  return total;
}

TimeAverage ergodic_average(const Path& path, const std::function<double(const UserState&)>& f,
                            double burn_in, std::size_t batches) {
  if (path.empty()) throw ConfigError("path", "empty path");
  if (batches < 2) throw ConfigError("batches", "need at least 2");
  if (!(burn_in >= 0.0)) throw ConfigError("burn_in", "must be >= 0");
  const double duration = path.end() - path.start();
  if (!(duration > 2.0 * burn_in) || !(duration > 0.0))
    throw ConfigError("path", "duration must exceed twice the burn-in");
  const double t0 = path.start() + burn_in;
  const double len = (path.end() - t0) / static_cast<double>(batches);
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    const double lo = t0 + len * static_cast<double>(b);
    const double hi = b + 1 == batches ? path.end() : lo + len;
    means[b] = path.integrate(f, lo, hi) / (hi - lo);
  }
  const auto est = stats::mean_and_error(means);
  TimeAverage out;
  out.mean = est.mean;
  out.std_error = est.std_error;
  out.ci_half_width = stats::student_t_quantile(0.975, batches - 1) * est.std_error;
  out.batches = batches;
  return out;
}

TimeAverage cycle_average(const Path& path, const std::function<double(const UserState&)>& f) {
  if (path.empty()) throw ConfigError("path", "empty path");
  const auto& knots = path.knots();
  std::vector<double> entries;
  if (knots.front().state.is_off()) entries.push_back(knots.front().t);
  for (std::size_t i = 1; i < knots.size(); ++i)
    if (knots[i].state.is_off() && knots[i - 1].state.is_on() && knots[i].t == knots[i - 1].t)
      entries.push_back(knots[i].t);
  if (entries.size() < 3) throw ConfigError("path", "fewer than two complete OFF-to-OFF cycles");

  const std::size_t n = entries.size() - 1;
  std::vector<double> y(n), l(n);
  for (std::size_t c = 0; c < n; ++c) {
    y[c] = path.integrate(f, entries[c], entries[c + 1]);
    l[c] = entries[c + 1] - entries[c];
  }
  const double sy = std::accumulate(y.begin(), y.end(), 0.0);
  const double sl = std::accumulate(l.begin(), l.end(), 0.0);
  const double ratio = sy / sl;
  std::vector<double> resid(n);
  for (std::size_t c = 0; c < n; ++c) resid[c] = y[c] - ratio * l[c];
  const double mean_len = sl / static_cast<double>(n);
  TimeAverage out;
  out.mean = ratio;
  out.std_error = std::sqrt(stats::sample_variance(resid) / static_cast<double>(n)) / mean_len;
  out.ci_half_width = stats::normal_quantile(0.975) * out.std_error;
  out.batches = n;
  return out;
}

ChaosReport chaoticity_report(const std::vector<ChaosInput>& inputs, const ChaosOptions& opts) {
  if (inputs.size() < 3) throw ConfigError("n-grid", "need at least three system sizes");
  for (const auto& in : inputs) {
    if (!in.ensemble) throw ConfigError("ensemble", "missing");
    require_snapshots(*in.ensemble);
    if (in.ensemble->replicas < 2) throw ConfigError("replicas", "need at least 2 per size");
  }
  const TrajectoryEnsemble& first = *inputs.front().ensemble;
  const std::size_t K = first.classes();
  for (const auto& in : inputs)
    if (in.ensemble->classes() != K || in.ensemble->times != first.times)
      throw ConfigError("ensemble", "ensembles must share classes and sampling times");

  std::vector<std::size_t> tis = opts.time_indices;
  if (tis.empty()) tis.push_back(first.times.size() - 1);
  for (auto ti : tis)
    if (ti >= first.times.size()) throw ConfigError("time_indices", "index out of range");
  if (opts.reference_mean) {
    if (opts.reference_mean->size() != K) throw ConfigError("reference_mean", "one row per class");
    for (const auto& row : *opts.reference_mean)
      if (row.size() != tis.size()) throw ConfigError("reference_mean", "one entry per analysed time");
  }
  const double z99 = stats::normal_quantile(0.995);

  ChaosReport report;
  for (auto ti : tis) report.times.push_back(first.times[ti]);
  std::vector<std::vector<double>> me_x(tis.size()), me_y(tis.size()), pc_x(tis.size()),
      pc_y(tis.size());

  for (const auto& in : inputs) {
    const TrajectoryEnsemble& ens = *in.ensemble;
    const std::size_t R = ens.replicas;
    const std::size_t groups = std::clamp<std::size_t>(opts.jackknife_groups, 2, R);
    const double log_n = std::log(static_cast<double>(in.total_users ? in.total_users : ens.total_users()));

    for (std::size_t tp = 0; tp < tis.size(); ++tp) {
      const std::size_t ti = tis[tp];
      for (std::size_t a = 0; a < K; ++a) {
        for (std::size_t b = a; b < K; ++b) {
          const std::size_t na = ens.class_sizes[a];
          const std::size_t nb = ens.class_sizes[b];
          if (a == b && na < 2) continue;

          // Optional fixed sample of user pairs, shared by all replicas.
          std::vector<std::pair<std::size_t, std::size_t>> pairs;
          if (opts.pair_sample > 0) {
            auto rng = CounterRng::for_stream({opts.seed, ens.total_users(), a, b, Channel::Init});
            while (pairs.size() < opts.pair_sample) {
              const std::size_t n = rng() % na;
              const std::size_t m = rng() % nb;
              if (a == b && n == m) continue;
              pairs.emplace_back(n, m);
            }
          }

          PairSums sums;
          sums.pair_product.resize(R);
          sums.mean_a.resize(R);
          sums.mean_b.resize(R);
          std::vector<double> xa(na), xb(nb);
          for (std::size_t r = 0; r < R; ++r) {
            for (std::size_t n = 0; n < na; ++n) xa[n] = ens.snapshot(r, ti, ens.user_index(a, n)).plus();
            for (std::size_t m = 0; m < nb; ++m) xb[m] = ens.snapshot(r, ti, ens.user_index(b, m)).plus();
            const double sa = std::accumulate(xa.begin(), xa.end(), 0.0);
            const double sb = std::accumulate(xb.begin(), xb.end(), 0.0);
            sums.mean_a[r] = sa / static_cast<double>(na);
            sums.mean_b[r] = sb / static_cast<double>(nb);
            if (!pairs.empty()) {
              double s = 0.0;
              for (const auto& [n, m] : pairs) s += xa[n] * xb[m];
              sums.pair_product[r] = s / static_cast<double>(pairs.size());
            } else if (a == b) {
              double sq = 0.0;
              for (double x : xa) sq += x * x;
              sums.pair_product[r] =
                  (sa * sa - sq) / (static_cast<double>(na) * static_cast<double>(na - 1));
            } else {
              sums.pair_product[r] = sa * sb / (static_cast<double>(na) * static_cast<double>(nb));
            }
          }

          ChaosRow row;
          row.total_users = in.total_users ? in.total_users : ens.total_users();
          row.t = ens.times[ti];
          row.class_a = a;
          row.class_b = b;
          std::vector<std::uint8_t> keep(R, 1);
          row.pair_cov = pair_covariance(sums, keep);
          // Grouped jackknife over replicas.
          std::vector<double> theta(groups);
          for (std::size_t g = 0; g < groups; ++g) {
            for (std::size_t r = 0; r < R; ++r) keep[r] = (r * groups / R) != g;
            theta[g] = pair_covariance(sums, keep);
          }
          const double tbar = std::accumulate(theta.begin(), theta.end(), 0.0) / static_cast<double>(groups);
          double ss = 0.0;
          for (double th : theta) ss += (th - tbar) * (th - tbar);
          row.pair_cov_se = std::sqrt(static_cast<double>(groups - 1) / static_cast<double>(groups) * ss);
          row.pair_cov_lo = row.pair_cov - z99 * row.pair_cov_se;
          row.pair_cov_hi = row.pair_cov + z99 * row.pair_cov_se;
          row.zero_cov_accepted = row.pair_cov_lo <= 0.0 && 0.0 <= row.pair_cov_hi;

          if (a == b && opts.reference_mean) {
            const double ref = (*opts.reference_mean)[a][tp];
            std::vector<double> sq(R);
            for (std::size_t r = 0; r < R; ++r) sq[r] = (sums.mean_a[r] - ref) * (sums.mean_a[r] - ref);
            const auto est = stats::mean_and_error(sq);
            const double rms = std::sqrt(est.mean);
            row.mean_error = rms;
            row.mean_error_se = rms > 0.0 ? est.std_error / (2.0 * rms) : 0.0;
            if (rms > 0.0) {
              me_x[tp].push_back(log_n);
              me_y[tp].push_back(std::log(rms));
            }
          }
          if (a == b && row.pair_cov != 0.0) {
            pc_x[tp].push_back(log_n);
            pc_y[tp].push_back(std::log(std::abs(row.pair_cov)));
          }
          report.rows.push_back(row);
        }
      }
    }
  }

  for (std::size_t tp = 0; tp < tis.size(); ++tp) {
    report.mean_error_fit.push_back(fit(me_x[tp], me_y[tp]));
    report.pair_cov_fit.push_back(fit(pc_x[tp], pc_y[tp]));
  }
  return report;
}

}  // namespace mfaimd::analysis
