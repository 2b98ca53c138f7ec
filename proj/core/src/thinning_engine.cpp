#include "thinning_engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mfaimd/error.hpp"

namespace mfaimd::detail {
namespace {

constexpr int kActivation = static_cast<int>(Channel::Activation);
constexpr int kLoss = static_cast<int>(Channel::Loss);
constexpr int kDeparture = static_cast<int>(Channel::Departure);
constexpr double kInf = std::numeric_limits<double>::infinity();

bool any_load_dependence(const ClassParams& c) {
  return c.lambda.depends_on_load() || c.mu.depends_on_load() || c.a.depends_on_load() ||
         c.b.depends_on_load();
}

}  // namespace

ThinningEngine::ThinningEngine(const Params& params,
                               const std::vector<std::vector<UserState>>& initial)
    : p_(params), cfg_(*params.cfg), J_(params.cfg->nodes) {
  const std::size_t K = cfg_.class_count();
  if (initial.size() != K) throw ConfigError("initial", "expected one state list per class");
  if (p_.exogenous && p_.exogenous->nodes() != J_)
    throw ConfigError("load", "trajectory has the wrong number of nodes");

  classes_.resize(K);
  std::size_t n_total = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const ClassParams& c = cfg_.classes[k];
    ClassInfo& info = classes_[k];
    info.abar = c.growth_bound().value_or(0.0);
    if (auto v = c.a.constant_value()) {
      info.a_constant = true;
      info.a_value = std::min(*v, info.abar);
    }
    info.b_window = c.b.depends_on_window();
    info.mu_window = c.mu.depends_on_window();
    info.first = n_total;
    info.count = initial[k].size();
    n_total += info.count;
    linear_drift_ = linear_drift_ && info.a_constant;
    needs_micro_steps_ = needs_micro_steps_ || !info.a_constant || info.b_window ||
                         info.mu_window || any_load_dependence(c);
  }

  cls_.resize(n_total);
  on_.resize(n_total);
  w_.resize(n_total);
  clock_.assign(3 * n_total, 0.0);
  threshold_.resize(3 * n_total);
  rng_.resize(3 * n_total);
  majorant_.assign(3 * n_total, 0.0);
  if (p_.record_paths) paths_.resize(n_total);

  for (std::size_t k = 0; k < K; ++k) {
    for (std::size_t n = 0; n < initial[k].size(); ++n) {
      const std::size_t i = classes_[k].first + n;
      const UserState& s = initial[k][n];
      cls_[i] = static_cast<std::uint32_t>(k);
      on_[i] = s.is_on() ? 1 : 0;
      w_[i] = s.plus();
      for (int c = 0; c < 3; ++c) {
        rng_[3 * i + c] =
            CounterRng::for_stream({p_.seed, p_.replica, k, n, static_cast<Channel>(c)});
        threshold_[3 * i + c] = rng_[3 * i + c].exponential();
      }
      if (p_.record_paths) paths_[i].push(0.0, s);
    }
  }

  u_.assign(J_, 0.0);
  u_lo_.assign(J_, 0.0);
  u_hi_.assign(J_, 0.0);
  u_stage_.assign(J_, 0.0);
  lam_bar_.assign(K, 0.0);
  b_bar_.assign(K, 0.0);
  mu_bar_.assign(K, 0.0);
  if (!linear_drift_) {
    k1_.resize(n_total);
    k2_.resize(n_total);
    k3_.resize(n_total);
    k4_.resize(n_total);
    w_stage_.resize(n_total);
  }
  compute_loads(0.0, w_, u_);

  if (!needs_micro_steps_) {
    const_rate_.assign(3 * K, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      const ClassParams& c = cfg_.classes[k];
      const_rate_[3 * k + kActivation] = c.lambda(0.0, u_);
      const_rate_[3 * k + kLoss] = c.b(0.0, u_);
      const_rate_[3 * k + kDeparture] = c.mu(0.0, u_);
    }
    last_.assign(n_total, 0.0);
    version_.assign(n_total, 0);
  }
}

UserState ThinningEngine::state(std::size_t i) const {
  return on_[i] ? UserState::on(w_[i]) : UserState::off();
}

std::vector<ClassSummary> ThinningEngine::summary() const {
  std::vector<ClassSummary> out(classes_.size());
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    const ClassInfo& info = classes_[k];
    if (info.count == 0) continue;
    double sum = 0.0;
    std::size_t on = 0;
    for (std::size_t i = info.first; i < info.first + info.count; ++i) {
      if (on_[i]) {
        sum += w_[i];
        ++on;
      }
    }
    out[k].mean_wplus = sum / static_cast<double>(info.count);
    out[k].on_fraction = static_cast<double>(on) / static_cast<double>(info.count);
  }
  return out;
}

void ThinningEngine::compute_loads(double t, std::span<const double> w,
                                   std::span<double> out) const {
  if (p_.exogenous) {
    p_.exogenous->at(t, out);
    return;
  }
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t k = 0; k < classes_.size(); ++k) {
    const ClassInfo& info = classes_[k];
    double sum = 0.0;
    for (std::size_t i = info.first; i < info.first + info.count; ++i)
      if (on_[i]) sum += w[i];
    if (sum == 0.0) continue;
    for (std::size_t j = 0; j < J_; ++j) out[j] += cfg_.allocation(j, k) * sum / p_.scale;
  }
}

void ThinningEngine::drift_rates(double t, std::span<const double> w, std::span<double> out) {
  compute_loads(t, w, u_stage_);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (!on_[i]) {
      out[i] = 0.0;
      continue;
    }
    const ClassInfo& info = classes_[cls_[i]];
    out[i] = info.a_constant ? info.a_value
                             : std::min(cfg_.classes[cls_[i]].a(w[i], u_stage_), info.abar);
  }
}

void ThinningEngine::advance_drift(double step) {
  if (step <= 0.0) return;
  const std::size_t n = w_.size();
  if (linear_drift_) {
    for (std::size_t i = 0; i < n; ++i)
      if (on_[i]) w_[i] += classes_[cls_[i]].a_value * step;
    return;
  }
  const double half = 0.5 * step;
  drift_rates(t_, w_, k1_);
  for (std::size_t i = 0; i < n; ++i) w_stage_[i] = w_[i] + half * k1_[i];
  drift_rates(t_ + half, w_stage_, k2_);
  for (std::size_t i = 0; i < n; ++i) w_stage_[i] = w_[i] + half * k2_[i];
  drift_rates(t_ + half, w_stage_, k3_);
  for (std::size_t i = 0; i < n; ++i) w_stage_[i] = w_[i] + step * k3_[i];
  drift_rates(t_ + step, w_stage_, k4_);
  for (std::size_t i = 0; i < n; ++i) {
    if (!on_[i]) continue;
    w_[i] += step / 6.0 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
    if (!std::isfinite(w_[i]))
      throw NumericalError("non-finite window at t=" + std::to_string(t_));
  }
}

double ThinningEngine::true_rate(std::size_t i, int channel) const {
  const ClassParams& c = cfg_.classes[cls_[i]];
  switch (channel) {
    case kActivation:
      return c.lambda(0.0, u_);
    case kLoss:
      return c.b(w_[i], u_);
    default:
      return c.mu(w_[i], u_);
  }
}

void ThinningEngine::apply_event(std::size_t i, int channel) {
  const UserState before = state(i);
  const ClassParams& c = cfg_.classes[cls_[i]];
  switch (channel) {
    case kActivation:
      on_[i] = 1;
      w_[i] = c.alpha.sample(rng_[3 * i + kActivation]);
      break;
    case kLoss:
      w_[i] *= c.r;
      break;
    default:
      on_[i] = 0;
      w_[i] = 0.0;
      break;
  }
  if (p_.record_paths) {
    paths_[i].push(t_, before);
    paths_[i].push(t_, state(i));
  }
}

void ThinningEngine::record_all(double t) {
  for (std::size_t i = 0; i < w_.size(); ++i)
    if (on_[i]) paths_[i].push(t, state(i));
}

void ThinningEngine::finish() {
  if (!p_.record_paths) return;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    const auto& knots = paths_[i].knots();
    if (knots.empty() || knots.back().t < t_ || !(knots.back().state == state(i)))
      paths_[i].push(t_, state(i));
  }
}

double ThinningEngine::channel_rate(std::size_t i, int channel) const {
  const bool active = on_[i] ? channel != kActivation : channel == kActivation;
  return active ? const_rate_[3 * cls_[i] + static_cast<std::size_t>(channel)] : 0.0;
}

void ThinningEngine::sync_user(std::size_t i, double t) {
  const double dt = t - last_[i];
  if (dt <= 0.0) return;
  if (on_[i]) w_[i] += classes_[cls_[i]].a_value * dt;
  for (int c = 0; c < 3; ++c) clock_[3 * i + c] += channel_rate(i, c) * dt;
  last_[i] = t;
}

void ThinningEngine::schedule(std::size_t i) {
  ++version_[i];
  double best = kInf;
  int channel = 0;
  for (int c = 0; c < 3; ++c) {
    const double rate = channel_rate(i, c);
    if (rate <= 0.0) continue;
    if (!std::isfinite(rate)) throw NumericalError("rate overflow for user " + std::to_string(i));
    const double t = last_[i] + (threshold_[3 * i + c] - clock_[3 * i + c]) / rate;
    if (t < best) {
      best = t;
      channel = c;
    }
  }
  if (best < kInf) queue_.push({best, i, channel, version_[i]});
}

void ThinningEngine::advance_independent(double t_target) {
  const std::size_t n = w_.size();
  if (!queue_ready_) {
    for (std::size_t i = 0; i < n; ++i) {
      last_[i] = t_;
      schedule(i);
    }
    queue_ready_ = true;
  }
  while (!queue_.empty() && queue_.top().time <= t_target) {
    const QueueEntry e = queue_.top();
    queue_.pop();
    if (e.version != version_[e.user]) continue;
    const std::size_t i = e.user;
    sync_user(i, e.time);
    t_ = std::max(t_, e.time);
    const std::size_t idx = 3 * i + static_cast<std::size_t>(e.channel);
    clock_[idx] = threshold_[idx];
    ++candidates_;
    const double rate = channel_rate(i, e.channel);
    const double u01 = rng_[idx].uniform();
    threshold_[idx] += rng_[idx].exponential();
    if (u01 * rate <= rate) {
      apply_event(i, e.channel);
      ++accepted_;
    }
    schedule(i);
  }
  for (std::size_t i = 0; i < n; ++i) sync_user(i, t_target);
  t_ = t_target;
  compute_loads(t_, w_, u_);
}

void ThinningEngine::advance_to(double t_target) {
  if (!needs_micro_steps_) {
    advance_independent(t_target);
    return;
  }
  const std::size_t K = classes_.size();
  const std::size_t n = w_.size();
  std::vector<double> wmax(K), on_count(K);
  std::vector<std::uint8_t> any_off(K);

  while (t_ < t_target) {
    const double remaining = t_target - t_;
    double h = remaining;

    std::fill(wmax.begin(), wmax.end(), 0.0);
    std::fill(on_count.begin(), on_count.end(), 0.0);
    std::fill(any_off.begin(), any_off.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t k = cls_[i];
      if (on_[i]) {
        on_count[k] += 1.0;
        wmax[k] = std::max(wmax[k], w_[i]);
      } else {
        any_off[k] = 1;
      }
    }

    if (needs_micro_steps_) {
      double max_rate = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const ClassParams& c = cfg_.classes[k];
        if (any_off[k]) max_rate = std::max(max_rate, c.lambda(0.0, u_));
        if (on_count[k] > 0.0) max_rate = std::max(max_rate, c.b(wmax[k], u_) + c.mu(wmax[k], u_));
      }
      h = std::min(h, p_.max_micro_step);
      if (max_rate > 0.0) h = std::min(h, p_.micro_step_factor / max_rate);
    }

    if (p_.exogenous) {
      p_.exogenous->bounds(t_, t_ + h, u_lo_, u_hi_);
    } else {
      for (std::size_t j = 0; j < J_; ++j) {
        double growth = 0.0;
        for (std::size_t k = 0; k < K; ++k)
          growth += cfg_.allocation(j, k) * on_count[k] * classes_[k].abar;
        u_lo_[j] = u_[j];
        u_hi_[j] = u_[j] + h * growth / p_.scale;
      }
    }

    for (std::size_t k = 0; k < K; ++k) {
      const ClassParams& c = cfg_.classes[k];
      lam_bar_[k] = c.lambda.upper_bound(0.0, u_lo_, u_hi_);
      if (!classes_[k].b_window) b_bar_[k] = c.b.upper_bound(0.0, u_lo_, u_hi_);
      if (!classes_[k].mu_window) mu_bar_[k] = c.mu.upper_bound(0.0, u_lo_, u_hi_);
    }

    double s = kInf;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint32_t k = cls_[i];
      double* R = &majorant_[3 * i];
      if (!on_[i]) {
        R[kActivation] = lam_bar_[k];
        R[kLoss] = 0.0;
        R[kDeparture] = 0.0;
      } else {
        const ClassParams& c = cfg_.classes[k];
        const double w_hi = w_[i] + classes_[k].abar * h;
        R[kActivation] = 0.0;
        R[kLoss] = classes_[k].b_window ? c.b.upper_bound(w_hi, u_lo_, u_hi_) : b_bar_[k];
        R[kDeparture] = classes_[k].mu_window ? c.mu.upper_bound(w_hi, u_lo_, u_hi_) : mu_bar_[k];
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double rate = R[ch];
        if (rate <= 0.0) continue;
        if (!std::isfinite(rate))
          throw NumericalError("majorant overflow for user " + std::to_string(i) + " at t=" +
                               std::to_string(t_));
        const double dt = (threshold_[3 * i + ch] - clock_[3 * i + ch]) / rate;
        if (dt < s) {
          s = dt;
          arg = 3 * i + static_cast<std::size_t>(ch);
        }
      }
    }

    const bool candidate = s <= h;
    const double step = candidate ? std::max(s, 0.0) : h;
    advance_drift(step);
    for (std::size_t idx = 0; idx < 3 * n; ++idx) clock_[idx] += majorant_[idx] * step;
    t_ = step >= remaining ? t_target : t_ + step;
    compute_loads(t_, w_, u_);
    if (p_.record_paths && !linear_drift_) record_all(t_);

    if (!candidate) continue;
    ++candidates_;
    clock_[arg] = threshold_[arg];
    const std::size_t i = arg / 3;
    const int ch = static_cast<int>(arg % 3);
    const double rate = true_rate(i, ch);
    const double u01 = rng_[arg].uniform();
    threshold_[arg] += rng_[arg].exponential();
    if (u01 * majorant_[arg] <= rate) {
      apply_event(i, ch);
      ++accepted_;
      compute_loads(t_, w_, u_);
    }
  }
}

}  // namespace mfaimd::detail
