#include "editlab/schedule.hpp"

#include <cmath>
#include <stdexcept>

#include "editlab/ops.hpp"

namespace editlab {

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw std::invalid_argument("unknown schedule kind '" + s + "' (expected linear or cosine)");
}

const char* schedule_kind_name(ScheduleKind k) { return k == ScheduleKind::Linear ? "linear" : "cosine"; }

double NoiseSchedule::alpha_bar_at(int64_t t) const {
  if (t == -1) return 1.0;
  if (t < 0 || t >= T) {
    throw std::invalid_argument("timestep " + std::to_string(t) + " out of range [0," + std::to_string(T) + ")");
  }
  return alpha_bar[static_cast<size_t>(t)];
}

NoiseSchedule make_schedule(int64_t T, ScheduleKind kind, double beta_min, double beta_max) {
  if (T < 1) throw std::invalid_argument("make_schedule: T must be >= 1, got " + std::to_string(T));
  if (!(beta_min >= 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw std::invalid_argument("make_schedule: need 0 <= beta_min <= beta_max < 1, got [" +
                                std::to_string(beta_min) + ", " + std::to_string(beta_max) + "]");
  }
  NoiseSchedule s;
  s.T = T;
  s.beta.resize(static_cast<size_t>(T));
  if (kind == ScheduleKind::Linear) {
    for (int64_t t = 0; t < T; ++t) {
      s.beta[static_cast<size_t>(t)] =
          T == 1 ? beta_min : beta_min + (beta_max - beta_min) * static_cast<double>(t) / static_cast<double>(T - 1);
    }
  } else {
    // Squared-cosine alpha_bar profile; betas derived from its ratios and
    // capped at 0.999. beta_min/beta_max only bound-check the call.
    const double off = 0.008;
    auto f = [&](double t) {
      const double a = ((t / static_cast<double>(T)) + off) / (1.0 + off) * M_PI / 2.0;
      const double c = std::cos(a);
      return c * c;
    };
    const double f0 = f(0.0);
    double prev = 1.0;
    for (int64_t t = 0; t < T; ++t) {
      const double cur = f(static_cast<double>(t + 1)) / f0;
      double b = 1.0 - cur / prev;
      b = std::min(std::max(b, 0.0), 0.999);
      s.beta[static_cast<size_t>(t)] = b;
      prev *= 1.0 - b;
    }
  }
  s.alpha_bar.resize(static_cast<size_t>(T));
  double prod = 1.0;
  for (int64_t t = 0; t < T; ++t) {
    prod *= 1.0 - s.beta[static_cast<size_t>(t)];
    s.alpha_bar[static_cast<size_t>(t)] = prod;
  }
  if (prod <= 0.0) throw std::invalid_argument("make_schedule: alpha_bar collapsed to zero");
  return s;
}

namespace {
void check_pair(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
}
}  // namespace

Tensor add_noise(const Tensor& z0, const Tensor& eps, int64_t t, const NoiseSchedule& sched) {
  check_pair("add_noise", z0, eps);
  const double ab = sched.alpha_bar_at(t);
  return add(mul(z0, std::sqrt(ab)), mul(eps, std::sqrt(1.0 - ab)));
}

Tensor tweedie_z0(const Tensor& zt, const Tensor& eps_pred, int64_t t, const NoiseSchedule& sched) {
  check_pair("tweedie_z0", zt, eps_pred);
  const double ab = sched.alpha_bar_at(t);
  if (ab == 0.0) throw std::invalid_argument("tweedie_z0: degenerate terminal step (alpha_bar == 0)");
  return mul(sub(zt, mul(eps_pred, std::sqrt(1.0 - ab))), 1.0 / std::sqrt(ab));
}

Tensor ddim_step(const Tensor& zt, const Tensor& eps_pred, int64_t t, int64_t t_prev, const NoiseSchedule& sched) {
  if (t_prev >= t) {
    throw std::invalid_argument("ddim_step: t_prev " + std::to_string(t_prev) + " must be < t " + std::to_string(t));
  }
  check_pair("ddim_step", zt, eps_pred);
  const Tensor z0_hat = tweedie_z0(zt, eps_pred, t, sched);
  const double ab_prev = sched.alpha_bar_at(t_prev);
  if (ab_prev == 1.0) return z0_hat;
  return add(mul(z0_hat, std::sqrt(ab_prev)), mul(eps_pred, std::sqrt(1.0 - ab_prev)));
}

Tensor ddim_invert_step(const Tensor& zt_prev, const Tensor& eps_pred, int64_t t_prev, int64_t t,
                        const NoiseSchedule& sched) {
  if (t <= t_prev) {
    throw std::invalid_argument("ddim_invert_step: t " + std::to_string(t) + " must be > t_prev " +
                                std::to_string(t_prev));
  }
  check_pair("ddim_invert_step", zt_prev, eps_pred);
  const double ab_prev = sched.alpha_bar_at(t_prev);
  const double ab = sched.alpha_bar_at(t);
  Tensor z0_hat;
  if (ab_prev == 1.0) {
    z0_hat = zt_prev;
  } else {
    z0_hat = tweedie_z0(zt_prev, eps_pred, t_prev, sched);
  }
  return add(mul(z0_hat, std::sqrt(ab)), mul(eps_pred, std::sqrt(1.0 - ab)));
}

std::vector<int64_t> inference_timesteps(int64_t T, int64_t n) {
  if (n < 1 || n > T) {
    throw std::invalid_argument("inference_timesteps: need 1 <= n <= T, got n=" + std::to_string(n) +
                                " T=" + std::to_string(T));
  }
  std::vector<int64_t> ts(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) ts[static_cast<size_t>(i)] = i * T / n;
  return ts;
}

}  // namespace editlab
