#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "editlab/tensor.hpp"

namespace editlab {

enum class ScheduleKind { Linear, Cosine };

ScheduleKind schedule_kind_from_string(const std::string& s);
const char* schedule_kind_name(ScheduleKind k);

/// Per-step diffusion rates: beta[t] and the cumulative product
/// alpha_bar[t] = prod_{s<=t} (1 - beta[s]).
struct NoiseSchedule {
  int64_t T = 0;
  std::vector<double> beta;
  std::vector<double> alpha_bar;

  /// alpha_bar with the virtual step before 0 pinned to 1.
  double alpha_bar_at(int64_t t) const;
};

NoiseSchedule make_schedule(int64_t T, ScheduleKind kind, double beta_min, double beta_max);

/// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
Tensor add_noise(const Tensor& z0, const Tensor& eps, int64_t t, const NoiseSchedule& sched);

/// z0_hat = (z_t - sqrt(1 - abar_t) eps) / sqrt(abar_t). Differentiable in
/// z_t under tracing.
Tensor tweedie_z0(const Tensor& zt, const Tensor& eps_pred, int64_t t, const NoiseSchedule& sched);

/// Deterministic DDIM update to t_prev < t; t_prev == -1 returns the
/// Tweedie estimate.
Tensor ddim_step(const Tensor& zt, const Tensor& eps_pred, int64_t t, int64_t t_prev, const NoiseSchedule& sched);

/// Exact algebraic inverse of ddim_step under the same eps_pred.
Tensor ddim_invert_step(const Tensor& zt_prev, const Tensor& eps_pred, int64_t t_prev, int64_t t,
                        const NoiseSchedule& sched);

/// Ascending strided substep sequence: floor(i*T/n) for i in [0, n).
std::vector<int64_t> inference_timesteps(int64_t T, int64_t n);

}  // namespace editlab
