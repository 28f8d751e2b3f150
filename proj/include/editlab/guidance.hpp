#pragma once

#include <string>

#include "editlab/codec.hpp"
#include "editlab/perceptual.hpp"
#include "editlab/schedule.hpp"
#include "editlab/tensor.hpp"

namespace editlab {

/// Inclusive step-index interval; hi < lo means empty.
struct StepRange {
  int lo = 0;
  int hi = -1;
  bool empty() const { return hi < lo; }
  bool contains(int i) const { return i >= lo && i <= hi; }
};

enum class GuidanceVariant { SrcAnchor, NullAnchor };

GuidanceVariant guidance_variant_from_string(const std::string& s);
const char* guidance_variant_name(GuidanceVariant v);

struct GuidanceConfig {
  double gamma = 7.5;
  double beta = 7.5;
  GuidanceVariant variant = GuidanceVariant::SrcAnchor;
  StepRange text_range;        // dual text composition active here
  StepRange perceptual_range;  // perceptual latent updates active here
  double lambda = 0.1;         // perceptual step size
  int inner_iters = 1;
  bool backtrack = true;
  bool update_before_step = true;

  void validate(int inference_steps) const;
};

struct GateState {
  bool text_active = false;
  bool perceptual_active = false;
};

/// Membership of a reverse-sampling step (0 = most noised) in the two
/// configured ranges.
GateState gate(int step_index, const GuidanceConfig& cfg);

/// Shared conditional term: eps_null + gamma * (eps_src - eps_null).
/// gamma == 1 collapses to eps_src exactly.
Tensor compose_cond(const Tensor& eps_null, const Tensor& eps_src, double gamma);

/// Source-anchored composition: cond + beta * (eps_edit - eps_src).
Tensor compose_src_anchor(const Tensor& eps_null, const Tensor& eps_src, const Tensor& eps_edit, double gamma,
                          double beta);

/// Null-anchored composition: cond + beta * (eps_edit - eps_null).
Tensor compose_null_anchor(const Tensor& eps_null, const Tensor& eps_src, const Tensor& eps_edit, double gamma,
                           double beta);

struct PerceptualUpdateDiag {
  double objective_before = 0.0;
  double objective_after = 0.0;
  int halvings = 0;
  int applied_iters = 0;
  bool aborted = false;
};

/// Gradient steps on L(z_t) = perceptual_distance(decode(tweedie_z0(z_t)),
/// x_src) with eps_pred held fixed. With backtracking the step size halves
/// (at most 5 times) until L decreases; a still non-decreasing step is
/// skipped. Non-finite loss or gradient aborts the whole update and returns
/// z_t unchanged.
Tensor perceptual_update(const Tensor& zt, int64_t t, const Tensor& eps_pred, const Tensor& x_src,
                         const CodecParams& codec, const PerceptualParams& perceptual, const NoiseSchedule& sched,
                         const GuidanceConfig& cfg, PerceptualUpdateDiag* diag = nullptr);

}  // namespace editlab
