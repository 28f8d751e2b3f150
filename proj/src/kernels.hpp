#pragma once

// Internal numeric kernels shared by the forward ops and the tape backward
// dispatch. All functions operate on raw row-major buffers; the *_bwd
// variants accumulate (+=) into their output.

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace editlab::kern {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

// cols has layout (ci*kh*kw) x (h*w); same padding, stride 1, odd kernel.
void im2col(const double* x, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw, double* cols);
void col2im_add(const double* cols, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw, double* x_accum);

void conv2d_fwd(const double* x, int64_t ci, int64_t h, int64_t w, const double* k, int64_t co, int64_t kh,
                int64_t kw, double* out);
void conv2d_bwd_input(const double* k, int64_t co, int64_t ci, int64_t kh, int64_t kw, const double* g, int64_t h,
                      int64_t w, double* gx_accum);
void conv2d_bwd_kernel(const double* x, int64_t ci, int64_t h, int64_t w, const double* g, int64_t co, int64_t kh,
                       int64_t kw, double* gk_accum);

void matmul_fwd(const double* a, int64_t m, int64_t k, const double* b, int64_t n, double* out);
void matmul_bwd_a(const double* g, int64_t m, int64_t n, const double* b, int64_t k, double* ga_accum);
void matmul_bwd_b(const double* a, int64_t m, int64_t k, const double* g, int64_t n, double* gb_accum);

void avg_pool2x_fwd(const double* x, int64_t c, int64_t h, int64_t w, double* out);
void avg_pool2x_bwd(const double* g, int64_t c, int64_t h, int64_t w, double* gx_accum);

void upsample2x_fwd(const double* x, int64_t c, int64_t h, int64_t w, double* out);
void upsample2x_bwd(const double* g, int64_t c, int64_t h, int64_t w, double* gx_accum);

void channel_l2norm_fwd(const double* x, int64_t c, int64_t hw, double eps, double* out);
void channel_l2norm_bwd(const double* x, const double* g, int64_t c, int64_t hw, double eps, double* gx_accum);

}  // namespace editlab::kern
