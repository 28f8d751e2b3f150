#include "kernels.hpp"

#include <cmath>
#include <cstring>

namespace editlab::kern {

void im2col(const double* x, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw, double* cols) {
  const int64_t ph = kh / 2, pw = kw / 2, hw = h * w;
  std::memset(cols, 0, sizeof(double) * static_cast<size_t>(ci * kh * kw * hw));
  for (int64_t c = 0; c < ci; ++c) {
    for (int64_t dy = 0; dy < kh; ++dy) {
      for (int64_t dx = 0; dx < kw; ++dx) {
        const int64_t row = (c * kh + dy) * kw + dx;
        double* dst_base = cols + row * hw;
        const int64_t w0 = std::max<int64_t>(0, pw - dx);
        const int64_t w1 = std::min<int64_t>(w, w + pw - dx);
        for (int64_t y = 0; y < h; ++y) {
          const int64_t iy = y + dy - ph;
          if (iy < 0 || iy >= h) continue;
          const double* src = x + (c * h + iy) * w + (w0 + dx - pw);
          std::memcpy(dst_base + y * w + w0, src, sizeof(double) * static_cast<size_t>(w1 - w0));
        }
      }
    }
  }
}

void col2im_add(const double* cols, int64_t ci, int64_t h, int64_t w, int64_t kh, int64_t kw, double* x_accum) {
  const int64_t ph = kh / 2, pw = kw / 2, hw = h * w;
  for (int64_t c = 0; c < ci; ++c) {
    for (int64_t dy = 0; dy < kh; ++dy) {
      for (int64_t dx = 0; dx < kw; ++dx) {
        const int64_t row = (c * kh + dy) * kw + dx;
        const double* src_base = cols + row * hw;
        const int64_t w0 = std::max<int64_t>(0, pw - dx);
        const int64_t w1 = std::min<int64_t>(w, w + pw - dx);
        for (int64_t y = 0; y < h; ++y) {
          const int64_t iy = y + dy - ph;
          if (iy < 0 || iy >= h) continue;
          double* dst = x_accum + (c * h + iy) * w + (w0 + dx - pw);
          const double* src = src_base + y * w + w0;
          for (int64_t i = 0; i < w1 - w0; ++i) dst[i] += src[i];
        }
      }
    }
  }
}

void conv2d_fwd(const double* x, int64_t ci, int64_t h, int64_t w, const double* k, int64_t co, int64_t kh,
                int64_t kw, double* out) {
  const int64_t kk = ci * kh * kw, hw = h * w;
  std::vector<double> cols(static_cast<size_t>(kk * hw));
  im2col(x, ci, h, w, kh, kw, cols.data());
  MutMap(out, co, hw).noalias() = ConstMap(k, co, kk) * ConstMap(cols.data(), kk, hw);
}

void conv2d_bwd_input(const double* k, int64_t co, int64_t ci, int64_t kh, int64_t kw, const double* g, int64_t h,
                      int64_t w, double* gx_accum) {
  const int64_t kk = ci * kh * kw, hw = h * w;
  RowMat gcols(kk, hw);
  gcols.noalias() = ConstMap(k, co, kk).transpose() * ConstMap(g, co, hw);
  col2im_add(gcols.data(), ci, h, w, kh, kw, gx_accum);
}

void conv2d_bwd_kernel(const double* x, int64_t ci, int64_t h, int64_t w, const double* g, int64_t co, int64_t kh,
                       int64_t kw, double* gk_accum) {
  const int64_t kk = ci * kh * kw, hw = h * w;
  std::vector<double> cols(static_cast<size_t>(kk * hw));
  im2col(x, ci, h, w, kh, kw, cols.data());
  MutMap(gk_accum, co, kk).noalias() += ConstMap(g, co, hw) * ConstMap(cols.data(), kk, hw).transpose();
}

void matmul_fwd(const double* a, int64_t m, int64_t k, const double* b, int64_t n, double* out) {
  MutMap(out, m, n).noalias() = ConstMap(a, m, k) * ConstMap(b, k, n);
}

void matmul_bwd_a(const double* g, int64_t m, int64_t n, const double* b, int64_t k, double* ga_accum) {
  MutMap(ga_accum, m, k).noalias() += ConstMap(g, m, n) * ConstMap(b, k, n).transpose();
}

void matmul_bwd_b(const double* a, int64_t m, int64_t k, const double* g, int64_t n, double* gb_accum) {
  MutMap(gb_accum, k, n).noalias() += ConstMap(a, m, k).transpose() * ConstMap(g, m, n);
}

void avg_pool2x_fwd(const double* x, int64_t c, int64_t h, int64_t w, double* out) {
  const int64_t oh = h / 2, ow = w / 2;
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xp = x + ch * h * w;
    double* op = out + ch * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t z = 0; z < ow; ++z) {
        const double* r0 = xp + (2 * y) * w + 2 * z;
        const double* r1 = r0 + w;
        op[y * ow + z] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
}

void avg_pool2x_bwd(const double* g, int64_t c, int64_t h, int64_t w, double* gx_accum) {
  const int64_t oh = h / 2, ow = w / 2;
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* gp = g + ch * oh * ow;
    double* xp = gx_accum + ch * h * w;
    for (int64_t y = 0; y < oh; ++y) {
      for (int64_t z = 0; z < ow; ++z) {
        const double v = 0.25 * gp[y * ow + z];
        double* r0 = xp + (2 * y) * w + 2 * z;
        double* r1 = r0 + w;
        r0[0] += v;
        r0[1] += v;
        r1[0] += v;
        r1[1] += v;
      }
    }
  }
}

void upsample2x_fwd(const double* x, int64_t c, int64_t h, int64_t w, double* out) {
  const int64_t oh = 2 * h, ow = 2 * w;
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xp = x + ch * h * w;
    double* op = out + ch * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      const double* row = xp + (y / 2) * w;
      double* orow = op + y * ow;
      for (int64_t z = 0; z < ow; ++z) orow[z] = row[z / 2];
    }
  }
}

void upsample2x_bwd(const double* g, int64_t c, int64_t h, int64_t w, double* gx_accum) {
  const int64_t oh = 2 * h, ow = 2 * w;
  for (int64_t ch = 0; ch < c; ++ch) {
    double* xp = gx_accum + ch * h * w;
    const double* gp = g + ch * oh * ow;
    for (int64_t y = 0; y < oh; ++y) {
      const double* grow = gp + y * ow;
      double* xrow = xp + (y / 2) * w;
      for (int64_t z = 0; z < ow; ++z) xrow[z / 2] += grow[z];
    }
  }
}

void channel_l2norm_fwd(const double* x, int64_t c, int64_t hw, double eps, double* out) {
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xp = x + ch * hw;
    double* op = out + ch * hw;
    double ss = 0.0;
    for (int64_t i = 0; i < hw; ++i) ss += xp[i] * xp[i];
    const double inv = 1.0 / std::sqrt(ss + eps);
    for (int64_t i = 0; i < hw; ++i) op[i] = xp[i] * inv;
  }
}

void channel_l2norm_bwd(const double* x, const double* g, int64_t c, int64_t hw, double eps, double* gx_accum) {
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xp = x + ch * hw;
    const double* gp = g + ch * hw;
    double* op = gx_accum + ch * hw;
    double ss = 0.0, dot = 0.0;
    for (int64_t i = 0; i < hw; ++i) {
      ss += xp[i] * xp[i];
      dot += gp[i] * xp[i];
    }
    const double n2 = ss + eps;
    const double inv = 1.0 / std::sqrt(n2);
    const double inv3dot = dot * inv / n2;
    for (int64_t i = 0; i < hw; ++i) op[i] += gp[i] * inv - xp[i] * inv3dot;
  }
}

}  // namespace editlab::kern
