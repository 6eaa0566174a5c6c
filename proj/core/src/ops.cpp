#include "hsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

#include <Eigen/Dense>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidShapeError(msg);
}

void require_chw(const Tensor& t, const char* what) {
  require(t.defined() && t.rank() == 3,
          std::string(what) + " must have shape [C, H, W]");
}

// Expands a [C, H, W] input into a (C*k*k) x (H*W) patch matrix with zero
// padding, so convolution becomes one GEMM.
void im2col(const float* in, int C, int H, int W, int k, RowMat& col) {
  const int pad = (k - 1) / 2;
  col.setZero(static_cast<Eigen::Index>(C) * k * k, static_cast<Eigen::Index>(H) * W);
  for (int ci = 0; ci < C; ++ci) {
    const float* plane = in + static_cast<std::int64_t>(ci) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        float* row = col.data() +
                     (static_cast<std::int64_t>(ci) * k * k + ky * k + kx) * H * W;
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx);          // first valid output column
        const int x1 = std::min(W, W - dx);       // one past the last
        if (x0 >= x1) continue;
        for (int oy = 0; oy < H; ++oy) {
          const int iy = oy + ky - pad;
          if (iy < 0 || iy >= H) continue;
          std::memcpy(row + static_cast<std::int64_t>(oy) * W + x0,
                      plane + static_cast<std::int64_t>(iy) * W + x0 + dx,
                      static_cast<size_t>(x1 - x0) * sizeof(float));
        }
      }
    }
  }
}

// Scatter-add transpose of im2col, used for the input gradient.
void col2im_add(const RowMat& col, int C, int H, int W, int k, float* out) {
  const int pad = (k - 1) / 2;
  for (int ci = 0; ci < C; ++ci) {
    float* plane = out + static_cast<std::int64_t>(ci) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col.data() +
                           (static_cast<std::int64_t>(ci) * k * k + ky * k + kx) * H * W;
        const int dx = kx - pad;
        const int x0 = std::max(0, -dx);
        const int x1 = std::min(W, W - dx);
        if (x0 >= x1) continue;
        for (int oy = 0; oy < H; ++oy) {
          const int iy = oy + ky - pad;
          if (iy < 0 || iy >= H) continue;
          const float* src = row + static_cast<std::int64_t>(oy) * W + x0;
          float* dst = plane + static_cast<std::int64_t>(iy) * W + x0 + dx;
          for (int i = 0; i < x1 - x0; ++i) dst[i] += src[i];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias) {
  require_chw(input, "conv2d input");
  require(kernel.defined() && kernel.rank() == 4,
          "conv2d kernel must have shape [C_out, C_in, k, k]");
  const int C = input.dim(0), H = input.dim(1), W = input.dim(2);
  const int F = kernel.dim(0), Ck = kernel.dim(1), k = kernel.dim(2);
  require(kernel.dim(3) == k, "conv2d kernel must be square");
  require(k % 2 == 1, "conv2d kernel size must be odd");
  require(Ck == C, "conv2d kernel expects " + std::to_string(Ck) +
                       " input channels, input has " + std::to_string(C));
  require(bias.defined() && bias.rank() == 1 && bias.dim(0) == F,
          "conv2d bias must have shape [C_out]");

  const std::int64_t HW = static_cast<std::int64_t>(H) * W;
  const std::int64_t Kd = static_cast<std::int64_t>(C) * k * k;

  RowMat col;
  im2col(input.data(), C, H, W, k, col);

  std::vector<float> out(static_cast<size_t>(F) * HW);
  ConstRowMap kmap(kernel.data(), F, Kd);
  RowMap omap(out.data(), F, HW);
  omap.noalias() = kmap * col;
  for (int f = 0; f < F; ++f) omap.row(f).array() += bias.data()[f];

  return detail::make_op(
      {input, kernel, bias}, {F, H, W}, std::move(out),
      [C, H, W, F, k, HW, Kd](detail::Node& self) {
        auto& in_node = self.parents[0];
        auto& k_node = self.parents[1];
        auto& b_node = self.parents[2];
        ConstRowMap gout(self.grad.data(), F, HW);
        RowMat col_b;
        if (in_node->requires_grad || k_node->requires_grad) {
          im2col(in_node->data.data(), C, H, W, k, col_b);
        }
        if (b_node->requires_grad) {
          // Fixed-order accumulation: a vectorized reduction over the mapped
          // gradient buffer would order its partial sums by the buffer's
          // alignment, making repeated runs differ in the low bits.
          const float* g = self.grad.data();
          for (int f = 0; f < F; ++f) {
            double acc = 0.0;
            const float* row = g + static_cast<std::int64_t>(f) * HW;
            for (std::int64_t i = 0; i < HW; ++i) acc += row[i];
            b_node->grad[static_cast<size_t>(f)] += static_cast<float>(acc);
          }
        }
        if (k_node->requires_grad) {
          RowMap gk(k_node->grad.data(), F, Kd);
          gk.noalias() += gout * col_b.transpose();
        }
        if (in_node->requires_grad) {
          ConstRowMap kmap_b(k_node->data.data(), F, Kd);
          RowMat gcol(Kd, HW);
          gcol.noalias() = kmap_b.transpose() * gout;
          col2im_add(gcol, C, H, W, k, in_node->grad.data());
        }
      });
}

Tensor relu(const Tensor& x) {
  require(x.defined(), "relu input is undefined");
  std::vector<float> out(x.values().begin(), x.values().end());
  for (float& v : out) v = v > 0.0f ? v : 0.0f;
  return detail::make_op({x}, x.shape(), std::move(out), [](detail::Node& self) {
    auto& in = self.parents[0];
    if (!in->requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      if (in->data[i] > 0.0f) in->grad[i] += self.grad[i];
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  require(x.defined(), "sigmoid input is undefined");
  std::vector<float> out(x.size());
  const float* xd = x.data();
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double v = xd[i];
    double s = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                        : std::exp(v) / (1.0 + std::exp(v));
    // Keep strictly inside (0, 1) after the cast to float32.
    s = std::min(std::max(s, 1e-12), 1.0 - 1e-7);
    out[static_cast<size_t>(i)] = static_cast<float>(s);
  }
  return detail::make_op({x}, x.shape(), std::move(out), [](detail::Node& self) {
    auto& in = self.parents[0];
    if (!in->requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      const float s = self.data[i];
      in->grad[i] += self.grad[i] * s * (1.0f - s);
    }
  });
}

Tensor global_pool(const Tensor& x, PoolMode mode) {
  require_chw(x, "global_pool input");
  const int C = x.dim(0), H = x.dim(1), W = x.dim(2);
  const std::int64_t HW = static_cast<std::int64_t>(H) * W;
  std::vector<float> out(static_cast<size_t>(C));
  std::vector<std::int64_t> argmax;
  const float* xd = x.data();
  if (mode == PoolMode::kMax) {
    argmax.resize(static_cast<size_t>(C));
    for (int c = 0; c < C; ++c) {
      const float* plane = xd + c * HW;
      std::int64_t best = 0;
      for (std::int64_t i = 1; i < HW; ++i) {
        if (plane[i] > plane[best]) best = i;
      }
      out[static_cast<size_t>(c)] = plane[best];
      argmax[static_cast<size_t>(c)] = best;
    }
  } else {
    for (int c = 0; c < C; ++c) {
      const float* plane = xd + c * HW;
      double acc = 0.0;
      for (std::int64_t i = 0; i < HW; ++i) acc += plane[i];
      out[static_cast<size_t>(c)] = static_cast<float>(acc / static_cast<double>(HW));
    }
  }
  return detail::make_op(
      {x}, {C, 1, 1}, std::move(out),
      [C, HW, mode, argmax = std::move(argmax)](detail::Node& self) {
        auto& in = self.parents[0];
        if (!in->requires_grad) return;
        if (mode == PoolMode::kMax) {
          for (int c = 0; c < C; ++c) {
            in->grad[static_cast<size_t>(c * HW + argmax[static_cast<size_t>(c)])] +=
                self.grad[static_cast<size_t>(c)];
          }
        } else {
          const float inv = 1.0f / static_cast<float>(HW);
          for (int c = 0; c < C; ++c) {
            const float g = self.grad[static_cast<size_t>(c)] * inv;
            float* gp = in->grad.data() + c * HW;
            for (std::int64_t i = 0; i < HW; ++i) gp[i] += g;
          }
        }
      });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined(), "add input is undefined");
  require(a.shape() == b.shape(), "add requires equal shapes, got " +
                                      shape_to_string(a.shape()) + " and " +
                                      shape_to_string(b.shape()));
  std::vector<float> out(a.size());
  const float* ad = a.data();
  const float* bd = b.data();
  for (std::int64_t i = 0; i < a.size(); ++i) out[static_cast<size_t>(i)] = ad[i] + bd[i];
  return detail::make_op({a, b}, a.shape(), std::move(out), [](detail::Node& self) {
    for (int p = 0; p < 2; ++p) {
      auto& in = self.parents[static_cast<size_t>(p)];
      if (!in->requires_grad) continue;
      for (size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.defined() && b.defined(), "mul input is undefined");
  require(a.shape() == b.shape(), "mul requires equal shapes, got " +
                                      shape_to_string(a.shape()) + " and " +
                                      shape_to_string(b.shape()));
  std::vector<float> out(a.size());
  const float* ad = a.data();
  const float* bd = b.data();
  for (std::int64_t i = 0; i < a.size(); ++i) out[static_cast<size_t>(i)] = ad[i] * bd[i];
  return detail::make_op({a, b}, a.shape(), std::move(out), [](detail::Node& self) {
    auto& av = self.parents[0];
    auto& bv = self.parents[1];
    if (av->requires_grad) {
      for (size_t i = 0; i < self.grad.size(); ++i) av->grad[i] += self.grad[i] * bv->data[i];
    }
    if (bv->requires_grad) {
      for (size_t i = 0; i < self.grad.size(); ++i) bv->grad[i] += self.grad[i] * av->data[i];
    }
  });
}

Tensor scale(const Tensor& a, float s) {
  require(a.defined(), "scale input is undefined");
  std::vector<float> out(a.size());
  const float* ad = a.data();
  for (std::int64_t i = 0; i < a.size(); ++i) out[static_cast<size_t>(i)] = ad[i] * s;
  return detail::make_op({a}, a.shape(), std::move(out), [s](detail::Node& self) {
    auto& in = self.parents[0];
    if (!in->requires_grad) return;
    for (size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i] * s;
  });
}

Tensor channel_scale(const Tensor& x, const Tensor& weights) {
  require_chw(x, "channel_scale input");
  require(weights.defined() && weights.rank() == 1 && weights.dim(0) == x.dim(0),
          "channel_scale weights must have shape [C]");
  const int C = x.dim(0);
  const std::int64_t HW = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
  std::vector<float> out(x.size());
  const float* xd = x.data();
  const float* wd = weights.data();
  for (int c = 0; c < C; ++c) {
    for (std::int64_t i = 0; i < HW; ++i) {
      out[static_cast<size_t>(c * HW + i)] = xd[c * HW + i] * wd[c];
    }
  }
  return detail::make_op({x, weights}, x.shape(), std::move(out),
                         [C, HW](detail::Node& self) {
                           auto& xv = self.parents[0];
                           auto& wv = self.parents[1];
                           for (int c = 0; c < C; ++c) {
                             const float w = wv->data[static_cast<size_t>(c)];
                             double acc = 0.0;
                             for (std::int64_t i = 0; i < HW; ++i) {
                               const size_t j = static_cast<size_t>(c * HW + i);
                               if (xv->requires_grad) xv->grad[j] += self.grad[j] * w;
                               acc += static_cast<double>(self.grad[j]) * xv->data[j];
                             }
                             if (wv->requires_grad) {
                               wv->grad[static_cast<size_t>(c)] += static_cast<float>(acc);
                             }
                           }
                         });
}

Tensor scalar_scale(const Tensor& x, const Tensor& s) {
  require(x.defined() && s.defined(), "scalar_scale input is undefined");
  require(s.size() == 1, "scalar_scale gate must be a single-element tensor");
  const float sv = s.data()[0];
  std::vector<float> out(x.size());
  const float* xd = x.data();
  for (std::int64_t i = 0; i < x.size(); ++i) out[static_cast<size_t>(i)] = xd[i] * sv;
  return detail::make_op({x, s}, x.shape(), std::move(out), [](detail::Node& self) {
    auto& xv = self.parents[0];
    auto& sv2 = self.parents[1];
    const float s0 = sv2->data[0];
    double acc = 0.0;
    for (size_t i = 0; i < self.grad.size(); ++i) {
      if (xv->requires_grad) xv->grad[i] += self.grad[i] * s0;
      acc += static_cast<double>(self.grad[i]) * xv->data[i];
    }
    if (sv2->requires_grad) sv2->grad[0] += static_cast<float>(acc);
  });
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels requires at least one input");
  for (const Tensor& t : parts) require_chw(t, "concat_channels input");
  const int H = parts[0].dim(1), W = parts[0].dim(2);
  int C = 0;
  for (const Tensor& t : parts) {
    require(t.dim(1) == H && t.dim(2) == W,
            "concat_channels inputs must share spatial extent");
    C += t.dim(0);
  }
  const std::int64_t HW = static_cast<std::int64_t>(H) * W;
  std::vector<float> out(static_cast<size_t>(C) * HW);
  std::int64_t off = 0;
  for (const Tensor& t : parts) {
    std::memcpy(out.data() + off, t.data(), static_cast<size_t>(t.size()) * sizeof(float));
    off += t.size();
  }
  return detail::make_op({parts}, {C, H, W}, std::move(out), [](detail::Node& self) {
    std::int64_t pos = 0;
    for (auto& p : self.parents) {
      const std::int64_t n = p->size();
      if (p->requires_grad) {
        for (std::int64_t i = 0; i < n; ++i) {
          p->grad[static_cast<size_t>(i)] += self.grad[static_cast<size_t>(pos + i)];
        }
      }
      pos += n;
    }
  });
}

Tensor permute_channels(const Tensor& x, const std::vector<int>& order) {
  require_chw(x, "permute_channels input");
  const int C = x.dim(0);
  require(static_cast<int>(order.size()) == C,
          "permute_channels order must list every channel once");
  std::vector<bool> seen(static_cast<size_t>(C), false);
  for (int o : order) {
    require(o >= 0 && o < C && !seen[static_cast<size_t>(o)],
            "permute_channels order must be a permutation of 0..C-1");
    seen[static_cast<size_t>(o)] = true;
  }
  const std::int64_t HW = static_cast<std::int64_t>(x.dim(1)) * x.dim(2);
  std::vector<float> out(x.size());
  const float* xd = x.data();
  for (int c = 0; c < C; ++c) {
    std::memcpy(out.data() + c * HW, xd + static_cast<std::int64_t>(order[static_cast<size_t>(c)]) * HW,
                static_cast<size_t>(HW) * sizeof(float));
  }
  return detail::make_op({x}, x.shape(), std::move(out),
                         [order, HW, C](detail::Node& self) {
                           auto& in = self.parents[0];
                           if (!in->requires_grad) return;
                           for (int c = 0; c < C; ++c) {
                             float* gp = in->grad.data() +
                                         static_cast<std::int64_t>(order[static_cast<size_t>(c)]) * HW;
                             const float* gs = self.grad.data() + c * HW;
                             for (std::int64_t i = 0; i < HW; ++i) gp[i] += gs[i];
                           }
                         });
}

Tensor reshape(const Tensor& x, std::vector<int> new_shape) {
  require(x.defined(), "reshape input is undefined");
  std::int64_t n = 1;
  for (int d : new_shape) {
    require(d > 0, "reshape extents must be positive");
    n *= d;
  }
  require(n == x.size(), "reshape must preserve the element count");
  std::vector<float> out(x.values().begin(), x.values().end());
  return detail::make_op({x}, std::move(new_shape), std::move(out),
                         [](detail::Node& self) {
                           auto& in = self.parents[0];
                           if (!in->requires_grad) return;
                           for (size_t i = 0; i < self.grad.size(); ++i) {
                             in->grad[i] += self.grad[i];
                           }
                         });
}

Tensor sum(const Tensor& x) {
  require(x.defined(), "sum input is undefined");
  double acc = 0.0;
  const float* xd = x.data();
  for (std::int64_t i = 0; i < x.size(); ++i) acc += xd[i];
  return detail::make_op({x}, {1}, {static_cast<float>(acc)}, [](detail::Node& self) {
    auto& in = self.parents[0];
    if (!in->requires_grad) return;
    const float g = self.grad[0];
    for (size_t i = 0; i < in->grad.size(); ++i) in->grad[i] += g;
  });
}

}  // namespace hsr
