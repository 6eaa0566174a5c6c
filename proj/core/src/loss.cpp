#include "hsr/loss.hpp"

#include <cmath>
#include <vector>

#include "hsr/errors.hpp"

namespace hsr {

namespace {

void check_pair(const Tensor& xhat, const Tensor& x) {
  if (!xhat.defined() || !x.defined() || xhat.rank() != 3 ||
      xhat.shape() != x.shape()) {
    throw InvalidShapeError("loss operands must be equal-shape [C, H, W] tensors");
  }
}

double clamp11(double v) { return v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace

double loss_reference(const Tensor& xhat, const Tensor& x, const LossConfig& cfg) {
  check_pair(xhat, x);
  const int C = xhat.dim(0);
  const std::int64_t P = static_cast<std::int64_t>(xhat.dim(1)) * xhat.dim(2);
  const float* u = xhat.data();
  const float* v = x.data();

  double l1 = 0.0;
  double angles = 0.0;
  for (std::int64_t p = 0; p < P; ++p) {
    double dot = 0.0, n2u = 0.0, n2v = 0.0;
    for (int c = 0; c < C; ++c) {
      const double a = u[c * P + p];
      const double b = v[c * P + p];
      l1 += std::abs(a - b);
      dot += a * b;
      n2u += a * a;
      n2v += b * b;
    }
    const double cosv =
        dot / (std::sqrt(n2u) * std::sqrt(n2v) + cfg.norm_epsilon);
    angles += std::acos(clamp11(cosv));
  }
  return l1 / (static_cast<double>(C) * P) + cfg.alpha * angles / static_cast<double>(P);
}

Tensor loss_fast(const Tensor& xhat, const Tensor& x, const LossConfig& cfg) {
  check_pair(xhat, x);
  const int C = xhat.dim(0);
  const std::int64_t P = static_cast<std::int64_t>(xhat.dim(1)) * xhat.dim(2);
  const std::int64_t N = static_cast<std::int64_t>(C) * P;
  const float* u = xhat.data();
  const float* v = x.data();
  const double eps = cfg.norm_epsilon;

  // Per-plane sweeps keep memory access contiguous; all accumulation in
  // double so the identity with the per-pixel form holds tightly.
  std::vector<double> n2u(static_cast<size_t>(P), 0.0);
  std::vector<double> n2v(static_cast<size_t>(P), 0.0);
  double l1 = 0.0;
  for (int c = 0; c < C; ++c) {
    const float* up = u + c * P;
    const float* vp = v + c * P;
    for (std::int64_t p = 0; p < P; ++p) {
      const double a = up[p];
      const double b = vp[p];
      l1 += std::abs(a - b);
      n2u[static_cast<size_t>(p)] += a * a;
      n2v[static_cast<size_t>(p)] += b * b;
    }
  }
  std::vector<double> inv_nu(static_cast<size_t>(P));
  std::vector<double> inv_nv(static_cast<size_t>(P));
  for (std::int64_t p = 0; p < P; ++p) {
    inv_nu[static_cast<size_t>(p)] = 1.0 / (std::sqrt(n2u[static_cast<size_t>(p)]) + eps);
    inv_nv[static_cast<size_t>(p)] = 1.0 / (std::sqrt(n2v[static_cast<size_t>(p)]) + eps);
  }
  std::vector<double> diff2(static_cast<size_t>(P), 0.0);
  for (int c = 0; c < C; ++c) {
    const float* up = u + c * P;
    const float* vp = v + c * P;
    for (std::int64_t p = 0; p < P; ++p) {
      const double d = up[p] * inv_nu[static_cast<size_t>(p)] -
                       vp[p] * inv_nv[static_cast<size_t>(p)];
      diff2[static_cast<size_t>(p)] += d * d;
    }
  }
  std::vector<double> t_raw(static_cast<size_t>(P));
  double angles = 0.0;
  for (std::int64_t p = 0; p < P; ++p) {
    t_raw[static_cast<size_t>(p)] = 1.0 - 0.5 * diff2[static_cast<size_t>(p)];
    angles += std::acos(clamp11(t_raw[static_cast<size_t>(p)]));
  }
  const double value =
      l1 / static_cast<double>(N) + cfg.alpha * angles / static_cast<double>(P);

  const double alpha = cfg.alpha;
  return detail::make_op(
      {xhat, x}, {1}, {static_cast<float>(value)},
      [C, P, N, alpha, n2u = std::move(n2u), n2v = std::move(n2v),
       inv_nu = std::move(inv_nu), inv_nv = std::move(inv_nv),
       t_raw = std::move(t_raw)](detail::Node& self) {
        auto& un = self.parents[0];
        auto& vn = self.parents[1];
        const float* u = un->data.data();
        const float* v = vn->data.data();
        const double g = self.grad[0];
        const double l1_w = g / static_cast<double>(N);

        // Pixelwise multipliers of the angular term's gradient:
        // d(theta)/du_k = -(1-t^2)^(-1/2) * [(b_k - a_k) - u_hat_k (ab - aa)] / nu
        // with a = u/(|u|+eps), b = v/(|v|+eps), u_hat = u/|u|.
        std::vector<double> ab(static_cast<size_t>(P), 0.0);
        for (int c = 0; c < C; ++c) {
          const float* up = u + c * P;
          const float* vp = v + c * P;
          for (std::int64_t p = 0; p < P; ++p) {
            ab[static_cast<size_t>(p)] += static_cast<double>(up[p]) * vp[p] *
                                          inv_nu[static_cast<size_t>(p)] *
                                          inv_nv[static_cast<size_t>(p)];
          }
        }
        std::vector<double> term_a_u(static_cast<size_t>(P), 0.0);
        std::vector<double> term_b_u(static_cast<size_t>(P), 0.0);
        std::vector<double> term_a_v(static_cast<size_t>(P), 0.0);
        std::vector<double> term_b_v(static_cast<size_t>(P), 0.0);
        const double sam_w = g * alpha / static_cast<double>(P);
        for (std::int64_t p = 0; p < P; ++p) {
          const size_t sp = static_cast<size_t>(p);
          const double t = t_raw[sp];
          if (t >= 1.0 || t <= -1.0) continue;  // clamped: zero derivative
          const double one_m_t2 = 1.0 - t * t;
          if (one_m_t2 < 1e-24) continue;
          const double factor = -sam_w / std::sqrt(one_m_t2);
          const double aa = n2u[sp] * inv_nu[sp] * inv_nu[sp];
          const double bb = n2v[sp] * inv_nv[sp] * inv_nv[sp];
          if (n2u[sp] > 0.0) {
            term_a_u[sp] = factor * inv_nu[sp];
            term_b_u[sp] = term_a_u[sp] * (ab[sp] - aa) / std::sqrt(n2u[sp]);
          }
          if (n2v[sp] > 0.0) {
            term_a_v[sp] = factor * inv_nv[sp];
            term_b_v[sp] = term_a_v[sp] * (ab[sp] - bb) / std::sqrt(n2v[sp]);
          }
        }
        for (int c = 0; c < C; ++c) {
          const float* up = u + c * P;
          const float* vp = v + c * P;
          for (std::int64_t p = 0; p < P; ++p) {
            const size_t sp = static_cast<size_t>(p);
            const double du = static_cast<double>(up[p]) - vp[p];
            const double sgn = du > 0.0 ? 1.0 : (du < 0.0 ? -1.0 : 0.0);
            const double a_k = up[p] * inv_nu[sp];
            const double b_k = vp[p] * inv_nv[sp];
            if (un->requires_grad) {
              const double gu =
                  l1_w * sgn + term_a_u[sp] * (b_k - a_k) - term_b_u[sp] * up[p];
              un->grad[static_cast<size_t>(c * P + p)] += static_cast<float>(gu);
            }
            if (vn->requires_grad) {
              const double gv =
                  -l1_w * sgn + term_a_v[sp] * (a_k - b_k) - term_b_v[sp] * vp[p];
              vn->grad[static_cast<size_t>(c * P + p)] += static_cast<float>(gv);
            }
          }
        }
      });
}

}  // namespace hsr
