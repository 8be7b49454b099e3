#include "lsef/verify/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace lsef::oracle {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Mirror an index into [0, n) without repeating the edge sample.
std::size_t mirror(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long r = i % period;
  if (r < 0) r += period;
  if (r >= static_cast<long>(n)) r = period - r;
  return static_cast<std::size_t>(r);
}

// y[b, o, p] = sum_c w[o, c] x[b, c, p] over flattened positions p.
std::vector<double> pointwise(std::span<const double> x, std::span<const double> w, std::size_t batch,
                              std::size_t cin, std::size_t cout, std::size_t positions) {
  std::vector<double> y(batch * cout * positions, 0.0);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t p = 0; p < positions; ++p) {
        double acc = 0;
        for (std::size_t c = 0; c < cin; ++c) acc += w[o * cin + c] * x[(b * cin + c) * positions + p];
        y[(b * cout + o) * positions + p] = acc;
      }
  return y;
}

void softmax_rows(std::vector<double>& m, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = m.data() + r * cols;
    const double hi = *std::max_element(row, row + cols);
    double total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += (row[c] = std::exp(row[c] - hi));
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
}

}  // namespace

std::vector<double> matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n,
                           std::size_t k, std::size_t m) {
  std::vector<double> c(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      double acc = 0;
      for (std::size_t l = 0; l < k; ++l) acc += a[i * k + l] * b[l * m + j];
      c[i * m + j] = acc;
    }
  return c;
}

std::vector<double> ddm_gate(const Tensor64& x, const DdmState<double>& s) {
  const auto& sh = x.shape();
  const std::size_t B = sh[0], C = sh[1], T = sh[2], HW = sh[3] * sh[4];
  const auto w1 = s.w1.data(), w2 = s.w2.data();
  std::vector<double> gate(B * T);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> p(T, 0.0), h(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < HW; ++i) p[t] += x[((b * C + c) * T + t) * HW + i];
      p[t] /= static_cast<double>(C * HW);
    }
    for (std::size_t i = 0; i < T; ++i) {
      double acc = 0;
      for (std::size_t j = 0; j < T; ++j) acc += w1[i * T + j] * p[j];
      h[i] = std::max(0.0, acc);
    }
    for (std::size_t i = 0; i < T; ++i) {
      double acc = 0;
      for (std::size_t j = 0; j < T; ++j) acc += w2[i * T + j] * h[j];
      gate[b * T + i] = sigmoid(acc);
    }
  }
  return gate;
}

Graph ddm_graph(const Tensor64& x_routed, const DdmState<double>& s) {
  const auto& sh = x_routed.shape();
  const std::size_t B = sh[0], C = sh[1], T = sh[2], N = sh[3] * sh[4], G = s.graph_channels;
  const auto g_all = pointwise(x_routed.data(), s.phi_g.data(), B, C, G, T * N);
  const auto o_all = pointwise(x_routed.data(), s.phi_o.data(), B, C, G, T * N);
  Graph r;
  r.out.assign(B * G * T * N, 0.0);
  r.affinity.assign(B * T * N * N, 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < T; ++t) {
      // unit columns: one G-vector per node
      std::vector<double> gh(G * N), oh(G * N);
      for (std::size_t n = 0; n < N; ++n) {
        double ng = 0, no = 0;
        for (std::size_t c = 0; c < G; ++c) {
          const double gv = g_all[((b * G + c) * T + t) * N + n], ov = o_all[((b * G + c) * T + t) * N + n];
          ng += gv * gv;
          no += ov * ov;
        }
        ng = std::max(std::sqrt(ng), 1e-8);
        no = std::max(std::sqrt(no), 1e-8);
        for (std::size_t c = 0; c < G; ++c) {
          gh[c * N + n] = g_all[((b * G + c) * T + t) * N + n] / ng;
          oh[c * N + n] = o_all[((b * G + c) * T + t) * N + n] / no;
        }
      }
      std::vector<double> a(N * N);
      for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < N; ++j) {
          double acc = 0;
          for (std::size_t c = 0; c < G; ++c) acc += gh[c * N + i] * oh[c * N + j];
          a[i * N + j] = acc;
        }
      softmax_rows(a, N, N);
      std::copy(a.begin(), a.end(), r.affinity.begin() + (b * T + t) * N * N);
      for (std::size_t c = 0; c < G; ++c)
        for (std::size_t j = 0; j < N; ++j) {
          double acc = 0;
          for (std::size_t i = 0; i < N; ++i) acc += oh[c * N + i] * a[j * N + i];
          r.out[((b * G + c) * T + t) * N + j] = acc;
        }
    }
  return r;
}

std::vector<double> depthwise_reflect(const Tensor64& x, const Tensor64& kernel) {
  const auto& sh = x.shape();
  const auto& ks = kernel.shape();
  const std::size_t B = sh[0], C = sh[1], T = sh[2], H = sh[3], W = sh[4];
  const long pt = static_cast<long>(ks[2] / 2), ph = static_cast<long>(ks[3] / 2), pw = static_cast<long>(ks[4] / 2);
  std::vector<double> y(x.numel(), 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t h = 0; h < H; ++h)
          for (std::size_t w = 0; w < W; ++w) {
            double acc = 0;
            for (std::size_t a = 0; a < ks[2]; ++a)
              for (std::size_t bb = 0; bb < ks[3]; ++bb)
                for (std::size_t cc = 0; cc < ks[4]; ++cc) {
                  const std::size_t it = mirror(static_cast<long>(t + a) - pt, T);
                  const std::size_t ih = mirror(static_cast<long>(h + bb) - ph, H);
                  const std::size_t iw = mirror(static_cast<long>(w + cc) - pw, W);
                  acc += kernel[((c * ks[2] + a) * ks[3] + bb) * ks[4] + cc] *
                         x[(((b * C + c) * T + it) * H + ih) * W + iw];
                }
            y[(((b * C + c) * T + t) * H + h) * W + w] = acc;
          }
  return y;
}

std::vector<double> cim_multiscale(const Tensor64& x, const CimState<double>& s) {
  const auto& sh = x.shape();
  const std::size_t B = sh[0], C = sh[1], P = sh[2] * sh[3] * sh[4], K = s.scale_kernels.size();
  std::vector<double> cat(B * K * C * P);
  for (std::size_t k = 0; k < K; ++k) {
    const auto branch = depthwise_reflect(x, s.scale_kernels[k]);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t p = 0; p < P; ++p) cat[((b * K + k) * C + c) * P + p] = branch[(b * C + c) * P + p];
  }
  return pointwise(cat, s.fuse_kernel.data(), B, K * C, C, P);
}

std::vector<double> cim_attention(const Tensor64& x_ms, const CimState<double>& s) {
  const auto& sh = x_ms.shape();
  const std::size_t B = sh[0], C = sh[1], T = sh[2], HW = sh[3] * sh[4];
  const auto w = s.temp_weight.data();
  const double bias = s.temp_bias[0];
  std::vector<double> attn(B * T);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> ctx(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t i = 0; i < HW; ++i) ctx[t] += x_ms[((b * C + c) * T + t) * HW + i];
      ctx[t] /= static_cast<double>(C * HW);
    }
    for (std::size_t t = 0; t < T; ++t) {
      double acc = bias;
      for (std::size_t a = 0; a < 3; ++a) acc += w[a] * ctx[mirror(static_cast<long>(t + a) - 1, T)];
      attn[b * T + t] = sigmoid(acc);
    }
  }
  return attn;
}

Graph cim_nonlocal(const Tensor64& x_ta, const CimState<double>& s) {
  const auto& sh = x_ta.shape();
  const std::size_t B = sh[0], C = sh[1], M = sh[2] * sh[3] * sh[4], A = s.attn_channels;
  const auto th = pointwise(x_ta.data(), s.theta_proj.data(), B, C, A, M);
  const auto ph = pointwise(x_ta.data(), s.phi_proj.data(), B, C, A, M);
  const double inv = 1.0 / std::sqrt(static_cast<double>(A));
  Graph r;
  r.affinity.assign(B * M * M, 0.0);
  std::vector<double> agg(B * A * M, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<double> a(M * M);
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < M; ++j) {
        double acc = 0;
        for (std::size_t c = 0; c < A; ++c) acc += th[(b * A + c) * M + i] * ph[(b * A + c) * M + j];
        a[i * M + j] = acc * inv;
      }
    softmax_rows(a, M, M);
    std::copy(a.begin(), a.end(), r.affinity.begin() + b * M * M);
    for (std::size_t c = 0; c < A; ++c)
      for (std::size_t i = 0; i < M; ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < M; ++j) acc += a[i * M + j] * ph[(b * A + c) * M + j];
        agg[(b * A + c) * M + i] = acc;
      }
  }
  const auto update = pointwise(agg, s.graph_out.data(), B, A, C, M);
  const double gamma = s.residual_scale[0];
  r.out.resize(x_ta.numel());
  for (std::size_t i = 0; i < r.out.size(); ++i) r.out[i] = x_ta[i] + gamma * update[i];
  return r;
}

double max_abs_diff(const std::vector<double>& a, std::span<const double> b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace lsef::oracle
