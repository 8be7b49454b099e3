#include "lsef/kernels/kernels.hpp"
#include "lsef/ops.hpp"
#include "ops_detail.hpp"

namespace lsef {

std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < static_cast<long>(n) ? m : period - m);
}

namespace {

// Source index along one axis for every padded position; -1 marks zeros.
std::vector<long> pad_map(std::size_t n, std::size_t before, std::size_t after, Padding mode) {
  std::vector<long> map(n + before + after);
  for (std::size_t p = 0; p < map.size(); ++p) {
    const long i = static_cast<long>(p) - static_cast<long>(before);
    if (i >= 0 && i < static_cast<long>(n))
      map[p] = i;
    else
      map[p] = mode == Padding::zeros ? -1 : static_cast<long>(reflect_index(i, n));
  }
  return map;
}

template <typename T>
Tensor<T> conv3d_valid(const Tensor<T>& input, const Tensor<T>& kernel, std::size_t groups,
                       std::array<std::size_t, 3> stride) {
  const Shape& is = input.shape();
  const Shape& ks = kernel.shape();
  const std::size_t batch = is[0], c_in = is[1], c_out = ks[0];
  const std::size_t cin_g = c_in / groups, cout_g = c_out / groups;
  for (std::size_t ax = 0; ax < 3; ++ax)
    require(is[2 + ax] >= ks[2 + ax], ErrorKind::dimension,
            "conv3d: kernel " + to_string(ks) + " larger than padded input " + to_string(is));
  kernels::VolumeConv geo{is[2],     is[3],     is[4],     ks[2], ks[3], ks[4],
                          stride[0], stride[1], stride[2], 0,     0,     0};
  geo.out_t = (geo.in_t - geo.k_t) / geo.s_t + 1;
  geo.out_h = (geo.in_h - geo.k_h) / geo.s_h + 1;
  geo.out_w = (geo.in_w - geo.k_w) / geo.s_w + 1;
  const std::size_t in_vol = geo.in_t * geo.in_h * geo.in_w;
  const std::size_t out_vol = geo.out_t * geo.out_h * geo.out_w;
  const std::size_t k_vol = geo.k_t * geo.k_h * geo.k_w;
  const bool pointwise = k_vol == 1 && stride == std::array<std::size_t, 3>{1, 1, 1} && groups == 1;

  const auto& kt = kernels::active<T>();
  std::vector<T> out(batch * c_out * out_vol, T(0));
  const T* x = input.data().data();
  const T* w = kernel.data().data();
  for (std::size_t b = 0; b < batch; ++b) {
    if (pointwise) {
      kt.gemm_nn(c_out, out_vol, c_in, w, c_in, x + b * c_in * in_vol, in_vol,
                 out.data() + b * c_out * out_vol, out_vol);
      continue;
    }
    for (std::size_t g = 0; g < groups; ++g)
      for (std::size_t co = g * cout_g; co < (g + 1) * cout_g; ++co)
        for (std::size_t cl = 0; cl < cin_g; ++cl) {
          const std::size_t ci = g * cin_g + cl;
          kt.conv_forward(geo, x + (b * c_in + ci) * in_vol, w + (co * cin_g + cl) * k_vol,
                          out.data() + (b * c_out + co) * out_vol);
        }
  }

  Shape out_shape{batch, c_out, geo.out_t, geo.out_h, geo.out_w};
  return make_op_result<T>(
      "conv3d", out_shape, std::move(out), {input, kernel},
      [geo, groups, pointwise, batch, c_in, c_out, cin_g, cout_g, in_vol, out_vol,
       k_vol](detail::BackwardArgs<T>& args) {
        const auto& kt = kernels::active<T>();
        const T* x = args.in(0).data.data();
        const T* w = args.in(1).data.data();
        const T* gy = args.grad_out.data();
        T* gx = args.grad_in[0];
        T* gw = args.grad_in[1];
        for (std::size_t b = 0; b < batch; ++b) {
          const T* xb = x + b * c_in * in_vol;
          const T* gyb = gy + b * c_out * out_vol;
          if (pointwise) {
            if (gw) kt.gemm_nt(c_out, c_in, out_vol, gyb, out_vol, xb, in_vol, gw, c_in);
            if (gx) kt.gemm_tn(c_in, out_vol, c_out, w, c_in, gyb, out_vol, gx + b * c_in * in_vol, in_vol);
            continue;
          }
          for (std::size_t g = 0; g < groups; ++g)
            for (std::size_t co = g * cout_g; co < (g + 1) * cout_g; ++co)
              for (std::size_t cl = 0; cl < cin_g; ++cl) {
                const std::size_t ci = g * cin_g + cl;
                if (gx)
                  kt.conv_backward_input(geo, gyb + co * out_vol, w + (co * cin_g + cl) * k_vol,
                                         gx + (b * c_in + ci) * in_vol);
                if (gw)
                  kt.conv_backward_kernel(geo, xb + ci * in_vol, gyb + co * out_vol,
                                          gw + (co * cin_g + cl) * k_vol);
              }
        }
      });
}

}  // namespace

template <typename T>
Tensor<T> pad3d(const Tensor<T>& input, std::array<std::size_t, 3> before,
                std::array<std::size_t, 3> after, Padding mode) {
  require(input.rank() == 5, ErrorKind::dimension,
          "pad3d expects (B,C,T,H,W), got " + to_string(input.shape()));
  const Shape& is = input.shape();
  const auto mt = pad_map(is[2], before[0], after[0], mode);
  const auto mh = pad_map(is[3], before[1], after[1], mode);
  const auto mw = pad_map(is[4], before[2], after[2], mode);
  const std::size_t planes = is[0] * is[1];
  const std::size_t in_vol = is[2] * is[3] * is[4];
  const std::size_t out_vol = mt.size() * mh.size() * mw.size();
  std::vector<T> out(planes * out_vol, T(0));
  const auto x = input.data();
  // Calls f(out_offset, in_offset) for every padded position with a source.
  auto walk = [=](auto&& f) {
    for (std::size_t p = 0; p < planes; ++p) {
      std::size_t o = p * out_vol;
      for (std::size_t t = 0; t < mt.size(); ++t)
        for (std::size_t h = 0; h < mh.size(); ++h)
          for (std::size_t w = 0; w < mw.size(); ++w, ++o) {
            if (mt[t] < 0 || mh[h] < 0 || mw[w] < 0) continue;
            f(o, p * in_vol + (static_cast<std::size_t>(mt[t]) * is[3] + static_cast<std::size_t>(mh[h])) * is[4] +
                     static_cast<std::size_t>(mw[w]));
          }
    }
  };
  walk([&](std::size_t o, std::size_t i) { out[o] = x[i]; });
  Shape out_shape{is[0], is[1], mt.size(), mh.size(), mw.size()};
  return make_op_result<T>("pad3d", out_shape, std::move(out), {input},
                           [walk](detail::BackwardArgs<T>& args) {
                             T* gx = args.grad_in[0];
                             if (!gx) return;
                             const T* g = args.grad_out.data();
                             walk([&](std::size_t o, std::size_t i) { gx[i] += g[o]; });
                           });
}

template <typename T>
Tensor<T> conv3d(const Tensor<T>& input, const Tensor<T>& kernel, const Conv3dOptions& opts) {
  require(input.rank() == 5, ErrorKind::dimension,
          "conv3d: input must be (B,C,T,H,W), got " + to_string(input.shape()));
  require(kernel.rank() == 5, ErrorKind::dimension,
          "conv3d: kernel must be (C_out,C_in/groups,kt,kh,kw), got " + to_string(kernel.shape()));
  const std::size_t c_in = input.dim(1), c_out = kernel.dim(0);
  require(opts.groups > 0 && c_in % opts.groups == 0, ErrorKind::configuration,
          "conv3d: groups=" + std::to_string(opts.groups) + " does not divide C=" +
              std::to_string(c_in));
  require(c_out % opts.groups == 0, ErrorKind::configuration,
          "conv3d: groups do not divide output channels");
  require(kernel.dim(1) == c_in / opts.groups, ErrorKind::dimension,
          "conv3d: kernel " + to_string(kernel.shape()) + " incompatible with input " +
              to_string(input.shape()) + " and groups=" + std::to_string(opts.groups));
  for (auto s : opts.stride) require(s > 0, ErrorKind::configuration, "conv3d: zero stride");

  std::array<std::size_t, 3> before{}, after{};
  bool padded = false;
  for (std::size_t ax = 0; ax < 3; ++ax) {
    const std::size_t k = kernel.dim(2 + ax);
    before[ax] = (k - 1) / 2;
    after[ax] = k / 2;
    padded = padded || k > 1;
  }
  if (!padded) return conv3d_valid(input, kernel, opts.groups, opts.stride);
  return conv3d_valid(pad3d(input, before, after, opts.padding), kernel, opts.groups, opts.stride);
}

#define LSEF_INSTANTIATE(T)                                                               \
  template Tensor<T> pad3d(const Tensor<T>&, std::array<std::size_t, 3>,                  \
                           std::array<std::size_t, 3>, Padding);                          \
  template Tensor<T> conv3d(const Tensor<T>&, const Tensor<T>&, const Conv3dOptions&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
