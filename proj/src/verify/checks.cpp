#include "lsef/verify/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <ostream>
#include <sstream>

#include "lsef/ablation.hpp"
#include "lsef/backbone.hpp"
#include "lsef/cim.hpp"
#include "lsef/datagen.hpp"
#include "lsef/ddm.hpp"
#include "lsef/error.hpp"
#include "lsef/gradcheck.hpp"
#include "lsef/linalg.hpp"
#include "lsef/metrics.hpp"
#include "lsef/ops.hpp"
#include "lsef/rao.hpp"
#include "lsef/sem.hpp"
#include "lsef/train.hpp"
#include "lsef/verify/oracles.hpp"
#include "lsef/verify/reference.hpp"

namespace lsef::verify {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Adds amp * U(-1, 1) so zero-initialized parameters stop sitting on a
// symmetric point where some gradients vanish identically.
void nudge(Tensor64& t, std::uint64_t seed, double amp = 0.3) {
  auto r = random_tensor(t.shape(), seed, "nudge");
  auto d = t.mutable_data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += amp * r[i];
}

Tensor64 leaf(const Shape& shape, std::uint64_t seed) { return parameter(random_tensor(shape, seed, "input")); }

struct Worst {
  std::string name;
  double rel = -1;
  void take(const std::string& where, const std::vector<GradCheckResult>& rs) {
    for (const auto& r : rs)
      if (r.max_rel_error > rel) {
        rel = r.max_rel_error;
        name = where + "/" + r.name;
      }
  }
};

// ---------------------------------------------------------------- gradients

Outcome gradient_suite(const Options&) {
  std::vector<std::pair<std::string, std::vector<GradCheckResult>>> all;

  {
    auto s = SemState<double>::init(4, 11);
    s.lambda_raw.mutable_data()[0] = 0.3;  // away from the symmetric 0.5
    nudge(s.energy_kernel, 12, 0.2);
    auto x = leaf({1, 4, 3, 4, 4}, 13);
    auto in = s.parameters();
    in.push_back({"input", x});
    all.emplace_back("sem", gradient_check([&] { return weighted_sum(sem_forward(x, s), 14); }, in));
  }
  {
    auto s = DdmState<double>::init(4, 2, 21);
    nudge(s.w1, 22, 1.0);
    nudge(s.w2, 23, 1.0);
    auto x = leaf({1, 4, 2, 4, 4}, 24);
    auto in = s.parameters();
    in.push_back({"input", x});
    all.emplace_back("ddm", gradient_check([&] { return weighted_sum(ddm_forward(x, s), 25); }, in));
  }
  {
    auto s = CimState<double>::init(4, 31);
    nudge(s.temp_weight, 32, 1.0);
    nudge(s.temp_bias, 33, 0.5);
    nudge(s.residual_scale, 34, 1.0);
    auto x = leaf({1, 4, 2, 3, 3}, 35);
    auto in = s.parameters();
    in.push_back({"input", x});
    all.emplace_back("cim", gradient_check([&] { return weighted_sum(cim_forward(x, s), 36); }, in));
  }
  for (Head head : {Head::categorical, Head::regression}) {
    BackboneConfig c;
    c.widths = {4, 4, 6};
    c.frames = 4;
    c.height = c.width = 8;
    c.head = head;
    c.set_modules("sem,ddm,cim");
    auto s = BackboneState<double>::init(c, 41);
    nudge(s.sem->lambda_raw, 42);
    nudge(s.ddm->w2, 43);
    nudge(s.cim->temp_weight, 44);
    nudge(s.cim->temp_bias, 45);
    nudge(s.cim->residual_scale, 46);
    nudge(s.head_b, 47);
    auto x = leaf({1, 3, 4, 8, 8}, 48);
    auto in = s.parameters();
    in.push_back({"input", x});
    // 24 probed coordinates per tensor keep the end-to-end check at seconds
    all.emplace_back(std::string("backbone-") + to_string(head),
                     gradient_check([&] { return weighted_sum(backbone_forward(x, c, s), 49); }, in,
                                    {1e-5, 1e-4, 24, 17}));
  }

  Worst worst;
  std::size_t tensors = 0, coords = 0, mismatched = 0;
  std::ostringstream failed;
  for (const auto& [where, rs] : all) {
    worst.take(where, rs);
    for (const auto& r : rs) {
      ++tensors;
      coords += r.checked;
      if (r.passed) continue;
      ++mismatched;
      failed << " " << where << "/" << r.name << "[" << r.worst_index << "] rel=" << r.max_rel_error
               << " analytic=" << r.worst_analytic << " numeric=" << r.worst_numeric << ";";
    }
  }
  std::ostringstream d;
  const bool ok = failed.str().empty();
  if (ok)
    d << tensors << " tensors, " << coords << " coordinates, worst " << worst.name << " rel=" << worst.rel;
  else
    d << mismatched << "/" << tensors << " tensors mismatched:" << failed.str();
  return {ok, d.str()};
}

// ------------------------------------------------------------ decomposition

Outcome decomposition(const Options&) {
  double worst = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::size_t b = 1 + i % 2, c = 1 + i % 4, t = 2 + i % 5, h = 3 + (i / 3) % 5, w = 3 + (i / 5) % 6;
    const std::size_t k = i % 3 == 0 ? 5 : 3;
    auto x = random_tensor({b, c, t, h, w}, 1000 + i);
    // wide dynamic range so the identity is exercised beyond unit scale
    x = scale(x, std::pow(10.0, static_cast<double>(i % 7) - 3.0));
    const auto parts = decompose(x, k);
    for (std::size_t j = 0; j < x.numel(); ++j)
      worst = std::max(worst, std::abs(x[j] - (parts.low[j] + parts.high[j])));
  }
  bool exact = true;
  for (std::uint64_t i = 0; i < 5; ++i) {
    auto x = random_tensor({2, 3, 3 + i, 4, 5}, 2000 + i);
    auto y = gaussian_lowpass(x, 1);
    exact = exact && y.shape() == x.shape() &&
            std::memcmp(x.data().data(), y.data().data(), x.numel() * sizeof(double)) == 0;
    auto xf = x.cast<float>();
    auto yf = gaussian_lowpass(xf, 1);
    exact = exact && std::memcmp(xf.data().data(), yf.data().data(), xf.numel() * sizeof(float)) == 0;
  }
  std::ostringstream d;
  d << "100 inputs max|x-(low+high)|=" << worst << " (< 1e-6), k=1 bit-exact=" << (exact ? "yes" : "no");
  return {worst < 1e-6 && exact, d.str()};
}

// ------------------------------------------------------------ normalization

struct Tally {
  double softmax = 0, column = 0;
  std::size_t slices = 0, columns = 0, gates = 0, gate_violations = 0;
  double gate_min = 1, gate_max = 0;

  void rows(const Tensor64& a, std::size_t len) {
    for (std::size_t r = 0; r < a.numel() / len; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < len; ++j) s += a[r * len + j];
      softmax = std::max(softmax, std::abs(s - 1.0));
      ++slices;
    }
  }
  // (G, C, N): columns run over C; degenerate raw columns are skipped.
  void cols(const Tensor64& normed, const Tensor64* raw) {
    const auto& s = normed.shape();
    const std::size_t c = s[s.size() - 2], n = s.back(), g = normed.numel() / (c * n);
    for (std::size_t a = 0; a < g; ++a)
      for (std::size_t j = 0; j < n; ++j) {
        double q = 0, rq = 0;
        for (std::size_t i = 0; i < c; ++i) {
          q += normed[(a * c + i) * n + j] * normed[(a * c + i) * n + j];
          if (raw) rq += (*raw)[(a * c + i) * n + j] * (*raw)[(a * c + i) * n + j];
        }
        if (raw && std::sqrt(rq) < 1e-6) continue;
        column = std::max(column, std::abs(std::sqrt(q) - 1.0));
        ++columns;
      }
  }
  void gate(const Tensor64& g) {
    for (double v : g.data()) {
      ++gates;
      gate_min = std::min(gate_min, v);
      gate_max = std::max(gate_max, v);
      if (!(v > 0.0 && v < 1.0)) ++gate_violations;
    }
  }
};

Outcome normalization(const Options&) {
  Tally t;
  // the primitives on their own, across axes and magnitudes
  for (std::uint64_t i = 0; i < 10; ++i) {
    auto x = scale(random_tensor({3, 5, 7}, 3000 + i), 1.0 + 2.0 * static_cast<double>(i));
    for (std::size_t axis = 0; axis < 3; ++axis) {
      auto sm = softmax(x, axis);
      auto moved = axis == 2 ? sm : axis == 1 ? permute(sm, {0, 2, 1}) : permute(sm, {1, 2, 0});
      t.rows(moved, x.shape()[axis]);
    }
    t.cols(l2_normalize(x, 1), &x);
    t.gate(sigmoid(x));
  }
  // the module-level instances
  for (std::uint64_t i = 0; i < 4; ++i) {
    const std::size_t c = 4 + 2 * (i % 2), frames = 2 + i % 3;
    auto x = random_tensor({2, c, frames, 4, 3 + i}, 3100 + i);

    auto sem = SemState<double>::init(c, 3200 + i);
    nudge(sem.ca_reduce, 3210 + i, 1.0);
    nudge(sem.ca_expand, 3220 + i, 1.0);
    t.gate(sigmoid(channel_attention(x, sem)));

    auto ddm = DdmState<double>::init(c, frames, 3300 + i);
    nudge(ddm.w1, 3310 + i, 1.0);
    nudge(ddm.w2, 3320 + i, 1.0);
    const auto tg = temporal_gate(x, ddm);
    t.gate(tg.gate);
    const auto g = graph_interact_detailed(tg.routed, ddm);
    const std::size_t n = x.shape()[3] * x.shape()[4];
    t.rows(g.affinity, n);
    t.cols(g.g_hat, nullptr);
    t.cols(g.o_hat, nullptr);

    auto cim = CimState<double>::init(c, 3400 + i);
    nudge(cim.temp_weight, 3410 + i, 1.0);
    nudge(cim.temp_bias, 3420 + i, 0.5);
    const auto ms = multiscale(x, cim);
    t.gate(temporal_attention(ms, cim));
    const auto nl = nonlocal_graph_detailed(temporal_recalibrate(ms, cim), cim);
    t.rows(nl.affinity, frames * n);
  }
  std::ostringstream d;
  d << t.slices << " softmax slices max|sum-1|=" << t.softmax << ", " << t.columns << " columns max|norm-1|="
    << t.column << ", " << t.gates << " gates in [" << t.gate_min << ", " << t.gate_max << "]";
  if (t.gate_violations) d << ", " << t.gate_violations << " gates outside (0,1)";
  return {t.softmax <= 1e-6 && t.column <= 1e-6 && t.gate_violations == 0, d.str()};
}

// ------------------------------------------------------------ rao exactness

Outcome rao_exactness(const Options&) {
  std::ostringstream bad;
  double radius_err = 0, formula_err = 0;
  std::size_t measured = 0;

  // ||W' - W|| measured inside the loss closure, independent of the
  // optimizer's own bookkeeping: call 1 of a step sees W, call 2 sees W'.
  auto net = reference::TwoLayerNet::make(51);
  const auto params = net.parameters();
  RaoConfig cfg;  // defaults: alpha = beta = 0.5, gamma = 0.1
  RankAwareOptimizer<double> opt(params, OptimizerKind::rao, {BaseKind::sgd, 0.05}, cfg);
  std::vector<std::vector<double>> at_w;
  std::vector<double> norms;
  int call = 0;
  auto loss = [&] {
    if (call++ % 2 == 0) {
      at_w.clear();
      for (const auto& p : params) at_w.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    } else {
      norms.clear();
      for (std::size_t i = 0; i < params.size(); ++i) {
        double s = 0;
        for (std::size_t j = 0; j < at_w[i].size(); ++j) {
          const double dlt = params[i].tensor[j] - at_w[i][j];
          s += dlt * dlt;
        }
        norms.push_back(std::sqrt(s));
      }
    }
    return net.loss();
  };
  for (int step = 0; step < 20; ++step) {
    opt.step(loss);
    const auto& rep = opt.last_report();
    for (std::size_t i = 0; i < rep.tensors.size(); ++i) {
      const auto& ts = rep.tensors[i];
      if (ts.rho_r < 0 || ts.rho_r > 1 || ts.rho_s < 0 || ts.rho_s > 1) bad << " " << ts.name << " sensitivity out of [0,1];";
      const double direct = std::max(0.0, rep.rho_base * (1.0 + cfg.alpha * ts.rho_r - cfg.beta * ts.rho_s));
      formula_err = std::max(formula_err, std::abs(ts.rho_dyn - direct));
      if (!ts.perturbed) continue;
      radius_err = std::max(radius_err, std::abs(norms[i] - ts.rho_dyn));
      ++measured;
    }
  }

  // scale invariance of both sensitivities
  std::size_t scale_breaks = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto w = random_tensor({6 + seed % 3, 5}, 5000 + seed);
    const double r0 = rank_sensitivity(w, 0.3).rho, s0 = sparsity_sensitivity(w, 0.2).rho;
    if (r0 < 0 || r0 > 1 || s0 < 0 || s0 > 1) bad << " random tensor sensitivity out of [0,1];";
    for (double c : {1e-3, 0.25, 3.7, 8.0, 1024.0}) {
      auto wc = scale(w, c);
      if (rank_sensitivity(wc, 0.3).rho != r0 || sparsity_sensitivity(wc, 0.2).rho != s0) ++scale_breaks;
    }
  }

  const double example = dynamic_radius(0.05, 0.4, 0.2, 0.5, 0.5);
  const double example_err = std::abs(example - 0.05 * (1.0 + 0.5 * 0.4 - 0.5 * 0.2));

  std::ostringstream d;
  d << measured << " perturbations max| ||W'-W|| - rho_dyn |=" << radius_err << ", radius formula err=" << formula_err
    << ", scale-invariance breaks=" << scale_breaks << ", 0.05*(1+0.5*0.4-0.5*0.2)=" << example;
  d << bad.str();
  const bool ok = measured > 0 && radius_err <= 1e-9 && formula_err <= 1e-15 && scale_breaks == 0 &&
                  bad.str().empty() && example_err <= 1e-15 && std::abs(example - 0.055) <= 1e-15;
  return {ok, d.str()};
}

// --------------------------------------------------------------- degeneracy

Outcome degeneracy(const Options&) {
  auto a = reference::TwoLayerNet::make(61);
  auto b = a.clone();
  RaoConfig c;
  c.alpha = c.beta = c.gamma = 0;
  RankAwareOptimizer<double> opt(a.parameters(), OptimizerKind::rao, {BaseKind::sgd, 0.05}, c);
  for (int s = 0; s < 50; ++s) {
    opt.step([&] { return a.loss(); });
    reference::sam_step(b.parameters(), [&] { return b.loss(); }, c.rho_base, 0.05);
  }
  const double sam_diff = reference::max_param_diff(a.parameters(), b.parameters());
  const double moved = reference::max_param_diff(a.parameters(), reference::TwoLayerNet::make(61).parameters());

  std::ostringstream d;
  d << "SAM max diff=" << sam_diff << " after 50 steps (moved " << moved << ")";
  bool bitwise = true;
  for (BaseKind kind : {BaseKind::sgd, BaseKind::adam}) {
    auto x = reference::TwoLayerNet::make(62);
    auto y = x.clone();
    RaoConfig z;
    z.rho_base = 0;
    z.rho_min = 0;
    RankAwareOptimizer<double> rao(x.parameters(), OptimizerKind::rao, {kind, 0.02}, z);
    BaseOptimizer<double> base(y.parameters(), {kind, 0.02});
    for (int s = 0; s < 50; ++s) {
      rao.step([&] { return x.loss(); });
      for (auto p : y.parameters()) p.tensor.zero_grad();
      y.loss().backward();
      std::vector<std::vector<double>> g;
      for (const auto& p : y.parameters()) g.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
      base.update_all(g);
    }
    const bool same = reference::bitwise_equal(x.parameters(), y.parameters());
    d << ", rho=0 vs " << to_string(kind) << " bitwise=" << (same ? "yes" : "no");
    bitwise = bitwise && same;
  }
  return {sam_diff <= 1e-12 && moved > 1e-3 && bitwise, d.str()};
}

// ---------------------------------------------------------------- quadratic

Outcome quadratic(const Options&) {
  auto w = parameter(Tensor64::from({2}, {3.0, 4.0}));
  auto half_sq = [&] { return scale(sum(mul(w, w)), 0.5); };
  RaoConfig c;
  // hand example: rho_dyn = 0.055 on the first step, kept fixed
  c.rho_base = 0.055;
  c.alpha = c.beta = c.gamma = 0;
  RankAwareOptimizer<double> opt({{"w", w}}, OptimizerKind::rao, {BaseKind::sgd, 0.1}, c);
  opt.step(half_sq);
  const double w0 = w[0], w1 = w[1];
  const double pert = opt.last_report().tensors.at(0).perturbation_norm;
  std::size_t reached = 0;
  for (std::size_t s = 2; s <= 500 && !reached; ++s) {
    opt.step(half_sq);
    if (half_sq().item() < 1e-6) reached = s;
  }
  std::ostringstream d;
  d.precision(10);
  d << "first step (" << w0 << ", " << w1 << "), perturbation " << pert << ", L<1e-6 at step "
    << (reached ? std::to_string(reached) : std::string("never"));
  const bool ok = std::abs(w0 - 2.6967) <= 1e-9 && std::abs(w1 - 3.5956) <= 1e-9 && std::abs(pert - 0.055) <= 1e-9 &&
                  reached > 0;
  return {ok, d.str()};
}

// ------------------------------------------------------- oracle equivalence

Outcome oracle_equivalence(const Options&) {
  double ddm = 0, cim = 0;
  std::size_t max_n = 0, max_m = 0;
  const std::vector<Shape> ddm_shapes{{1, 4, 1, 1, 1}, {1, 4, 1, 2, 2}, {2, 4, 2, 4, 4}, {1, 6, 3, 3, 2}, {1, 3, 2, 2, 3}};
  for (std::size_t i = 0; i < ddm_shapes.size(); ++i) {
    const auto& sh = ddm_shapes[i];
    auto s = DdmState<double>::init(sh[1], sh[2], 6000 + i);
    nudge(s.w1, 6010 + i, 1.0);
    nudge(s.w2, 6020 + i, 1.0);
    auto x = random_tensor(sh, 6030 + i);
    auto routed = temporal_gate(x, s).routed;
    auto g = graph_interact_detailed(routed, s);
    auto ref = oracle::ddm_graph(routed, s);
    ddm = std::max({ddm, oracle::max_abs_diff(ref.out, g.out.data()), oracle::max_abs_diff(ref.affinity, g.affinity.data())});
    max_n = std::max(max_n, sh[3] * sh[4]);
  }
  const std::vector<Shape> cim_shapes{{1, 4, 1, 1, 1}, {1, 2, 1, 2, 3}, {1, 4, 2, 3, 3}, {2, 4, 2, 4, 4}, {1, 6, 4, 2, 4}};
  for (std::size_t i = 0; i < cim_shapes.size(); ++i) {
    const auto& sh = cim_shapes[i];
    auto s = CimState<double>::init(sh[1], 7000 + i);
    nudge(s.residual_scale, 7010 + i, 1.0);
    auto x = random_tensor(sh, 7020 + i);
    auto g = nonlocal_graph_detailed(x, s);
    auto ref = oracle::cim_nonlocal(x, s);
    cim = std::max({cim, oracle::max_abs_diff(ref.out, g.out.data()), oracle::max_abs_diff(ref.affinity, g.affinity.data())});
    max_m = std::max(max_m, sh[2] * sh[3] * sh[4]);
  }
  // sum of squared singular values equals the squared Frobenius norm
  double frob = 0;
  struct Dims { std::size_t r, c; };
  for (std::uint64_t i = 0; i < 12; ++i) {
    const Dims dm = std::vector<Dims>{{1, 1}, {3, 3}, {4, 7}, {9, 2}, {16, 16}, {5, 40}}[i % 6];
    auto a = random_tensor({dm.r, dm.c}, 8000 + i);
    std::vector<double> m(a.data().begin(), a.data().end());
    if (i >= 6)  // rank one plus tiny noise: ill-conditioned spectrum
      for (std::size_t r = 0; r < dm.r; ++r)
        for (std::size_t c = 0; c < dm.c; ++c) m[r * dm.c + c] = a[c] * a[r % dm.c] + 1e-9 * a[r * dm.c + c];
    double fro = 0;
    for (double v : m) fro += v * v;
    double sig = 0;
    for (double s : singular_values(m, dm.r, dm.c)) sig += s * s;
    frob = std::max(frob, std::abs(sig - fro) / std::max(fro, 1e-300));
  }
  std::ostringstream d;
  d << "graph_interact max diff=" << ddm << " (N<=" << max_n << "), nonlocal_graph max diff=" << cim << " (M<=" << max_m
    << "), svd Frobenius rel err=" << frob;
  return {ddm <= 1e-9 && cim <= 1e-9 && frob <= 1e-8 && max_n <= 16 && max_m <= 32, d.str()};
}

// -------------------------------------------------------- synthetic overfit

struct OverfitRun {
  std::size_t epochs = 0;
  double best = 0, seconds = 0;
};

OverfitRun overfit(Head task, const Options& opts) {
  DatasetSpec ds;  // 210 samples, 7 balanced classes, 8 x 16 x 16
  ds.task = task;
  if (task == Head::regression) ds.noise = 0.0;
  const auto data = generate(ds);
  TrainConfig tc;
  tc.model.set_modules("sem,ddm,cim");
  tc.optimizer = OptimizerKind::rao;
  tc.epochs = 60;
  // The radius feedback only ever grows rho_base on this task (L' >= L at
  // an ascent point), which saturates it at rho_max and stalls training;
  // the fixed base radius is used here.
  tc.rao.gamma = 0.0;
  // At a constant lr the regression RMSE oscillates around 0.05 late in
  // training; a cosine decay settles it.
  if (task == Head::regression) tc.schedule = LrSchedule::cosine;
  OverfitRun run;
  run.best = task == Head::categorical ? 0.0 : std::numeric_limits<double>::infinity();
  const auto t0 = Clock::now();
  train_model(data, nullptr, tc, nullptr, [&](const EpochRecord& e) {
    run.epochs = e.epoch;
    const double v = task == Head::categorical ? e.train.cls.war : e.train.rmse.overall;
    run.best = task == Head::categorical ? std::max(run.best, v) : std::min(run.best, v);
    if (opts.progress)
      *opts.progress << "  overfit " << to_string(task) << " epoch " << e.epoch << " loss " << e.loss << " "
                     << e.train.to_fields("train_") << std::endl;
    return task == Head::categorical ? v < 0.95 : v > 0.05;
  });
  run.seconds = seconds_since(t0);
  return run;
}

Outcome synthetic_overfit(const Options& opts) {
  const auto cat = overfit(Head::categorical, opts);
  const auto reg = overfit(Head::regression, opts);
  std::ostringstream d;
  d << "categorical train WAR " << cat.best << " at epoch " << cat.epochs << " (" << cat.seconds
    << " s); regression train RMSE " << reg.best << " at epoch " << reg.epochs << " (" << reg.seconds << " s)";
  const bool ok = cat.best >= 0.95 && cat.epochs <= 60 && cat.seconds < 900 && reg.best <= 0.05 && reg.epochs <= 60;
  return {ok, d.str()};
}

// ----------------------------------------------------------------- ablation

Outcome ablation(const Options& opts) {
  const auto result = run_ablation(AblationConfig::standard(), opts.progress);
  if (opts.progress) *opts.progress << result.table();
  const auto expect = ablation_rows();
  bool order = result.rows.size() == expect.size();
  for (std::size_t i = 0; order && i < expect.size(); ++i)
    order = result.rows[i].name == expect[i].name && result.rows[i].modules == expect[i].modules &&
            result.rows[i].optimizer == expect[i].optimizer && result.rows[i].runs.size() >= 3;
  std::ostringstream d;
  d << result.rows.size() << " rows, splits identical=" << (result.splits_identical() ? "yes" : "no");
  if (!order || result.rows.empty()) return {false, d.str() + ", row structure wrong"};
  const double base = result.rows.front().mean_train_war(), full = result.rows.back().mean_train_war();
  d << ", mean train WAR base=" << base << " full=" << full << " over " << result.rows.back().runs.size() << " seeds";
  return {result.splits_identical() && full >= base, d.str()};
}

// ------------------------------------------------------------------ metrics

Outcome metrics(const Options&) {
  std::ostringstream bad;
  {
    std::vector<int> y{0, 1, 2, 3, 4, 5, 6, 0};
    const auto m = compute_war_uar(y, y);
    if (m.war != 1.0 || m.uar != 1.0) bad << " perfect predictions;";
  }
  {
    std::vector<int> labels{0, 0, 0, 1}, preds{0, 0, 1, 1};
    const auto m = compute_war_uar(preds, labels);
    if (m.war != 3.0 / 4.0 || m.recall[0] != 2.0 / 3.0 || m.recall[1] != 1.0 || m.uar != (2.0 / 3.0 + 1.0) / 2.0)
      bad << " hand-counted example;";
  }
  {
    std::vector<int> labels{0, 1, 1, 2, 2, 2, 3, 4, 5, 6, 6, 0}, preds{0, 2, 1, 2, 0, 2, 3, 3, 5, 6, 1, 0};
    const std::vector<int> perm{3, 6, 0, 5, 1, 4, 2};
    std::vector<int> pl, pp;
    for (int v : labels) pl.push_back(perm[v]);
    for (int v : preds) pp.push_back(perm[v]);
    if (compute_war_uar(pp, pl).uar != compute_war_uar(preds, labels).uar) bad << " relabeling;";
  }
  {
    std::vector<double> t{0.1, -0.2, 0.3, 0.4, -0.5, 0.6}, p = t;
    const auto z = compute_rmse(t, t);
    if (z.valence != 0 || z.arousal != 0 || z.overall != 0) bad << " zero rmse;";
    for (std::size_t i = 0; i < p.size(); i += 2) p[i] += 0.1;
    const auto r = compute_rmse(p, t);
    // p[i] + 0.1 - t[i] rounds differently per entry, so allow one ulp-scale slack
    if (std::abs(r.valence - 0.1) > 1e-15 || r.arousal != 0 || std::abs(r.overall - 0.05) > 1e-15)
      bad << " valence offset gave (" << r.valence << ", " << r.arousal << ", " << r.overall << ");";
  }
  // Reported pair 0.3094 / 0.2369 with "Overall" 0.2732: in ten-thousandths,
  // (3094 + 2369) / 2 = 2731.5, which rounds half-up to 2732. The quadratic
  // mean would give 0.2755, so the arithmetic reading is the consistent one.
  const long twice = 3094 + 2369;
  const long overall_e4 = (twice + 1) / 2;
  const double quad = std::sqrt((0.3094 * 0.3094 + 0.2369 * 0.2369) / 2.0);
  std::vector<double> truth(8, 0.0), pred(8);
  for (std::size_t i = 0; i < 4; ++i) {
    pred[2 * i] = 0.3094;
    pred[2 * i + 1] = 0.2369;
  }
  const auto r = compute_rmse(pred, truth);
  const bool aggregation = overall_e4 == 2732 && std::lround(quad * 1e4) != 2732 &&
                           std::abs(r.overall - twice * 0.5e-4) <= 1e-15;
  if (!aggregation) bad << " overall aggregation;";
  std::ostringstream d;
  d << "WAR/UAR and RMSE examples, overall(0.3094, 0.2369)=" << r.overall << " -> 0." << overall_e4
    << " (quadratic mean " << quad << ")" << bad.str();
  return {bad.str().empty(), d.str()};
}

// -------------------------------------------------------------- determinism

Outcome determinism(const Options&) {
  DatasetSpec ds;
  ds.n = 14;
  ds.seed = 5;
  DatasetSpec hs = ds;
  hs.n = 7;
  hs.seed = 6;
  TrainConfig tc;
  tc.model.set_modules("sem,ddm,cim");
  tc.optimizer = OptimizerKind::rao;
  tc.epochs = 2;
  tc.batch = 4;
  tc.seed = 3;
  tc.precision = Precision::f64;

  auto run = [&](const TrainConfig& cfg) {
    const auto train = generate(ds), held = generate(hs);
    return train_model(train, &held, cfg).log;
  };
  const auto first = run(tc);
  // the replay goes through the flat key-value form a manifest stores
  const auto second = run(TrainConfig::from_config(tc.to_config()));
  std::size_t lines = 0;
  for (char ch : first) lines += ch == '\n';
  std::ostringstream d;
  d << "two f64 runs: " << lines << " log lines, " << first.size() << " bytes, identical="
    << (first == second ? "yes" : "no");
  if (first != second) {
    std::size_t i = 0;
    while (i < first.size() && i < second.size() && first[i] == second[i]) ++i;
    d << ", first difference at byte " << i;
  }
  return {!first.empty() && first == second, d.str()};
}

}  // namespace

const std::vector<Check>& acceptance_checks() {
  static const std::vector<Check> checks{
      {"gradient_suite", "finite-difference gradients of every module and the backbone", gradient_suite},
      {"decomposition", "low + high reconstructs the input; k=1 is the identity", decomposition},
      {"normalization", "softmax rows, unit columns and sigmoid gates", normalization},
      {"rao_exactness", "perturbation radius, sensitivity bounds and radius arithmetic", rao_exactness},
      {"degeneracy", "reference SAM and zero-radius equivalence", degeneracy},
      {"quadratic", "hand-computed first step and convergence on a quadratic", quadratic},
      {"oracle_equivalence", "graphs against loop oracles; SVD Frobenius identity", oracle_equivalence},
      {"synthetic_overfit", "full model fits the synthetic train splits", synthetic_overfit},
      {"ablation", "five stacked rows on shared splits; full >= base", ablation},
      {"metrics", "WAR/UAR/RMSE examples and the overall aggregation", metrics},
      {"determinism", "identical config and seed give identical logs", determinism},
  };
  return checks;
}

std::string format_line(const Result& r) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(2);
  o << (r.passed ? "PASS " : "FAIL ") << r.id << " (" << r.seconds << " s): " << r.detail;
  return o.str();
}

std::vector<Result> run_checks(const std::vector<std::string>& only, const Options& opts, std::ostream& report) {
  const auto& checks = acceptance_checks();
  for (const auto& id : only)
    if (std::none_of(checks.begin(), checks.end(), [&](const Check& c) { return c.id == id; }))
      throw Error(ErrorKind::configuration, "unknown check '" + id + "'");
  struct FaultScope {
    explicit FaultScope(const Options& o) {
      if (!o.fault_op.empty()) fault::inject_backward(o.fault_op, o.fault_factor);
    }
    ~FaultScope() { fault::clear(); }
  } scope(opts);

  std::vector<Result> results;
  for (const auto& c : checks) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    Result r;
    r.id = c.id;
    r.title = c.title;
    const auto t0 = Clock::now();
    try {
      const auto out = c.run(opts);
      r.passed = out.passed;
      r.detail = out.detail;
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("raised: ") + e.what();
    }
    r.seconds = seconds_since(t0);
    report << format_line(r) << std::endl;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace lsef::verify
