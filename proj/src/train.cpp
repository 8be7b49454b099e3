#include "lsef/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "lsef/error.hpp"
#include "lsef/ops.hpp"
#include "lsef/random.hpp"

namespace lsef {

const char* to_string(Precision p) { return p == Precision::f32 ? "f32" : "f64"; }

Precision parse_precision(const std::string& text) {
  if (text == "f32" || text == "float" || text == "32") return Precision::f32;
  if (text == "f64" || text == "double" || text == "64") return Precision::f64;
  fail(ErrorKind::configuration, "unknown precision '" + text + "' (f32, f64)");
}

const char* to_string(LrSchedule s) { return s == LrSchedule::constant ? "constant" : "cosine"; }

LrSchedule parse_schedule(const std::string& text) {
  if (text == "constant") return LrSchedule::constant;
  if (text == "cosine") return LrSchedule::cosine;
  fail(ErrorKind::configuration, "unknown lr schedule '" + text + "' (constant, cosine)");
}

double TrainConfig::lr_at(std::size_t epoch) const {
  if (schedule == LrSchedule::constant || epochs < 2) return base.lr;
  const double pi = std::acos(-1.0);
  const double phase = static_cast<double>(epoch - 1) / static_cast<double>(epochs - 1);
  return base.lr * (lr_floor + (1.0 - lr_floor) * 0.5 * (1.0 + std::cos(pi * phase)));
}

void TrainConfig::validate() const {
  model.validate();
  rao.validate();
  require(epochs > 0, ErrorKind::configuration, "epochs must be positive");
  require(batch > 0, ErrorKind::configuration, "batch size must be positive");
  require(base.lr > 0, ErrorKind::configuration, "learning rate must be positive");
  require(lr_floor > 0 && lr_floor <= 1, ErrorKind::configuration, "train.lr_floor must be in (0, 1]");
}

ConfigMap TrainConfig::to_config() const {
  ConfigMap c = model.to_config();
  c["train.epochs"] = std::to_string(epochs);
  c["train.batch"] = std::to_string(batch);
  c["train.seed"] = std::to_string(seed);
  c["train.precision"] = to_string(precision);
  c["train.schedule"] = to_string(schedule);
  c["train.lr_floor"] = format_double(lr_floor);
  c["optimizer.kind"] = to_string(optimizer);
  c["optimizer.base"] = to_string(base.kind);
  c["optimizer.lr"] = format_double(base.lr);
  c["optimizer.beta1"] = format_double(base.beta1);
  c["optimizer.beta2"] = format_double(base.beta2);
  c["optimizer.epsilon"] = format_double(base.epsilon);
  c["rao.rho_base"] = format_double(rao.rho_base);
  c["rao.alpha"] = format_double(rao.alpha);
  c["rao.beta"] = format_double(rao.beta);
  c["rao.gamma"] = format_double(rao.gamma);
  c["rao.tau_r_rel"] = format_double(rao.tau_r_rel);
  c["rao.tau_s_rel"] = format_double(rao.tau_s_rel);
  c["rao.rho_min"] = format_double(rao.rho_min);
  c["rao.rho_max"] = format_double(rao.rho_max);
  c["rao.svd_dense_limit"] = std::to_string(rao.svd_dense_limit);
  c["rao.svd_refresh"] = std::to_string(rao.svd_refresh);
  return c;
}

TrainConfig TrainConfig::from_config(const ConfigMap& c) {
  // data.* and run.* belong to the command line layer and pass through.
  const ConfigMap known = TrainConfig{}.to_config();
  for (const auto& [k, v] : c) {
    const bool passthrough = k.rfind("data.", 0) == 0 || k.rfind("run.", 0) == 0;
    require(passthrough || known.count(k), ErrorKind::configuration, "unknown config key '" + k + "'");
  }
  TrainConfig t;
  t.model = BackboneConfig::from_config(c);
  t.epochs = get_u64(c, "train.epochs", t.epochs);
  t.batch = get_u64(c, "train.batch", t.batch);
  t.seed = get_u64(c, "train.seed", t.seed);
  t.precision = parse_precision(get_string(c, "train.precision", to_string(t.precision)));
  t.schedule = parse_schedule(get_string(c, "train.schedule", to_string(t.schedule)));
  t.lr_floor = get_double(c, "train.lr_floor", t.lr_floor);
  t.optimizer = parse_optimizer_kind(get_string(c, "optimizer.kind", to_string(t.optimizer)));
  t.base.kind = parse_base_kind(get_string(c, "optimizer.base", to_string(t.base.kind)));
  t.base.lr = get_double(c, "optimizer.lr", t.base.lr);
  t.base.beta1 = get_double(c, "optimizer.beta1", t.base.beta1);
  t.base.beta2 = get_double(c, "optimizer.beta2", t.base.beta2);
  t.base.epsilon = get_double(c, "optimizer.epsilon", t.base.epsilon);
  t.rao.rho_base = get_double(c, "rao.rho_base", t.rao.rho_base);
  t.rao.alpha = get_double(c, "rao.alpha", t.rao.alpha);
  t.rao.beta = get_double(c, "rao.beta", t.rao.beta);
  t.rao.gamma = get_double(c, "rao.gamma", t.rao.gamma);
  t.rao.tau_r_rel = get_double(c, "rao.tau_r_rel", t.rao.tau_r_rel);
  t.rao.tau_s_rel = get_double(c, "rao.tau_s_rel", t.rao.tau_s_rel);
  t.rao.rho_min = get_double(c, "rao.rho_min", t.rao.rho_min);
  t.rao.rho_max = get_double(c, "rao.rho_max", t.rao.rho_max);
  t.rao.svd_dense_limit = get_u64(c, "rao.svd_dense_limit", t.rao.svd_dense_limit);
  t.rao.svd_refresh = get_u64(c, "rao.svd_refresh", t.rao.svd_refresh);
  t.validate();
  return t;
}

void fit_model_to_data(BackboneConfig& m, const DatasetSpec& s) {
  m.in_channels = s.channels;
  m.frames = s.frames;
  m.height = s.height;
  m.width = s.width;
  m.head = s.task;
  m.classes = s.classes;
}

template <typename T>
MetricsBundle evaluate_model(const Dataset& d, const BackboneConfig& cfg, const BackboneState<T>& state,
                             std::size_t batch) {
  require(!d.samples.empty(), ErrorKind::usage, "cannot evaluate an empty dataset");
  NoGradGuard no_grad;
  MetricsBundle mb;
  mb.categorical = cfg.head == Head::categorical;
  std::vector<int> preds, labels;
  RmseAccumulator acc;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.samples.size(); start += batch) {
    idx.resize(std::min(batch, d.samples.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto b = make_batch<T>(d, idx);
    const auto out = backbone_forward(b.clips, cfg, state);
    check_finite(out, "model outputs during evaluation");
    const auto v = out.data();
    if (mb.categorical) {
      const std::size_t k = out.dim(1);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const auto row = v.subspan(i * k, k);
        preds.push_back(static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin()));
        labels.push_back(b.targets.labels[i]);
      }
    } else {
      std::vector<double> p(v.begin(), v.end());
      const auto tv = b.targets.trajectory.data();
      std::vector<double> truth(tv.begin(), tv.end());
      acc.add(p, truth);
    }
  }
  if (mb.categorical)
    mb.cls = compute_war_uar(preds, labels, cfg.classes);
  else
    mb.rmse = acc.result();
  return mb;
}

namespace {

std::string epoch_line(const EpochRecord& r, OptimizerKind opt, LrSchedule schedule) {
  std::string line = "record=epoch epoch=" + std::to_string(r.epoch) + " loss=" + format_double(r.loss) + " " +
                     r.train.to_fields("train_");
  if (schedule != LrSchedule::constant) line += " lr=" + format_double(r.lr);
  if (r.heldout) line += " " + r.heldout->to_fields("heldout_");
  if (opt != OptimizerKind::base)
    line += " mean_rho_r=" + format_double(r.mean_rho_r) + " mean_rho_s=" + format_double(r.mean_rho_s) +
            " mean_rho_dyn=" + format_double(r.mean_rho_dyn) + " rho_base=" + format_double(r.rho_base);
  return line + "\n";
}

template <typename T>
TrainResult train_typed(const Dataset& train_set, const Dataset* heldout, const TrainConfig& cfg,
                        std::ostream* sink, const EpochCallback& on_epoch) {
  TrainResult result;
  auto emit = [&](const std::string& text) {
    result.log += text;
    if (sink) *sink << text << std::flush;
  };
  auto state = BackboneState<T>::init(cfg.model, cfg.seed);
  RankAwareOptimizer<T> opt(state.parameters(), cfg.optimizer, cfg.base, cfg.rao);
  const std::size_t n = train_set.samples.size();
  require(n > 0, ErrorKind::data, "training set is empty");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  emit("record=run fingerprint=" + hex64(config_fingerprint(cfg.to_config())) +
       " data_hash=" + hex64(train_set.content_hash()) + " n=" + std::to_string(n) + " modules=" +
       cfg.model.modules() + " optimizer=" + to_string(cfg.optimizer) + " precision=" + to_string(cfg.precision) + "\n");

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(mix_seed(cfg.seed, "epoch-" + std::to_string(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    opt.set_lr(cfg.lr_at(epoch));
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = opt.lr();
    double loss_sum = 0, rr = 0, rs = 0, rd = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch, n - start));
      const auto batch = make_batch<T>(train_set, idx);
      LossFn<T> loss_fn = [&]() {
        return head_loss(backbone_forward(batch.clips, cfg.model, state), batch.targets, cfg.model.head);
      };
      try {
        loss_sum += opt.step(loss_fn);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::optimizer || e.kind() == ErrorKind::numerical) {
          emit("record=abort epoch=" + std::to_string(epoch) + " step=" + std::to_string(opt.steps_taken()) +
               " reason=\"" + e.what() + "\"\n");
          emit(opt.last_report().to_lines());
        }
        throw;
      }
      const auto& rep = opt.last_report();
      rr += rep.mean_rho_r();
      rs += rep.mean_rho_s();
      rd += rep.mean_rho_dyn();
      ++steps;
    }
    rec.loss = loss_sum / static_cast<double>(steps);
    rec.mean_rho_r = rr / static_cast<double>(steps);
    rec.mean_rho_s = rs / static_cast<double>(steps);
    rec.mean_rho_dyn = rd / static_cast<double>(steps);
    rec.rho_base = opt.rho_base();
    rec.train = evaluate_model(train_set, cfg.model, state);
    if (heldout) rec.heldout = evaluate_model(*heldout, cfg.model, state);
    emit(epoch_line(rec, cfg.optimizer, cfg.schedule));
    if (cfg.optimizer != OptimizerKind::base) emit(opt.last_report().to_lines());
    result.epochs.push_back(std::move(rec));
    if (on_epoch && !on_epoch(result.epochs.back())) {
      emit("record=stop epoch=" + std::to_string(epoch) + " reason=callback\n");
      break;
    }
  }
  result.train_hash = train_set.content_hash();
  if (heldout) result.heldout_hash = heldout->content_hash();
  result.final_train = result.epochs.back().train;
  result.final_heldout = result.epochs.back().heldout;
  result.checkpoint = make_checkpoint(cfg.model, state);
  result.checkpoint.metadata["precision"] = to_string(cfg.precision);
  for (const auto& [k, v] : cfg.to_config())
    if (k.rfind("model.", 0) != 0) result.checkpoint.metadata["train_config." + k] = v;
  return result;
}

}  // namespace

TrainResult train_model(const Dataset& train_set, const Dataset* heldout, TrainConfig cfg, std::ostream* sink,
                        const EpochCallback& on_epoch) {
  fit_model_to_data(cfg.model, train_set.spec);
  cfg.validate();
  if (heldout) {
    require(heldout->spec.task == train_set.spec.task && heldout->spec.channels == train_set.spec.channels &&
                heldout->spec.frames == train_set.spec.frames && heldout->spec.height == train_set.spec.height &&
                heldout->spec.width == train_set.spec.width,
            ErrorKind::data, "held-out set does not match the training set's task and shapes");
  }
  return cfg.precision == Precision::f32 ? train_typed<float>(train_set, heldout, cfg, sink, on_epoch)
                                         : train_typed<double>(train_set, heldout, cfg, sink, on_epoch);
}

MetricsBundle evaluate_checkpoint(const io::Archive& checkpoint, const Dataset& d, std::size_t batch) {
  const auto precision = checkpoint.metadata.count("precision") ? parse_precision(checkpoint.meta("precision"))
                                                                : Precision::f64;
  auto run = [&](auto tag) {
    using T = decltype(tag);
    auto restored = restore_checkpoint<T>(checkpoint);
    require(restored.config.head == d.spec.task && restored.config.in_channels == d.spec.channels &&
                restored.config.frames == d.spec.frames,
            ErrorKind::data, "dataset does not match the checkpoint's task and shapes");
    return evaluate_model(d, restored.config, restored.state, batch);
  };
  return precision == Precision::f32 ? run(float{}) : run(double{});
}

template MetricsBundle evaluate_model(const Dataset&, const BackboneConfig&, const BackboneState<float>&, std::size_t);
template MetricsBundle evaluate_model(const Dataset&, const BackboneConfig&, const BackboneState<double>&, std::size_t);

}  // namespace lsef
