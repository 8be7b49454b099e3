#include "lsef/backbone.hpp"

#include <algorithm>

#include "lsef/error.hpp"
#include "lsef/ops.hpp"

namespace lsef {

const char* to_string(Head h) { return h == Head::categorical ? "categorical" : "regression"; }

Head parse_head(const std::string& text) {
  if (text == "categorical") return Head::categorical;
  if (text == "regression") return Head::regression;
  fail(ErrorKind::configuration, "unknown head/task '" + text + "' (categorical, regression)");
}

void BackboneConfig::validate() const {
  require(in_channels > 0 && frames > 0 && height > 0 && width > 0, ErrorKind::configuration,
          "backbone extents must be positive");
  require(widths[0] > 0 && widths[1] > 0 && widths[2] > 0, ErrorKind::configuration,
          "backbone widths must be positive");
  require(head == Head::regression || classes >= 2, ErrorKind::configuration,
          "categorical head needs at least two classes");
  require(sem.kernel_size % 2 == 1, ErrorKind::configuration, "SEM window must be odd");
}

ConfigMap BackboneConfig::to_config() const {
  ConfigMap c;
  c["model.in_channels"] = std::to_string(in_channels);
  c["model.widths"] = std::to_string(widths[0]) + "," + std::to_string(widths[1]) + "," +
                      std::to_string(widths[2]);
  c["model.frames"] = std::to_string(frames);
  c["model.height"] = std::to_string(height);
  c["model.width"] = std::to_string(width);
  c["model.modules"] = modules();
  c["model.head"] = to_string(head);
  c["model.classes"] = std::to_string(classes);
  c["model.sem_kernel"] = std::to_string(sem.kernel_size);
  c["model.sem_reduction"] = std::to_string(sem.reduction);
  c["model.cim_max_nodes"] = std::to_string(cim_max_nodes);
  return c;
}

BackboneConfig BackboneConfig::from_config(const ConfigMap& c) {
  BackboneConfig b;
  b.in_channels = get_u64(c, "model.in_channels", b.in_channels);
  if (auto it = c.find("model.widths"); it != c.end()) {
    const auto parts = split_list(it->second);
    require(parts.size() == 3, ErrorKind::configuration, "model.widths needs three values");
    for (std::size_t i = 0; i < 3; ++i) b.widths[i] = parse_u64(parts[i], "model.widths");
  }
  b.frames = get_u64(c, "model.frames", b.frames);
  b.height = get_u64(c, "model.height", b.height);
  b.width = get_u64(c, "model.width", b.width);
  b.set_modules(get_string(c, "model.modules", b.modules()));
  b.head = parse_head(get_string(c, "model.head", to_string(b.head)));
  b.classes = get_u64(c, "model.classes", b.classes);
  b.sem.kernel_size = get_u64(c, "model.sem_kernel", b.sem.kernel_size);
  b.sem.reduction = get_u64(c, "model.sem_reduction", b.sem.reduction);
  b.cim_max_nodes = get_u64(c, "model.cim_max_nodes", b.cim_max_nodes);
  b.validate();
  return b;
}

void BackboneConfig::set_modules(const std::string& list) {
  use_sem = use_ddm = use_cim = false;
  if (list == "none" || list.empty()) return;
  for (const auto& m : split_list(list)) {
    if (m == "sem") use_sem = true;
    else if (m == "ddm") use_ddm = true;
    else if (m == "cim") use_cim = true;
    else fail(ErrorKind::configuration, "unknown module '" + m + "' (sem, ddm, cim, none)");
  }
}

std::string BackboneConfig::modules() const {
  std::string out;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(use_sem, "sem");
  add(use_ddm, "ddm");
  add(use_cim, "cim");
  return out.empty() ? "none" : out;
}

template <typename T>
BackboneState<T> BackboneState<T>::init(const BackboneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  BackboneState s;
  s.seed = seed;
  const auto [w0, w1, w2] = cfg.widths;
  const std::size_t c0 = cfg.in_channels;
  s.dw1 = uniform_fan_in<T>({c0, 1, 3, 3, 3}, 27, seed, "stem.dw1");
  s.pw1 = uniform_fan_in<T>({w0, c0, 1, 1, 1}, c0, seed, "stem.pw1");
  s.dw2 = uniform_fan_in<T>({w0, 1, 3, 3, 3}, 27, seed, "stem.dw2");
  s.pw2 = uniform_fan_in<T>({w1, w0, 1, 1, 1}, w0, seed, "stem.pw2");
  s.dw3 = uniform_fan_in<T>({w1, 1, 3, 3, 3}, 27, seed, "stem.dw3");
  s.pw3 = uniform_fan_in<T>({w2, w1, 1, 1, 1}, w1, seed, "stem.pw3");
  if (cfg.use_sem) s.sem = SemState<T>::init(w0, seed, cfg.sem);
  if (cfg.use_ddm) s.ddm = DdmState<T>::init(w1, cfg.frames, seed);
  if (cfg.use_cim) {
    CimConfig cc;
    cc.max_nodes = cfg.cim_max_nodes;
    s.cim = CimState<T>::init(w2, seed, cc);
  }
  const std::size_t outs = cfg.head == Head::categorical ? cfg.classes : 2;
  s.head_w = uniform_fan_in<T>({outs, w2}, w2, seed, "head.w");
  s.head_b = parameter(Tensor<T>::zeros({outs}));
  return s;
}

template <typename T>
ParameterList<T> BackboneState<T>::parameters() const {
  ParameterList<T> out{{"stem.dw1", dw1}, {"stem.pw1", pw1}};
  if (sem)
    for (auto& p : sem->parameters()) out.push_back(std::move(p));
  out.push_back({"stem.dw2", dw2});
  out.push_back({"stem.pw2", pw2});
  if (ddm)
    for (auto& p : ddm->parameters()) out.push_back(std::move(p));
  out.push_back({"stem.dw3", dw3});
  out.push_back({"stem.pw3", pw3});
  if (cim)
    for (auto& p : cim->parameters()) out.push_back(std::move(p));
  out.push_back({"head.w", head_w});
  out.push_back({"head.b", head_b});
  return out;
}

template <typename T>
std::vector<std::string> check_states(const BackboneConfig& cfg, const BackboneState<T>& s) {
  require(!cfg.use_sem || s.sem, ErrorKind::configuration, "SEM is enabled but has no state");
  require(!cfg.use_ddm || s.ddm, ErrorKind::configuration, "DDM is enabled but has no state");
  require(!cfg.use_cim || s.cim, ErrorKind::configuration, "CIM is enabled but has no state");
  std::vector<std::string> warnings;
  if (!cfg.use_sem && s.sem) warnings.emplace_back("SEM state supplied but SEM is disabled; ignored");
  if (!cfg.use_ddm && s.ddm) warnings.emplace_back("DDM state supplied but DDM is disabled; ignored");
  if (!cfg.use_cim && s.cim) warnings.emplace_back("CIM state supplied but CIM is disabled; ignored");
  return warnings;
}

namespace {

template <typename T>
Tensor<T> separable(const Tensor<T>& x, const Tensor<T>& dw, const Tensor<T>& pw,
                    std::array<std::size_t, 3> stride) {
  auto d = conv3d(x, dw, {x.dim(1), stride, Padding::zeros});
  return relu(conv3d(d, pw));
}

}  // namespace

template <typename T>
Tensor<T> backbone_features(const Tensor<T>& clip, const BackboneConfig& cfg, const BackboneState<T>& s) {
  check_states(cfg, s);
  require(clip.rank() == 5 && clip.dim(1) == cfg.in_channels, ErrorKind::dimension,
          "backbone expects (B," + std::to_string(cfg.in_channels) + ",T,H,W), got " +
              to_string(clip.shape()));
  require(clip.dim(2) == cfg.frames && clip.dim(3) == cfg.height && clip.dim(4) == cfg.width,
          ErrorKind::dimension,
          "backbone configured for T,H,W = " + std::to_string(cfg.frames) + "," + std::to_string(cfg.height) +
              "," + std::to_string(cfg.width) + ", got " + to_string(clip.shape()));
  auto x = separable(clip, s.dw1, s.pw1, {1, 1, 1});
  if (cfg.use_sem) x = sem_forward(x, *s.sem);
  x = separable(x, s.dw2, s.pw2, {1, 2, 2});
  if (cfg.use_ddm) x = ddm_forward(x, *s.ddm);
  x = separable(x, s.dw3, s.pw3, {1, 1, 1});
  if (cfg.use_cim) x = cim_forward(x, *s.cim);
  return x;
}

template <typename T>
Tensor<T> backbone_forward(const Tensor<T>& clip, const BackboneConfig& cfg, const BackboneState<T>& s) {
  auto x = backbone_features(clip, cfg, s);
  const std::size_t b = x.dim(0), c = x.dim(1), t = x.dim(2);
  if (cfg.head == Head::categorical) return linear(reshape(global_avg_pool(x), {b, c}), s.head_w, s.head_b);
  auto frames = reshape(permute(reshape(spatial_avg_pool(x), {b, c, t}), {0, 2, 1}), {b * t, c});
  return reshape(tanh(linear(frames, s.head_w, s.head_b)), {b, t, 2});
}

template <typename T>
Tensor<T> head_loss(const Tensor<T>& outputs, const Targets<T>& targets, Head head) {
  if (head == Head::categorical) return cross_entropy(outputs, std::span<const int>(targets.labels));
  require(targets.trajectory.defined(), ErrorKind::data, "regression loss needs a target trajectory");
  return mse(outputs, targets.trajectory);
}

template <typename T>
io::Archive make_checkpoint(const BackboneConfig& cfg, const BackboneState<T>& state) {
  io::Archive a;
  for (const auto& [k, v] : cfg.to_config()) a.metadata["config." + k] = v;
  a.metadata["fingerprint"] = hex64(cfg.fingerprint());
  a.metadata["seed"] = std::to_string(state.seed);
  a.metadata["kind"] = "checkpoint";
  for (const auto& p : state.parameters()) a.put(p.name, p.tensor);
  return a;
}

template <typename T>
Restored<T> restore_checkpoint(const io::Archive& a) {
  require(a.metadata.count("kind") && a.meta("kind") == "checkpoint", ErrorKind::data,
          "archive is not a checkpoint");
  ConfigMap cm;
  for (const auto& [k, v] : a.metadata)
    if (k.rfind("config.", 0) == 0) cm[k.substr(7)] = v;
  auto cfg = BackboneConfig::from_config(cm);
  require(hex64(cfg.fingerprint()) == a.meta("fingerprint"), ErrorKind::data,
          "checkpoint fingerprint does not match its stored config");
  auto state = BackboneState<T>::init(cfg, parse_u64(a.meta("seed"), "checkpoint seed"));
  for (auto& p : state.parameters()) {
    require(a.contains(p.name), ErrorKind::data, "checkpoint is missing parameter " + p.name);
    const auto stored = a.get<T>(p.name);
    require(stored.shape() == p.tensor.shape(), ErrorKind::data,
            "checkpoint parameter " + p.name + " has shape " + to_string(stored.shape()) + ", expected " +
                to_string(p.tensor.shape()));
    auto dst = p.tensor.mutable_data();
    std::copy(stored.data().begin(), stored.data().end(), dst.begin());
  }
  return {std::move(cfg), std::move(state)};
}

#define LSEF_INSTANTIATE(T)                                                                              \
  template struct BackboneState<T>;                                                                      \
  template std::vector<std::string> check_states(const BackboneConfig&, const BackboneState<T>&);        \
  template Tensor<T> backbone_features(const Tensor<T>&, const BackboneConfig&, const BackboneState<T>&); \
  template Tensor<T> backbone_forward(const Tensor<T>&, const BackboneConfig&, const BackboneState<T>&);  \
  template Tensor<T> head_loss(const Tensor<T>&, const Targets<T>&, Head);                               \
  template io::Archive make_checkpoint(const BackboneConfig&, const BackboneState<T>&);                  \
  template Restored<T> restore_checkpoint(const io::Archive&);

LSEF_INSTANTIATE(float)
LSEF_INSTANTIATE(double)
#undef LSEF_INSTANTIATE

}  // namespace lsef
