#include "lsef/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <thread>

#include "lsef/config.hpp"
#include "lsef/error.hpp"
#include "lsef/random.hpp"
#include "lsef/serialize.hpp"

namespace lsef {

namespace {

constexpr std::uint64_t kTemplateSeed = 0x15ef'c1a5'5e5dULL;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Blob {
  double cy, cx, sigma;
  std::vector<double> channel_weight;
};

Blob random_blob(Rng& r, const DatasetSpec& s, double sigma_lo, double sigma_hi, double margin) {
  Blob b;
  const double hy = static_cast<double>(s.height) - 1.0, wx = static_cast<double>(s.width) - 1.0;
  b.cy = r.uniform(std::min(margin, hy / 2), std::max(hy - margin, hy / 2));
  b.cx = r.uniform(std::min(margin, wx / 2), std::max(wx - margin, wx / 2));
  b.sigma = r.uniform(sigma_lo, sigma_hi);
  for (std::size_t c = 0; c < s.channels; ++c) b.channel_weight.push_back(r.uniform(-1.0, 1.0));
  return b;
}

// Adds scale * profile(t) * blob(c, h, w) into f (C, T, H, W).
void add_outer(std::vector<double>& f, const DatasetSpec& s, const std::vector<double>& profile,
               const Blob& b, double scale) {
  const std::size_t hw = s.height * s.width;
  std::vector<double> spatial(hw);
  for (std::size_t h = 0; h < s.height; ++h)
    for (std::size_t w = 0; w < s.width; ++w) {
      const double dy = static_cast<double>(h) - b.cy, dx = static_cast<double>(w) - b.cx;
      spatial[h * s.width + w] = std::exp(-(dy * dy + dx * dx) / (2.0 * b.sigma * b.sigma));
    }
  for (std::size_t c = 0; c < s.channels; ++c)
    for (std::size_t t = 0; t < s.frames; ++t) {
      const double k = scale * b.channel_weight[c] * profile[t];
      if (k == 0.0) continue;
      double* dst = f.data() + (c * s.frames + t) * hw;
      for (std::size_t i = 0; i < hw; ++i) dst[i] += k * spatial[i];
    }
}

std::vector<double> impulse(std::size_t frames, std::size_t at) {
  std::vector<double> p(frames, 0.0);
  p[at] = 1.0;
  return p;
}

struct ClassTemplate {
  std::vector<std::vector<double>> profiles;
  std::vector<Blob> blobs;
  std::vector<double> burst_channels;
};

ClassTemplate class_template(const DatasetSpec& s, int label) {
  Rng r(mix_seed(kTemplateSeed, "class-" + std::to_string(label)));
  ClassTemplate ct;
  for (std::size_t j = 0; j < kBaseRank; ++j) {
    const double freq = 0.5 + 0.5 * static_cast<double>(j) + r.uniform(0.0, 0.5);
    const double phase = r.uniform(0.0, kTwoPi);
    const double offset = r.uniform(-0.3, 0.3);
    std::vector<double> p(s.frames);
    for (std::size_t t = 0; t < s.frames; ++t)
      p[t] = std::cos(kTwoPi * freq * static_cast<double>(t) / static_cast<double>(s.frames) + phase) + offset;
    ct.profiles.push_back(std::move(p));
    ct.blobs.push_back(random_blob(r, s, 2.0, 4.0, 2.0));
  }
  for (std::size_t c = 0; c < s.channels; ++c) ct.burst_channels.push_back(r.uniform(-1.0, 1.0));
  return ct;
}

struct RegressionPatterns {
  Blob valence, arousal, neutral;
};

RegressionPatterns regression_patterns(const DatasetSpec& s) {
  Rng r(mix_seed(kTemplateSeed, "regression"));
  return {random_blob(r, s, 2.5, 4.0, 3.0), random_blob(r, s, 2.5, 4.0, 3.0), random_blob(r, s, 3.0, 5.0, 3.0)};
}

void add_noise(std::vector<double>& f, Rng& r, double noise) {
  if (noise == 0.0) return;
  for (auto& v : f) v += noise * r.normal();
}

}  // namespace

void DatasetSpec::validate() const {
  require(n > 0, ErrorKind::configuration, "dataset size must be positive");
  require(channels > 0 && frames > 0 && height > 0 && width > 0, ErrorKind::configuration,
          "dataset extents must be positive");
  require(std::isfinite(noise) && noise >= 0, ErrorKind::configuration, "noise must be >= 0");
  require(imbalance == 0.0 || (imbalance > 0.0 && imbalance < 1.0), ErrorKind::configuration,
          "imbalance must be 0 (balanced) or a ratio in (0, 1)");
  require(task == Head::regression || classes >= 2, ErrorKind::configuration, "need at least two classes");
}

std::vector<std::size_t> class_counts_for(const DatasetSpec& s) {
  const std::size_t k = s.classes;
  std::vector<double> weight(k, 1.0);
  if (s.imbalance > 0)
    for (std::size_t c = 1; c < k; ++c) weight[c] = weight[c - 1] * s.imbalance;
  double total = 0;
  for (double w : weight) total += w;
  std::vector<std::size_t> counts(k);
  std::vector<std::pair<double, std::size_t>> remainder;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double quota = static_cast<double>(s.n) * weight[c] / total;
    counts[c] = static_cast<std::size_t>(std::floor(quota));
    assigned += counts[c];
    remainder.emplace_back(quota - std::floor(quota), c);
  }
  std::stable_sort(remainder.begin(), remainder.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < s.n; ++i, ++assigned) ++counts[remainder[i % k].second];
  return counts;
}

std::vector<int> label_schedule(const DatasetSpec& s) {
  std::vector<int> labels;
  if (s.task != Head::categorical) return labels;
  const auto counts = class_counts_for(s);
  for (std::size_t c = 0; c < counts.size(); ++c) labels.insert(labels.end(), counts[c], static_cast<int>(c));
  Rng r(mix_seed(s.seed, "labels"));
  for (std::size_t i = labels.size(); i > 1; --i) std::swap(labels[i - 1], labels[r.below(i)]);
  return labels;
}

Tensor64 class_base(const DatasetSpec& s, int label) {
  const auto ct = class_template(s, label);
  std::vector<double> f(s.channels * s.frames * s.height * s.width, 0.0);
  for (std::size_t j = 0; j < kBaseRank; ++j) add_outer(f, s, ct.profiles[j], ct.blobs[j], 1.0);
  return Tensor64::from({s.channels, s.frames, s.height, s.width}, std::move(f));
}

SequenceSample generate_sample(const DatasetSpec& s, std::size_t index, int label) {
  SequenceSample out;
  out.seed = s.seed ^ static_cast<std::uint64_t>(index);
  Rng r(mix_seed(out.seed, "sample"));
  std::vector<double> f(s.channels * s.frames * s.height * s.width, 0.0);
  const std::size_t bursts = 1 + r.below(kMaxBursts);

  if (s.task == Head::categorical) {
    require(label >= 0 && static_cast<std::size_t>(label) < s.classes, ErrorKind::data,
            "label " + std::to_string(label) + " outside 0.." + std::to_string(s.classes - 1));
    out.label = label;
    out.pattern = label;
    const auto ct = class_template(s, label);
    const double amp = r.uniform(0.85, 1.15);
    for (std::size_t j = 0; j < kBaseRank; ++j) add_outer(f, s, ct.profiles[j], ct.blobs[j], amp);
    for (std::size_t b = 0; b < bursts; ++b) {
      const std::size_t frame = r.below(s.frames);
      auto blob = random_blob(r, s, 0.8, 1.5, 1.0);
      blob.channel_weight = ct.burst_channels;
      const double strength = r.uniform(0.5, 1.0) * (r.uniform() < 0.5 ? -1.0 : 1.0);
      add_outer(f, s, impulse(s.frames, frame), blob, strength);
      out.burst_frames.push_back(frame);
    }
  } else {
    out.pattern = 0;
    const auto pats = regression_patterns(s);
    std::vector<double> v(s.frames), a(s.frames);
    auto smooth = [&](std::vector<double>& x) {
      const double amp = r.uniform(0.2, 0.5), freq = r.uniform(0.3, 1.0);
      const double phase = r.uniform(0.0, kTwoPi), bias = r.uniform(-0.3, 0.3);
      for (std::size_t t = 0; t < s.frames; ++t)
        x[t] = bias + amp * std::sin(kTwoPi * freq * static_cast<double>(t) / static_cast<double>(s.frames) + phase);
    };
    smooth(v);
    smooth(a);
    for (std::size_t b = 0; b < bursts; ++b) {
      const std::size_t frame = r.below(s.frames);
      const double dv = r.uniform(-0.4, 0.4), da = r.uniform(0.2, 0.5);
      v[frame] += dv;
      a[frame] += da;
      auto blob = random_blob(r, s, 0.8, 1.5, 1.0);
      add_outer(f, s, impulse(s.frames, frame), blob, da);
      out.burst_frames.push_back(frame);
    }
    for (auto* x : {&v, &a})
      for (auto& e : *x) e = std::clamp(e, -0.95, 0.95);
    add_outer(f, s, v, pats.valence, 1.0);
    add_outer(f, s, a, pats.arousal, 1.0);
    add_outer(f, s, std::vector<double>(s.frames, 1.0), pats.neutral, 0.5);
    for (std::size_t t = 0; t < s.frames; ++t) {
      out.trajectory.push_back(v[t]);
      out.trajectory.push_back(a[t]);
    }
  }
  add_noise(f, r, s.noise);
  out.features = Tensor64::from({s.channels, s.frames, s.height, s.width}, std::move(f));
  return out;
}

Dataset generate(const DatasetSpec& spec, std::size_t threads) {
  spec.validate();
  Dataset d;
  d.spec = spec;
  const auto labels = label_schedule(spec);
  d.samples.resize(spec.n);
  auto fill = [&](std::size_t first, std::size_t stride) {
    for (std::size_t i = first; i < spec.n; i += stride)
      d.samples[i] = generate_sample(spec, i, labels.empty() ? -1 : labels[i]);
  };
  threads = std::clamp<std::size_t>(threads, 1, spec.n);
  if (threads == 1) {
    fill(0, 1);
    return d;
  }
  // Samples depend only on (spec, index), so the split across workers
  // cannot change the output.
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        fill(w, threads);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return d;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(spec.classes, 0);
  for (const auto& s : samples)
    if (s.label >= 0 && static_cast<std::size_t>(s.label) < counts.size()) ++counts[s.label];
  return counts;
}

std::uint64_t Dataset::content_hash() const {
  std::uint64_t h = fnv1a64("lsef-dataset");
  auto feed = [&](const void* p, std::size_t bytes) {
    h = fnv1a64(std::string_view(static_cast<const char*>(p), bytes), h);
  };
  for (const auto& s : samples) {
    feed(&s.label, sizeof s.label);
    feed(s.trajectory.data(), s.trajectory.size() * sizeof(double));
    feed(s.features.data().data(), s.features.numel() * sizeof(double));
  }
  return h;
}

namespace {

std::string sample_key(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%06zu", i);
  return buf;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
  io::Archive a;
  const auto& s = d.spec;
  a.metadata["kind"] = "dataset";
  a.metadata["task"] = to_string(s.task);
  a.metadata["n"] = std::to_string(d.samples.size());
  a.metadata["seed"] = std::to_string(s.seed);
  a.metadata["noise"] = format_double(s.noise);
  a.metadata["imbalance"] = format_double(s.imbalance);
  a.metadata["shape"] = join({s.channels, s.frames, s.height, s.width});
  a.metadata["classes"] = std::to_string(s.classes);
  if (s.task == Head::categorical) a.metadata["class_counts"] = join(d.class_counts());
  a.metadata["content_hash"] = hex64(d.content_hash());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& smp = d.samples[i];
    const auto key = sample_key(i);
    a.put(key + ".x", smp.features);
    if (s.task == Head::categorical) {
      a.put(key + ".y", Tensor64::from({1}, {static_cast<double>(smp.label)}));
    } else {
      a.put(key + ".y", Tensor64::from({s.frames, 2}, smp.trajectory));
    }
    a.metadata[key + ".seed"] = std::to_string(smp.seed);
    a.metadata[key + ".bursts"] = join(smp.burst_frames);
  }
  a.save(path);
}

Dataset load_dataset(const std::string& path) {
  const auto a = io::Archive::load(path);
  require(a.metadata.count("kind") && a.meta("kind") == "dataset", ErrorKind::data,
          path + " is not a dataset archive");
  Dataset d;
  auto& s = d.spec;
  s.task = parse_head(a.meta("task"));
  s.n = parse_u64(a.meta("n"), "dataset n");
  s.seed = parse_u64(a.meta("seed"), "dataset seed");
  ConfigMap m{{"noise", a.meta("noise")}, {"imbalance", a.meta("imbalance")}};
  s.noise = get_double(m, "noise", 0);
  s.imbalance = get_double(m, "imbalance", 0);
  const auto shape = split_list(a.meta("shape"));
  require(shape.size() == 4, ErrorKind::data, "dataset shape must have four extents");
  s.channels = parse_u64(shape[0], "shape");
  s.frames = parse_u64(shape[1], "shape");
  s.height = parse_u64(shape[2], "shape");
  s.width = parse_u64(shape[3], "shape");
  s.classes = parse_u64(a.meta("classes"), "classes");
  s.validate();
  const Shape xs{s.channels, s.frames, s.height, s.width};
  for (std::size_t i = 0; i < s.n; ++i) {
    const auto key = sample_key(i);
    require(a.contains(key + ".x") && a.contains(key + ".y"), ErrorKind::data,
            path + ": sample " + std::to_string(i) + " is missing");
    SequenceSample smp;
    smp.features = a.get<double>(key + ".x");
    require(smp.features.shape() == xs, ErrorKind::data, path + ": sample " + key + " has the wrong shape");
    const auto y = a.get<double>(key + ".y");
    if (s.task == Head::categorical) {
      require(y.numel() == 1, ErrorKind::data, path + ": label of " + key + " is not a scalar");
      const double lv = y[0];
      require(lv >= 0 && lv < static_cast<double>(s.classes) && lv == std::floor(lv), ErrorKind::data,
              path + ": label of " + key + " is out of range");
      smp.label = static_cast<int>(lv);
      smp.pattern = smp.label;
    } else {
      require(y.shape() == Shape{s.frames, 2}, ErrorKind::data, path + ": trajectory of " + key + " has the wrong shape");
      smp.trajectory.assign(y.data().begin(), y.data().end());
      for (double v : smp.trajectory)
        require(v >= -1.0 && v <= 1.0, ErrorKind::data, path + ": trajectory of " + key + " leaves [-1, 1]");
      smp.pattern = 0;
    }
    smp.seed = parse_u64(a.meta(key + ".seed"), "sample seed");
    for (const auto& f : split_list(a.meta(key + ".bursts"))) smp.burst_frames.push_back(parse_u64(f, "burst"));
    d.samples.push_back(std::move(smp));
  }
  require(hex64(d.content_hash()) == a.meta("content_hash"), ErrorKind::data,
          path + ": content hash mismatch (file corrupted?)");
  return d;
}

template <typename T>
Batch<T> make_batch(const Dataset& d, std::span<const std::size_t> indices) {
  const auto& s = d.spec;
  const std::size_t per = s.channels * s.frames * s.height * s.width;
  std::vector<T> x(indices.size() * per);
  Batch<T> b;
  std::vector<T> traj;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    require(indices[k] < d.samples.size(), ErrorKind::usage, "batch index out of range");
    const auto& smp = d.samples[indices[k]];
    const auto src = smp.features.data();
    for (std::size_t i = 0; i < per; ++i) x[k * per + i] = static_cast<T>(src[i]);
    if (s.task == Head::categorical) {
      b.targets.labels.push_back(smp.label);
    } else {
      for (double v : smp.trajectory) traj.push_back(static_cast<T>(v));
    }
  }
  b.clips = Tensor<T>::from({indices.size(), s.channels, s.frames, s.height, s.width}, std::move(x));
  if (s.task == Head::regression) b.targets.trajectory = Tensor<T>::from({indices.size(), s.frames, 2}, std::move(traj));
  return b;
}

template Batch<float> make_batch(const Dataset&, std::span<const std::size_t>);
template Batch<double> make_batch(const Dataset&, std::span<const std::size_t>);

}  // namespace lsef
