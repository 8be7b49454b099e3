// lsef: generate | train | eval | ablate | verify.
//
// Settings resolve as defaults < --config file < flags. Every run writes a
// manifest (resolved config, seed, thread cap, code version) that can be
// passed back as --config to replay it.
//
// Exit codes: 0 ok, 2 configuration or usage, 3 data or shape, 4 numerical
// or optimizer, 5 verification failure, 6 I/O, 7 resource.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "lsef/ablation.hpp"
#include "lsef/config.hpp"
#include "lsef/datagen.hpp"
#include "lsef/error.hpp"
#include "lsef/kernels/kernels.hpp"
#include "lsef/train.hpp"
#include "lsef/verify/checks.hpp"

#ifndef LSEF_CODE_VERSION
#define LSEF_CODE_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using namespace lsef;

namespace {

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::configuration:
    case ErrorKind::usage:
      return 2;
    case ErrorKind::data:
    case ErrorKind::dimension:
      return 3;
    case ErrorKind::numerical:
    case ErrorKind::optimizer:
      return 4;
    case ErrorKind::verification:
      return 5;
    case ErrorKind::io:
      return 6;
    case ErrorKind::resource:
      return 7;
  }
  return 1;
}

// LSEF_THREADS caps the generation workers; unset means 1.
std::size_t thread_cap() {
  const char* v = std::getenv("LSEF_THREADS");
  if (!v || !*v) return 1;
  const auto n = parse_u64(v, "LSEF_THREADS");
  require(n >= 1 && n <= 1024, ErrorKind::configuration, "LSEF_THREADS must be in [1, 1024]");
  return static_cast<std::size_t>(n);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::io, "cannot write " + path.string());
  os << text;
  os.flush();
  require(static_cast<bool>(os), ErrorKind::io, "write failed for " + path.string());
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorKind::io, "cannot create output directory " + dir);
  return fs::path(dir);
}

// run.* entries shared by every manifest.
ConfigMap run_entries(const std::string& subcommand) {
  ConfigMap m;
  m["run.subcommand"] = subcommand;
  m["run.code_version"] = LSEF_CODE_VERSION;
  m["run.threads"] = std::to_string(thread_cap());
  m["run.kernels"] = std::string(kernels::to_string(kernels::active_backend()));
  return m;
}

void write_manifest(const fs::path& path, const ConfigMap& cfg) {
  write_text(path, "# resolved settings; replay with --config " + path.filename().string() + "\n" +
                       "# fingerprint " + hex64(config_fingerprint(cfg)) + "\n" + canonical_text(cfg));
}

// ------------------------------------------------------------------ dataset

ConfigMap dataset_to_config(const DatasetSpec& s) {
  ConfigMap c;
  c["data.task"] = to_string(s.task);
  c["data.n"] = std::to_string(s.n);
  c["data.seed"] = std::to_string(s.seed);
  c["data.noise"] = format_double(s.noise);
  c["data.imbalance"] = format_double(s.imbalance);
  c["data.channels"] = std::to_string(s.channels);
  c["data.frames"] = std::to_string(s.frames);
  c["data.height"] = std::to_string(s.height);
  c["data.width"] = std::to_string(s.width);
  c["data.classes"] = std::to_string(s.classes);
  return c;
}

DatasetSpec dataset_from_config(const ConfigMap& c) {
  DatasetSpec s;
  s.task = parse_head(get_string(c, "data.task", to_string(s.task)));
  s.n = get_u64(c, "data.n", s.n);
  s.seed = get_u64(c, "data.seed", s.seed);
  s.noise = get_double(c, "data.noise", s.noise);
  s.imbalance = get_double(c, "data.imbalance", s.imbalance);
  s.channels = get_u64(c, "data.channels", s.channels);
  s.frames = get_u64(c, "data.frames", s.frames);
  s.height = get_u64(c, "data.height", s.height);
  s.width = get_u64(c, "data.width", s.width);
  s.classes = get_u64(c, "data.classes", s.classes);
  s.validate();
  return s;
}

std::string counts_text(const std::vector<std::size_t>& counts) {
  std::string s;
  for (std::size_t i = 0; i < counts.size(); ++i) s += (i ? "," : "") + std::to_string(counts[i]);
  return s;
}

// ----------------------------------------------------------- layered config

// Flag values the user actually gave, keyed like the config file.
struct Overrides {
  ConfigMap map;
  std::vector<std::string> sets;  // raw key=value pairs from --set

  template <typename V>
  void flag(CLI::App* app, const std::string& name, const std::string& key, V& slot, const std::string& help) {
    auto* opt = app->add_option(name, slot, help);
    bound.push_back({opt, key, [&slot] {
                       std::ostringstream o;
                       if constexpr (std::is_floating_point_v<V>)
                         o << format_double(slot);
                       else
                         o << slot;
                       return o.str();
                     }});
  }
  void set_flag(CLI::App* app) {
    app->add_option("--set", sets, "Extra key=value setting (repeatable), e.g. rao.tau_r_rel=0.02");
  }
  ConfigMap resolve() {
    for (const auto& b : bound)
      if (b.opt->count()) map[b.key] = b.text();
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      require(eq != std::string::npos && eq > 0, ErrorKind::configuration, "--set expects key=value, got '" + kv + "'");
      map[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    return map;
  }

 private:
  struct Bound {
    CLI::Option* opt;
    std::string key;
    std::function<std::string()> text;
  };
  std::vector<Bound> bound;
};

// A replayed manifest pins the kernel variant it ran with, since the
// AVX2 variant rounds differently from the scalar one.
void apply_kernels(const ConfigMap& cfg) {
  const auto it = cfg.find("run.kernels");
  if (it == cfg.end()) return;
  if (it->second == "scalar")
    kernels::set_backend(kernels::Backend::scalar);
  else if (it->second == "avx2")
    kernels::set_backend(kernels::Backend::avx2);
  else
    fail(ErrorKind::configuration, "run.kernels must be scalar or avx2, got '" + it->second + "'");
}

ConfigMap layered(const ConfigMap& defaults, const std::string& file, const ConfigMap& flags) {
  ConfigMap c = defaults;
  if (!file.empty()) c = merge(c, load_config_file(file));
  return merge(c, flags);
}

// Flags shared by train and ablate.
struct TrainFlags {
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch = 0;
  double lr = 0, rho_base = 0, alpha = 0, beta = 0, gamma = 0;
  std::string optimizer, base, modules, precision, schedule;

  void add(CLI::App* app, Overrides& o, bool with_modules) {
    o.flag(app, "--seed", "train.seed", seed, "Training seed");
    o.flag(app, "--epochs", "train.epochs", epochs, "Epoch count");
    o.flag(app, "--batch", "train.batch", batch, "Batch size");
    o.flag(app, "--lr", "optimizer.lr", lr, "Base learning rate");
    o.flag(app, "--base", "optimizer.base", base, "Base optimizer: sgd | adam");
    o.flag(app, "--precision", "train.precision", precision, "f32 | f64");
    o.flag(app, "--schedule", "train.schedule", schedule, "constant | cosine (per-epoch lr)");
    o.flag(app, "--rho-base", "rao.rho_base", rho_base, "Base perturbation radius");
    o.flag(app, "--alpha", "rao.alpha", alpha, "Rank sensitivity weight");
    o.flag(app, "--beta", "rao.beta", beta, "Sparsity sensitivity weight");
    o.flag(app, "--gamma", "rao.gamma", gamma, "Radius feedback rate");
    if (with_modules) {
      o.flag(app, "--optimizer", "optimizer.kind", optimizer, "base | sam | rao");
      o.flag(app, "--modules", "model.modules", modules, "none or a list from sem,ddm,cim");
    }
  }
};

// -------------------------------------------------------------- subcommands

struct GenerateArgs {
  std::string out, config;
  std::string task;
  std::size_t n = 0, channels = 0, frames = 0, height = 0, width = 0;
  std::uint64_t seed = 0;
  double noise = 0, imbalance = 0;
  Overrides o;
};

int cmd_generate(GenerateArgs& a) {
  const auto cfg = layered(dataset_to_config(DatasetSpec{}), a.config, a.o.resolve());
  const auto spec = dataset_from_config(cfg);
  const auto data = generate(spec, thread_cap());
  save_dataset(data, a.out);
  write_manifest(a.out + ".manifest", merge(cfg, run_entries("generate")));
  const auto& f = data.samples.front().features.shape();
  std::cout << "record=generate path=" << a.out << " samples=" << data.samples.size() << " shape=" << f[0] << "x"
            << f[1] << "x" << f[2] << "x" << f[3] << " task=" << to_string(spec.task) << " seed=" << spec.seed
            << " hash=" << hex64(data.content_hash());
  if (spec.task == Head::categorical) std::cout << " class_counts=" << counts_text(data.class_counts());
  std::cout << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, heldout, config, out_dir;
  TrainFlags f;
  Overrides o;
};

std::string epochs_csv(const TrainResult& r, bool categorical) {
  std::ostringstream o;
  o << "epoch,loss," << (categorical ? "train_war,train_uar,heldout_war,heldout_uar" : "train_rmse,heldout_rmse")
    << ",mean_rho_r,mean_rho_s,mean_rho_dyn,rho_base\n";
  for (const auto& e : r.epochs) {
    o << e.epoch << ',' << format_double(e.loss) << ',';
    if (categorical)
      o << format_double(e.train.cls.war) << ',' << format_double(e.train.cls.uar) << ','
        << (e.heldout ? format_double(e.heldout->cls.war) : "") << ','
        << (e.heldout ? format_double(e.heldout->cls.uar) : "");
    else
      o << format_double(e.train.rmse.overall) << ',' << (e.heldout ? format_double(e.heldout->rmse.overall) : "");
    o << ',' << format_double(e.mean_rho_r) << ',' << format_double(e.mean_rho_s) << ','
      << format_double(e.mean_rho_dyn) << ',' << format_double(e.rho_base) << '\n';
  }
  return o.str();
}

int cmd_train(TrainArgs& a) {
  const auto cfg = layered(TrainConfig{}.to_config(), a.config, a.o.resolve());
  auto tc = TrainConfig::from_config(cfg);
  apply_kernels(cfg);
  // a replayed manifest names its data; an explicit flag wins
  const std::string data_path = !a.data.empty() ? a.data : get_string(cfg, "run.data", "");
  const std::string held_path = !a.heldout.empty() ? a.heldout : get_string(cfg, "run.heldout", "");
  require(!data_path.empty(), ErrorKind::configuration, "train needs --data (or run.data in --config)");
  const auto dir = prepare_dir(a.out_dir);
  const auto train = load_dataset(data_path);
  std::optional<Dataset> held;
  if (!held_path.empty()) held = load_dataset(held_path);
  fit_model_to_data(tc.model, train.spec);

  ConfigMap manifest = merge(tc.to_config(), run_entries("train"));
  manifest["run.data"] = data_path;
  manifest["run.data_hash"] = hex64(train.content_hash());
  if (held) {
    manifest["run.heldout"] = held_path;
    manifest["run.heldout_hash"] = hex64(held->content_hash());
  }
  write_manifest(dir / "manifest.cfg", manifest);

  std::ofstream log(dir / "metrics.log", std::ios::binary);
  require(static_cast<bool>(log), ErrorKind::io, "cannot write " + (dir / "metrics.log").string());
  // every line goes to the file; all but the per-tensor lines are echoed
  struct Tee : std::streambuf {
    std::ostream* file;
    std::string line;
    int overflow(int ch) override {
      if (ch == EOF) return 0;
      *file << static_cast<char>(ch);
      line += static_cast<char>(ch);
      if (ch == '\n') {
        if (line.rfind("record=sensitivity", 0) != 0) std::cout << line << std::flush;
        line.clear();
      }
      return ch;
    }
  } tee;
  tee.file = &log;
  std::ostream sink(&tee);
  const auto result = train_model(train, held ? &*held : nullptr, tc, &sink);
  log.flush();
  require(static_cast<bool>(log), ErrorKind::io, "write failed for metrics.log");
  result.checkpoint.save((dir / "checkpoint.lsef").string());
  write_text(dir / "epochs.csv", epochs_csv(result, tc.model.head == Head::categorical));
  std::cout << "record=done out=" << dir.string() << " " << result.final_train.to_fields("train_");
  if (result.final_heldout) std::cout << " " << result.final_heldout->to_fields("heldout_");
  std::cout << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, data, out_dir;
  std::size_t batch = 16;
};

int cmd_eval(EvalArgs& a) {
  const auto dir = prepare_dir(a.out_dir);
  const auto ck = io::Archive::load(a.checkpoint);
  const auto data = load_dataset(a.data);
  ConfigMap manifest = run_entries("eval");
  manifest["run.checkpoint"] = a.checkpoint;
  manifest["run.data"] = a.data;
  manifest["run.data_hash"] = hex64(data.content_hash());
  manifest["run.batch"] = std::to_string(a.batch);
  write_manifest(dir / "manifest.cfg", manifest);
  const auto m = evaluate_checkpoint(ck, data, a.batch);
  const std::string line = "record=eval n=" + std::to_string(data.samples.size()) + " " + m.to_fields() + "\n";
  write_text(dir / "metrics.log", line);
  std::cout << line;
  return 0;
}

struct AblateArgs {
  std::string config, out_dir, seeds;
  std::size_t n = 0, heldout_n = 0;
  TrainFlags f;
  Overrides o;
};

int cmd_ablate(AblateArgs& a) {
  auto ac = AblationConfig::standard();
  ConfigMap defaults = merge(ac.train.to_config(), dataset_to_config(ac.data));
  defaults["run.heldout_seed"] = std::to_string(ac.heldout_seed);
  defaults["run.heldout_n"] = std::to_string(ac.heldout_n);
  std::string seeds;
  for (auto s : ac.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  defaults["run.seeds"] = seeds;
  const auto cfg = layered(defaults, a.config, a.o.resolve());
  apply_kernels(cfg);

  ac.data = dataset_from_config(cfg);
  ac.train = TrainConfig::from_config(cfg);
  ac.heldout_seed = get_u64(cfg, "run.heldout_seed", ac.heldout_seed);
  ac.heldout_n = get_u64(cfg, "run.heldout_n", ac.heldout_n);
  ac.seeds.clear();
  for (const auto& s : split_list(get_string(cfg, "run.seeds", seeds))) ac.seeds.push_back(parse_u64(s, "run.seeds"));
  ac.validate();

  const auto dir = prepare_dir(a.out_dir);
  write_manifest(dir / "manifest.cfg", merge(cfg, run_entries("ablate")));
  std::ofstream log(dir / "ablation.log", std::ios::binary);
  require(static_cast<bool>(log), ErrorKind::io, "cannot write ablation.log");
  const auto result = run_ablation(ac, &log);
  write_text(dir / "ablation.csv", result.csv());
  write_text(dir / "table.txt", result.table());
  std::cout << result.table() << "record=ablate splits_identical=" << (result.splits_identical() ? 1 : 0)
            << " out=" << dir.string() << "\n";
  return result.splits_identical() ? 0 : 5;
}

struct VerifyArgs {
  std::vector<std::string> only;
  std::string fault, out_dir;
  bool quiet = false;
};

int cmd_verify(VerifyArgs& a) {
  verify::Options opts;
  if (!a.fault.empty()) {
    const auto colon = a.fault.find(':');
    opts.fault_op = a.fault.substr(0, colon);
    if (colon != std::string::npos) {
      const std::string f = a.fault.substr(colon + 1);
      try {
        opts.fault_factor = std::stod(f);
      } catch (const std::exception&) {
        fail(ErrorKind::configuration, "--inject-fault factor '" + f + "' is not a number");
      }
    }
  }
  if (!a.quiet) opts.progress = &std::cerr;
  std::ostringstream report;
  struct Both : std::streambuf {
    std::ostream* a;
    std::ostream* b;
    int overflow(int ch) override {
      if (ch != EOF) {
        a->put(static_cast<char>(ch));
        b->put(static_cast<char>(ch));
        if (ch == '\n') a->flush();
      }
      return ch;
    }
  } both;
  both.a = &std::cout;
  both.b = &report;
  std::ostream out(&both);
  std::vector<std::string> only;
  for (const auto& item : a.only)
    for (const auto& id : split_list(item)) only.push_back(id);
  const auto results = verify::run_checks(only, opts, out);
  std::size_t failed = 0;
  double total = 0;
  for (const auto& r : results) {
    failed += !r.passed;
    total += r.seconds;
  }
  out << (failed ? "FAILED " : "PASSED ") << results.size() - failed << "/" << results.size() << " checks in "
      << total << " s\n";
  out.flush();
  if (!a.out_dir.empty()) {
    const auto dir = prepare_dir(a.out_dir);
    ConfigMap manifest = run_entries("verify");
    std::string ids;
    for (const auto& r : results) ids += (ids.empty() ? "" : ",") + r.id;
    manifest["run.checks"] = ids;
    if (!opts.fault_op.empty()) manifest["run.fault"] = opts.fault_op + ":" + format_double(opts.fault_factor);
    write_manifest(dir / "manifest.cfg", manifest);
    write_text(dir / "report.txt", report.str());
  }
  return failed ? 5 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank/sparse emotion features: data, training, ablation and verification"};
  app.require_subcommand(1);

  GenerateArgs g;
  auto* gen = app.add_subcommand("generate", "Write a synthetic dataset");
  gen->add_option("--out", g.out, "Dataset file to write")->required();
  gen->add_option("--config", g.config, "Settings file with data.* keys");
  g.o.flag(gen, "--task", "data.task", g.task, "categorical | regression");
  g.o.flag(gen, "--n", "data.n", g.n, "Sample count");
  g.o.flag(gen, "--seed", "data.seed", g.seed, "Dataset seed");
  g.o.flag(gen, "--noise", "data.noise", g.noise, "Gaussian noise std");
  g.o.flag(gen, "--imbalance", "data.imbalance", g.imbalance, "Geometric class ratio in (0,1); 0 = balanced");
  g.o.flag(gen, "--channels", "data.channels", g.channels, "Input channels");
  g.o.flag(gen, "--frames", "data.frames", g.frames, "Frames per clip");
  g.o.flag(gen, "--height", "data.height", g.height, "Frame height");
  g.o.flag(gen, "--width", "data.width", g.width, "Frame width");

  TrainArgs t;
  auto* tr = app.add_subcommand("train", "Train a model and save a checkpoint");
  tr->add_option("--data", t.data, "Training dataset");
  tr->add_option("--heldout", t.heldout, "Held-out dataset");
  tr->add_option("--config", t.config, "Settings file (a previous manifest replays that run)");
  tr->add_option("--out-dir", t.out_dir, "Output directory")->required();
  t.f.add(tr, t.o, true);
  t.o.set_flag(tr);

  EvalArgs e;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  ev->add_option("--checkpoint", e.checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", e.data, "Dataset")->required();
  ev->add_option("--out-dir", e.out_dir, "Output directory")->required();
  ev->add_option("--batch", e.batch, "Evaluation batch size");

  AblateArgs b;
  auto* ab = app.add_subcommand("ablate", "Train the five stacked configurations");
  ab->add_option("--config", b.config, "Settings file");
  ab->add_option("--out-dir", b.out_dir, "Output directory")->required();
  b.o.flag(ab, "--seeds", "run.seeds", b.seeds, "Comma list of training seeds");
  b.o.flag(ab, "--n", "data.n", b.n, "Training samples");
  b.o.flag(ab, "--heldout-n", "run.heldout_n", b.heldout_n, "Held-out samples");
  b.f.add(ab, b.o, false);
  b.o.set_flag(ab);

  VerifyArgs v;
  auto* ve = app.add_subcommand("verify", "Run the acceptance checks");
  ve->add_option("--only", v.only, "Comma list of check ids");
  ve->add_option("--inject-fault", v.fault, "Scale one op's backward rule: op[:factor], e.g. softmax:1.5");
  ve->add_option("--out-dir", v.out_dir, "Write report.txt and manifest.cfg here");
  ve->add_flag("--quiet", v.quiet, "Suppress per-epoch progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }
  try {
    if (*gen) return cmd_generate(g);
    if (*tr) return cmd_train(t);
    if (*ev) return cmd_eval(e);
    if (*ab) return cmd_ablate(b);
    if (*ve) return cmd_verify(v);
  } catch (const Error& err) {
    std::cerr << "error (" << to_string(err.kind()) << "): " << err.what() << "\n";
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}
