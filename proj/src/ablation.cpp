#include "lsef/ablation.hpp"

#include <chrono>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "lsef/config.hpp"
#include "lsef/error.hpp"

namespace lsef {

void AblationConfig::validate() const {
  data.validate();
  require(heldout_n > 0, ErrorKind::configuration, "ablation needs a held-out split");
  require(seeds.size() >= 1, ErrorKind::configuration, "ablation needs at least one seed");
  train.validate();
}

AblationConfig AblationConfig::standard() {
  AblationConfig c;
  c.data.n = 210;
  c.data.seed = 7;
  c.data.noise = 0.05;
  c.heldout_n = 70;
  c.train.epochs = 12;
  c.train.batch = 8;
  c.train.precision = Precision::f32;
  // fixed base radius: with feedback on, rho_base only grows on this task
  c.train.rao.gamma = 0.0;
  return c;
}

std::vector<AblationRow> ablation_rows() {
  std::vector<AblationRow> rows(5);
  rows[0] = {"base", "none", OptimizerKind::base, {}};
  rows[1] = {"+SEM", "sem", OptimizerKind::base, {}};
  rows[2] = {"+SEM+DDM", "sem,ddm", OptimizerKind::base, {}};
  rows[3] = {"+SEM+DDM+CIM", "sem,ddm,cim", OptimizerKind::base, {}};
  rows[4] = {"+RAO", "sem,ddm,cim", OptimizerKind::rao, {}};
  return rows;
}

namespace {

template <typename F>
double mean_over(const std::vector<AblationRun>& runs, F f) {
  if (runs.empty()) return 0.0;
  double s = 0;
  for (const auto& r : runs) s += f(r);
  return s / static_cast<double>(runs.size());
}

}  // namespace

double AblationRow::mean_train_war() const {
  return mean_over(runs, [](const AblationRun& r) { return r.train.cls.war; });
}
double AblationRow::mean_train_uar() const {
  return mean_over(runs, [](const AblationRun& r) { return r.train.cls.uar; });
}
double AblationRow::mean_heldout_war() const {
  return mean_over(runs, [](const AblationRun& r) { return r.heldout.cls.war; });
}
double AblationRow::mean_heldout_uar() const {
  return mean_over(runs, [](const AblationRun& r) { return r.heldout.cls.uar; });
}
double AblationRow::mean_heldout_rmse() const {
  return mean_over(runs, [](const AblationRun& r) { return r.heldout.rmse.overall; });
}

bool AblationResult::splits_identical() const {
  const AblationRun* first = nullptr;
  for (const auto& row : rows)
    for (const auto& r : row.runs) {
      if (!first) first = &r;
      if (r.train_hash != first->train_hash || r.heldout_hash != first->heldout_hash) return false;
    }
  return first != nullptr;
}

std::string AblationResult::table() const {
  std::ostringstream os;
  char buf[256];
  const bool categorical = !rows.empty() && !rows[0].runs.empty() && rows[0].runs[0].train.categorical;
  if (categorical)
    std::snprintf(buf, sizeof buf, "%-14s %-10s %5s %10s %10s %10s %10s\n", "config", "optimizer", "seeds",
                  "train_war", "train_uar", "held_war", "held_uar");
  else
    std::snprintf(buf, sizeof buf, "%-14s %-10s %5s %10s %10s\n", "config", "optimizer", "seeds", "train_rmse",
                  "held_rmse");
  os << buf;
  for (const auto& row : rows) {
    if (categorical)
      std::snprintf(buf, sizeof buf, "%-14s %-10s %5zu %10.4f %10.4f %10.4f %10.4f\n", row.name.c_str(),
                    to_string(row.optimizer), row.runs.size(), row.mean_train_war(), row.mean_train_uar(),
                    row.mean_heldout_war(), row.mean_heldout_uar());
    else
      std::snprintf(buf, sizeof buf, "%-14s %-10s %5zu %10.4f %10.4f\n", row.name.c_str(), to_string(row.optimizer),
                    row.runs.size(),
                    mean_over(row.runs, [](const AblationRun& r) { return r.train.rmse.overall; }),
                    row.mean_heldout_rmse());
    os << buf;
  }
  return os.str();
}

std::string AblationResult::csv() const {
  std::ostringstream os;
  os << "config,modules,optimizer,seed,train_war,train_uar,heldout_war,heldout_uar,train_rmse,heldout_rmse,"
        "train_hash,heldout_hash,seconds\n";
  for (const auto& row : rows)
    for (const auto& r : row.runs)
      os << row.name << ',' << '"' << row.modules << '"' << ',' << to_string(row.optimizer) << ',' << r.seed << ','
         << format_double(r.train.cls.war) << ',' << format_double(r.train.cls.uar) << ','
         << format_double(r.heldout.cls.war) << ',' << format_double(r.heldout.cls.uar) << ','
         << format_double(r.train.rmse.overall) << ',' << format_double(r.heldout.rmse.overall) << ','
         << hex64(r.train_hash) << ',' << hex64(r.heldout_hash) << ',' << format_double(r.seconds) << '\n';
  return os.str();
}

AblationResult run_ablation(const AblationConfig& cfg, std::ostream* log) {
  cfg.validate();
  const Dataset train_set = generate(cfg.data);
  DatasetSpec hs = cfg.data;
  hs.seed = cfg.heldout_seed;
  hs.n = cfg.heldout_n;
  const Dataset heldout = generate(hs);
  AblationResult result;
  for (auto row : ablation_rows()) {
    for (std::uint64_t seed : cfg.seeds) {
      TrainConfig tc = cfg.train;
      tc.model.set_modules(row.modules);
      tc.optimizer = row.optimizer;
      tc.seed = seed;
      const auto t0 = std::chrono::steady_clock::now();
      const auto tr = train_model(train_set, &heldout, tc);
      AblationRun run;
      run.seed = seed;
      run.train = tr.final_train;
      run.heldout = *tr.final_heldout;
      run.train_hash = tr.train_hash;
      run.heldout_hash = tr.heldout_hash;
      run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      if (log)
        *log << "record=ablation config=" << row.name << " seed=" << seed << ' ' << run.train.to_fields("train_")
             << ' ' << run.heldout.to_fields("heldout_") << " seconds=" << format_double(run.seconds) << '\n'
             << std::flush;
      row.runs.push_back(std::move(run));
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace lsef
