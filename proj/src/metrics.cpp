#include "lsef/metrics.hpp"

#include <cmath>

#include "lsef/config.hpp"
#include "lsef/error.hpp"

namespace lsef {

ClassMetrics compute_war_uar(std::span<const int> preds, std::span<const int> labels, std::size_t classes) {
  require(!labels.empty(), ErrorKind::usage, "WAR/UAR of an empty set");
  require(preds.size() == labels.size(), ErrorKind::dimension,
          "WAR/UAR needs equal lengths, got " + std::to_string(preds.size()) + " predictions and " +
              std::to_string(labels.size()) + " labels");
  ClassMetrics m;
  m.recall.assign(classes, 0.0);
  m.support.assign(classes, 0);
  std::vector<std::size_t> hit(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    require(y >= 0 && static_cast<std::size_t>(y) < classes, ErrorKind::data,
            "label " + std::to_string(y) + " outside 0.." + std::to_string(classes - 1));
    ++m.support[y];
    if (preds[i] == y) {
      ++hit[y];
      ++correct;
    }
  }
  m.war = static_cast<double>(correct) / static_cast<double>(labels.size());
  double sum = 0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (m.support[c] == 0) continue;
    m.recall[c] = static_cast<double>(hit[c]) / static_cast<double>(m.support[c]);
    sum += m.recall[c];
    ++present;
  }
  m.uar = sum / static_cast<double>(present);
  return m;
}

void RmseAccumulator::add(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() == truth.size(), ErrorKind::dimension,
          "RMSE needs equal shapes, got " + std::to_string(pred.size()) + " and " + std::to_string(truth.size()) +
              " values");
  require(pred.size() % 2 == 0, ErrorKind::dimension, "RMSE expects (valence, arousal) pairs");
  for (std::size_t i = 0; i < pred.size(); i += 2) {
    const double dv = pred[i] - truth[i], da = pred[i + 1] - truth[i + 1];
    sq_v_ += dv * dv;
    sq_a_ += da * da;
  }
  rows_ += pred.size() / 2;
}

RmseMetrics RmseAccumulator::result() const {
  require(rows_ > 0, ErrorKind::usage, "RMSE of an empty set");
  RmseMetrics m;
  m.valence = std::sqrt(sq_v_ / static_cast<double>(rows_));
  m.arousal = std::sqrt(sq_a_ / static_cast<double>(rows_));
  m.overall = 0.5 * (m.valence + m.arousal);
  return m;
}

RmseMetrics compute_rmse(std::span<const double> pred, std::span<const double> truth) {
  RmseAccumulator acc;
  acc.add(pred, truth);
  return acc.result();
}

std::string MetricsBundle::to_fields(const std::string& prefix) const {
  std::string out;
  if (categorical) {
    out = prefix + "war=" + format_double(cls.war) + " " + prefix + "uar=" + format_double(cls.uar) + " " + prefix +
          "recall=";
    for (std::size_t c = 0; c < cls.recall.size(); ++c) out += (c ? "," : "") + format_double(cls.recall[c]);
  } else {
    out = prefix + "rmse_v=" + format_double(rmse.valence) + " " + prefix + "rmse_a=" + format_double(rmse.arousal) +
          " " + prefix + "rmse=" + format_double(rmse.overall);
  }
  return out;
}

}  // namespace lsef
