#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace lsef {

struct ClassMetrics {
  double war = 0;  // overall accuracy
  double uar = 0;  // mean recall over classes present in the labels
  std::vector<double> recall;       // per class; 0 where the class is absent
  std::vector<std::size_t> support;  // label count per class
};

ClassMetrics compute_war_uar(std::span<const int> preds, std::span<const int> labels, std::size_t classes = 7);

struct RmseMetrics {
  double valence = 0;
  double arousal = 0;
  double overall = 0;  // (valence + arousal) / 2
};

// Row-major (frames x 2) buffers, or any stack of them; errors are pooled
// over every row before the root.
RmseMetrics compute_rmse(std::span<const double> pred, std::span<const double> truth);

// Streaming form: pooled squared error over many clips.
class RmseAccumulator {
 public:
  void add(std::span<const double> pred, std::span<const double> truth);
  RmseMetrics result() const;
  std::size_t rows() const { return rows_; }

 private:
  double sq_v_ = 0, sq_a_ = 0;
  std::size_t rows_ = 0;
};

struct MetricsBundle {
  bool categorical = true;
  ClassMetrics cls;
  RmseMetrics rmse;

  // "war=... uar=... recall=a,b,..." or "rmse_v=... rmse_a=... rmse=..."
  std::string to_fields(const std::string& prefix = "") const;
};

}  // namespace lsef
