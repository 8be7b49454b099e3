#include "lsef/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "lsef/error.hpp"

namespace lsef {

std::vector<double> singular_values(std::span<const double> matrix, std::size_t rows,
                                    std::size_t cols, const SvdOptions& opts,
                                    SvdDiagnostics* diag) {
  require(rows > 0 && cols > 0 && matrix.size() == rows * cols, ErrorKind::dimension,
          "singular_values: matrix size mismatch");
  for (double v : matrix)
    require(std::isfinite(v), ErrorKind::numerical, "singular_values: non-finite entry");

  // Columns of the working matrix are the vectors being orthogonalized;
  // transpose when the matrix is wide so there are min(rows, cols) of them.
  const bool wide = cols > rows;
  const std::size_t n = wide ? rows : cols;
  const std::size_t len = wide ? cols : rows;
  std::vector<std::vector<double>> u(n, std::vector<double>(len));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (wide)
        u[r][c] = matrix[r * cols + c];
      else
        u[c][r] = matrix[r * cols + c];
    }

  auto dot = [len](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < len; ++i) s += a[i] * b[i];
    return s;
  };

  int sweep = 0;
  double worst = 0.0;
  bool converged = n < 2;
  while (!converged && sweep < opts.max_sweeps) {
    ++sweep;
    worst = 0.0;
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(u[p], u[p]);
        const double beta = dot(u[q], u[q]);
        const double gamma = dot(u[p], u[q]);
        if (alpha == 0.0 || beta == 0.0) continue;
        const double ratio = std::abs(gamma) / std::sqrt(alpha * beta);
        worst = std::max(worst, ratio);
        if (ratio <= opts.tolerance) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < len; ++i) {
          const double up = u[p][i], uq = u[q][i];
          u[p][i] = c * up - s * uq;
          u[q][i] = s * up + c * uq;
        }
      }
    converged = !rotated;
  }
  if (diag) *diag = {sweep, worst};
  if (!converged) {
    std::ostringstream os;
    os << "singular_values: no convergence after " << sweep << " sweeps on a " << rows << "x"
       << cols << " matrix (max off-diagonal ratio " << worst << ", tolerance " << opts.tolerance
       << ")";
    fail(ErrorKind::numerical, os.str());
  }

  std::vector<double> sigma(n);
  for (std::size_t i = 0; i < n; ++i) sigma[i] = std::sqrt(dot(u[i], u[i]));
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

std::pair<std::size_t, std::size_t> matricize(const Shape& shape) {
  if (shape.empty()) return {1, 1};
  std::size_t rest = 1;
  for (std::size_t i = 1; i < shape.size(); ++i) rest *= shape[i];
  if (shape.size() == 1) return {1, shape[0]};
  return {shape[0], rest};
}

template <typename T>
std::vector<double> svd_values(const Tensor<T>& m, const SvdOptions& opts) {
  const auto [rows, cols] = matricize(m.shape());
  std::vector<double> values(m.data().begin(), m.data().end());
  return singular_values(values, rows, cols, opts);
}

template std::vector<double> svd_values(const Tensor<float>&, const SvdOptions&);
template std::vector<double> svd_values(const Tensor<double>&, const SvdOptions&);

}  // namespace lsef
