#include <Eigen/Dense>
#include <cmath>

#include "fedcore/error.hpp"
#include "fedcore/reduce.hpp"

namespace fedcore {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix& m) {
  return Eigen::Map<const RowMajor>(m.data().data(), static_cast<Eigen::Index>(m.rows()),
                                    static_cast<Eigen::Index>(m.cols()));
}

// Largest-magnitude entry made positive; ties resolved by the lowest index.
void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v(i)) > std::abs(v(best))) best = i;
  }
  if (v.size() > 0 && v(best) < 0.0) v = -v;
}

}  // namespace

Matrix PcaFit::reconstruct() const {
  Matrix out(projection.rows(), components.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t d = 0; d < out.cols(); ++d) {
      double v = mean[d];
      for (std::size_t c = 0; c < components.rows(); ++c) v += projection(i, c) * components(c, d);
      out(i, d) = v;
    }
  }
  return out;
}

PcaFit fit_pca(const Matrix& features, std::size_t k) {
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  if (n == 0 || d == 0) fail(ErrorKind::kEmptyInput, "PCA needs a non-empty matrix");
  if (k == 0 || k > d) fail(ErrorKind::kValidation, "PCA output_dim must be in [1, input_dim]");

  const auto x = view(features);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const RowMajor centered = x.rowwise() - mean;
  const double dof = n > 1 ? static_cast<double>(n - 1) : 1.0;
  const double total_variance = centered.squaredNorm() / dof;

  PcaFit fit;
  fit.mean.assign(mean.data(), mean.data() + d);
  fit.components = Matrix(k, d);
  fit.explained_variance.assign(k, 0.0);
  fit.explained_variance_ratio.assign(k, 0.0);

  if (d <= n) {
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / dof;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    for (std::size_t c = 0; c < k; ++c) {
      const auto col = static_cast<Eigen::Index>(d - 1 - c);
      Eigen::VectorXd v = solver.eigenvectors().col(col);
      fix_sign(v);
      for (std::size_t j = 0; j < d; ++j) fit.components(c, j) = v(static_cast<Eigen::Index>(j));
      fit.explained_variance[c] = std::max(0.0, solver.eigenvalues()(col));
    }
  } else {
    const Eigen::MatrixXd gram = centered * centered.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
    for (std::size_t c = 0; c < k && c < n; ++c) {
      const auto col = static_cast<Eigen::Index>(n - 1 - c);
      const double mu = solver.eigenvalues()(col);
      if (mu <= 1e-12 * std::max(1.0, solver.eigenvalues()(static_cast<Eigen::Index>(n - 1)))) {
        continue;
      }
      Eigen::VectorXd v = centered.transpose() * solver.eigenvectors().col(col);
      v /= v.norm();
      fix_sign(v);
      for (std::size_t j = 0; j < d; ++j) fit.components(c, j) = v(static_cast<Eigen::Index>(j));
      fit.explained_variance[c] = mu / dof;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    fit.explained_variance_ratio[c] =
        total_variance > 0.0 ? fit.explained_variance[c] / total_variance : 0.0;
  }

  fit.projection = Matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        s += centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
             fit.components(c, j);
      }
      fit.projection(i, c) = s;
    }
  }
  return fit;
}

Matrix kernel_pca(const Matrix& features, std::size_t k, std::optional<double> gamma) {
  const std::size_t n = features.rows();
  if (n == 0) fail(ErrorKind::kEmptyInput, "kernel PCA needs samples");
  if (k == 0) fail(ErrorKind::kValidation, "kernel PCA output_dim must be positive");
  const double g = gamma.value_or(1.0 / static_cast<double>(features.cols()));
  if (!(g > 0.0)) fail(ErrorKind::kValidation, "kernel PCA gamma must be positive");

  Eigen::MatrixXd kernel(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = std::exp(-g * squared_distance(features.row(i), features.row(j)));
      kernel(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
      kernel(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = v;
    }
  }
  const Eigen::VectorXd row_mean = kernel.rowwise().mean();
  const double grand_mean = row_mean.mean();
  Eigen::MatrixXd centered = kernel;
  centered.colwise() -= row_mean;
  centered.rowwise() -= row_mean.transpose();
  centered.array() += grand_mean;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(centered);
  Matrix out(n, k);
  for (std::size_t c = 0; c < k && c < n; ++c) {
    const auto col = static_cast<Eigen::Index>(n - 1 - c);
    const double lambda = solver.eigenvalues()(col);
    if (lambda <= 0.0) continue;
    Eigen::VectorXd v = solver.eigenvectors().col(col);
    fix_sign(v);
    const double scale = std::sqrt(lambda);
    for (std::size_t i = 0; i < n; ++i) out(i, c) = v(static_cast<Eigen::Index>(i)) * scale;
  }
  return out;
}

}  // namespace fedcore
