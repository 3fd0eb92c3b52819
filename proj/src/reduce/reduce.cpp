#include "fedcore/error.hpp"
#include "fedcore/reduce.hpp"

namespace fedcore {

void ReducerConfig::validate() const {
  if (output_dim < 1) fail(ErrorKind::kValidation, "reducer output_dim must be at least 1");
  if (!(tsne.theta >= 0.0 && tsne.theta <= 1.0)) {
    fail(ErrorKind::kValidation, "t-SNE theta must be in [0, 1]");
  }
  if (!(tsne.perplexity >= 1.0)) fail(ErrorKind::kValidation, "t-SNE perplexity must be >= 1");
  if (tsne.iterations < 1) fail(ErrorKind::kValidation, "t-SNE iterations must be >= 1");
  if (!(tsne.learning_rate > 0.0)) fail(ErrorKind::kValidation, "t-SNE learning_rate must be > 0");
  if (kpca.gamma && !(*kpca.gamma > 0.0)) fail(ErrorKind::kValidation, "KPCA gamma must be > 0");
}

Matrix reduce(const Matrix& features, const ReducerConfig& config) {
  config.validate();
  if (features.rows() < 2) fail(ErrorKind::kTooFewSamples, "reduction needs at least 2 samples");
  if (!all_finite(features.data())) fail(ErrorKind::kValidation, "non-finite input feature");

  switch (config.method) {
    case ReducerMethod::kTsne:
      return run_tsne(features, config.output_dim, config.tsne).embedding;
    case ReducerMethod::kPca: {
      const std::size_t k = std::min(config.output_dim, features.cols());
      const PcaFit fit = fit_pca(features, k);
      if (k == config.output_dim) return fit.projection;
      Matrix padded(features.rows(), config.output_dim);
      for (std::size_t i = 0; i < features.rows(); ++i) {
        for (std::size_t c = 0; c < k; ++c) padded(i, c) = fit.projection(i, c);
      }
      return padded;
    }
    case ReducerMethod::kKpca:
      return kernel_pca(features, config.output_dim, config.kpca.gamma);
  }
  fail(ErrorKind::kValidation, "unknown reducer method");
}

}  // namespace fedcore
