#include <Eigen/Dense>

#include "latdiff/core/error.hpp"
#include "latdiff/core/rng.hpp"
#include "latdiff/evalkit/probe.hpp"

namespace latdiff {

double nuisance_probe(const std::vector<LatentDifference>& latents,
                      const std::vector<double>& nuisance_labels,
                      std::uint64_t seed) {
  if (latents.size() != nuisance_labels.size())
    fail(ErrorKind::ShapeMismatch,
         "nuisance_probe: latents and labels differ in count");
  const auto n = latents.size();
  if (n < 20)
    fail(ErrorKind::TooFewSamples,
         "nuisance_probe: need at least 20 pairs, got " + std::to_string(n));

  const auto& d0 = latents[0].data.dims;
  const auto c = static_cast<std::size_t>(d0[2]);
  // One feature per latent channel: the spatial mean, plus an intercept.
  Eigen::MatrixXd X(n, c + 1);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& t = latents[i].data;
    if (t.dims != d0)
      fail(ErrorKind::ShapeMismatch, "nuisance_probe: mixed latent shapes");
    const auto hw = static_cast<std::size_t>(t.dims[0]) *
                    static_cast<std::size_t>(t.dims[1]);
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0;
      for (std::size_t p = 0; p < hw; ++p) s += t.data[p * c + ch];
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(ch)) =
          s / static_cast<double>(hw);
    }
    X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = 1.0;
    y(static_cast<Eigen::Index>(i)) = nuisance_labels[i];
  }

  Rng rng = Rng::derived(seed, 0x9b0be);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const auto j = rng.uniform_int(0, static_cast<long>(i) - 1);
    std::swap(order[i - 1], order[static_cast<std::size_t>(j)]);
  }
  const auto n_train = n * 70 / 100;

  Eigen::MatrixXd Xtr(n_train, c + 1);
  Eigen::VectorXd ytr(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    Xtr.row(static_cast<Eigen::Index>(i)) =
        X.row(static_cast<Eigen::Index>(order[i]));
    ytr(static_cast<Eigen::Index>(i)) = y(static_cast<Eigen::Index>(order[i]));
  }

  const double ridge = 1e-3;
  Eigen::MatrixXd gram = Xtr.transpose() * Xtr;
  gram.diagonal().array() += ridge;
  Eigen::VectorXd w = gram.ldlt().solve(Xtr.transpose() * ytr);

  double sse = 0;
  const auto n_test = n - n_train;
  for (std::size_t i = n_train; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(order[i]);
    const double e = X.row(r).dot(w) - y(r);
    sse += e * e;
  }
  return sse / static_cast<double>(n_test);
}

}  // namespace latdiff
