#include <cmath>

#include "latdiff/core/rng.hpp"
#include "latdiff/objectives/grad_check.hpp"

namespace latdiff {

double grad_check(const ScalarFn& fn, const ParamSet& params, double epsilon,
                  int n_probes, std::uint64_t seed) {
  if (!(epsilon > 0))
    fail(ErrorKind::DegenerateConfig, "grad_check: epsilon must be > 0");
  if (n_probes < 1)
    fail(ErrorKind::DegenerateConfig, "grad_check: n_probes must be >= 1");
  if (params.value_count() == 0)
    fail(ErrorKind::DegenerateConfig, "grad_check: empty parameter set");

  ParamSet work = params;
  ParamSet grads = params.zeros_like();
  const double f0 = fn(work, &grads);
  if (!std::isfinite(f0) || !grads.all_finite())
    fail(ErrorKind::NonFiniteGradient, "grad_check: non-finite analytic pass");

  // Dominant gradient magnitude; errors are measured against it so that
  // coordinates whose true partials sit below the finite-difference noise
  // floor are compared in absolute terms at the gradient's scale.
  double gmax = 0.0;
  for (const auto& [k, g] : grads.items)
    gmax = std::max(gmax, static_cast<double>(g.data.abs().maxCoeff()));

  Rng rng = Rng::derived(seed, 0xadc0de);
  double worst = 0.0;
  for (int probe = 0; probe < n_probes; ++probe) {
    const std::size_t item = static_cast<std::size_t>(rng.uniform_int(
        0, static_cast<int>(work.items.size()) - 1));
    auto& tensor = work.items[item].second;
    const Eigen::Index idx = static_cast<Eigen::Index>(rng.uniform_int(
        0, static_cast<int>(tensor.size()) - 1));

    const Real saved = tensor.data[idx];
    tensor.data[idx] = saved + static_cast<Real>(epsilon);
    const double f_plus = fn(work, nullptr);
    tensor.data[idx] = saved - static_cast<Real>(epsilon);
    const double f_minus = fn(work, nullptr);
    tensor.data[idx] = saved;

    const double numeric = (f_plus - f_minus) / (2 * epsilon);
    const double analytic = grads.items[item].second.data[idx];
    if (!std::isfinite(numeric) || !std::isfinite(analytic))
      fail(ErrorKind::NonFiniteGradient,
           "grad_check: non-finite probe at " + work.items[item].first);
    const double denom =
        std::max({std::abs(analytic), std::abs(numeric), gmax, 1e-8});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  }
  return worst;
}

}  // namespace latdiff
