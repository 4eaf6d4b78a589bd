#include "vpn/gradcheck.hpp"

#include <cmath>
#include <sstream>

namespace vpn {

std::string GradCheckReport::summary() const {
  std::ostringstream out;
  if (nonfinite) {
    out << "FAIL non-finite value at coordinate " << nonfinite_index;
    return out.str();
  }
  out << (passed() ? "pass" : "FAIL") << " max_rel_error=" << max_rel_error
      << " at coordinate " << worst_index << " (tolerance " << tolerance << ")";
  return out.str();
}

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                                  const Tensor& at, double tolerance,
                                  double step) {
  GradCheckReport report;
  report.tolerance = tolerance;

  auto as_scalar = [&f](const Tensor& x) {
    Tensor y = f(x);
    return y.numel() == 1 ? y : reduce_sum(y);
  };

  Tensor x = Tensor::from_data(at.shape(), at.values(), true);
  Tensor loss = as_scalar(x);
  if (!std::isfinite(loss.scalar())) {
    report.nonfinite = true;
    report.nonfinite_index = -1;
    return report;
  }
  loss.backward();
  const std::vector<double> analytic =
      x.has_grad() ? x.grad() : std::vector<double>(x.values().size(), 0.0);

  std::vector<double> probe = at.values();
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = as_scalar(Tensor::from_data(at.shape(), probe)).scalar();
    probe[i] = saved - step;
    const double down = as_scalar(Tensor::from_data(at.shape(), probe)).scalar();
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      report.nonfinite = true;
      report.nonfinite_index = static_cast<long long>(i);
      return report;
    }
    const double numeric = (up - down) / (2.0 * step);
    const double a = analytic[i];
    const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
    const double rel = std::fabs(a - numeric) / denom;
    if (rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_index = static_cast<long long>(i);
    }
  }
  return report;
}

}  // namespace vpn
