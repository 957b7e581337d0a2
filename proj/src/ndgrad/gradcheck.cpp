#include "mvd/ndgrad/gradcheck.hpp"

#include <cmath>

namespace mvd::ndgrad {

namespace {

double evaluate(const std::function<Tensor()>& fn) {
  NoGradScope no_grad;
  double value = fn().item();
  if (!std::isfinite(value)) throw DomainError("gradient_check: function value is not finite");
  return value;
}

}  // namespace

GradCheckReport gradient_check(const std::function<Tensor()>& fn, const std::vector<Tensor>& params, double h,
                               double tol) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: step must be positive");

  Gradients analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = fn();
    if (!std::isfinite(loss.item())) throw DomainError("gradient_check: function value is not finite");
    analytic = tape.backward(loss);
  }

  GradCheckReport report;
  report.passed = true;
  for (auto param : params) {
    Matrix g_ad = analytic.at(param);
    Matrix g_fd(g_ad.rows(), g_ad.cols());
    Matrix& values = param.mutable_value();
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const double original = values.data()[i];
      values.data()[i] = original + h;
      const double plus = evaluate(fn);
      values.data()[i] = original - h;
      const double minus = evaluate(fn);
      values.data()[i] = original;
      g_fd.data()[i] = (plus - minus) / (2.0 * h);
    }
    const double diff = (g_ad - g_fd).cwiseAbs().maxCoeff();
    const double denom = g_ad.cwiseAbs().maxCoeff() + g_fd.cwiseAbs().maxCoeff() + 1e-12;
    const double rel = diff / denom;
    report.relative_errors.push_back(rel);
    report.max_relative_error = std::max(report.max_relative_error, rel);
    if (!(rel <= tol)) report.passed = false;
  }
  return report;
}

}  // namespace mvd::ndgrad
