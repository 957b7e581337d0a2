#include "mvd/evaluate/pca.hpp"

#include <iostream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace mvd::evaluate {

Projection2D pca_project(const ndgrad::Matrix& x) {
  if (x.cols() < 2) throw std::invalid_argument("pca_project: need at least two features");
  if (x.rows() < 1) throw std::invalid_argument("pca_project: empty input");
  Projection2D out;
  ndgrad::Matrix centered = x.rowwise() - x.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(std::max<Eigen::Index>(x.rows() - 1, 1));
  const double trace = cov.trace();
  if (!(trace > 0.0)) {
    std::cerr << "warning: pca_project: input has zero variance\n";
    out.coords = ndgrad::Matrix::Zero(x.rows(), 2);
    out.components = ndgrad::Matrix::Zero(x.cols(), 2);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  // Eigenvalues ascend.
  const Eigen::Index d = cov.rows();
  out.components.resize(d, 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    out.components.col(k) = v;
    out.explained_ratio[static_cast<std::size_t>(k)] = std::max(0.0, solver.eigenvalues()(d - 1 - k)) / trace;
  }
  out.coords = centered * out.components;
  return out;
}

}  // namespace mvd::evaluate
