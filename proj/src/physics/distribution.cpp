#include "ajtwin/physics/distribution.hpp"

#include "ajtwin/core/error.hpp"

namespace ajtwin {

double lognormal_pdf(double d, const DropletDistribution& dist) {
  if (!(d > 0.0)) throw Error(ErrorKind::invalid_input, "droplet diameter must be positive");
  return lognormal_log_density(std::log(d), dist) / d;
}

QuadratureRule make_quadrature(int nodes, double lower, double upper) {
  if (nodes < 2 || !(lower > 0.0) || !(upper > lower))
    throw Error(ErrorKind::invalid_input, "invalid quadrature specification");
  // Golub–Welsch: eigenvalues of the Legendre Jacobi matrix are the nodes.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    jacobi(k, k - 1) = b;
    jacobi(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  const double a = std::log(lower);
  const double b = std::log(upper);
  const double half = 0.5 * (b - a);
  QuadratureRule rule;
  rule.log_nodes = (eig.eigenvalues().array() * half + 0.5 * (a + b)).matrix();
  rule.weights = (2.0 * half * eig.eigenvectors().row(0).array().square()).matrix().transpose();
  rule.diameters = rule.log_nodes.array().exp().matrix();
  return rule;
}

Eigen::VectorXd distribution_mass(const DropletDistribution& dist, const QuadratureRule& rule) {
  Eigen::VectorXd mass(rule.size());
  for (Eigen::Index j = 0; j < rule.size(); ++j)
    mass(j) = rule.weights(j) * lognormal_log_density(rule.log_nodes(j), dist);
  return mass;
}

}  // namespace ajtwin
