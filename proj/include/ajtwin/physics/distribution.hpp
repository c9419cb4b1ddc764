#pragma once

#include <cmath>
#include <numbers>
#include <Eigen/Dense>

namespace ajtwin {

// Log-normal droplet-size law with its standard deviation fixed to a quarter
// of the median.
template <typename Scalar>
struct DropletDistributionT {
  Scalar median;
  Scalar log_mean;
  Scalar log_sigma;

  static DropletDistributionT from_median(Scalar median) {
    using std::log;
    using std::sqrt;
    // std² = m² z (z − 1) with z = exp(σ²); std = m/4 gives z² − z − 1/16 = 0.
    const Scalar z = (Scalar(1) + sqrt(Scalar(1) + Scalar(4) / Scalar(16))) / Scalar(2);
    return {median, log(median), sqrt(log(z))};
  }

  Scalar mode() const {
    using std::exp;
    return exp(log_mean - log_sigma * log_sigma);
  }
};

using DropletDistribution = DropletDistributionT<double>;

// Density in 1/m. Throws Error(invalid_input) for d ≤ 0.
double lognormal_pdf(double d, const DropletDistribution& dist);

// Density of ln d, i.e. p(d)·d.
template <typename Scalar>
Scalar lognormal_log_density(Scalar log_d, const DropletDistributionT<Scalar>& dist) {
  using std::exp;
  using std::sqrt;
  const Scalar z = (log_d - dist.log_mean) / dist.log_sigma;
  return exp(-z * z / Scalar(2)) / (dist.log_sigma * sqrt(Scalar(2) * std::numbers::pi_v<Scalar>));
}

// Gauss–Legendre rule over ln d ∈ [ln lower, ln upper].
struct QuadratureRule {
  Eigen::VectorXd log_nodes;
  Eigen::VectorXd diameters;
  Eigen::VectorXd weights;

  Eigen::Index size() const { return weights.size(); }
};

QuadratureRule make_quadrature(int nodes, double lower = 0.1e-6, double upper = 20e-6);

// Quadrature weights multiplied by the log-space density: ∫ f p dd ≈ Σ mass_j f(d_j).
Eigen::VectorXd distribution_mass(const DropletDistribution& dist, const QuadratureRule& rule);

}  // namespace ajtwin
