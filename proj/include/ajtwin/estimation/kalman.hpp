#pragma once

#include <bitset>
#include <concepts>
#include <vector>
#include <Eigen/Dense>

#include "ajtwin/core/error.hpp"

namespace ajtwin {

template <typename M>
concept FilterModel = requires(const M& m, const typename M::StateVector& x, const typename M::Input& u) {
  { M::kStates } -> std::convertible_to<int>;
  { M::kOutputs } -> std::convertible_to<int>;
  { m.predict(x, u) } -> std::convertible_to<typename M::StateVector>;
  { m.transition_jacobian(x, u) } -> std::convertible_to<typename M::StateMatrix>;
  { m.measure(x, u) } -> std::convertible_to<typename M::OutputVector>;
  { m.output_jacobian(x, u) } -> std::convertible_to<typename M::OutputMatrix>;
  { m.process_covariance() } -> std::convertible_to<typename M::StateMatrix>;
  { m.measurement_covariance() } -> std::convertible_to<typename M::OutputCovariance>;
  { m.constrain(x) } -> std::convertible_to<typename M::StateVector>;
};

template <int N, int M>
struct Observation {
  Eigen::Matrix<double, M, 1> y = Eigen::Matrix<double, M, 1>::Zero();
  std::bitset<M> observed = std::bitset<M>().set();
};

template <int N, int M>
struct FilterStep {
  Eigen::Matrix<double, N, 1> predicted_mean;
  Eigen::Matrix<double, N, N> predicted_covariance;
  Eigen::Matrix<double, N, 1> mean;
  Eigen::Matrix<double, N, N> covariance;
  // Jacobian of the transition that produced this step's prediction.
  Eigen::Matrix<double, N, N> transition_jacobian = Eigen::Matrix<double, N, N>::Identity();
  // Observed rows only, in output order.
  Eigen::VectorXd innovation;
  Eigen::MatrixXd innovation_covariance;
  std::bitset<M> observed;
  double nis = 0.0;
};

template <int N, int M>
struct SmoothedStep {
  Eigen::Matrix<double, N, 1> mean;
  Eigen::Matrix<double, N, N> covariance;
  Eigen::Matrix<double, N, N> gain = Eigen::Matrix<double, N, N>::Zero();
};

template <typename Matrix>
void symmetrize(Matrix& p) {
  p = (0.5 * (p + p.transpose())).eval();
}

// Sequential extended Kalman filter. The first record is an update of the
// prior; every later record is a predict from the previous input followed by
// an update.
template <FilterModel Model>
class ExtendedKalmanFilter {
 public:
  static constexpr int N = Model::kStates;
  static constexpr int M = Model::kOutputs;
  using StateVector = Eigen::Matrix<double, N, 1>;
  using StateMatrix = Eigen::Matrix<double, N, N>;
  using Step = FilterStep<N, M>;
  using Obs = Observation<N, M>;

  ExtendedKalmanFilter(const Model& model, const StateVector& mean, const StateMatrix& covariance)
      : model_(&model), mean_(mean), covariance_(covariance) {}

  const StateVector& mean() const { return mean_; }
  const StateMatrix& covariance() const { return covariance_; }
  std::size_t steps() const { return step_; }

  // Prior update at the first record.
  Step start(const typename Model::Input& u, const Obs& obs) {
    Step s;
    s.predicted_mean = mean_;
    s.predicted_covariance = covariance_;
    update(s, u, obs);
    return s;
  }

  Step advance(const typename Model::Input& u_prev, const typename Model::Input& u, const Obs& obs) {
    Step s;
    s.transition_jacobian = model_->transition_jacobian(mean_, u_prev);
    s.predicted_mean = model_->predict(mean_, u_prev);
    s.predicted_covariance =
        s.transition_jacobian * covariance_ * s.transition_jacobian.transpose() + model_->process_covariance();
    symmetrize(s.predicted_covariance);
    update(s, u, obs);
    return s;
  }

 private:
  void update(Step& s, const typename Model::Input& u, const Obs& obs) {
    const int m = static_cast<int>(obs.observed.count());
    s.observed = obs.observed;
    s.mean = s.predicted_mean;
    s.covariance = s.predicted_covariance;
    if (m > 0) {
      const auto full_h = model_->output_jacobian(s.predicted_mean, u);
      const auto full_r = model_->measurement_covariance();
      const auto full_y = model_->measure(s.predicted_mean, u);
      Eigen::MatrixXd h(m, N);
      Eigen::MatrixXd r = Eigen::MatrixXd::Zero(m, m);
      Eigen::VectorXd nu(m);
      std::vector<int> rows;
      for (int i = 0; i < M; ++i)
        if (obs.observed.test(static_cast<std::size_t>(i))) rows.push_back(i);
      for (int a = 0; a < m; ++a) {
        h.row(a) = full_h.row(rows[a]);
        nu(a) = obs.y(rows[a]) - full_y(rows[a]);
        for (int b = 0; b < m; ++b) r(a, b) = full_r(rows[a], rows[b]);
      }
      Eigen::MatrixXd innovation_cov = h * s.predicted_covariance * h.transpose() + r;
      symmetrize(innovation_cov);
      Eigen::LLT<Eigen::MatrixXd> llt(innovation_cov);
      if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
        throw ConditioningError(step_, "innovation covariance is numerically singular");
      const Eigen::MatrixXd gain = llt.solve(h * s.predicted_covariance).transpose();
      s.mean = s.predicted_mean + gain * nu;
      const StateMatrix i_kh = StateMatrix::Identity() - gain * h;
      s.covariance = i_kh * s.predicted_covariance * i_kh.transpose() + gain * r * gain.transpose();
      symmetrize(s.covariance);
      s.nis = nu.dot(llt.solve(nu));
      s.innovation = nu;
      s.innovation_covariance = innovation_cov;
    }
    s.mean = model_->constrain(s.mean);
    mean_ = s.mean;
    covariance_ = s.covariance;
    ++step_;
  }

  const Model* model_;
  StateVector mean_;
  StateMatrix covariance_;
  std::size_t step_ = 0;
};

template <FilterModel Model>
std::vector<FilterStep<Model::kStates, Model::kOutputs>> ekf_run(
    const Model& model, const Eigen::Matrix<double, Model::kStates, 1>& mean,
    const Eigen::Matrix<double, Model::kStates, Model::kStates>& covariance,
    const std::vector<typename Model::Input>& inputs,
    const std::vector<Observation<Model::kStates, Model::kOutputs>>& observations) {
  if (inputs.size() != observations.size())
    throw Error(ErrorKind::invalid_input, "inputs and observations differ in length");
  std::vector<FilterStep<Model::kStates, Model::kOutputs>> out;
  out.reserve(inputs.size());
  ExtendedKalmanFilter<Model> filter(model, mean, covariance);
  for (std::size_t k = 0; k < inputs.size(); ++k)
    out.push_back(k == 0 ? filter.start(inputs[0], observations[0])
                         : filter.advance(inputs[k - 1], inputs[k], observations[k]));
  return out;
}

// Backward Rauch–Tung–Striebel pass over a complete filter run.
template <int N, int M>
std::vector<SmoothedStep<N, M>> rts_smooth(const std::vector<FilterStep<N, M>>& filtered) {
  using StateMatrix = Eigen::Matrix<double, N, N>;
  std::vector<SmoothedStep<N, M>> out(filtered.size());
  if (filtered.empty()) return out;
  const std::size_t last = filtered.size() - 1;
  out[last].mean = filtered[last].mean;
  out[last].covariance = filtered[last].covariance;
  for (std::size_t k = last; k-- > 0;) {
    const auto& now = filtered[k];
    const auto& next = filtered[k + 1];
    Eigen::LLT<StateMatrix> llt(next.predicted_covariance);
    if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-14))
      throw ConditioningError(k + 1, "predicted covariance is numerically singular");
    // J = P_k Fᵀ P_pred⁻¹, solved as P_pred Jᵀ = F P_k.
    const StateMatrix gain = llt.solve(next.transition_jacobian * now.covariance).transpose();
    out[k].gain = gain;
    out[k].mean = now.mean + gain * (out[k + 1].mean - next.predicted_mean);
    out[k].covariance = now.covariance + gain * (out[k + 1].covariance - next.predicted_covariance) * gain.transpose();
    symmetrize(out[k].covariance);
  }
  return out;
}

}  // namespace ajtwin
