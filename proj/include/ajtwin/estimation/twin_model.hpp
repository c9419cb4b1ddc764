#pragma once

#include "ajtwin/core/types.hpp"
#include "ajtwin/physics/model.hpp"

namespace ajtwin {

// The printer model seen by the generic filter: states divided by their
// nominal scale and outputs divided by their noise std, so every covariance
// the filter touches is O(1).
class TwinFilterModel {
 public:
  static constexpr int kStates = 5;
  static constexpr int kOutputs = 5;
  using StateVector = Vec5;
  using StateMatrix = Mat5;
  using OutputVector = Vec5;
  using OutputMatrix = Mat5;
  using OutputCovariance = Mat5;
  using Input = ajtwin::Input;

  TwinFilterModel(const PrinterModel& model, const Theta& theta);

  Vec5 predict(const Vec5& z, const Input& u) const;
  Mat5 transition_jacobian(const Vec5& z, const Input& u) const;
  Vec5 measure(const Vec5& z, const Input& u) const;
  Mat5 output_jacobian(const Vec5& z, const Input& u) const;
  Mat5 process_covariance() const;
  Mat5 measurement_covariance() const { return Mat5::Identity(); }
  Vec5 constrain(const Vec5& z) const;

  // Prediction plus the clamp events it raised.
  StepResult step(const Vec5& z, const Input& u) const;

  Vec5 to_normalized(const State& x) const { return x.vector().cwiseQuotient(state_scale_); }
  State to_state(const Vec5& z) const { return State(z.cwiseProduct(state_scale_)); }
  Mat5 covariance_to_normalized(const Mat5& p) const;
  Mat5 covariance_to_si(const Mat5& p) const;
  Vec5 output_to_normalized(const Output& y) const { return y.vector().cwiseQuotient(output_scale_); }

  const Vec5& state_scale() const { return state_scale_; }
  const Vec5& output_scale() const { return output_scale_; }
  const Theta& theta() const { return theta_; }
  const PrinterModel& model() const { return *model_; }

 private:
  const Eigen::VectorXd& capture(const Input& u) const;

  const PrinterModel* model_;
  Theta theta_;
  Vec5 state_scale_;
  Vec5 output_scale_;
  StateBox box_;
  // Nozzle capture depends only on total flow; cached for the last flow seen.
  mutable double cached_flow_ = -1.0;
  mutable Eigen::VectorXd cached_capture_;
};

}  // namespace ajtwin
