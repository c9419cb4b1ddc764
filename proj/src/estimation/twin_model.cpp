#include "ajtwin/estimation/twin_model.hpp"

#include "ajtwin/physics/deposition.hpp"

namespace ajtwin {

TwinFilterModel::TwinFilterModel(const PrinterModel& model, const Theta& theta)
    : model_(&model),
      theta_(theta),
      state_scale_(model.params.estimation.state_scale),
      output_scale_(model.params.noise.sigma_w),
      box_(estimation_box(model.params)) {}

const Eigen::VectorXd& TwinFilterModel::capture(const Input& u) const {
  if (u.Q_total() != cached_flow_) {
    cached_capture_ = nozzle_capture_profile(u.Q_total(), model_->params.geometry, model_->quadrature);
    cached_flow_ = u.Q_total();
  }
  return cached_capture_;
}

StepResult TwinFilterModel::step(const Vec5& z, const Input& u) const {
  return step_euler(to_state(z), u, theta_, model_->params.dt, *model_, box_, {}, &capture(u));
}

Vec5 TwinFilterModel::predict(const Vec5& z, const Input& u) const { return to_normalized(step(z, u).next); }

Mat5 TwinFilterModel::transition_jacobian(const Vec5& z, const Input& u) const {
  const Mat5 jf = jacobian_F(to_state(z), u, theta_, *model_, &capture(u));
  return Mat5::Identity() + model_->params.dt * state_scale_.cwiseInverse().asDiagonal() * jf * state_scale_.asDiagonal();
}

Vec5 TwinFilterModel::measure(const Vec5& z, const Input& u) const {
  return output_to_normalized(output_g(to_state(z), u, model_->params));
}

Mat5 TwinFilterModel::output_jacobian(const Vec5& z, const Input& u) const {
  const Mat5 jh = jacobian_H(to_state(z), u, model_->params);
  return output_scale_.cwiseInverse().asDiagonal() * jh * state_scale_.asDiagonal();
}

Mat5 TwinFilterModel::process_covariance() const {
  const Vec5 sigma = model_->params.noise.sigma_xi.cwiseQuotient(state_scale_);
  return (model_->params.dt * sigma.array().square()).matrix().asDiagonal();
}

Vec5 TwinFilterModel::constrain(const Vec5& z) const {
  Vec5 out = z;
  for (int i = 0; i < kStates; ++i) {
    const double x = z(i) * state_scale_(i);
    if (x < box_.lower(i)) out(i) = box_.lower(i) / state_scale_(i);
    if (x > box_.upper(i)) out(i) = box_.upper(i) / state_scale_(i);
  }
  return out;
}

Mat5 TwinFilterModel::covariance_to_normalized(const Mat5& p) const {
  const Vec5 inv = state_scale_.cwiseInverse();
  return inv.asDiagonal() * p * inv.asDiagonal();
}

Mat5 TwinFilterModel::covariance_to_si(const Mat5& p) const {
  return state_scale_.asDiagonal() * p * state_scale_.asDiagonal();
}

}  // namespace ajtwin
