#include "ajtwin/estimation/estimator.hpp"

#include <array>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>

#include "ajtwin/physics/deposition.hpp"

namespace ajtwin {

GaussianBelief FilterResult::predicted(std::size_t k) const {
  const auto& s = steps.at(k);
  return {State(s.predicted_mean.cwiseProduct(state_scale)),
          state_scale.asDiagonal() * s.predicted_covariance * state_scale.asDiagonal()};
}

GaussianBelief FilterResult::updated(std::size_t k) const {
  const auto& s = steps.at(k);
  return {State(s.mean.cwiseProduct(state_scale)), state_scale.asDiagonal() * s.covariance * state_scale.asDiagonal()};
}

namespace {

Eigen::VectorXd observed_scale(const Vec5& scale, const OutputMask& observed) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(observed.count()));
  Eigen::Index a = 0;
  for (int i = 0; i < kOutputCount; ++i)
    if (observed.test(static_cast<std::size_t>(i))) out(a++) = scale(i);
  return out;
}

}  // namespace

Eigen::VectorXd FilterResult::innovation(std::size_t k) const {
  const auto& s = steps.at(k);
  return s.innovation.cwiseProduct(observed_scale(output_scale, s.observed));
}

Eigen::MatrixXd FilterResult::innovation_covariance(std::size_t k) const {
  const auto& s = steps.at(k);
  const Eigen::VectorXd d = observed_scale(output_scale, s.observed);
  return d.asDiagonal() * s.innovation_covariance * d.asDiagonal();
}

GaussianBelief SmootherResult::smoothed(std::size_t k) const {
  const auto& s = steps.at(k);
  return {State(s.mean.cwiseProduct(state_scale)), state_scale.asDiagonal() * s.covariance * state_scale.asDiagonal()};
}

Mat5 initial_covariance(const ModelParameters& params) {
  return params.estimation.initial_covariance_scale * params.noise.process_covariance();
}

TwinObservation make_observation(const TimeSeriesRecord& record, const TwinFilterModel& model) {
  TwinObservation obs;
  obs.y = model.output_to_normalized(record.y);
  obs.observed = record.observed;
  for (int i = 0; i < kOutputCount; ++i)
    if (!record.observed.test(static_cast<std::size_t>(i))) obs.y(i) = 0.0;
  return obs;
}

State estimate_initial_state(std::span<const TimeSeriesRecord> window, const PrinterModel& model) {
  const auto& p = model.params;
  if (window.size() < 2) throw Error(ErrorKind::invalid_input, "initial fit needs at least two records");
  const std::array<int, 3> free = {kDropletMedian, kInkVolume, kAerosolFraction};
  const Vec5 scale = p.estimation.state_scale;
  const Vec5 sigma = p.noise.sigma_w;
  const StateBox box = physical_box(p);
  std::size_t rows = 1;
  for (const auto& r : window) rows += r.observed.count();

  auto to_state = [&](const Eigen::Vector3d& z) {
    State x;
    for (int a = 0; a < 3; ++a) x.vector()(free[a]) = z(a) * scale(free[a]);
    return x;
  };
  auto residual = [&](const Eigen::Vector3d& z, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const State x = to_state(z);
    r.resize(static_cast<Eigen::Index>(rows));
    if (jac != nullptr) jac->setZero(static_cast<Eigen::Index>(rows), 3);
    Eigen::Index row = 0;
    for (const auto& rec : window) {
      const Vec5 g = output_g(x, rec.u, p).vector();
      Mat5 h;
      if (jac != nullptr) h = jacobian_H(x, rec.u, p);
      for (int i = 0; i < kOutputCount; ++i) {
        if (!rec.observed.test(static_cast<std::size_t>(i))) continue;
        r(row) = (rec.y.vector()(i) - g(i)) / sigma(i);
        if (jac != nullptr)
          for (int a = 0; a < 3; ++a) (*jac)(row, a) = -h(i, free[a]) * scale(free[a]) / sigma(i);
        ++row;
      }
    }
    r(row) = (z(1) * scale(kInkVolume) - p.estimation.initial_fill) / p.estimation.initial_fill_sigma;
    if (jac != nullptr) (*jac)(row, 1) = scale(kInkVolume) / p.estimation.initial_fill_sigma;
  };
  auto project = [&](Eigen::Vector3d& z) {
    for (int a = 0; a < 3; ++a) {
      const int i = free[a];
      z(a) = std::clamp(z(a), box.lower(i) / scale(i), box.upper(i) / scale(i));
    }
  };

  const Eigen::Vector3d lower(box.lower(kDropletMedian) / scale(kDropletMedian), 0.0, 0.0);
  const Eigen::Vector3d upper(box.upper(kDropletMedian) / scale(kDropletMedian),
                              box.upper(kInkVolume) / scale(kInkVolume), 20.0);
  double best_cost = std::numeric_limits<double>::infinity();
  Eigen::Vector3d best = 0.5 * (lower + upper);
  bool any_converged = false;
  for (int corner = 0; corner < 8; ++corner) {
    Eigen::Vector3d z;
    for (int a = 0; a < 3; ++a) {
      const double frac = (corner >> a & 1) != 0 ? 0.75 : 0.25;
      z(a) = lower(a) + frac * (upper(a) - lower(a));
    }
    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    bool converged = false;
    for (int it = 0; it < 200; ++it) {
      residual(z, r, &jac);
      Eigen::Vector3d next = z + jac.completeOrthogonalDecomposition().solve(-r);
      project(next);
      const double moved = (next - z).norm();
      z = next;
      if (moved <= 1e-9 * (1.0 + z.norm())) {
        converged = true;
        break;
      }
    }
    residual(z, r, nullptr);
    const double cost = r.squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = z;
      any_converged = converged;
    }
  }
  if (!any_converged) throw InitializationError(to_state(best), "initial-state fit did not converge in 200 iterations");
  return to_state(best);
}

FilterResult ekf_run(std::span<const TimeSeriesRecord> records, const GaussianBelief& prior, const Theta& theta,
                     const PrinterModel& model) {
  const TwinFilterModel tm(model, theta);
  FilterResult result;
  result.state_scale = tm.state_scale();
  result.output_scale = tm.output_scale();
  result.steps.reserve(records.size());
  ExtendedKalmanFilter<TwinFilterModel> filter(tm, tm.to_normalized(prior.mean),
                                               tm.covariance_to_normalized(prior.covariance));
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (k > 0 && !(records[k].t > records[k - 1].t))
      throw Error(ErrorKind::invalid_input, "record times must increase strictly");
    const TwinObservation obs = make_observation(records[k], tm);
    result.steps.push_back(k == 0 ? filter.start(records[0].u, obs) : filter.advance(records[k - 1].u, records[k].u, obs));
  }
  return result;
}

SmootherResult rts_smooth(const FilterResult& filtered) {
  return {ajtwin::rts_smooth(filtered.steps), filtered.state_scale};
}

bool CalibrationReport::m_step_non_increasing(double slack) const {
  for (std::size_t i = 0; i < process_objective.size(); ++i)
    if (process_objective[i] > process_objective_before[i] + slack * (1.0 + std::abs(process_objective_before[i])))
      return false;
  return true;
}

bool CalibrationReport::objective_non_increasing(double slack) const {
  for (std::size_t i = 1; i < objective.size(); ++i)
    if (objective[i] > objective[i - 1] + slack) return false;
  return true;
}

namespace {

// Accumulates the weighted normal equations of the M-step.
struct MStepSystem {
  Mat5 normal = Mat5::Zero();
  Vec5 rhs = Vec5::Zero();
  double constant = 0.0;
  std::vector<std::pair<Vec5, Mat5>> terms;  // residual without θ, Δt·B
};

MStepSystem build_mstep(std::span<const State> trajectory, std::span<const TimeSeriesRecord> records,
                        const PrinterModel& model) {
  const auto& p = model.params;
  const double dt = p.dt;
  const Vec5 weight = (dt * p.noise.sigma_xi.array().square()).inverse().matrix();
  MStepSystem sys;
  const Theta zero = Theta::Zero();
  double cached_flow = -1.0;
  Eigen::VectorXd capture;
  for (std::size_t j = 0; j + 1 < trajectory.size(); ++j) {
    const Input& u = records[j].u;
    if (u.Q_total() != cached_flow) {
      capture = nozzle_capture_profile(u.Q_total(), p.geometry, model.quadrature);
      cached_flow = u.Q_total();
    }
    const Vec5 f0 = transition_f(trajectory[j], u, zero, model, {}, &capture);
    const Vec5 r = trajectory[j + 1].vector() - trajectory[j].vector() - dt * f0;
    const Mat5 b = dt * theta_sensitivity(trajectory[j], p);
    sys.normal += b.transpose() * weight.asDiagonal() * b;
    sys.rhs += b.transpose() * weight.asDiagonal() * r;
    sys.constant += r.dot(weight.asDiagonal() * r);
    sys.terms.emplace_back(r, b);
  }
  return sys;
}

double weighted_residual(const MStepSystem& sys, const Theta& theta, const Vec5& weight) {
  double total = 0.0;
  for (const auto& [r, b] : sys.terms) {
    const Vec5 e = r - b * theta;
    total += e.dot(weight.asDiagonal() * e);
  }
  return total;
}

// Output misfit plus prior misfit of a trajectory; with the process term this
// is the joint objective that alternating smoothing and M-steps descend.
double trajectory_misfit(std::span<const State> trajectory, std::span<const TimeSeriesRecord> records,
                         const GaussianBelief& prior, const PrinterModel& model) {
  const auto& p = model.params;
  double total = 0.0;
  for (std::size_t k = 0; k < trajectory.size(); ++k) {
    const Vec5 e = (records[k].y.vector() - output_g(trajectory[k], records[k].u, p).vector()).cwiseQuotient(p.noise.sigma_w);
    for (int i = 0; i < kOutputCount; ++i)
      if (records[k].observed.test(static_cast<std::size_t>(i))) total += e(i) * e(i);
  }
  const Vec5 scale = p.estimation.state_scale;
  const Vec5 d0 = (trajectory.front().vector() - prior.mean.vector()).cwiseQuotient(scale);
  const Mat5 p0 = scale.cwiseInverse().asDiagonal() * prior.covariance * scale.cwiseInverse().asDiagonal();
  return total + d0.dot(p0.ldlt().solve(d0));
}

}  // namespace

MStepResult em_maximize(std::span<const State> trajectory, std::span<const TimeSeriesRecord> records,
                        const PrinterModel& model) {
  const MStepSystem sys = build_mstep(trajectory, records, model);
  // Columns are rescaled to unit diagonal so the rank decision is scale free.
  Vec5 col = sys.normal.diagonal().cwiseSqrt();
  for (int i = 0; i < 5; ++i)
    if (!(col(i) > 0.0)) col(i) = 1.0;
  const Mat5 scaled = col.cwiseInverse().asDiagonal() * sys.normal * col.cwiseInverse().asDiagonal();
  const Vec5 solved = scaled.completeOrthogonalDecomposition().solve(col.cwiseInverse().asDiagonal() * sys.rhs);
  MStepResult out;
  out.theta = col.cwiseInverse().asDiagonal() * solved;
  const Vec5 weight = (model.params.dt * model.params.noise.sigma_xi.array().square()).inverse().matrix();
  out.objective = weighted_residual(sys, out.theta, weight);
  return out;
}

double em_objective(std::span<const State> trajectory, std::span<const TimeSeriesRecord> records, const Theta& theta,
                    const PrinterModel& model) {
  const MStepSystem sys = build_mstep(trajectory, records, model);
  const Vec5 weight = (model.params.dt * model.params.noise.sigma_xi.array().square()).inverse().matrix();
  return weighted_residual(sys, theta, weight);
}

CalibrationReport em_calibrate(std::span<const TimeSeriesRecord> records, const Theta& theta0, std::size_t window,
                               const PrinterModel& model) {
  const auto& p = model.params;
  if (window > records.size()) throw Error(ErrorKind::invalid_input, "EM window longer than the record");
  const std::size_t size = window == 0 ? records.size() : window;
  const std::size_t init = static_cast<std::size_t>(p.estimation.init_window);
  if (size < init || size < 2) throw Error(ErrorKind::invalid_input, "EM window shorter than the initial-fit window");
  const auto span = records.subspan(records.size() - size, size);

  CalibrationReport report;
  report.window_begin = records.size() - size;
  report.window_size = size;
  report.thetas.push_back(theta0);
  const GaussianBelief prior{estimate_initial_state(span.first(init), model), initial_covariance(p)};
  Theta theta = theta0;
  for (int it = 0; it < p.estimation.em_max_iterations; ++it) {
    std::vector<State> trajectory;
    try {
      const FilterResult filtered = ekf_run(span, prior, theta, model);
      const SmootherResult smoothed = rts_smooth(filtered);
      trajectory.reserve(smoothed.size());
      for (std::size_t k = 0; k < smoothed.size(); ++k) trajectory.push_back(smoothed.smoothed(k).mean);
    } catch (const Error& e) {
      throw CalibrationError(it, e.what());
    }
    const MStepResult m = em_maximize(trajectory, span, model);
    report.process_objective_before.push_back(em_objective(trajectory, span, theta, model));
    if (!m.theta.allFinite() || !std::isfinite(m.objective)) throw CalibrationError(it, "non-finite M-step result");
    const double change = (m.theta - theta).norm();
    theta = m.theta;
    report.thetas.push_back(theta);
    report.process_objective.push_back(m.objective);
    report.objective.push_back(m.objective + trajectory_misfit(trajectory, span, prior, model));
    if (change < p.estimation.em_tolerance) {
      report.converged = true;
      break;
    }
  }
  return report;
}

Input InputSchedule::at(double offset) const {
  Input u = initial;
  for (const auto& [t, v] : changes)
    if (t <= offset) u = v;
  return u;
}

std::vector<OutputBelief> forecast(const GaussianBelief& belief, const Theta& theta, const InputSchedule& schedule,
                                   int horizon, const PrinterModel& model) {
  if (horizon < 1) throw Error(ErrorKind::invalid_input, "forecast horizon must be at least 1");
  const TwinFilterModel tm(model, theta);
  const double dt = model.params.dt;
  Vec5 z = tm.to_normalized(belief.mean);
  Mat5 cov = tm.covariance_to_normalized(belief.covariance);
  const Mat5 q = tm.process_covariance();
  const Vec5 w = tm.output_scale();
  std::vector<OutputBelief> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (int k = 1; k <= horizon; ++k) {
    const Input u_prev = schedule.at((k - 1) * dt);
    const Input u = schedule.at(k * dt);
    const Mat5 f = tm.transition_jacobian(z, u_prev);
    const StepResult st = tm.step(z, u_prev);
    z = tm.to_normalized(st.next);
    cov = f * cov * f.transpose() + q;
    symmetrize(cov);
    const Mat5 h = tm.output_jacobian(z, u);
    Mat5 out_cov = h * cov * h.transpose() + tm.measurement_covariance();
    symmetrize(out_cov);
    OutputBelief ob;
    ob.state = {st.next, tm.covariance_to_si(cov)};
    ob.mean = output_g(st.next, u, model.params);
    ob.covariance = w.asDiagonal() * out_cov * w.asDiagonal();
    ob.input = u;
    ob.events = st.events;
    out.push_back(ob);
  }
  return out;
}

double chi_square_quantile(double probability, int dof) {
  return boost::math::quantile(boost::math::chi_squared(static_cast<double>(dof)), probability);
}

AnomalyScore anomaly_score(const TwinFilterStep& step) {
  static const std::array<double, 6> threshold = [] {
    std::array<double, 6> t{};
    for (int m = 1; m <= 5; ++m) t[static_cast<std::size_t>(m)] = chi_square_quantile(0.95, m);
    return t;
  }();
  const auto m = step.observed.count();
  if (m == 0) return {0.0, false};
  return {step.nis, step.nis > threshold[m]};
}

}  // namespace ajtwin
