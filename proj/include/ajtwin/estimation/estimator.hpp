#pragma once

#include <span>
#include <string>
#include <vector>

#include "ajtwin/core/types.hpp"
#include "ajtwin/estimation/kalman.hpp"
#include "ajtwin/estimation/twin_model.hpp"
#include "ajtwin/physics/model.hpp"

namespace ajtwin {

using TwinFilterStep = FilterStep<5, 5>;
using TwinSmoothedStep = SmoothedStep<5, 5>;
using TwinObservation = Observation<5, 5>;

// Filter output in the filter's normalized coordinates, with SI accessors.
struct FilterResult {
  std::vector<TwinFilterStep> steps;
  Vec5 state_scale;
  Vec5 output_scale;

  std::size_t size() const { return steps.size(); }
  GaussianBelief predicted(std::size_t k) const;
  GaussianBelief updated(std::size_t k) const;
  // Observed rows only, SI.
  Eigen::VectorXd innovation(std::size_t k) const;
  Eigen::MatrixXd innovation_covariance(std::size_t k) const;
};

struct SmootherResult {
  std::vector<TwinSmoothedStep> steps;
  Vec5 state_scale;

  std::size_t size() const { return steps.size(); }
  GaussianBelief smoothed(std::size_t k) const;
};

// P₀ = initial_covariance_scale · Σ_ξ.
Mat5 initial_covariance(const ModelParameters& params);

TwinObservation make_observation(const TimeSeriesRecord& record, const TwinFilterModel& model);

class InitializationError : public Error {
 public:
  InitializationError(const State& best, const std::string& what)
      : Error(ErrorKind::initialization_failure, what), best_(best) {}
  const State& best_iterate() const { return best_; }

 private:
  State best_;
};

// Least-squares fit of the first records with both deposits pinned at zero.
// The ink volume does not enter the outputs, so a weak prior at the
// configured initial fill anchors it.
State estimate_initial_state(std::span<const TimeSeriesRecord> window, const PrinterModel& model);

FilterResult ekf_run(std::span<const TimeSeriesRecord> records, const GaussianBelief& prior, const Theta& theta,
                     const PrinterModel& model);
SmootherResult rts_smooth(const FilterResult& filtered);

struct CalibrationReport {
  // thetas[0] is the starting value; thetas[i+1] the i-th M-step result.
  std::vector<Theta> thetas;
  // Joint objective after each M-step: output, prior and process misfit of
  // the smoothed trajectory at the new θ. Non-increasing across iterations.
  std::vector<double> objective;
  // The process term alone, which is what the M-step minimizes over θ, at
  // the new θ and at the θ that produced the trajectory.
  std::vector<double> process_objective;
  std::vector<double> process_objective_before;
  bool converged = false;
  std::size_t window_begin = 0;
  std::size_t window_size = 0;

  const Theta& final_theta() const { return thetas.back(); }
  std::size_t iterations() const { return objective.size(); }
  bool objective_non_increasing(double slack = 1e-9) const;
  // Every M-step lowered (or kept) the process objective of its trajectory.
  bool m_step_non_increasing(double slack = 1e-9) const;
};

class CalibrationError : public Error {
 public:
  CalibrationError(int iteration, const std::string& what)
      : Error(ErrorKind::calibration, what + " (EM iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}
  int iteration() const { return iteration_; }

 private:
  int iteration_;
};

// θ that minimizes Σ‖x_{j+1} − f_d(x_j, u_j; θ)‖² weighted by (Δt Σ_ξ)⁻¹ over
// a given trajectory, with the minimized value.
struct MStepResult {
  Theta theta;
  double objective;
};
MStepResult em_maximize(std::span<const State> trajectory, std::span<const TimeSeriesRecord> records,
                        const PrinterModel& model);
double em_objective(std::span<const State> trajectory, std::span<const TimeSeriesRecord> records,
                    const Theta& theta, const PrinterModel& model);

// window = 0 uses every record; otherwise the last `window` records.
CalibrationReport em_calibrate(std::span<const TimeSeriesRecord> records, const Theta& theta0, std::size_t window,
                               const PrinterModel& model);

// Piecewise-constant inputs, changes keyed by offset (s) from the start.
struct InputSchedule {
  Input initial;
  std::vector<std::pair<double, Input>> changes;

  Input at(double offset) const;
};

struct OutputBelief {
  Output mean;
  Mat5 covariance = Mat5::Zero();
  GaussianBelief state;
  Input input;
  ClampEvents events;
};

// Entry k (1..K) is the belief k steps after `belief`, using the input in
// force at the previous step for the transition and the current one for the
// output.
std::vector<OutputBelief> forecast(const GaussianBelief& belief, const Theta& theta, const InputSchedule& schedule,
                                   int horizon, const PrinterModel& model);

struct AnomalyScore {
  double nis = 0.0;
  bool flag = false;
};

double chi_square_quantile(double probability, int dof);
AnomalyScore anomaly_score(const TwinFilterStep& step);

}  // namespace ajtwin
