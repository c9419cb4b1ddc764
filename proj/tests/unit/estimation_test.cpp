#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "ajtwin/core/error.hpp"
#include "ajtwin/core/params.hpp"
#include "ajtwin/core/units.hpp"
#include "ajtwin/estimation/estimator.hpp"
#include "ajtwin/estimation/kalman.hpp"
#include "ajtwin/sim/scenario.hpp"
#include "ajtwin/sim/simulator.hpp"
#include "support.hpp"

using namespace ajtwin;
using test::rel_diff;

namespace {

const ModelParameters& params() {
  static const ModelParameters p = default_parameters();
  return p;
}

const PrinterModel& printer() {
  static const PrinterModel m(params());
  return m;
}

Scenario nominal(std::uint64_t seed, double duration) {
  Scenario s = load_scenario(test::data_path("scenarios/nominal.scn"));
  s.seed = seed;
  s.duration = duration;
  return s;
}

// Linear Gaussian model x' = A x + w, y = C x + v; the filter runs it without
// linearization error so the results are exact recursions.
template <int N>
struct LinearModel {
  static constexpr int kStates = N;
  static constexpr int kOutputs = 1;
  using StateVector = Eigen::Matrix<double, N, 1>;
  using StateMatrix = Eigen::Matrix<double, N, N>;
  using OutputVector = Eigen::Matrix<double, 1, 1>;
  using OutputMatrix = Eigen::Matrix<double, 1, N>;
  using OutputCovariance = Eigen::Matrix<double, 1, 1>;
  using Input = double;

  StateMatrix a;
  OutputMatrix c;
  StateMatrix q;
  double r;

  StateVector predict(const StateVector& x, double) const { return a * x; }
  StateMatrix transition_jacobian(const StateVector&, double) const { return a; }
  OutputVector measure(const StateVector& x, double) const { return c * x; }
  OutputMatrix output_jacobian(const StateVector&, double) const { return c; }
  StateMatrix process_covariance() const { return q; }
  OutputCovariance measurement_covariance() const { return OutputCovariance::Constant(r); }
  StateVector constrain(const StateVector& x) const { return x; }
};

template <int N = 1>
std::vector<Observation<N, 1>> scalar_observations(const std::vector<double>& y) {
  std::vector<Observation<N, 1>> obs(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) obs[k].y(0) = y[k];
  return obs;
}

double trace_of(const Mat5& p) { return p.trace(); }

bool positive_semidefinite(const Mat5& p) {
  if ((p - p.transpose()).cwiseAbs().maxCoeff() > 0.0) return false;
  Eigen::SelfAdjointEigenSolver<Mat5> eig(p);
  return eig.eigenvalues().minCoeff() >= -1e-9 * std::abs(p.trace());
}

}  // namespace

TEST_SUITE("kalman") {
  TEST_CASE("random-walk filter reproduces the scalar recursion") {
    LinearModel<1> m;
    m.a << 1.0;
    m.c << 1.0;
    m.q << 0.3;
    m.r = 2.0;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> y(200);
    for (auto& v : y) v = 3.0 + n(rng);
    const auto steps = ekf_run(m, Eigen::Matrix<double, 1, 1>(0.5), Eigen::Matrix<double, 1, 1>(4.0),
                               std::vector<double>(y.size(), 0.0), scalar_observations(y));
    double mean = 0.5, var = 4.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      if (k > 0) var += 0.3;
      const double gain = var / (var + 2.0);
      mean += gain * (y[k] - mean);
      var *= 1.0 - gain;
      CHECK(std::abs(steps[k].mean(0) - mean) <= 1e-12 * std::max(1.0, std::abs(mean)));
      CHECK(std::abs(steps[k].covariance(0, 0) - var) <= 1e-12 * var);
    }
  }

  TEST_CASE("smoother matches a dense batch least-squares solve") {
    constexpr int n = 60;
    LinearModel<2> m;
    m.a << 1.0, 0.5, 0.0, 0.9;
    m.c << 1.0, 0.0;
    m.q << 0.02, 0.0, 0.0, 0.05;
    m.r = 0.4;
    const Eigen::Vector2d m0(1.0, -0.5);
    const Eigen::Matrix2d p0 = Eigen::Vector2d(2.0, 1.0).asDiagonal();
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> y(n);
    Eigen::Vector2d truth = m0;
    for (int k = 0; k < n; ++k) {
      if (k > 0) truth = m.a * truth + Eigen::Vector2d(std::sqrt(0.02) * noise(rng), std::sqrt(0.05) * noise(rng));
      y[static_cast<std::size_t>(k)] = truth(0) + std::sqrt(0.4) * noise(rng);
    }
    const auto filtered = ekf_run(m, m0, p0, std::vector<double>(n, 0.0), scalar_observations<2>(y));
    const auto smoothed = rts_smooth(filtered);

    // Information form of the joint posterior over all states.
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    Eigen::VectorXd vec = Eigen::VectorXd::Zero(2 * n);
    const Eigen::Matrix2d p0_inv = p0.inverse();
    const Eigen::Matrix2d q_inv = m.q.inverse();
    info.block<2, 2>(0, 0) += p0_inv;
    vec.segment<2>(0) += p0_inv * m0;
    for (int k = 0; k < n; ++k) {
      info.block<2, 2>(2 * k, 2 * k) += m.c.transpose() * m.c / m.r;
      vec.segment<2>(2 * k) += m.c.transpose() * y[static_cast<std::size_t>(k)] / m.r;
      if (k > 0) {
        info.block<2, 2>(2 * k, 2 * k) += q_inv;
        info.block<2, 2>(2 * k - 2, 2 * k - 2) += m.a.transpose() * q_inv * m.a;
        info.block<2, 2>(2 * k, 2 * k - 2) -= q_inv * m.a;
        info.block<2, 2>(2 * k - 2, 2 * k) -= m.a.transpose() * q_inv;
      }
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(info);
    const Eigen::VectorXd batch = llt.solve(vec);
    const Eigen::MatrixXd batch_cov = llt.solve(Eigen::MatrixXd::Identity(2 * n, 2 * n));
    double worst_mean = 0.0, worst_cov = 0.0;
    for (int k = 0; k < n; ++k) {
      worst_mean = std::max(worst_mean, (smoothed[static_cast<std::size_t>(k)].mean - batch.segment<2>(2 * k)).cwiseAbs().maxCoeff());
      worst_cov = std::max(worst_cov, (smoothed[static_cast<std::size_t>(k)].covariance - batch_cov.block<2, 2>(2 * k, 2 * k)).cwiseAbs().maxCoeff());
    }
    CHECK(worst_mean < 1e-8);
    CHECK(worst_cov < 1e-8);
    CHECK(smoothed.back().mean == filtered.back().mean);
    CHECK(smoothed.back().covariance == filtered.back().covariance);
  }

  TEST_CASE("singular innovation covariance reports the step") {
    LinearModel<1> m;
    m.a << 1.0;
    m.c << 1.0;
    m.q << 0.0;
    m.r = 0.0;
    const auto obs = scalar_observations({1.0, 1.0, 1.0});
    try {
      ekf_run(m, Eigen::Matrix<double, 1, 1>(0.0), Eigen::Matrix<double, 1, 1>(1.0), std::vector<double>(3, 0.0), obs);
      FAIL("expected a conditioning error");
    } catch (const ConditioningError& e) {
      CHECK(e.step() == 1);
    }
  }
}

TEST_SUITE("filter") {
  TEST_CASE("unobserved steps leave the prediction untouched") {
    const auto trace = simulate(nominal(7, 20.0), params());
    auto records = trace.records();
    records[5].observed.reset();
    const GaussianBelief prior{trace.state[0], initial_covariance(params())};
    const auto result = ekf_run(records, prior, Theta::Zero(), printer());
    CHECK(result.steps[5].mean == result.steps[5].predicted_mean);
    CHECK(result.steps[5].covariance == result.steps[5].predicted_covariance);
    CHECK(result.steps[5].innovation.size() == 0);
    CHECK(anomaly_score(result.steps[5]).nis == 0.0);
  }

  TEST_CASE("masked outputs shrink the innovation to the observed rows") {
    const auto trace = simulate(nominal(7, 20.0), params());
    auto records = trace.records();
    records[3].observed.reset(kLinewidth);
    records[3].observed.reset(kMaterialFlow);
    const GaussianBelief prior{trace.state[0], initial_covariance(params())};
    const auto result = ekf_run(records, prior, Theta::Zero(), printer());
    CHECK(result.innovation(3).size() == 3);
    CHECK(result.innovation_covariance(3).rows() == 3);
    CHECK(result.steps[4].innovation.size() == 5);
  }

  TEST_CASE("uninformative measurements leave the prediction in place") {
    ModelParameters p = default_parameters();
    p.noise.sigma_w *= 1e12;
    const PrinterModel model(p);
    const auto trace = simulate(nominal(7, 30.0), params());
    const GaussianBelief prior{trace.state[0], initial_covariance(p)};
    const auto result = ekf_run(trace.records(), prior, Theta::Zero(), model);
    for (const auto& s : result.steps) {
      CHECK((s.mean - s.predicted_mean).cwiseAbs().maxCoeff() <= 1e-12 * s.predicted_mean.cwiseAbs().maxCoeff());
      CHECK((s.covariance - s.predicted_covariance).cwiseAbs().maxCoeff() <= 1e-12 * s.predicted_covariance.trace());
    }
  }

  TEST_CASE("covariances stay symmetric positive semidefinite and smoothing shrinks them") {
    const auto trace = simulate(nominal(7, 600.0), params());
    const auto records = trace.records();
    const GaussianBelief prior{estimate_initial_state(std::span(records).first(10), printer()), initial_covariance(params())};
    const auto filtered = ekf_run(records, prior, Theta::Zero(), printer());
    const auto smoothed = rts_smooth(filtered);
    for (std::size_t k = 0; k < filtered.size(); ++k) {
      CHECK(positive_semidefinite(filtered.steps[k].covariance));
      CHECK(positive_semidefinite(filtered.steps[k].predicted_covariance));
      CHECK(positive_semidefinite(smoothed.steps[k].covariance));
      CHECK(trace_of(smoothed.steps[k].covariance) <= trace_of(filtered.steps[k].covariance) + 1e-9);
    }
    CHECK(smoothed.steps.back().mean == filtered.steps.back().mean);
  }

  TEST_CASE("closed loop beats open loop on every state") {
    const auto trace = simulate(nominal(7, 600.0), params());
    const auto records = trace.records();
    const State x0 = estimate_initial_state(std::span(records).first(10), printer());
    const auto filtered = ekf_run(records, {x0, initial_covariance(params())}, Theta::Zero(), printer());
    Vec5 closed = Vec5::Zero(), open = Vec5::Zero();
    State drift = x0;
    for (std::size_t k = 0; k < records.size(); ++k) {
      if (k > 0) drift = step_euler(drift, records[k - 1].u, Theta::Zero(), params().dt, printer()).next;
      closed += (filtered.updated(k).mean.vector() - trace.state[k].vector()).array().square().matrix();
      open += (drift.vector() - trace.state[k].vector()).array().square().matrix();
    }
    for (int i = 0; i < 5; ++i) {
      CAPTURE(i);
      CHECK(closed(i) < open(i));
    }
  }

  TEST_CASE("filtering is bitwise deterministic") {
    const auto trace = simulate(nominal(7, 200.0), params());
    const auto records = trace.records();
    const GaussianBelief prior{trace.state[0], initial_covariance(params())};
    const auto a = ekf_run(records, prior, Theta::Zero(), printer());
    const auto b = ekf_run(records, prior, Theta::Zero(), printer());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a.steps[k].mean == b.steps[k].mean);
      CHECK(a.steps[k].covariance == b.steps[k].covariance);
      CHECK(a.steps[k].nis == b.steps[k].nis);
    }
  }

  TEST_CASE("record times must increase") {
    auto records = simulate(nominal(7, 10.0), params()).records();
    records[4].t = records[3].t;
    const GaussianBelief prior{State(3e-6, 1e-6, 0.0, 0.0, 5e-7), initial_covariance(params())};
    CHECK_THROWS_AS(ekf_run(records, prior, Theta::Zero(), printer()), Error);
  }
}

TEST_SUITE("initial fit") {
  TEST_CASE("noiseless window recovers the state") {
    const State truth(4.2e-6, 1e-6, 0.0, 0.0, 6.5e-7);
    std::vector<TimeSeriesRecord> window;
    for (int k = 0; k < 10; ++k) {
      TimeSeriesRecord r;
      r.t = k;
      r.u = Input((360.0 + 3.0 * k) * units::mA, (22.0 + 0.5 * k) * units::sccm, 50.0 * units::sccm);
      r.y = output_g(truth, r.u, params());
      window.push_back(r);
    }
    const State x = estimate_initial_state(window, printer());
    const Vec5 scale = params().estimation.state_scale;
    CHECK(((x.vector() - truth.vector()).cwiseQuotient(scale)).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(x.dr_tube() == 0.0);
    CHECK(x.dr_nozzle() == 0.0);
  }

  TEST_CASE("deposit states are pinned to zero on noisy data") {
    const auto records = simulate(nominal(3, 10.0), params()).records();
    const State x = estimate_initial_state(records, printer());
    CHECK(x.dr_tube() == 0.0);
    CHECK(x.dr_nozzle() == 0.0);
  }

  TEST_CASE("a single record is rejected") {
    const auto records = simulate(nominal(3, 2.0), params()).records();
    CHECK_THROWS_AS(estimate_initial_state(std::span(records).first(1), printer()), Error);
  }

  TEST_CASE("seed 42 window recovers the droplet median within five percent") {
    Scenario s = nominal(42, 10.0);
    s.process_noise_scale = 0.0;
    const auto trace = simulate(s, params());
    const State x = estimate_initial_state(trace.records(), printer());
    const double error = (x.d_a() - trace.state[0].d_a()) / trace.state[0].d_a();
    CAPTURE(error);
    CHECK(std::abs(error) < 0.05);
  }

  TEST_CASE("droplet median error is within five percent over many seeds") {
    std::vector<double> errors;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      Scenario s = nominal(seed, 10.0);
      s.process_noise_scale = 0.0;
      const auto trace = simulate(s, params());
      const State x = estimate_initial_state(trace.records(), printer());
      errors.push_back(std::abs(x.d_a() - trace.state[0].d_a()) / trace.state[0].d_a());
    }
    std::nth_element(errors.begin(), errors.begin() + 50, errors.end());
    CAPTURE(errors[50]);
    CHECK(errors[50] < 0.05);
  }
}

TEST_SUITE("calibration") {
  TEST_CASE("noiseless data without drift calibrates to zero") {
    Scenario s = nominal(1, 300.0);
    s.process_noise_scale = 0.0;
    s.output_noise_scale = 0.0;
    const auto records = simulate(s, params()).records();
    const auto report = em_calibrate(records, Theta::Zero(), 0, printer());
    CHECK(report.final_theta().cwiseAbs().maxCoeff() < 1e-8);
    CHECK(report.converged);
  }

  TEST_CASE("M-step solves its least-squares problem exactly") {
    const auto trace = simulate(nominal(4, 300.0), params());
    const auto records = trace.records();
    const auto m = em_maximize(trace.state, records, printer());
    CHECK(m.objective == doctest::Approx(em_objective(trace.state, records, m.theta, printer())).epsilon(1e-12));
    CHECK(m.objective <= em_objective(trace.state, records, Theta::Zero(), printer()));
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      Theta nudged = m.theta;
      for (int i = 0; i < 5; ++i) nudged(i) += 1e-3 * std::abs(m.theta(i)) * n(rng) + 1e-9 * n(rng);
      CHECK(m.objective <= em_objective(trace.state, records, nudged, printer()) * (1.0 + 1e-12));
    }
  }

  TEST_CASE("objective does not increase across iterations on a drifting run") {
    Scenario s = load_scenario(test::data_path("scenarios/drift_da.scn"));
    s.duration = 600.0;
    const auto records = simulate(s, params()).records();
    const auto report = em_calibrate(records, Theta::Zero(), 0, printer());
    CHECK(report.iterations() >= 1);
    CHECK(report.thetas.size() == report.iterations() + 1);
    CHECK(report.process_objective.size() == report.iterations());
    CHECK(report.objective_non_increasing(1e-9));
    CHECK(report.m_step_non_increasing(1e-12));
  }

  TEST_CASE("every M-step lowers the process objective of its own trajectory") {
    Scenario s = load_scenario(test::data_path("scenarios/nominal.scn"));
    const auto records = simulate(s, params()).records();
    const auto report = em_calibrate(records, Theta::Zero(), 0, printer());
    REQUIRE(report.process_objective_before.size() == report.iterations());
    CHECK(report.m_step_non_increasing(1e-12));
    for (std::size_t i = 0; i < report.iterations(); ++i)
      CHECK(report.process_objective[i] <= report.process_objective_before[i] * (1.0 + 1e-12));
  }

  TEST_CASE("window bounds are checked") {
    const auto records = simulate(nominal(1, 20.0), params()).records();
    CHECK_THROWS_AS(em_calibrate(records, Theta::Zero(), 100, printer()), Error);
    CHECK_THROWS_AS(em_calibrate(records, Theta::Zero(), 5, printer()), Error);
    const auto report = em_calibrate(records, Theta::Zero(), 12, printer());
    CHECK(report.window_begin == records.size() - 12);
  }
}

TEST_SUITE("forecast") {
  TEST_CASE("one noiseless step is the Euler step mapped through the outputs") {
    ModelParameters p = default_parameters();
    p.noise.sigma_xi.setZero();
    const PrinterModel model(p);
    const GaussianBelief belief{State(3e-6, 1e-6, 0.0, 0.0, 0.0), Mat5::Zero()};
    const InputSchedule schedule{Input(0.37, 25.0 * units::sccm, 50.0 * units::sccm), {}};
    const auto out = forecast(belief, Theta::Zero(), schedule, 1, model);
    REQUIRE(out.size() == 1);
    const State next = step_euler(belief.mean, schedule.initial, Theta::Zero(), p.dt, model).next;
    CHECK(out[0].state.mean.vector() == next.vector());
    CHECK(out[0].mean.vector() == output_g(next, schedule.initial, p).vector());
    CHECK(out[0].state.covariance.cwiseAbs().maxCoeff() == 0.0);
    const Vec5 var = p.noise.sigma_w.array().square().matrix();
    for (int i = 0; i < 5; ++i) CHECK(rel_diff(out[0].covariance(i, i), var(i)) < 1e-12);
  }

  TEST_CASE("output variance grows with the horizon") {
    const GaussianBelief belief{State(3e-6, 1e-6, 0.0, 0.0, 5e-7), Mat5::Zero()};
    const InputSchedule schedule{Input(0.37, 25.0 * units::sccm, 50.0 * units::sccm), {}};
    const auto out = forecast(belief, Theta::Zero(), schedule, 300, printer());
    for (std::size_t k = 1; k < out.size(); ++k)
      for (int i = 0; i < 5; ++i) CHECK(out[k].covariance(i, i) >= out[k - 1].covariance(i, i) * (1.0 - 1e-12));
  }

  TEST_CASE("schedule changes apply at their offsets") {
    const GaussianBelief belief{State(3e-6, 1e-6, 0.0, 0.0, 5e-7), Mat5::Zero()};
    const Input a(0.37, 25.0 * units::sccm, 50.0 * units::sccm);
    const Input b(0.37, 30.0 * units::sccm, 50.0 * units::sccm);
    const InputSchedule schedule{a, {{5.0, b}}};
    const auto out = forecast(belief, Theta::Zero(), schedule, 8, printer());
    CHECK(out[3].input.Q_c() == a.Q_c());
    CHECK(out[4].input.Q_c() == b.Q_c());
    CHECK_THROWS_AS(forecast(belief, Theta::Zero(), schedule, 0, printer()), Error);
  }
}

TEST_SUITE("anomaly") {
  TEST_CASE("chi-square thresholds") {
    CHECK(chi_square_quantile(0.95, 5) == doctest::Approx(11.0705).epsilon(1e-5));
    CHECK(chi_square_quantile(0.95, 1) == doctest::Approx(3.8415).epsilon(1e-4));
  }

  TEST_CASE("zero innovation scores zero") {
    const State x(3e-6, 1e-6, 0.0, 0.0, 5e-7);
    TimeSeriesRecord r;
    r.u = Input(0.37, 25.0 * units::sccm, 50.0 * units::sccm);
    r.y = output_g(x, r.u, params());
    const auto result = ekf_run(std::vector{r}, {x, initial_covariance(params())}, Theta::Zero(), printer());
    const auto score = anomaly_score(result.steps[0]);
    CHECK(score.nis == doctest::Approx(0.0).epsilon(1e-20));
    CHECK_FALSE(score.flag);
  }

  TEST_CASE("flag threshold follows the observed count") {
    TwinFilterStep step;
    step.observed.set();
    step.nis = 11.06;
    CHECK_FALSE(anomaly_score(step).flag);
    step.nis = 11.08;
    CHECK(anomaly_score(step).flag);
    step.observed.reset(0);
    step.observed.reset(1);
    step.nis = 7.9;
    CHECK(anomaly_score(step).flag);
  }
}
