#pragma once

#include <bitset>
#include <Eigen/Dense>

namespace ajtwin {

template <typename Scalar>
using Vector5 = Eigen::Matrix<Scalar, 5, 1>;
template <typename Scalar>
using Matrix5 = Eigen::Matrix<Scalar, 5, 5>;

using Vec5 = Vector5<double>;
using Mat5 = Matrix5<double>;

// Index of each latent state inside the state vector and inside θ.
enum StateIndex : int { kDropletMedian = 0, kInkVolume, kTubeDeposit, kNozzleDeposit, kAerosolFraction };
enum InputIndex : int { kAtomizerCurrent = 0, kCarrierFlow, kSheathFlow };
enum OutputIndex : int { kLinewidth = 0, kOverspray, kCarrierPressure, kSheathPressure, kMaterialFlow };

inline constexpr int kStateCount = 5;
inline constexpr int kInputCount = 3;
inline constexpr int kOutputCount = 5;

// Latent printer state in SI: median droplet diameter (m), ink volume (m³),
// tube and nozzle deposit thickness (m), aerosol volume fraction.
template <typename Scalar>
class StateT {
 public:
  using Vector = Vector5<Scalar>;

  StateT() : v_(Vector::Zero()) {}
  explicit StateT(const Vector& v) : v_(v) {}
  StateT(Scalar d_a, Scalar V_l, Scalar dr_tube, Scalar dr_nozzle, Scalar phi_A) {
    v_ << d_a, V_l, dr_tube, dr_nozzle, phi_A;
  }

  Scalar& d_a() { return v_(kDropletMedian); }
  Scalar& V_l() { return v_(kInkVolume); }
  Scalar& dr_tube() { return v_(kTubeDeposit); }
  Scalar& dr_nozzle() { return v_(kNozzleDeposit); }
  Scalar& phi_A() { return v_(kAerosolFraction); }
  Scalar d_a() const { return v_(kDropletMedian); }
  Scalar V_l() const { return v_(kInkVolume); }
  Scalar dr_tube() const { return v_(kTubeDeposit); }
  Scalar dr_nozzle() const { return v_(kNozzleDeposit); }
  Scalar phi_A() const { return v_(kAerosolFraction); }

  const Vector& vector() const { return v_; }
  Vector& vector() { return v_; }

 private:
  Vector v_;
};

// Controlled inputs in SI: atomizer current (A), carrier and sheath flow (m³/s).
template <typename Scalar>
class InputT {
 public:
  using Vector = Eigen::Matrix<Scalar, 3, 1>;

  InputT() : v_(Vector::Zero()) {}
  explicit InputT(const Vector& v) : v_(v) {}
  InputT(Scalar I_A, Scalar Q_c, Scalar Q_s) { v_ << I_A, Q_c, Q_s; }

  Scalar& I_A() { return v_(kAtomizerCurrent); }
  Scalar& Q_c() { return v_(kCarrierFlow); }
  Scalar& Q_s() { return v_(kSheathFlow); }
  Scalar I_A() const { return v_(kAtomizerCurrent); }
  Scalar Q_c() const { return v_(kCarrierFlow); }
  Scalar Q_s() const { return v_(kSheathFlow); }
  Scalar Q_total() const { return v_(kCarrierFlow) + v_(kSheathFlow); }

  const Vector& vector() const { return v_; }
  Vector& vector() { return v_; }

  bool operator==(const InputT& other) const { return v_ == other.v_; }

 private:
  Vector v_;
};

// Measured outputs in SI: linewidth and overspray (m), carrier and sheath
// pressure (Pa), material flow (m³/s).
template <typename Scalar>
class OutputT {
 public:
  using Vector = Vector5<Scalar>;

  OutputT() : v_(Vector::Zero()) {}
  explicit OutputT(const Vector& v) : v_(v) {}
  OutputT(Scalar L_w, Scalar L_o, Scalar P_c, Scalar P_s, Scalar Q_m) {
    v_ << L_w, L_o, P_c, P_s, Q_m;
  }

  Scalar& L_w() { return v_(kLinewidth); }
  Scalar& L_o() { return v_(kOverspray); }
  Scalar& P_c() { return v_(kCarrierPressure); }
  Scalar& P_s() { return v_(kSheathPressure); }
  Scalar& Q_m() { return v_(kMaterialFlow); }
  Scalar L_w() const { return v_(kLinewidth); }
  Scalar L_o() const { return v_(kOverspray); }
  Scalar P_c() const { return v_(kCarrierPressure); }
  Scalar P_s() const { return v_(kSheathPressure); }
  Scalar Q_m() const { return v_(kMaterialFlow); }

  const Vector& vector() const { return v_; }
  Vector& vector() { return v_; }

 private:
  Vector v_;
};

using State = StateT<double>;
using Input = InputT<double>;
using Output = OutputT<double>;

// Drift rates (1/s) multiplying each state, indexed like the state vector.
using Theta = Vec5;

using OutputMask = std::bitset<kOutputCount>;

struct GaussianBelief {
  State mean;
  Mat5 covariance = Mat5::Zero();
};

struct TimeSeriesRecord {
  double t = 0.0;
  Input u;
  Output y;
  OutputMask observed = OutputMask().set();
};

}  // namespace ajtwin
