#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "ntks/shallownet.hpp"
#include "ntks/spectral.hpp"

namespace ntks {

// Fixed matrix J (m x max(m, p), zero-padded) with spectral bound beta.
struct ReferenceJacobian {
  Mat matrix;
  double beta = 0.0;
  std::shared_ptr<const SpectralDecomposition> decomposition;
};

// Pads J to max(m, p) columns, decomposes it and checks ||J|| <= beta
// (1e-10 relative slack).
ReferenceJacobian make_reference(const Mat& J, double beta);

// Closed-form residual of gradient descent on the linearized problem:
// sum_s (1 - eta lambda_s^2)^tau a_s u_s with a = U^T r0.
Vec linearized_residual(const SpectralDecomposition& d, const Vec& r0, double eta, int tau);

// theta~_tau - theta_0 expressed in parameter space; component along v_s is
// -a_s (1 - (1 - eta lambda_s^2)^tau) / lambda_s, evaluated without
// cancellation for small lambda_s and exactly zero at lambda_s = 0.
Vec linearized_param_offset(const SpectralDecomposition& d, const Vec& r0, double eta, int tau);

// max(||J0_padded - J||, sqrt(||J0 J0^T - J J^T||)).
double reference_epsilon(const ReferenceJacobian& ref, const Mat& J0);

// Largest ||J(W) - J(W0)|| seen over random W in the Frobenius ball of the
// given radius around W0 (half of the probes lie on the boundary). This is a
// sampled lower bound on the supremum.
double lipschitz_probe(const ShallowNet& net, const Mat& X, double radius, int num_probes,
                       std::uint64_t seed);

struct CoupledRecord {
  int iter = 0;
  double residual = 0.0;
  double linear_residual = 0.0;
  double coupling_gap = 0.0;
  double param_gap = 0.0;
  double dist_from_init = 0.0;
  double proj_info = 0.0;
  double proj_nuisance = 0.0;
  double jacobian_drift = 0.0;  // ||J(theta_tau) - J(theta_0)||
};

struct InequalityCheck {
  double measured = 0.0;
  double bound = 0.0;
  double slack = 0.0;  // bound - measured
  bool holds = false;
};

struct CoupledReport {
  double eta = 0.0;
  double alpha = 0.0;
  double gamma = 0.0;
  double delta = 0.0;
  double beta = 0.0;
  int T = 0;
  Index rank = 0;
  double r0_norm = 0.0;
  double r0_info = 0.0;
  double r0_nuisance = 0.0;
  double pinv_r0 = 0.0;
  double radius = 0.0;  // R of the perturbation assumption

  InequalityCheck residual_coupling;  // max_tau ||r - r~|| <= (3/5)(delta alpha / beta)||r0||
  InequalityCheck param_coupling;     // max_tau ||theta - theta~|| <= delta (Gamma/alpha) ||r0||
  InequalityCheck distance;           // max_tau ||theta - theta0|| <= ||J_I^+ r0|| + ...
  InequalityCheck final_residual;     // ||r_T|| <= e^-Gamma ||P_I r0|| + ||P_N r0|| + ...

  double eps0 = 0.0;         // measured reference error
  double eps_probe = 0.0;    // 2 x lipschitz_probe at radius R
  double eps_path = 0.0;     // 2 x max drift along the trajectory
  double eps0_limit = 0.0;
  double eps_limit = 0.0;
  bool hypotheses_verified = false;  // up to sampling; eps is a lower bound
  int one_step_violations = 0;       // measured one-step gap recursion, reported only
  bool all_hold() const {
    return residual_coupling.holds && param_coupling.holds && distance.holds &&
           final_residual.holds;
  }
};

struct CoupledTrajectory {
  std::vector<CoupledRecord> records;
  CoupledReport report;
};

struct CoupledOptions {
  int probes = 20;
  std::uint64_t probe_seed = 0;
  int stride = 1;  // logging stride; the checks use every iteration
};

// Runs T = ceil(Gamma / (eta alpha^2)) gradient steps on the network and the
// closed-form linearized trajectory for the same reference Jacobian, and
// checks the three coupling inequalities at every iteration.
CoupledTrajectory coupled_run(const ShallowNet& net, const Mat& X, const Vec& y,
                              const ReferenceJacobian& ref, double alpha, double gamma,
                              double eta, double delta, const CoupledOptions& opts = {});

int stopping_time(double gamma, double eta, double alpha);

struct GrowthCheck {
  double max_e = 0.0;
  double bound = 0.0;  // Theta * Lambda, Lambda = 2 (Gamma rho_minus + rho_plus) / alpha^2
  int T = 0;
  bool holds = false;
};

// Iterates the worst case e_tau = (1 + eta eps^2) e_{tau-1} + eta Theta r~_{tau-1}
// with r~_tau = (1 - eta alpha^2)^tau rho_plus + rho_minus, e_0 = 0, for every
// integer tau <= Gamma / (eta alpha^2), and compares with Theta * Lambda. Requires
// eta <= 1/alpha^2 and alpha >= sqrt(2 Gamma) eps.
GrowthCheck scalar_growth_check(double gamma, double alpha, double eps, double eta,
                                double rho_plus, double rho_minus, double theta);

}  // namespace ntks
