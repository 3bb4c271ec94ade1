#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "asbc/config.hpp"
#include "asbc/rng.hpp"
#include "asbc/trajectory.hpp"

namespace asbc {

struct IdmParams {
  double v0 = 33.3;    // desired speed, m/s
  double s0 = 2.0;     // jam distance, m
  double T = 1.6;      // desired time headway, s
  double a_max = 1.5;  // maximum acceleration, m/s^2
  double b = 1.67;     // comfortable deceleration, m/s^2

  static constexpr double delta = 4.0;  // fixed acceleration exponent
};

// Recommended values the prior is centered on.
IdmParams recommended_idm();

// Feasible box enforced by rejection sampling on the prior.
struct IdmBox {
  double v0_lo = 20.0, v0_hi = 40.0;
  double s0_lo = 1.0, s0_hi = 6.0;
  double T_lo = 0.6, T_hi = 4.5;
  double a_lo = 0.2, a_hi = 3.5;
  double b_lo = 0.4, b_hi = 4.0;

  bool contains(const IdmParams& p) const noexcept;
};

// Full inferred parameter vector: IDM parameters, residual scale sigma, and
// the Matern length scale ell (absent under the i.i.d. Gaussian residual).
struct ParamVector {
  IdmParams idm;
  double sigma = 0.3;
  std::optional<double> ell;

  int dim() const noexcept { return ell ? 7 : 6; }
  Eigen::VectorXd to_vector() const;
  static ParamVector from_vector(const Eigen::VectorXd& v);
  static std::vector<std::string> names(ResidualKind kind);
};

double idm_desired_gap(const IdmParams& p, double v, double dv);
double idm_accel(const IdmParams& p, double s, double v, double dv);

// Matern-5/2 covariance between times t1 and t2 (seconds).
double matern52_kernel(double t1, double t2, double sigma, double ell);

// One residual-acceleration path of length n. iid_gaussian: independent
// N(0, sigma^2) draws. matern52: a GP path realized through the Cholesky
// factor of the unit-variance Gram matrix (cached per (n, dt, ell)).
Eigen::VectorXd sample_residual(ResidualKind kind, const ParamVector& p, int n, double dt,
                                Rng& rng);

// Shared factorization cache statistics (for diagnostics and tests).
struct ResidualCacheStats {
  std::size_t hits = 0;
  std::size_t misses = 0;
};
ResidualCacheStats residual_cache_stats();
void residual_cache_clear();

struct Rollout {
  std::vector<FollowerState> states;  // length = leader window length
  Eigen::VectorXd accel;              // total acceleration per step
  Eigen::VectorXd residual;           // residual component per step
  bool clamped = false;               // any collision / reversing clamp fired
  int clamp_events = 0;
};

// Forward-simulates the residual-augmented model over a leader window.
// v' = v + a*dt; s' = s + (v_lead - v)*dt - a*dt^2/2; dv recomputed each step.
// Gaps are floored at 0.1 m and speeds at 0 with the rollout flagged.
Rollout rollout(const ParamVector& p, ResidualKind kind, const FollowerState& init,
                const LeaderWindow& leader, double dt, Rng& rng);

// Equilibrium follower state (zero acceleration, zero relative speed) for a
// given leader speed; used to initialize training simulations.
FollowerState equilibrium_init(const IdmParams& p, double v_lead);

// Truncated log-normal prior draw; log theta_IDM ~ N(log theta_rec, I),
// rejected until inside the feasible box; sigma (and ell, for matern52)
// from the configured log-normals.
ParamVector sample_prior(ResidualKind kind, Rng& rng, int max_retries = 1000);

// Unnormalized log prior density (within the truncation box; -inf outside).
double log_prior(const ParamVector& p, ResidualKind kind);

// Gradient of log_prior with respect to the physical parameters (same order
// as ParamVector::to_vector). Only valid strictly inside the box.
Eigen::VectorXd log_prior_grad(const ParamVector& p, ResidualKind kind);

}  // namespace asbc
