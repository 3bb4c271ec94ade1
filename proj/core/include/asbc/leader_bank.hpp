#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "asbc/config.hpp"
#include "asbc/rng.hpp"
#include "asbc/trajectory.hpp"

namespace asbc {

// Pointwise (1,99)-percentile bounds of speed and acceleration estimated
// from the real bank; synthetic windows must stay inside them.
struct Envelope {
  double v_lo = 0.0, v_hi = 0.0;
  double a_lo = 0.0, a_hi = 0.0;
};

enum class AugmentKind { perturb, rescale, timewarp };

struct FilterCheck {
  bool ok = true;
  std::vector<std::string> violations;
};

constexpr int kLeaderFeatureDim = 8;
constexpr int kLeaderFeatureVersion = 1;

// Summary-statistic embedding of a leader window:
// [mean v, std v, min v, max v, mean a, std a, max |a|, mean |dv per step|].
Eigen::VectorXd leader_features(const LeaderWindow& window);

// All length-W windows of each segment's leader profile at the given stride,
// accelerations recomputed by the shared finite-difference rule.
std::vector<LeaderWindow> build_real_bank(const std::vector<Segment>& segments,
                                          const BankConfig& cfg, double dt);

Envelope compute_envelope(const std::vector<LeaderWindow>& real, const BankConfig& cfg);

// Five plausibility checks: non-negativity, acceleration bound, jerk bound,
// kinematic consistency, and the percentile envelope.
FilterCheck passes_filters(const LeaderWindow& window, const BankConfig& cfg,
                           const Envelope& env, double dt);

// One physics-respecting augmentation of a real window; nullopt when the
// result fails the plausibility filters (rejection is a value, not a fault).
std::optional<LeaderWindow> augment(const LeaderWindow& window, AugmentKind kind,
                                    const BankConfig& cfg, const Envelope& env, double dt,
                                    Rng& rng);

// Draws augmentations of random real windows until the synthetic pool holds
// L_syn_cap accepted windows or the attempt budget is exhausted.
std::vector<LeaderWindow> build_syn_bank(const std::vector<LeaderWindow>& real,
                                         const BankConfig& cfg, const Envelope& env, double dt,
                                         Rng& rng);

// rho(query) = 1 / (eps + mean distance to the K nearest bank features).
// self_index >= 0 excludes that bank row (query belongs to the bank).
double representativeness(const Eigen::VectorXd& query_features,
                          const Eigen::MatrixXd& bank_features, int K, double eps,
                          int self_index = -1);

struct LeaderBank {
  BankConfig cfg;
  double dt = 0.2;
  Envelope envelope;
  std::vector<LeaderWindow> real;
  std::vector<LeaderWindow> synthetic;

  // Feature rows aligned with `real`; recomputed on load, never persisted.
  Eigen::MatrixXd real_features;

  void rebuild_features();
  double rho_of(const LeaderWindow& window, int K, double eps, int self_real_index = -1) const;
};

LeaderBank build_bank(const std::vector<Segment>& segments, const BankConfig& cfg, double dt,
                      Rng& rng);

// Each draw independently comes from the synthetic pool with probability
// alpha_r, else from the real pool (uniform within each pool).
std::vector<const LeaderWindow*> sample_round_bank(const LeaderBank& bank, double alpha_r,
                                                   int n, Rng& rng);

void save_bank(const std::string& path, const LeaderBank& bank);
LeaderBank load_bank(const std::string& path);

}  // namespace asbc
