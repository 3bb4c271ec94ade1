#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "asbc/config.hpp"
#include "asbc/sim.hpp"
#include "asbc/trajectory.hpp"

namespace asbc {

// Synthetic raw-track generator. Leaders follow a smooth mean-reverting speed
// process with intermittent braking episodes; followers are simulated from
// the residual-augmented model with parameters drawn from the prior, so the
// generated CSV exercises the full ingest -> bank -> train -> evaluate path.
struct SynthConfig {
  int n_pairs = 20;
  double duration = 120.0;  // seconds per pair
  double dt = 0.2;
  ResidualKind residual = ResidualKind::iid_gaussian;
  double vehicle_length = 4.5;  // meters, both vehicles
};

struct SynthPair {
  RawTrack leader;
  RawTrack follower;
  ParamVector theta;  // generating parameters
};

// Smooth leader speed profile of n steps ("real-shaped": cruising with
// occasional braking episodes).
Eigen::VectorXd synth_leader_profile(int n, double dt, Rng& rng);

std::vector<SynthPair> generate_synthetic_pairs(const SynthConfig& cfg, std::uint64_t seed);

// Raw CSV in the ingest schema (frame,id,precedingId,x,xVelocity,length).
void save_synthetic_csv(const std::string& path, const std::vector<SynthPair>& pairs);

// Generating parameters per pair, one row per follower id.
void save_synthetic_truth(const std::string& path, const std::vector<SynthPair>& pairs,
                          ResidualKind kind);

}  // namespace asbc
