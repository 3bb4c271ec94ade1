#include "asbc/synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "asbc/errors.hpp"

namespace asbc {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) raise(ErrorCode::NumericalError, "double formatting failed");
  return std::string(buf, ptr);
}

}  // namespace

Eigen::VectorXd synth_leader_profile(int n, double dt, Rng& rng) {
  if (n < 1) raise(ErrorCode::DomainError, "profile length must be >= 1");
  Eigen::VectorXd v(n);
  const double cruise = rng.uniform(18.0, 32.0);
  double target = cruise;
  double speed = cruise + rng.normal(0.0, 1.0);
  double next_event = rng.uniform(10.0, 30.0);
  double event_end = -1.0;
  const double tau = 5.0;       // mean-reversion time constant, s
  const double sigma_w = 0.5;   // diffusion, m/s per sqrt(s)
  for (int t = 0; t < n; ++t) {
    const double now = t * dt;
    if (event_end < 0.0 && now >= next_event) {
      target = std::max(2.0, target - rng.uniform(4.0, 12.0));  // braking episode
      event_end = now + rng.uniform(4.0, 9.0);
    } else if (event_end >= 0.0 && now >= event_end) {
      target = cruise * rng.uniform(0.85, 1.05);                // recover
      event_end = -1.0;
      next_event = now + rng.uniform(12.0, 35.0);
    }
    speed += (target - speed) * (dt / tau) + sigma_w * std::sqrt(dt) * rng.normal();
    speed = std::clamp(speed, 0.3, 38.0);
    v[t] = speed;
  }
  return v;
}

std::vector<SynthPair> generate_synthetic_pairs(const SynthConfig& cfg, std::uint64_t seed) {
  const int n = static_cast<int>(std::llround(cfg.duration / cfg.dt));
  if (n < 2) raise(ErrorCode::DomainError, "duration too short for the time step");

  std::vector<SynthPair> pairs;
  pairs.reserve(static_cast<std::size_t>(cfg.n_pairs));
  for (int k = 0; k < cfg.n_pairs; ++k) {
    Rng lead_rng = derive_rng(seed, "synth/leader", static_cast<std::uint64_t>(k));
    Rng theta_rng = derive_rng(seed, "synth/theta", static_cast<std::uint64_t>(k));
    Rng res_rng = derive_rng(seed, "synth/residual", static_cast<std::uint64_t>(k));

    LeaderWindow lead;
    lead.v = synth_leader_profile(n, cfg.dt, lead_rng);
    lead.a.resize(n);
    for (int t = 1; t < n; ++t) lead.a[t] = (lead.v[t] - lead.v[t - 1]) / cfg.dt;
    lead.a[0] = n >= 2 ? lead.a[1] : 0.0;

    SynthPair pair;
    pair.theta = sample_prior(cfg.residual, theta_rng);
    const FollowerState init = equilibrium_init(pair.theta.idm, lead.v[0]);
    const Rollout ro = rollout(pair.theta, cfg.residual, init, lead, cfg.dt, res_rng);

    const int leader_id = 2 * k + 1;
    const int follower_id = 2 * k + 2;
    pair.leader.track_id = leader_id;
    pair.leader.vehicle_length = cfg.vehicle_length;
    pair.follower.track_id = follower_id;
    pair.follower.vehicle_length = cfg.vehicle_length;

    double x_lead = 1000.0;  // arbitrary origin; ingest uses differences only
    for (int t = 0; t < n; ++t) {
      pair.leader.frames.push_back(
          RawFrame{t * cfg.dt, x_lead, lead.v[t], 0});
      const double s = ro.states[static_cast<std::size_t>(t)].s;
      pair.follower.frames.push_back(RawFrame{
          t * cfg.dt, x_lead - cfg.vehicle_length - s,
          ro.states[static_cast<std::size_t>(t)].v, leader_id});
      x_lead += lead.v[t] * cfg.dt;
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

void save_synthetic_csv(const std::string& path, const std::vector<SynthPair>& pairs) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << "frame,id,precedingId,x,xVelocity,length\n";
  auto dump = [&](const RawTrack& tr) {
    for (std::size_t t = 0; t < tr.frames.size(); ++t) {
      const RawFrame& f = tr.frames[t];
      out << t << ',' << tr.track_id << ',' << f.preceding_id << ',' << format_double(f.x)
          << ',' << format_double(f.v) << ',' << format_double(tr.vehicle_length) << '\n';
    }
  };
  for (const auto& p : pairs) {
    dump(p.leader);
    dump(p.follower);
  }
}

void save_synthetic_truth(const std::string& path, const std::vector<SynthPair>& pairs,
                          ResidualKind kind) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  out << "follower_id";
  for (const auto& name : ParamVector::names(kind)) out << ',' << name;
  out << '\n';
  for (const auto& p : pairs) {
    out << p.follower.track_id;
    const Eigen::VectorXd v = p.theta.to_vector();
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << format_double(v[i]);
    out << '\n';
  }
}

}  // namespace asbc
