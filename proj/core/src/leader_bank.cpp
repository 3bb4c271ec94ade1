#include "asbc/leader_bank.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "asbc/errors.hpp"
#include "asbc/stats.hpp"

namespace asbc {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) raise(ErrorCode::NumericalError, "double formatting failed");
  return std::string(buf, ptr);
}

void recompute_accel(LeaderWindow& w, double dt) {
  const int n = w.length();
  w.a.resize(n);
  for (int t = 1; t < n; ++t) w.a[t] = (w.v[t] - w.v[t - 1]) / dt;
  if (n >= 2) w.a[0] = w.a[1];
  else if (n == 1) w.a[0] = 0.0;
}

}  // namespace

Eigen::VectorXd leader_features(const LeaderWindow& window) {
  const int n = window.length();
  if (n < 1) raise(ErrorCode::EmptyInput, "leader_features of empty window");
  Eigen::VectorXd f(kLeaderFeatureDim);
  const double mean_v = window.v.mean();
  const double mean_a = window.a.mean();
  const double var_v = (window.v.array() - mean_v).square().mean();
  const double var_a = (window.a.array() - mean_a).square().mean();
  double mean_abs_dv = 0.0;
  for (int t = 1; t < n; ++t) mean_abs_dv += std::abs(window.v[t] - window.v[t - 1]);
  if (n > 1) mean_abs_dv /= static_cast<double>(n - 1);
  f << mean_v, std::sqrt(var_v), window.v.minCoeff(), window.v.maxCoeff(), mean_a,
      std::sqrt(var_a), window.a.cwiseAbs().maxCoeff(), mean_abs_dv;
  return f;
}

std::vector<LeaderWindow> build_real_bank(const std::vector<Segment>& segments,
                                          const BankConfig& cfg, double dt) {
  std::vector<LeaderWindow> bank;
  for (const auto& seg : segments) {
    if (seg.length() < cfg.W) continue;
    for (int offset = 0; offset + cfg.W <= seg.length(); offset += cfg.stride) {
      LeaderWindow w;
      w.v.resize(cfg.W);
      for (int t = 0; t < cfg.W; ++t) w.v[t] = seg.leader[static_cast<std::size_t>(offset + t)].v;
      recompute_accel(w, dt);
      w.source = WindowSource::real;
      w.origin_id = seg.follower_id;
      bank.push_back(std::move(w));
    }
  }
  return bank;
}

Envelope compute_envelope(const std::vector<LeaderWindow>& real, const BankConfig& cfg) {
  if (real.empty()) raise(ErrorCode::EmptyInput, "envelope needs a non-empty real bank");
  std::vector<double> vs, as;
  for (const auto& w : real) {
    vs.insert(vs.end(), w.v.data(), w.v.data() + w.v.size());
    as.insert(as.end(), w.a.data(), w.a.data() + w.a.size());
  }
  std::sort(vs.begin(), vs.end());
  std::sort(as.begin(), as.end());
  Envelope env;
  env.v_lo = quantile_sorted(vs, cfg.env_pct_lo / 100.0);
  env.v_hi = quantile_sorted(vs, cfg.env_pct_hi / 100.0);
  env.a_lo = quantile_sorted(as, cfg.env_pct_lo / 100.0);
  env.a_hi = quantile_sorted(as, cfg.env_pct_hi / 100.0);
  return env;
}

FilterCheck passes_filters(const LeaderWindow& window, const BankConfig& cfg,
                           const Envelope& env, double dt) {
  FilterCheck check;
  const int n = window.length();
  auto fail = [&](const char* what) {
    check.ok = false;
    check.violations.emplace_back(what);
  };
  for (int t = 0; t < n; ++t)
    if (window.v[t] < 0.0) {
      fail("non-negativity");
      break;
    }
  for (int t = 0; t < n; ++t)
    if (std::abs(window.a[t]) > cfg.a_phys_max) {
      fail("acceleration bound");
      break;
    }
  for (int t = 1; t < n; ++t)
    if (std::abs((window.a[t] - window.a[t - 1]) / dt) > cfg.j_max) {
      fail("jerk bound");
      break;
    }
  for (int t = 1; t < n; ++t)
    if (std::abs(window.v[t] - window.v[t - 1] - window.a[t] * dt) > cfg.eps_kin) {
      fail("kinematic consistency");
      break;
    }
  for (int t = 0; t < n; ++t)
    if (window.v[t] < env.v_lo || window.v[t] > env.v_hi || window.a[t] < env.a_lo ||
        window.a[t] > env.a_hi) {
      fail("envelope");
      break;
    }
  return check;
}

std::optional<LeaderWindow> augment(const LeaderWindow& window, AugmentKind kind,
                                    const BankConfig& cfg, const Envelope& env, double dt,
                                    Rng& rng) {
  if (window.source != WindowSource::real)
    raise(ErrorCode::DomainError, "augment expects a real source window");
  const int n = window.length();
  LeaderWindow out;
  out.source = WindowSource::synthetic;
  out.origin_id = window.origin_id;
  out.v.resize(n);

  switch (kind) {
    case AugmentKind::perturb: {
      // White noise smoothed by a 9-tap moving average, peak-normalized to
      // the configured jitter amplitude.
      Eigen::VectorXd noise(n);
      for (int t = 0; t < n; ++t) noise[t] = rng.normal();
      Eigen::VectorXd smooth(n);
      const int half = 4;
      for (int t = 0; t < n; ++t) {
        double acc = 0.0;
        int cnt = 0;
        for (int k = std::max(0, t - half); k <= std::min(n - 1, t + half); ++k) {
          acc += noise[k];
          ++cnt;
        }
        smooth[t] = acc / static_cast<double>(cnt);
      }
      const double peak = smooth.cwiseAbs().maxCoeff();
      if (peak > 0.0) smooth *= cfg.vel_jitter / peak;
      else smooth.setZero();
      out.v = window.v + smooth;
      break;
    }
    case AugmentKind::rescale: {
      const double kappa = rng.uniform(cfg.time_scale_lo, cfg.time_scale_hi);
      out.v = kappa * window.v;
      break;
    }
    case AugmentKind::timewarp: {
      // Three equal subsegments stretched by independent factors, then the
      // warped profile is resampled back to n points by linear interpolation.
      const int pieces = 3;
      std::array<double, 3> scale{};
      for (auto& s : scale) s = rng.uniform(cfg.time_scale_lo, cfg.time_scale_hi);
      // Monotone map tau: [0, n-1] -> [0, n-1] built from piecewise-scaled
      // durations, renormalized to the original total duration.
      const double piece_len = static_cast<double>(n - 1) / pieces;
      double total = 0.0;
      for (double s : scale) total += piece_len * s;
      Eigen::VectorXd knots_warped(pieces + 1), knots_src(pieces + 1);
      knots_warped[0] = 0.0;
      knots_src[0] = 0.0;
      for (int k = 0; k < pieces; ++k) {
        knots_warped[k + 1] =
            knots_warped[k] + piece_len * scale[static_cast<std::size_t>(k)] *
                                  (static_cast<double>(n - 1) / total);
        knots_src[k + 1] = knots_src[k] + piece_len;
      }
      knots_warped[pieces] = static_cast<double>(n - 1);  // exact endpoint
      for (int t = 0; t < n; ++t) {
        const double wt = static_cast<double>(t);
        int k = 0;
        while (k + 1 < pieces && wt > knots_warped[k + 1]) ++k;
        const double span = knots_warped[k + 1] - knots_warped[k];
        const double frac = span > 0.0 ? (wt - knots_warped[k]) / span : 0.0;
        const double src = knots_src[k] + frac * (knots_src[k + 1] - knots_src[k]);
        const int i0 = std::min(n - 2, std::max(0, static_cast<int>(src)));
        const double f = std::min(1.0, std::max(0.0, src - static_cast<double>(i0)));
        out.v[t] = (1.0 - f) * window.v[i0] + f * window.v[i0 + 1];
      }
      break;
    }
  }

  recompute_accel(out, dt);
  if (!passes_filters(out, cfg, env, dt).ok) return std::nullopt;
  return out;
}

std::vector<LeaderWindow> build_syn_bank(const std::vector<LeaderWindow>& real,
                                         const BankConfig& cfg, const Envelope& env, double dt,
                                         Rng& rng) {
  std::vector<LeaderWindow> syn;
  if (real.empty() || cfg.L_syn_cap <= 0) return syn;
  const std::size_t max_attempts = static_cast<std::size_t>(cfg.L_syn_cap) * 10;
  const std::array<AugmentKind, 3> kinds{AugmentKind::perturb, AugmentKind::rescale,
                                         AugmentKind::timewarp};
  for (std::size_t attempt = 0;
       attempt < max_attempts && syn.size() < static_cast<std::size_t>(cfg.L_syn_cap);
       ++attempt) {
    const auto& src = real[static_cast<std::size_t>(rng.below(real.size()))];
    const AugmentKind kind = kinds[static_cast<std::size_t>(rng.below(3))];
    if (auto w = augment(src, kind, cfg, env, dt, rng)) syn.push_back(std::move(*w));
  }
  return syn;
}

double representativeness(const Eigen::VectorXd& query_features,
                          const Eigen::MatrixXd& bank_features, int K, double eps,
                          int self_index) {
  const int n = static_cast<int>(bank_features.rows());
  const int available = self_index >= 0 ? n - 1 : n;
  if (available < K)
    raise(ErrorCode::ConfigError, "representativeness bank smaller than K");
  std::vector<double> d2;
  d2.reserve(static_cast<std::size_t>(available));
  for (int i = 0; i < n; ++i) {
    if (i == self_index) continue;
    d2.push_back((bank_features.row(i).transpose() - query_features).squaredNorm());
  }
  std::nth_element(d2.begin(), d2.begin() + (K - 1), d2.end());
  std::partial_sort(d2.begin(), d2.begin() + K, d2.begin() + K);
  double mean_dist = 0.0;
  for (int k = 0; k < K; ++k) mean_dist += std::sqrt(d2[static_cast<std::size_t>(k)]);
  mean_dist /= static_cast<double>(K);
  return 1.0 / (eps + mean_dist);
}

void LeaderBank::rebuild_features() {
  real_features.resize(static_cast<Eigen::Index>(real.size()), kLeaderFeatureDim);
  for (std::size_t i = 0; i < real.size(); ++i)
    real_features.row(static_cast<Eigen::Index>(i)) = leader_features(real[i]).transpose();
}

double LeaderBank::rho_of(const LeaderWindow& window, int K, double eps,
                          int self_real_index) const {
  return representativeness(leader_features(window), real_features, K, eps, self_real_index);
}

LeaderBank build_bank(const std::vector<Segment>& segments, const BankConfig& cfg, double dt,
                      Rng& rng) {
  LeaderBank bank;
  bank.cfg = cfg;
  bank.dt = dt;
  bank.real = build_real_bank(segments, cfg, dt);
  if (bank.real.empty())
    raise(ErrorCode::InsufficientData, "no leader windows of length W in the segments");
  bank.envelope = compute_envelope(bank.real, cfg);
  bank.synthetic = build_syn_bank(bank.real, cfg, bank.envelope, dt, rng);
  bank.rebuild_features();
  return bank;
}

std::vector<const LeaderWindow*> sample_round_bank(const LeaderBank& bank, double alpha_r,
                                                   int n, Rng& rng) {
  if (bank.real.empty()) raise(ErrorCode::EmptyInput, "round bank needs real windows");
  if (alpha_r > 0.0 && bank.synthetic.empty())
    raise(ErrorCode::InsufficientData, "alpha_r > 0 requires a synthetic pool");
  std::vector<const LeaderWindow*> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (alpha_r > 0.0 && rng.bernoulli(alpha_r))
      out.push_back(&bank.synthetic[static_cast<std::size_t>(rng.below(bank.synthetic.size()))]);
    else
      out.push_back(&bank.real[static_cast<std::size_t>(rng.below(bank.real.size()))]);
  }
  return out;
}

void save_bank(const std::string& path, const LeaderBank& bank) {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write " + path);
  nlohmann::json j;
  j["dt"] = bank.dt;
  j["W"] = bank.cfg.W;
  j["stride"] = bank.cfg.stride;
  j["L_syn_cap"] = bank.cfg.L_syn_cap;
  j["time_scale_lo"] = bank.cfg.time_scale_lo;
  j["time_scale_hi"] = bank.cfg.time_scale_hi;
  j["vel_jitter"] = bank.cfg.vel_jitter;
  j["a_phys_max"] = bank.cfg.a_phys_max;
  j["j_max"] = bank.cfg.j_max;
  j["eps_kin"] = bank.cfg.eps_kin;
  j["env_pct_lo"] = bank.cfg.env_pct_lo;
  j["env_pct_hi"] = bank.cfg.env_pct_hi;
  j["K_rho"] = bank.cfg.K_rho;
  j["eps_rho"] = bank.cfg.eps_rho;
  j["envelope"] = {{"v_lo", bank.envelope.v_lo},
                   {"v_hi", bank.envelope.v_hi},
                   {"a_lo", bank.envelope.a_lo},
                   {"a_hi", bank.envelope.a_hi}};
  j["feature_version"] = kLeaderFeatureVersion;
  j["n_real"] = bank.real.size();
  j["n_synthetic"] = bank.synthetic.size();
  out << "# asbc-bank v1\n# " << j.dump() << "\n";
  out << "window_id,source,origin_id,t,v,a\n";
  auto dump_windows = [&](const std::vector<LeaderWindow>& pool, const char* source,
                          std::size_t id_base) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto& w = pool[i];
      for (int t = 0; t < w.length(); ++t)
        out << (id_base + i) << ',' << source << ',' << w.origin_id << ',' << t << ','
            << format_double(w.v[t]) << ',' << format_double(w.a[t]) << '\n';
    }
  };
  dump_windows(bank.real, "real", 0);
  dump_windows(bank.synthetic, "synthetic", bank.real.size());
}

LeaderBank load_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != "# asbc-bank v1")
    raise(ErrorCode::FormatError, "bad bank-file magic in " + path);
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
    raise(ErrorCode::FormatError, "missing bank metadata in " + path);
  const auto j = nlohmann::json::parse(line.substr(2));
  if (j.at("feature_version").get<int>() != kLeaderFeatureVersion)
    raise(ErrorCode::FormatError, "unsupported leader-feature version");

  LeaderBank bank;
  bank.dt = j.at("dt").get<double>();
  bank.cfg.W = j.at("W").get<int>();
  bank.cfg.stride = j.at("stride").get<int>();
  bank.cfg.L_syn_cap = j.at("L_syn_cap").get<int>();
  bank.cfg.time_scale_lo = j.at("time_scale_lo").get<double>();
  bank.cfg.time_scale_hi = j.at("time_scale_hi").get<double>();
  bank.cfg.vel_jitter = j.at("vel_jitter").get<double>();
  bank.cfg.a_phys_max = j.at("a_phys_max").get<double>();
  bank.cfg.j_max = j.at("j_max").get<double>();
  bank.cfg.eps_kin = j.at("eps_kin").get<double>();
  bank.cfg.env_pct_lo = j.at("env_pct_lo").get<double>();
  bank.cfg.env_pct_hi = j.at("env_pct_hi").get<double>();
  bank.cfg.K_rho = j.at("K_rho").get<int>();
  bank.cfg.eps_rho = j.at("eps_rho").get<double>();
  bank.envelope.v_lo = j.at("envelope").at("v_lo").get<double>();
  bank.envelope.v_hi = j.at("envelope").at("v_hi").get<double>();
  bank.envelope.a_lo = j.at("envelope").at("a_lo").get<double>();
  bank.envelope.a_hi = j.at("envelope").at("a_hi").get<double>();

  if (!std::getline(in, line) || line.rfind("window_id,", 0) != 0)
    raise(ErrorCode::FormatError, "missing bank column header in " + path);

  long long cur_id = -1;
  std::vector<double> vs, as;
  std::string cur_source;
  int cur_origin = 0;
  auto flush = [&]() {
    if (cur_id < 0) return;
    LeaderWindow w;
    w.v = Eigen::Map<Eigen::VectorXd>(vs.data(), static_cast<Eigen::Index>(vs.size()));
    w.a = Eigen::Map<Eigen::VectorXd>(as.data(), static_cast<Eigen::Index>(as.size()));
    w.origin_id = cur_origin;
    if (cur_source == "real") {
      w.source = WindowSource::real;
      bank.real.push_back(std::move(w));
    } else {
      w.source = WindowSource::synthetic;
      bank.synthetic.push_back(std::move(w));
    }
    vs.clear();
    as.clear();
  };
  int row_no = 3;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6)
      raise(ErrorCode::FormatError, "bank row " + std::to_string(row_no) + ": expected 6 columns");
    const long long id = std::stoll(cells[0]);
    if (id != cur_id) {
      flush();
      cur_id = id;
      cur_source = cells[1];
      cur_origin = std::stoi(cells[2]);
    }
    vs.push_back(std::stod(cells[4]));
    as.push_back(std::stod(cells[5]));
  }
  flush();
  bank.rebuild_features();
  return bank;
}

}  // namespace asbc
