#include "asbc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>

#include <Eigen/Cholesky>

#include "asbc/errors.hpp"

namespace asbc {

namespace {

constexpr double kGapFloor = 0.1;      // m; collision clamp
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

// Prior hyperparameters (log-space locations and scales).
constexpr double kIdmLogSigma = 1.0;
constexpr double kSigmaLocGaussian = -1.0;
constexpr double kSigmaScaleGaussian = 0.3;
const double kSigmaLocMatern = std::log(0.3);
constexpr double kSigmaScaleMatern = 0.5;
const double kEllLoc = std::log(3.0);
constexpr double kEllScale = 0.5;

double lognormal_logpdf(double x, double loc, double scale) {
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  const double z = (std::log(x) - loc) / scale;
  return -std::log(x) - std::log(scale) - 0.5 * kLogTwoPi - 0.5 * z * z;
}

double lognormal_logpdf_grad(double x, double loc, double scale) {
  // d/dx log LN(x; loc, scale)
  return -1.0 / x - (std::log(x) - loc) / (scale * scale * x);
}

}  // namespace

IdmParams recommended_idm() { return IdmParams{33.3, 2.0, 1.6, 1.5, 1.67}; }

bool IdmBox::contains(const IdmParams& p) const noexcept {
  return p.v0 >= v0_lo && p.v0 <= v0_hi && p.s0 >= s0_lo && p.s0 <= s0_hi && p.T >= T_lo &&
         p.T <= T_hi && p.a_max >= a_lo && p.a_max <= a_hi && p.b >= b_lo && p.b <= b_hi;
}

Eigen::VectorXd ParamVector::to_vector() const {
  Eigen::VectorXd v(dim());
  v[0] = idm.v0;
  v[1] = idm.s0;
  v[2] = idm.T;
  v[3] = idm.a_max;
  v[4] = idm.b;
  v[5] = sigma;
  if (ell) v[6] = *ell;
  return v;
}

ParamVector ParamVector::from_vector(const Eigen::VectorXd& v) {
  if (v.size() != 6 && v.size() != 7)
    raise(ErrorCode::ShapeError, "parameter vector must have 6 or 7 entries");
  ParamVector p;
  p.idm.v0 = v[0];
  p.idm.s0 = v[1];
  p.idm.T = v[2];
  p.idm.a_max = v[3];
  p.idm.b = v[4];
  p.sigma = v[5];
  if (v.size() == 7) p.ell = v[6];
  return p;
}

std::vector<std::string> ParamVector::names(ResidualKind kind) {
  std::vector<std::string> n{"v0", "s0", "T", "a_max", "b", "sigma"};
  if (kind == ResidualKind::matern52) n.push_back("ell");
  return n;
}

double idm_desired_gap(const IdmParams& p, double v, double dv) {
  return p.s0 + v * p.T + v * dv / (2.0 * std::sqrt(p.a_max * p.b));
}

double idm_accel(const IdmParams& p, double s, double v, double dv) {
  if (s <= 0.0) raise(ErrorCode::DomainError, "idm_accel requires positive gap");
  const double s_star = idm_desired_gap(p, v, dv);
  const double free_term = std::pow(v / p.v0, IdmParams::delta);
  const double interaction = s_star / s;
  return p.a_max * (1.0 - free_term - interaction * interaction);
}

double matern52_kernel(double t1, double t2, double sigma, double ell) {
  if (sigma <= 0.0 || ell <= 0.0)
    raise(ErrorCode::DomainError, "matern52_kernel requires positive sigma and ell");
  const double d = std::abs(t1 - t2);
  const double r = std::sqrt(5.0) * d / ell;
  return sigma * sigma * (1.0 + r + 5.0 * d * d / (3.0 * ell * ell)) * std::exp(-r);
}

namespace {

// LRU cache of Cholesky factors of the unit-variance (sigma = 1) Matern Gram
// matrix. Keys quantize ell at 1e-3 s so draws with nearly equal length
// scales share a factorization; the factor is rescaled by sigma at sample
// time. Readers take a shared lock; insertion takes the exclusive lock.
class CholFactorCache {
 public:
  using FactorPtr = std::shared_ptr<const Eigen::MatrixXd>;

  FactorPtr get(int n, double dt, double ell) {
    const Key key{n, quantize(dt), quantize(ell)};
    {
      std::shared_lock lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) {
        ++hits_;
        return it->second->second;
      }
    }
    FactorPtr factor = std::make_shared<Eigen::MatrixXd>(compute(n, dt, ell));
    std::unique_lock lock(mutex_);
    auto it = map_.find(key);
    if (it != map_.end()) {
      ++hits_;
      return it->second->second;  // raced; another writer got here first
    }
    ++misses_;
    order_.emplace_front(key, factor);
    map_[key] = order_.begin();
    if (order_.size() > kCapacity) {
      map_.erase(order_.back().first);
      order_.pop_back();
    }
    return factor;
  }

  ResidualCacheStats stats() const {
    std::shared_lock lock(mutex_);
    return ResidualCacheStats{hits_, misses_};
  }

  void clear() {
    std::unique_lock lock(mutex_);
    map_.clear();
    order_.clear();
    hits_ = misses_ = 0;
  }

 private:
  struct Key {
    int n;
    long long dt_q;
    long long ell_q;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept {
      std::size_t h = std::hash<int>()(k.n);
      h ^= std::hash<long long>()(k.dt_q) + 0x9e3779b9 + (h << 6) + (h >> 2);
      h ^= std::hash<long long>()(k.ell_q) + 0x9e3779b9 + (h << 6) + (h >> 2);
      return h;
    }
  };

  static constexpr std::size_t kCapacity = 32;

  static long long quantize(double x) { return std::llround(x * 1000.0); }

  static Eigen::MatrixXd compute(int n, double dt, double ell) {
    Eigen::MatrixXd k(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const double v = matern52_kernel(i * dt, j * dt, 1.0, ell);
        k(i, j) = v;
        k(j, i) = v;
      }
    // Jitter escalation: 1e-10 to 1e-4 relative to the unit diagonal.
    for (double jitter = 1e-10; jitter <= 1e-4 + 1e-18; jitter *= 10.0) {
      Eigen::MatrixXd kj = k + jitter * Eigen::MatrixXd::Identity(n, n);
      Eigen::LLT<Eigen::MatrixXd> llt(kj);
      if (llt.info() == Eigen::Success) return llt.matrixL();
    }
    raise(ErrorCode::NumericalError,
          "Matern Gram matrix not factorizable after jitter escalation (n=" +
              std::to_string(n) + ")");
  }

  mutable std::shared_mutex mutex_;
  std::unordered_map<Key, std::list<std::pair<Key, FactorPtr>>::iterator, KeyHash> map_;
  std::list<std::pair<Key, FactorPtr>> order_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

CholFactorCache& factor_cache() {
  static CholFactorCache cache;
  return cache;
}

}  // namespace

ResidualCacheStats residual_cache_stats() { return factor_cache().stats(); }
void residual_cache_clear() { factor_cache().clear(); }

Eigen::VectorXd sample_residual(ResidualKind kind, const ParamVector& p, int n, double dt,
                                Rng& rng) {
  if (n < 1) raise(ErrorCode::DomainError, "sample_residual requires n >= 1");
  if (p.sigma < 0.0) raise(ErrorCode::DomainError, "sigma must be non-negative");
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  if (p.sigma == 0.0) return Eigen::VectorXd::Zero(n);
  if (kind == ResidualKind::iid_gaussian || n == 1) return p.sigma * z;
  if (!p.ell) raise(ErrorCode::DomainError, "matern52 residual requires ell");
  const auto factor = factor_cache().get(n, dt, *p.ell);
  return p.sigma * ((*factor).triangularView<Eigen::Lower>() * z);
}

Rollout rollout(const ParamVector& p, ResidualKind kind, const FollowerState& init,
                const LeaderWindow& leader, double dt, Rng& rng) {
  const int n = leader.length();
  if (n < 1) raise(ErrorCode::EmptyInput, "rollout requires a non-empty leader window");
  if (init.s <= 0.0) raise(ErrorCode::DomainError, "rollout requires positive initial gap");

  Rollout out;
  out.states.resize(static_cast<std::size_t>(n));
  out.accel.resize(n);
  out.residual = sample_residual(kind, p, n, dt, rng);

  double s = init.s;
  double v = init.v;
  for (int t = 0; t < n; ++t) {
    const double v_lead = leader.v[t];
    const double dv = v - v_lead;
    out.states[static_cast<std::size_t>(t)] = FollowerState{s, v, dv};
    const double a = idm_accel(p.idm, s, v, dv) + out.residual[t];
    out.accel[t] = a;
    if (t + 1 < n) {
      double v_next = v + a * dt;
      double s_next = s + (v_lead - v) * dt - 0.5 * a * dt * dt;
      if (v_next < 0.0) {
        v_next = 0.0;
        out.clamped = true;
        ++out.clamp_events;
      }
      if (s_next <= kGapFloor) {
        s_next = kGapFloor;
        out.clamped = true;
        ++out.clamp_events;
      }
      v = v_next;
      s = s_next;
    }
  }
  return out;
}

FollowerState equilibrium_init(const IdmParams& p, double v_lead) {
  // Zero-acceleration gap at dv = 0: s_eq = s*(v,0) / sqrt(1 - (v/v0)^delta).
  double v = std::min(v_lead, 0.95 * p.v0);
  v = std::max(v, 0.0);
  const double free_term = std::pow(v / p.v0, IdmParams::delta);
  const double s_eq = idm_desired_gap(p, v, 0.0) / std::sqrt(1.0 - free_term);
  return FollowerState{std::max(s_eq, kGapFloor), v, v - v_lead};
}

ParamVector sample_prior(ResidualKind kind, Rng& rng, int max_retries) {
  if (max_retries < 1) raise(ErrorCode::DomainError, "max_retries must be >= 1");
  const IdmParams rec = recommended_idm();
  const IdmBox box;
  ParamVector p;
  bool accepted = false;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    p.idm.v0 = std::exp(std::log(rec.v0) + kIdmLogSigma * rng.normal());
    p.idm.s0 = std::exp(std::log(rec.s0) + kIdmLogSigma * rng.normal());
    p.idm.T = std::exp(std::log(rec.T) + kIdmLogSigma * rng.normal());
    p.idm.a_max = std::exp(std::log(rec.a_max) + kIdmLogSigma * rng.normal());
    p.idm.b = std::exp(std::log(rec.b) + kIdmLogSigma * rng.normal());
    if (box.contains(p.idm)) {
      accepted = true;
      break;
    }
  }
  if (!accepted)
    raise(ErrorCode::PriorRejectionError,
          "prior rejection budget exhausted after " + std::to_string(max_retries) + " draws");
  if (kind == ResidualKind::iid_gaussian) {
    p.sigma = std::exp(kSigmaLocGaussian + kSigmaScaleGaussian * rng.normal());
    p.ell.reset();
  } else {
    p.sigma = std::exp(kSigmaLocMatern + kSigmaScaleMatern * rng.normal());
    p.ell = std::exp(kEllLoc + kEllScale * rng.normal());
  }
  return p;
}

double log_prior(const ParamVector& p, ResidualKind kind) {
  const IdmBox box;
  if (!box.contains(p.idm)) return -std::numeric_limits<double>::infinity();
  const IdmParams rec = recommended_idm();
  double lp = 0.0;
  lp += lognormal_logpdf(p.idm.v0, std::log(rec.v0), kIdmLogSigma);
  lp += lognormal_logpdf(p.idm.s0, std::log(rec.s0), kIdmLogSigma);
  lp += lognormal_logpdf(p.idm.T, std::log(rec.T), kIdmLogSigma);
  lp += lognormal_logpdf(p.idm.a_max, std::log(rec.a_max), kIdmLogSigma);
  lp += lognormal_logpdf(p.idm.b, std::log(rec.b), kIdmLogSigma);
  if (kind == ResidualKind::iid_gaussian) {
    lp += lognormal_logpdf(p.sigma, kSigmaLocGaussian, kSigmaScaleGaussian);
  } else {
    if (!p.ell) return -std::numeric_limits<double>::infinity();
    lp += lognormal_logpdf(p.sigma, kSigmaLocMatern, kSigmaScaleMatern);
    lp += lognormal_logpdf(*p.ell, kEllLoc, kEllScale);
  }
  return lp;
}

Eigen::VectorXd log_prior_grad(const ParamVector& p, ResidualKind kind) {
  const IdmParams rec = recommended_idm();
  Eigen::VectorXd g(p.dim());
  g[0] = lognormal_logpdf_grad(p.idm.v0, std::log(rec.v0), kIdmLogSigma);
  g[1] = lognormal_logpdf_grad(p.idm.s0, std::log(rec.s0), kIdmLogSigma);
  g[2] = lognormal_logpdf_grad(p.idm.T, std::log(rec.T), kIdmLogSigma);
  g[3] = lognormal_logpdf_grad(p.idm.a_max, std::log(rec.a_max), kIdmLogSigma);
  g[4] = lognormal_logpdf_grad(p.idm.b, std::log(rec.b), kIdmLogSigma);
  if (kind == ResidualKind::iid_gaussian) {
    g[5] = lognormal_logpdf_grad(p.sigma, kSigmaLocGaussian, kSigmaScaleGaussian);
  } else {
    if (!p.ell) raise(ErrorCode::DomainError, "matern52 gradient requires ell");
    g[5] = lognormal_logpdf_grad(p.sigma, kSigmaLocMatern, kSigmaScaleMatern);
    g[6] = lognormal_logpdf_grad(*p.ell, kEllLoc, kEllScale);
  }
  return g;
}

}  // namespace asbc
