#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace asbc {

enum class ResidualKind { iid_gaussian, matern52 };

ResidualKind parse_residual_kind(const std::string& name);
const char* residual_kind_name(ResidualKind kind) noexcept;

// Number of inferred parameters: 5 IDM + sigma (+ ell for matern52).
inline int param_dim(ResidualKind kind) noexcept {
  return kind == ResidualKind::matern52 ? 7 : 6;
}

struct IngestConfig {
  int downsample_factor = 1;
  double t_min = 40.0;        // seconds; shorter segments discarded
  double split_train = 0.6;
  double split_val = 0.1;
  double split_test = 0.3;
  double eps_kin = 0.5;       // gap/relative-speed consistency tolerance (m)
};

struct BankConfig {
  int W = 75;                 // window length, steps
  int stride = 50;            // steps
  int L_syn_cap = 10000;
  double time_scale_lo = 0.9;
  double time_scale_hi = 1.1;
  double vel_jitter = 0.20;   // m/s, peak amplitude of speed perturbation
  double a_phys_max = 10.0;   // m/s^2
  double j_max = 20.0;        // m/s^3
  double eps_kin = 0.5;       // m/s
  double env_pct_lo = 1.0;
  double env_pct_hi = 99.0;
  int K_rho = 5;
  double eps_rho = 1e-3;
};

struct EncoderConfig {
  int input_dim = 3;
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int local_window = 4;       // half-width of the centered attention window
  double dropout = 0.2;
  int ffn_mult = 4;
  int target_len = 75;        // steps
  int global_bias_buckets = 8;

  int head_dim() const noexcept { return d_model / heads; }
};

struct FlowConfig {
  int num_transforms = 5;
  std::vector<int> hidden{64, 64};
  double dropout = 0.2;
  double eps_softplus = 1e-3;
  double eps_alpha = 1e-6;
  double scale_clamp = 7.0;   // MADE log-scales clamped to [-clamp, clamp]
};

struct LoopConfig {
  int rounds = 10;                    // R
  int samples_initial = 4000;         // B0 warm-up simulations
  int samples_per_round = 5000;       // candidate parameters per round
  int B = 2000;                       // selected pairs per round
  int M = 20;                         // MC-dropout passes
  int train_buffer_size = 4000;       // FIFO capacity
  int epochs = 100;                   // max epochs per round
  int batch_size = 128;
  double lr = 1e-3;
  int min_rounds = 3;
  int patience_round = 1;
  double min_delta_round = 1e-3;
  std::vector<double> lambda_schedule_base{1.0, 0.9, 0.8, 0.7, 0.6, 0.5,
                                           0.4, 0.3, 0.2, 0.1, 0.0};
  std::vector<double> alpha_schedule_base{0.0, 0.1, 0.2, 0.3};
  double alpha_cap = 0.5;             // linear extension of the schedule caps here
  int K_candidates = 5000;
  int pairs_per_theta = 10;
  double gamma = 0.1;
  double tau_L = 1.0;
  double tau_theta = 1.0;
  int eval_val_size = 200;            // observed subset for proposal / alpha scoring
  int proposal_samples_per_obs = 50;
  int holdout_size = 400;             // fixed synthetic hold-out pairs
  int patience_epochs = 10;           // within-round early stopping
  double min_delta_epoch = 1e-4;
  double val_fraction = 0.1;          // buffer slice monitored within a round
  int prior_max_retries = 1000;

  double lambda_at(int round) const noexcept;
  double alpha_at(int round) const noexcept;
};

struct EvalConfig {
  int eval_H = 50;            // horizon, steps
  int eval_S = 20;            // stride, steps
  int eval_m = 20;            // max windows per pair
  int eval_n_samples = 500;
  double pi_level = 0.95;
};

struct RunConfig {
  double dt = 0.2;
  ResidualKind residual = ResidualKind::iid_gaussian;
  std::uint64_t seed = 0;
  int threads = 0;            // <= 0: hardware concurrency

  IngestConfig ingest;
  BankConfig bank;
  EncoderConfig encoder;
  FlowConfig flow;
  LoopConfig loop;
  EvalConfig eval;

  void validate() const;      // throws ConfigError

  // Flat key-value document (one `key = value` per line, '#' comments).
  // Unknown keys are rejected; keys mirror the configuration names above.
  static RunConfig from_text(const std::string& text);
  static RunConfig load(const std::string& path);
  std::string to_text() const;
  void save(const std::string& path) const;

  // Stable hash of the serialized document, for manifests.
  std::uint64_t content_hash() const;
};

}  // namespace asbc
