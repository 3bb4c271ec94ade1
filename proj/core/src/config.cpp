#include "asbc/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <system_error>

#include "asbc/errors.hpp"

namespace asbc {

ResidualKind parse_residual_kind(const std::string& name) {
  if (name == "gaussian" || name == "iid_gaussian") return ResidualKind::iid_gaussian;
  if (name == "matern52" || name == "matern") return ResidualKind::matern52;
  raise(ErrorCode::ConfigError, "unknown residual kind '" + name + "'");
}

const char* residual_kind_name(ResidualKind kind) noexcept {
  return kind == ResidualKind::matern52 ? "matern52" : "gaussian";
}

double LoopConfig::lambda_at(int round) const noexcept {
  if (lambda_schedule_base.empty()) return 0.0;
  if (round < 0) round = 0;
  if (round < static_cast<int>(lambda_schedule_base.size()))
    return lambda_schedule_base[static_cast<std::size_t>(round)];
  return 0.0;  // schedule clamps at zero beyond the listed entries
}

double LoopConfig::alpha_at(int round) const noexcept {
  if (alpha_schedule_base.empty()) return 0.0;
  if (round < 0) round = 0;
  if (round < static_cast<int>(alpha_schedule_base.size()))
    return alpha_schedule_base[static_cast<std::size_t>(round)];
  // Extend linearly with the last listed increment, capped.
  const std::size_t n = alpha_schedule_base.size();
  double step = 0.1;
  if (n >= 2) step = alpha_schedule_base[n - 1] - alpha_schedule_base[n - 2];
  const double value =
      alpha_schedule_base[n - 1] + step * static_cast<double>(round - static_cast<int>(n) + 1);
  return std::min(value, alpha_cap);
}

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) raise(ErrorCode::NumericalError, "double formatting failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    raise(ErrorCode::ConfigError, "bad numeric value for '" + key + "': " + text);
  return v;
}

long long parse_ll(const std::string& key, const std::string& text) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    raise(ErrorCode::ConfigError, "bad integer value for '" + key + "': " + text);
  return v;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& key, const std::string& text) {
  std::string body = trim(text);
  if (body.size() < 2 || body.front() != '[' || body.back() != ']')
    raise(ErrorCode::ConfigError, "list value for '" + key + "' must be [a,b,...]");
  body = body.substr(1, body.size() - 2);
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(body);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

std::vector<Field> field_table() {
  std::vector<Field> f;
  auto dbl = [&](const char* key, auto member) {
    f.push_back({key,
                 [member](const RunConfig& c) { return format_double(c.*member); },
                 [member, key = std::string(key)](RunConfig& c, const std::string& v) {
                   c.*member = parse_double(key, v);
                 }});
  };
  auto num = [&](const char* key, auto accessor) {
    // accessor: (RunConfig&) -> reference to a double field
    f.push_back({key,
                 [accessor](const RunConfig& c) {
                   return format_double(accessor(const_cast<RunConfig&>(c)));
                 },
                 [accessor, key = std::string(key)](RunConfig& c, const std::string& v) {
                   accessor(c) = parse_double(key, v);
                 }});
  };
  auto integer = [&](const char* key, auto accessor) {
    f.push_back({key,
                 [accessor](const RunConfig& c) {
                   return std::to_string(accessor(const_cast<RunConfig&>(c)));
                 },
                 [accessor, key = std::string(key)](RunConfig& c, const std::string& v) {
                   accessor(c) = static_cast<int>(parse_ll(key, v));
                 }});
  };
  (void)dbl;

  f.push_back({"seed",
               [](const RunConfig& c) { return std::to_string(c.seed); },
               [](RunConfig& c, const std::string& v) {
                 c.seed = static_cast<std::uint64_t>(parse_ll("seed", v));
               }});
  f.push_back({"threads",
               [](const RunConfig& c) { return std::to_string(c.threads); },
               [](RunConfig& c, const std::string& v) {
                 c.threads = static_cast<int>(parse_ll("threads", v));
               }});
  f.push_back({"residual",
               [](const RunConfig& c) { return std::string(residual_kind_name(c.residual)); },
               [](RunConfig& c, const std::string& v) { c.residual = parse_residual_kind(v); }});
  num("dt", [](RunConfig& c) -> double& { return c.dt; });

  // data-ingest
  integer("downsample_factor", [](RunConfig& c) -> int& { return c.ingest.downsample_factor; });
  num("t_min", [](RunConfig& c) -> double& { return c.ingest.t_min; });
  num("split_train", [](RunConfig& c) -> double& { return c.ingest.split_train; });
  num("split_val", [](RunConfig& c) -> double& { return c.ingest.split_val; });
  num("split_test", [](RunConfig& c) -> double& { return c.ingest.split_test; });
  num("ingest_eps_kin", [](RunConfig& c) -> double& { return c.ingest.eps_kin; });

  // leader bank
  integer("bank_W", [](RunConfig& c) -> int& { return c.bank.W; });
  integer("bank_stride", [](RunConfig& c) -> int& { return c.bank.stride; });
  integer("L_syn_cap", [](RunConfig& c) -> int& { return c.bank.L_syn_cap; });
  num("time_scale_lo", [](RunConfig& c) -> double& { return c.bank.time_scale_lo; });
  num("time_scale_hi", [](RunConfig& c) -> double& { return c.bank.time_scale_hi; });
  num("vel_jitter", [](RunConfig& c) -> double& { return c.bank.vel_jitter; });
  num("a_phys_max", [](RunConfig& c) -> double& { return c.bank.a_phys_max; });
  num("j_max", [](RunConfig& c) -> double& { return c.bank.j_max; });
  num("eps_kin", [](RunConfig& c) -> double& { return c.bank.eps_kin; });
  num("env_pct_lo", [](RunConfig& c) -> double& { return c.bank.env_pct_lo; });
  num("env_pct_hi", [](RunConfig& c) -> double& { return c.bank.env_pct_hi; });
  integer("K_rho", [](RunConfig& c) -> int& { return c.bank.K_rho; });
  num("eps_rho", [](RunConfig& c) -> double& { return c.bank.eps_rho; });

  // encoder
  integer("d_model", [](RunConfig& c) -> int& { return c.encoder.d_model; });
  integer("enc_layers", [](RunConfig& c) -> int& { return c.encoder.layers; });
  integer("enc_heads", [](RunConfig& c) -> int& { return c.encoder.heads; });
  integer("local_window", [](RunConfig& c) -> int& { return c.encoder.local_window; });
  num("dropout", [](RunConfig& c) -> double& { return c.encoder.dropout; });
  integer("ffn_mult", [](RunConfig& c) -> int& { return c.encoder.ffn_mult; });
  integer("encoder_target_len", [](RunConfig& c) -> int& { return c.encoder.target_len; });

  // flow
  integer("flow_transforms", [](RunConfig& c) -> int& { return c.flow.num_transforms; });
  f.push_back({"flow_hidden",
               [](const RunConfig& c) {
                 std::string s = "[";
                 for (std::size_t i = 0; i < c.flow.hidden.size(); ++i) {
                   if (i) s += ",";
                   s += std::to_string(c.flow.hidden[i]);
                 }
                 return s + "]";
               },
               [](RunConfig& c, const std::string& v) {
                 c.flow.hidden.clear();
                 for (const auto& item : split_list("flow_hidden", v))
                   c.flow.hidden.push_back(static_cast<int>(parse_ll("flow_hidden", item)));
               }});
  num("eps_softplus", [](RunConfig& c) -> double& { return c.flow.eps_softplus; });
  num("eps_alpha", [](RunConfig& c) -> double& { return c.flow.eps_alpha; });
  num("scale_clamp", [](RunConfig& c) -> double& { return c.flow.scale_clamp; });

  // active loop
  integer("rounds", [](RunConfig& c) -> int& { return c.loop.rounds; });
  integer("samples_initial", [](RunConfig& c) -> int& { return c.loop.samples_initial; });
  integer("samples_per_round", [](RunConfig& c) -> int& { return c.loop.samples_per_round; });
  integer("B", [](RunConfig& c) -> int& { return c.loop.B; });
  integer("M", [](RunConfig& c) -> int& { return c.loop.M; });
  integer("train_buffer_size", [](RunConfig& c) -> int& { return c.loop.train_buffer_size; });
  integer("epochs", [](RunConfig& c) -> int& { return c.loop.epochs; });
  integer("batch_size", [](RunConfig& c) -> int& { return c.loop.batch_size; });
  num("lr", [](RunConfig& c) -> double& { return c.loop.lr; });
  integer("min_rounds", [](RunConfig& c) -> int& { return c.loop.min_rounds; });
  integer("patience_round", [](RunConfig& c) -> int& { return c.loop.patience_round; });
  num("min_delta_round", [](RunConfig& c) -> double& { return c.loop.min_delta_round; });
  auto dbl_list = [&](const char* key, auto accessor) {
    f.push_back({key,
                 [accessor](const RunConfig& c) {
                   const auto& vec = accessor(const_cast<RunConfig&>(c));
                   std::string s = "[";
                   for (std::size_t i = 0; i < vec.size(); ++i) {
                     if (i) s += ",";
                     s += format_double(vec[i]);
                   }
                   return s + "]";
                 },
                 [accessor, key = std::string(key)](RunConfig& c, const std::string& v) {
                   auto& vec = accessor(c);
                   vec.clear();
                   for (const auto& item : split_list(key, v))
                     vec.push_back(parse_double(key, item));
                 }});
  };
  dbl_list("lambda_schedule_base",
           [](RunConfig& c) -> std::vector<double>& { return c.loop.lambda_schedule_base; });
  dbl_list("alpha_schedule_base",
           [](RunConfig& c) -> std::vector<double>& { return c.loop.alpha_schedule_base; });
  num("alpha_cap", [](RunConfig& c) -> double& { return c.loop.alpha_cap; });
  integer("K_candidates", [](RunConfig& c) -> int& { return c.loop.K_candidates; });
  integer("pairs_per_theta", [](RunConfig& c) -> int& { return c.loop.pairs_per_theta; });
  num("gamma", [](RunConfig& c) -> double& { return c.loop.gamma; });
  num("tau_L", [](RunConfig& c) -> double& { return c.loop.tau_L; });
  num("tau_theta", [](RunConfig& c) -> double& { return c.loop.tau_theta; });
  integer("eval_val_size", [](RunConfig& c) -> int& { return c.loop.eval_val_size; });
  integer("proposal_samples_per_obs",
          [](RunConfig& c) -> int& { return c.loop.proposal_samples_per_obs; });
  integer("holdout_size", [](RunConfig& c) -> int& { return c.loop.holdout_size; });
  integer("patience_epochs", [](RunConfig& c) -> int& { return c.loop.patience_epochs; });
  num("min_delta_epoch", [](RunConfig& c) -> double& { return c.loop.min_delta_epoch; });
  num("val_fraction", [](RunConfig& c) -> double& { return c.loop.val_fraction; });
  integer("prior_max_retries", [](RunConfig& c) -> int& { return c.loop.prior_max_retries; });

  // evaluation
  integer("eval_H", [](RunConfig& c) -> int& { return c.eval.eval_H; });
  integer("eval_S", [](RunConfig& c) -> int& { return c.eval.eval_S; });
  integer("eval_m", [](RunConfig& c) -> int& { return c.eval.eval_m; });
  integer("eval_n_samples", [](RunConfig& c) -> int& { return c.eval.eval_n_samples; });
  num("pi_level", [](RunConfig& c) -> double& { return c.eval.pi_level; });

  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = field_table();
  return table;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) raise(ErrorCode::ConfigError, what);
  };
  require(dt > 0.0, "dt must be positive");
  require(ingest.downsample_factor >= 1, "downsample_factor must be >= 1");
  const double ratio_sum = ingest.split_train + ingest.split_val + ingest.split_test;
  require(std::abs(ratio_sum - 1.0) < 1e-9, "split ratios must sum to 1");
  require(bank.W >= 2 && bank.stride >= 1, "bank window/stride must be positive");
  require(bank.env_pct_lo < bank.env_pct_hi, "envelope percentiles must be ordered");
  require(bank.K_rho >= 1, "K_rho must be >= 1");
  require(encoder.d_model % encoder.heads == 0, "d_model must be divisible by heads");
  require(encoder.layers >= 1 && encoder.target_len >= 1, "encoder shape invalid");
  require(encoder.dropout >= 0.0 && encoder.dropout < 1.0, "dropout must be in [0,1)");
  require(flow.num_transforms >= 0, "flow_transforms must be >= 0");
  require(flow.eps_softplus > 0.0, "eps_softplus must be positive");
  require(flow.eps_alpha > 0.0, "eps_alpha must be positive");
  require(loop.rounds >= 0 && loop.samples_initial >= 1, "loop budget invalid");
  require(loop.B >= 1 && loop.train_buffer_size >= 1, "loop budget invalid");
  require(loop.M >= 2, "M must be >= 2");
  require(loop.batch_size >= 1 && loop.epochs >= 1, "training config invalid");
  require(loop.val_fraction > 0.0 && loop.val_fraction < 1.0, "val_fraction in (0,1)");
  require(loop.pairs_per_theta >= 1, "pairs_per_theta must be >= 1");
  require(eval.eval_H >= 1 && eval.eval_S >= 1, "evaluation window config invalid");
  require(eval.eval_n_samples >= 2, "eval_n_samples must be >= 2");
  require(eval.pi_level > 0.0 && eval.pi_level < 1.0, "pi_level in (0,1)");
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      raise(ErrorCode::ConfigError,
            "line " + std::to_string(line_no) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& table = fields();
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const Field& fld) { return fld.key == key; });
    if (it == table.end())
      raise(ErrorCode::ConfigError, "unknown config key '" + key + "'");
    it->set(cfg, value);
  }
  cfg.validate();
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::IoError, "cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& fld : fields()) {
    out += fld.key;
    out += " = ";
    out += fld.get(*this);
    out += "\n";
  }
  return out;
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) raise(ErrorCode::IoError, "cannot write config file " + path);
  out << to_text();
}

std::uint64_t RunConfig::content_hash() const {
  const std::string text = to_text();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace asbc
