#include "shapeprior/config.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>

namespace shapeprior {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for '" + key + "': " + value);
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad integer value for '" + key + "': " + value);
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: bad seed value for '" + key + "': " + value);
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

void apply_config_key(AppConfig& cfg, const std::string& key,
                      const std::string& value) {
  auto d = [&] { return parse_double(key, value); };
  auto i = [&] { return static_cast<int>(parse_int(key, value)); };

  if (key == "seed") cfg.seed = parse_u64(key, value);
  else if (key == "k") cfg.k = i();
  else if (key == "threshold_quantile") cfg.threshold_quantile = d();

  else if (key == "grid") cfg.pop.grid = i();
  else if (key == "spacing_mm") cfg.pop.spacing_mm = d();
  else if (key == "n_normal") cfg.pop.n_normal = i();
  else if (key == "n_anomalous") cfg.pop.n_anomalous = i();
  else if (key == "scans_per_subject") cfg.pop.scans_per_subject = i();
  else if (key == "r_major_min") cfg.pop.r_major_min = d();
  else if (key == "r_major_max") cfg.pop.r_major_max = d();
  else if (key == "r_minor_min") cfg.pop.r_minor_min = d();
  else if (key == "r_minor_max") cfg.pop.r_minor_max = d();
  else if (key == "taper_min") cfg.pop.taper_min = d();
  else if (key == "taper_max") cfg.pop.taper_max = d();
  else if (key == "bend_min") cfg.pop.bend_min = d();
  else if (key == "bend_max") cfg.pop.bend_max = d();
  else if (key == "superell_n_min") cfg.pop.superell_n_min = d();
  else if (key == "superell_n_max") cfg.pop.superell_n_max = d();
  else if (key == "squash_amp") cfg.pop.squash_amp = d();
  else if (key == "rough_amp_min") cfg.pop.rough_amp_min = d();
  else if (key == "rough_amp_max") cfg.pop.rough_amp_max = d();
  else if (key == "rough_waves_min") cfg.pop.rough_waves_min = i();
  else if (key == "rough_waves_max") cfg.pop.rough_waves_max = i();
  else if (key == "notch_min") cfg.pop.notch_min = i();
  else if (key == "notch_max") cfg.pop.notch_max = i();
  else if (key == "notch_depth_min") cfg.pop.notch_depth_min = d();
  else if (key == "notch_depth_max") cfg.pop.notch_depth_max = d();

  else if (key == "hidden") cfg.train.hidden = i();
  else if (key == "latent_dim") cfg.train.d = i();
  else if (key == "epochs") cfg.train.epochs = i();
  else if (key == "lr_theta") cfg.train.lr_theta = d();
  else if (key == "lr_latent") { cfg.train.lr_latent = d(); cfg.infer.lr_latent = cfg.train.lr_latent; }
  else if (key == "lambda") { cfg.train.lambda = d(); cfg.infer.lambda = cfg.train.lambda; }
  else if (key == "ce_weight") { cfg.train.ce_weight = d(); cfg.infer.ce_weight = cfg.train.ce_weight; }
  else if (key == "latent_init_std") { cfg.train.latent_init_std = d(); cfg.infer.init_std = cfg.train.latent_init_std; }

  else if (key == "infer_epochs") cfg.infer.epochs = i();
  else if (key == "infer_restarts") cfg.infer.restarts = i();

  else throw ConfigError("config: unknown key '" + key + "'");
}

void load_config_file(AppConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path.string() + ":" +
                        std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: " + path.string() + ":" +
                        std::to_string(lineno) + ": empty key");
    apply_config_key(cfg, key, value);
  }
}

void validate_config(const AppConfig& cfg) {
  try {
    validate_spec(cfg.pop);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  require(cfg.train.epochs >= 1, "epochs must be >= 1");
  require(cfg.train.hidden >= 1, "hidden must be >= 1");
  require(cfg.train.d >= 1, "latent_dim must be >= 1");
  require(cfg.train.lr_theta > 0.0, "lr_theta must be positive");
  require(cfg.train.lr_latent > 0.0, "lr_latent must be positive");
  require(cfg.train.lambda >= 0.0, "lambda must be >= 0");
  require(cfg.train.ce_weight >= 0.0, "ce_weight must be >= 0");
  require(cfg.train.latent_init_std > 0.0, "latent_init_std must be positive");
  require(cfg.infer.epochs >= 1, "infer_epochs must be >= 1");
  require(cfg.infer.restarts >= 1, "infer_restarts must be >= 1");
  require(cfg.threshold_quantile > 0.0 && cfg.threshold_quantile < 100.0,
          "threshold_quantile must be in (0, 100)");
  require(cfg.k >= 2, "k must be >= 2");
}

std::map<std::string, std::string> config_snapshot(const AppConfig& cfg) {
  std::map<std::string, std::string> m;
  char seedbuf[24];
  std::snprintf(seedbuf, sizeof seedbuf, "%" PRIu64, cfg.seed);
  m["seed"] = seedbuf;
  m["k"] = std::to_string(cfg.k);
  m["threshold_quantile"] = fmt_double(cfg.threshold_quantile);

  m["grid"] = std::to_string(cfg.pop.grid);
  m["spacing_mm"] = fmt_double(cfg.pop.spacing_mm);
  m["n_normal"] = std::to_string(cfg.pop.n_normal);
  m["n_anomalous"] = std::to_string(cfg.pop.n_anomalous);
  m["scans_per_subject"] = std::to_string(cfg.pop.scans_per_subject);
  m["r_major_min"] = fmt_double(cfg.pop.r_major_min);
  m["r_major_max"] = fmt_double(cfg.pop.r_major_max);
  m["r_minor_min"] = fmt_double(cfg.pop.r_minor_min);
  m["r_minor_max"] = fmt_double(cfg.pop.r_minor_max);
  m["taper_min"] = fmt_double(cfg.pop.taper_min);
  m["taper_max"] = fmt_double(cfg.pop.taper_max);
  m["bend_min"] = fmt_double(cfg.pop.bend_min);
  m["bend_max"] = fmt_double(cfg.pop.bend_max);
  m["superell_n_min"] = fmt_double(cfg.pop.superell_n_min);
  m["superell_n_max"] = fmt_double(cfg.pop.superell_n_max);
  m["squash_amp"] = fmt_double(cfg.pop.squash_amp);
  m["rough_amp_min"] = fmt_double(cfg.pop.rough_amp_min);
  m["rough_amp_max"] = fmt_double(cfg.pop.rough_amp_max);
  m["rough_waves_min"] = std::to_string(cfg.pop.rough_waves_min);
  m["rough_waves_max"] = std::to_string(cfg.pop.rough_waves_max);
  m["notch_min"] = std::to_string(cfg.pop.notch_min);
  m["notch_max"] = std::to_string(cfg.pop.notch_max);
  m["notch_depth_min"] = fmt_double(cfg.pop.notch_depth_min);
  m["notch_depth_max"] = fmt_double(cfg.pop.notch_depth_max);

  m["hidden"] = std::to_string(cfg.train.hidden);
  m["latent_dim"] = std::to_string(cfg.train.d);
  m["epochs"] = std::to_string(cfg.train.epochs);
  m["lr_theta"] = fmt_double(cfg.train.lr_theta);
  m["lr_latent"] = fmt_double(cfg.train.lr_latent);
  m["lambda"] = fmt_double(cfg.train.lambda);
  m["ce_weight"] = fmt_double(cfg.train.ce_weight);
  m["latent_init_std"] = fmt_double(cfg.train.latent_init_std);

  m["infer_epochs"] = std::to_string(cfg.infer.epochs);
  m["infer_restarts"] = std::to_string(cfg.infer.restarts);
  return m;
}

} // namespace shapeprior
