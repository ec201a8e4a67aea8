#include "kdvlab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "kdvlab/errors.hpp"

namespace kdvlab {

namespace {

struct KeyTable {
  std::map<std::string, std::pair<std::string, int>> kv;  // key -> (value, line)

  bool has(const std::string& k) const { return kv.count(k) > 0; }
  int line(const std::string& k) const { return kv.at(k).second; }

  std::string str(const std::string& k, const std::string& dflt) const {
    auto it = kv.find(k);
    return it == kv.end() ? dflt : it->second.first;
  }
  double num(const std::string& k, double dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    try {
      size_t pos = 0;
      double v = std::stod(it->second.first, &pos);
      if (pos != it->second.first.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      throw ConfigError(k + ": not a number: '" + it->second.first +
                        "' (line " + std::to_string(it->second.second) + ")");
    }
  }
  long integer(const std::string& k, long dflt) const {
    const double v = num(k, static_cast<double>(dflt));
    if (std::abs(v - std::llround(v)) > 1e-9)
      throw ConfigError(k + ": expected an integer (line " +
                        std::to_string(line(k)) + ")");
    return std::llround(v);
  }
  bool flag(const std::string& k, bool dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    const std::string& v = it->second.first;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(k + ": expected true/false (line " +
                      std::to_string(it->second.second) + ")");
  }
  std::vector<double> list(const std::string& k,
                           const std::vector<double>& dflt) const {
    auto it = kv.find(k);
    if (it == kv.end()) return dflt;
    std::vector<double> out;
    std::stringstream ss(it->second.first);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(item));
      } catch (...) {
        throw ConfigError(k + ": malformed list entry '" + item + "' (line " +
                          std::to_string(it->second.second) + ")");
      }
    }
    return out;
  }
};

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  size_t b = s.find_last_not_of(" \t\r");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

BFactor parse_bfactor(const std::string& spec, const std::string& key) {
  if (spec == "zero") return BFactor::zero();
  auto colon = spec.find(':');
  const std::string head = spec.substr(0, colon);
  const std::string args =
      colon == std::string::npos ? "" : spec.substr(colon + 1);
  std::vector<double> vals;
  {
    std::stringstream ss(args);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        vals.push_back(std::stod(item));
      } catch (...) {
        throw ConfigError(key + ": malformed b-factor argument '" + item + "'");
      }
    }
  }
  if (head == "const") return BFactor::constant(vals.empty() ? 1.0 : vals[0]);
  if (head == "linear")
    return BFactor::linear(vals.size() > 0 ? vals[0] : 0.0,
                           vals.size() > 1 ? vals[1] : 1.0);
  if (head == "pow")
    return BFactor::monomial(vals.empty() ? 1 : static_cast<int>(vals[0]),
                             vals.size() > 1 ? vals[1] : 1.0);
  if (head == "exp") return BFactor::exp_w(vals.empty() ? 1.0 : vals[0]);
  throw ConfigError(key + ": unknown b-factor kind '" + head + "'");
}

std::string bfactor_spec(const BFactor& b) {
  std::ostringstream os;
  os.precision(17);
  switch (b.kind) {
    case BFactor::Kind::Zero:
      return "zero";
    case BFactor::Kind::Constant:
      os << "const:" << b.c0.real();
      return os.str();
    case BFactor::Kind::Linear:
      os << "linear:" << b.c0.real() << ',' << b.c1.real();
      return os.str();
    case BFactor::Kind::Power:
      os << "pow:" << b.power << ',' << b.c0.real();
      return os.str();
    case BFactor::Kind::Exp:
      os << "exp:" << b.c0.real();
      return os.str();
  }
  return "zero";
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  auto close = [](double a, double b) {
    return std::abs(a - b) <= 1e-14 * (1.0 + std::abs(a) + std::abs(b));
  };
  bool eq = preset == o.preset && grid_N == o.grid_N && close(grid_L, o.grid_L) &&
            close(grid_h, o.grid_h) && close(sigma, o.sigma) &&
            close(theta, o.theta) && close(mu, o.mu) && close(M2, o.M2) &&
            close(M1, o.M1) && close(k, o.k) && close(rho_prime, o.rho_prime) &&
            auto_constants == o.auto_constants && deltas.size() == o.deltas.size() &&
            close(a3, o.a3) && a3_samples.size() == o.a3_samples.size() &&
            mode == o.mode && close(T, o.T) && close(dt, o.dt) &&
            close(work_m, o.work_m) && close(work_rho, o.work_rho) &&
            close(delta_work, o.delta_work) && close(tol, o.tol) &&
            max_iters == o.max_iters && close(window, o.window) &&
            init_kind == o.init_kind && close(init_amplitude, o.init_amplitude) &&
            close(init_scale, o.init_scale) && init_mode_k == o.init_mode_k &&
            seed == o.seed && threads == o.threads &&
            close(theta0, o.theta0) && close(window_inner, o.window_inner) &&
            close(window_outer, o.window_outer) &&
            close(window_floor, o.window_floor) &&
            neccond_rho.size() == o.neccond_rho.size();
  if (!eq) return false;
  for (size_t i = 0; i < deltas.size(); ++i)
    if (!close(deltas[i], o.deltas[i])) return false;
  for (size_t i = 0; i < a3_samples.size(); ++i)
    if (!close(a3_samples[i], o.a3_samples[i])) return false;
  for (size_t i = 0; i < neccond_rho.size(); ++i)
    if (!close(neccond_rho[i], o.neccond_rho[i])) return false;
  for (int j = 0; j < 3; ++j) {
    if (std::abs(alpha[j] - o.alpha[j]) > 1e-14) return false;
    if (b_spec[j] != o.b_spec[j]) return false;
    if (!close(decay[j], o.decay[j])) return false;
  }
  return true;
}

ExperimentConfig parse_config(const std::string& text) {
  KeyTable t;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    t.kv[key] = {val, lineno};
  }

  ExperimentConfig cfg;
  cfg.preset = t.str("preset", "custom");
  if (cfg.preset != "custom" && cfg.preset != "kdv" && cfg.preset != "kdvb" &&
      cfg.preset != "linear-gevrey")
    throw ConfigError("preset: must be one of kdv, kdvb, linear-gevrey, custom");

  cfg.grid_L = t.num("grid.L", cfg.grid_L);
  cfg.grid_N = static_cast<int>(t.integer("grid.N", cfg.grid_N));
  cfg.grid_h = t.num("grid.h", cfg.grid_h);
  if (cfg.grid_N < 8 || cfg.grid_N % 2 != 0)
    throw ConfigError("grid.N: must be an even integer >= 8" +
                      (t.has("grid.N")
                           ? " (line " + std::to_string(t.line("grid.N")) + ")"
                           : std::string()));
  if (!(cfg.grid_L > 0.0)) throw ConfigError("grid.L: must be positive");

  cfg.sigma = t.num("weights.sigma", cfg.sigma);
  if (!(cfg.sigma > 0.5 && cfg.sigma < 1.0))
    throw ConfigError(
        "weights.sigma: must lie in the open interval (1/2, 1)" +
        (t.has("weights.sigma")
             ? " (line " + std::to_string(t.line("weights.sigma")) + ")"
             : std::string()));
  cfg.theta = t.num("weights.theta", cfg.theta);
  const double theta_cap = 1.0 / (2.0 * (1.0 - cfg.sigma));
  if (!(cfg.theta > 1.0 && cfg.theta < theta_cap))
    throw ConfigError("weights.theta: must lie in (1, 1/(2(1-sigma))) = (1, " +
                      std::to_string(theta_cap) + ")");
  cfg.mu = t.num("weights.mu", cfg.mu);
  if (cfg.mu != 0.0 && !(cfg.mu > 1.0 && cfg.mu < cfg.theta))
    throw ConfigError("weights.mu: must lie in (1, theta) or be 0 for default");
  cfg.M2 = t.num("weights.M2", cfg.M2);
  cfg.M1 = t.num("weights.M1", cfg.M1);
  cfg.k = t.num("weights.k", cfg.k);
  cfg.rho_prime = t.num("weights.rho_prime", cfg.rho_prime);
  if (cfg.M2 < 0 || cfg.M1 < 0 || cfg.k < 0 || cfg.rho_prime < 0)
    throw ConfigError("weights.*: M2, M1, k, rho_prime must be >= 0");
  cfg.auto_constants = t.flag("weights.auto_constants", cfg.auto_constants);
  cfg.deltas = t.list("weights.deltas", cfg.deltas);

  cfg.a3 = t.num("model.a3", cfg.a3);
  cfg.a3_samples = t.list("model.a3_samples", cfg.a3_samples);
  for (int j = 0; j < 3; ++j) {
    const std::string sj = std::to_string(j);
    cfg.alpha[j] = cplx(t.num("model.alpha" + sj + "_re", cfg.alpha[j].real()),
                        t.num("model.alpha" + sj + "_im", cfg.alpha[j].imag()));
    cfg.b_spec[j] = t.str("model.b" + sj, cfg.b_spec[j]);
    parse_bfactor(cfg.b_spec[j], "model.b" + sj);  // validate
    cfg.decay[j] = t.num("model.decay" + sj, cfg.decay[j]);
  }
  cfg.theta0 = t.num("model.theta0", cfg.theta0);
  cfg.window_inner = t.num("model.window_inner", cfg.window_inner);
  cfg.window_outer = t.num("model.window_outer", cfg.window_outer);
  cfg.window_floor = t.num("model.window_floor", cfg.window_floor);
  if (!(cfg.window_inner > 0 && cfg.window_inner < cfg.window_outer &&
        cfg.window_outer < 1.0))
    throw ConfigError("model.window_*: need 0 < inner < outer < 1");

  cfg.mode = t.str("solve.mode", cfg.mode);
  if (cfg.mode != "linear" && cfg.mode != "conjugated" &&
      cfg.mode != "quasilinear")
    throw ConfigError("solve.mode: must be linear, conjugated or quasilinear");
  cfg.T = t.num("solve.T", cfg.T);
  cfg.dt = t.num("solve.dt", cfg.dt);
  if (!(cfg.T > 0) || !(cfg.dt > 0) || cfg.dt > cfg.T)
    throw ConfigError("solve.T/solve.dt: need 0 < dt <= T");
  cfg.work_m = t.num("solve.m", cfg.work_m);
  cfg.work_rho = t.num("solve.rho", cfg.work_rho);
  cfg.delta_work = t.num("solve.delta_work", cfg.delta_work);
  cfg.tol = t.num("solve.tol", cfg.tol);
  cfg.max_iters = static_cast<int>(t.integer("solve.max_iters", cfg.max_iters));
  cfg.window = t.num("solve.window", cfg.window);

  cfg.init_kind = t.str("init.kind", cfg.init_kind);
  if (cfg.init_kind != "zero" && cfg.init_kind != "sech" &&
      cfg.init_kind != "sech2" && cfg.init_kind != "gauss" &&
      cfg.init_kind != "mode")
    throw ConfigError("init.kind: must be zero, sech, sech2, gauss or mode");
  cfg.init_amplitude = t.num("init.amplitude", cfg.init_amplitude);
  cfg.init_scale = t.num("init.scale", cfg.init_scale);
  cfg.init_mode_k = static_cast<int>(t.integer("init.mode_k", cfg.init_mode_k));

  cfg.neccond_rho = t.list("neccond.rho", cfg.neccond_rho);
  cfg.seed = t.integer("seed", cfg.seed);
  cfg.threads = static_cast<int>(t.integer("threads", cfg.threads));
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream os;
  os.precision(17);
  auto list = [&](const std::vector<double>& v) {
    std::ostringstream ls;
    ls.precision(17);
    for (size_t i = 0; i < v.size(); ++i) {
      if (i) ls << ',';
      ls << v[i];
    }
    return ls.str();
  };
  os << "preset = " << c.preset << "\n";
  os << "grid.L = " << c.grid_L << "\n";
  os << "grid.N = " << c.grid_N << "\n";
  os << "grid.h = " << c.grid_h << "\n";
  os << "weights.sigma = " << c.sigma << "\n";
  os << "weights.theta = " << c.theta << "\n";
  os << "weights.mu = " << c.mu << "\n";
  os << "weights.M2 = " << c.M2 << "\n";
  os << "weights.M1 = " << c.M1 << "\n";
  os << "weights.k = " << c.k << "\n";
  os << "weights.rho_prime = " << c.rho_prime << "\n";
  os << "weights.auto_constants = " << (c.auto_constants ? "true" : "false")
     << "\n";
  os << "weights.deltas = " << list(c.deltas) << "\n";
  os << "model.a3 = " << c.a3 << "\n";
  if (!c.a3_samples.empty())
    os << "model.a3_samples = " << list(c.a3_samples) << "\n";
  for (int j = 0; j < 3; ++j) {
    os << "model.alpha" << j << "_re = " << c.alpha[j].real() << "\n";
    os << "model.alpha" << j << "_im = " << c.alpha[j].imag() << "\n";
    os << "model.b" << j << " = " << c.b_spec[j] << "\n";
    os << "model.decay" << j << " = " << c.decay[j] << "\n";
  }
  os << "model.theta0 = " << c.theta0 << "\n";
  os << "model.window_inner = " << c.window_inner << "\n";
  os << "model.window_outer = " << c.window_outer << "\n";
  os << "model.window_floor = " << c.window_floor << "\n";
  os << "solve.mode = " << c.mode << "\n";
  os << "solve.T = " << c.T << "\n";
  os << "solve.dt = " << c.dt << "\n";
  os << "solve.m = " << c.work_m << "\n";
  os << "solve.rho = " << c.work_rho << "\n";
  os << "solve.delta_work = " << c.delta_work << "\n";
  os << "solve.tol = " << c.tol << "\n";
  os << "solve.max_iters = " << c.max_iters << "\n";
  os << "solve.window = " << c.window << "\n";
  os << "init.kind = " << c.init_kind << "\n";
  os << "init.amplitude = " << c.init_amplitude << "\n";
  os << "init.scale = " << c.init_scale << "\n";
  os << "init.mode_k = " << c.init_mode_k << "\n";
  os << "neccond.rho = " << list(c.neccond_rho) << "\n";
  os << "seed = " << c.seed << "\n";
  os << "threads = " << c.threads << "\n";
  return os.str();
}

CoefficientModel ExperimentConfig::build_model() const {
  CoefficientModel m;
  if (preset == "kdv") {
    m = make_kdv_model(std::abs(a3), alpha[1] == cplx(0.0) ? 1.0
                                                           : alpha[1].real(),
                       0.0);
  } else if (preset == "kdvb") {
    const double b = alpha[2].imag() != 0.0 ? alpha[2].imag() / 5.0 : -0.1;
    const double a = alpha[1].real() != 0.0 ? alpha[1].real() / 2.0 : 0.5;
    m = make_kdvb_model(a, b, std::abs(a3));
  } else if (preset == "linear-gevrey") {
    const double amp = alpha[2].imag() != 0.0 ? alpha[2].imag() : 0.5;
    m = make_linear_gevrey_model(amp, sigma, theta0);
  } else {
    if (a3_samples.empty()) {
      const double v = a3;
      m.a3 = [v](double) { return v; };
      m.C_a3 = std::abs(v);
    } else {
      auto samples = a3_samples;
      const double horizon = T;
      m.a3 = [samples, horizon](double t) {
        const double s =
            std::min(std::max(t / horizon, 0.0), 1.0) * (samples.size() - 1);
        const size_t i = std::min(static_cast<size_t>(s), samples.size() - 2);
        const double frac = s - i;
        return samples[i] * (1.0 - frac) + samples[i + 1] * frac;
      };
      double lo = std::abs(samples[0]);
      for (double v : samples) lo = std::min(lo, std::abs(v));
      m.C_a3 = lo;
    }
    for (int j = 0; j < 3; ++j) {
      const cplx av = alpha[j];
      m.term[j].alpha = [av](double) { return av; };
      m.term[j].b = parse_bfactor(b_spec[j], "model.b" + std::to_string(j));
      m.term[j].decay = decay[j] >= 0.0 ? decay[j] : 0.5 * sigma * j;
    }
    m.sigma = sigma;
    m.theta0 = theta0;
  }
  m.window_inner_frac = window_inner;
  m.window_outer_frac = window_outer;
  m.window_floor = window_floor;
  return m;
}

GridSpec ExperimentConfig::build_grid() const {
  return GridSpec(grid_L, grid_N, std::max(grid_h, 1.0));
}

WeightParams ExperimentConfig::build_weights() const {
  WeightParams p;
  p.sigma = sigma;
  p.theta = theta;
  p.mu = mu;
  p.M2 = M2;
  p.M1 = M1;
  p.k = k;
  p.h = std::max(grid_h, 1.0);
  p.rho_prime = rho_prime;
  p.T = T;
  return p;
}

SolveConfig ExperimentConfig::build_solve_config() const {
  SolveConfig s;
  s.dt = dt;
  s.working = GevreyIndex(work_m, work_rho, theta);
  s.delta_work = delta_work;
  s.deltas = deltas;
  s.conjugated = mode == "conjugated";
  s.window = window;
  return s;
}

GridFunction ExperimentConfig::build_initial(const GridSpec& g) const {
  if (init_kind == "zero") return GridFunction(g);
  if (init_kind == "mode") {
    const int idx = (init_mode_k % g.n_modes + g.n_modes) % g.n_modes;
    GridFunction u = unit_mode(g, idx);
    return cplx(init_amplitude, 0.0) * u;
  }
  const double a = init_amplitude;
  const double s = init_scale;
  if (init_kind == "sech")
    return sample(g, [&](double x) { return cplx(a / std::cosh(s * x), 0.0); });
  if (init_kind == "sech2")
    return sample(g, [&](double x) {
      const double c = 1.0 / std::cosh(s * x);
      return cplx(a * c * c, 0.0);
    });
  return sample(g, [&](double x) { return cplx(a * std::exp(-s * x * x), 0.0); });
}

}  // namespace kdvlab
