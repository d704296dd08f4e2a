#include "levyspec/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <numbers>
#include <thread>

#include "levyspec/ensemble.hpp"
#include "levyspec/freeconv.hpp"
#include "levyspec/limitlaw.hpp"
#include "levyspec/spectral.hpp"
#include "levyspec/stats.hpp"

namespace levyspec::experiment {

using json = nlohmann::json;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using complexd = std::complex<double>;

// ---------------------------------------------------------------------------
// name maps

Kind kind_from_string(const std::string& s) {
  if (s == "lsv") return Kind::lsv;
  if (s == "bottomk") return Kind::bottomk;
  if (s == "deloc") return Kind::deloc;
  if (s == "locallaw") return Kind::locallaw;
  if (s == "isotropic") return Kind::isotropic;
  if (s == "gap") return Kind::gap;
  if (s == "density") return Kind::density;
  if (s == "tailcheck") return Kind::tailcheck;
  throw ValidationError("unknown experiment kind", {"kind = " + s});
}

std::string kind_to_string(Kind k) {
  switch (k) {
    case Kind::lsv: return "lsv";
    case Kind::bottomk: return "bottomk";
    case Kind::deloc: return "deloc";
    case Kind::locallaw: return "locallaw";
    case Kind::isotropic: return "isotropic";
    case Kind::gap: return "gap";
    case Kind::density: return "density";
    case Kind::tailcheck: return "tailcheck";
  }
  return "?";
}

EnsembleChoice ensemble_from_string(const std::string& s) {
  if (s == "gaussian") return EnsembleChoice::gaussian;
  if (s == "levy") return EnsembleChoice::levy;
  if (s == "interpolant") return EnsembleChoice::interpolant;
  throw ValidationError("unknown ensemble choice", {"ensemble = " + s});
}

std::string ensemble_to_string(EnsembleChoice e) {
  switch (e) {
    case EnsembleChoice::gaussian: return "gaussian";
    case EnsembleChoice::levy: return "levy";
    case EnsembleChoice::interpolant: return "interpolant";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// config

namespace {

json deformation_to_json(const stable::Deformation& d) {
  json j;
  j["kind"] = d.name();
  if (d.kind == stable::Deformation::Kind::uniform) j["half_width"] = d.half_width;
  if (d.kind == stable::Deformation::Kind::table) {
    j["values"] = d.values;
    j["probs"] = d.probs;
  }
  return j;
}

stable::Deformation deformation_from_json(const json& j) {
  stable::Deformation d;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    if (key != "kind" && key != "half_width" && key != "values" &&
        key != "probs") {
      throw ValidationError("unknown deformation key", {key});
    }
  }
  const std::string kind = j.value("kind", "rademacher");
  if (kind == "none") d.kind = stable::Deformation::Kind::none;
  else if (kind == "rademacher") d.kind = stable::Deformation::Kind::rademacher;
  else if (kind == "uniform") d.kind = stable::Deformation::Kind::uniform;
  else if (kind == "table") d.kind = stable::Deformation::Kind::table;
  else throw ValidationError("unknown deformation kind", {kind});
  d.half_width = j.value("half_width", 1.0);
  if (j.contains("values")) d.values = j["values"].get<std::vector<double>>();
  if (j.contains("probs")) d.probs = j["probs"].get<std::vector<double>>();
  d.validate();
  return d;
}

double resolved_nu(const Config& cfg) {
  return cfg.nu ? *cfg.nu : stable::feasible_defaults(cfg.a).nu;
}

double resolved_rho(const Config& cfg) {
  if (cfg.rho) return *cfg.rho;
  const double nu = resolved_nu(cfg);
  return 0.5 * nu * std::min(1.0, (2.0 - cfg.a) / cfg.a);
}

}  // namespace

stable::EnsembleParams Config::params() const { return params_for(N); }

stable::EnsembleParams Config::params_for(int n) const {
  return stable::EnsembleParams::from_exponents(n, a, resolved_nu(*this),
                                                resolved_rho(*this),
                                                deformation, seed);
}

void Config::validate() const {
  std::vector<std::string> bad;
  if (N < 2) bad.push_back("N >= 2");
  if (workers < 0) bad.push_back("workers >= 0");
  if (kind != Kind::density && kind != Kind::tailcheck && trials < 1)
    bad.push_back("trials >= 1");
  if (!(a > 0.0 && a < 2.0)) bad.push_back("a in (0, 2)");
  switch (kind) {
    case Kind::bottomk:
      if (k < 1 || k > N) bad.push_back("1 <= k <= N");
      break;
    case Kind::deloc:
      if (!(c > 0.0)) bad.push_back("c > 0");
      if (!(delta > 0.0 && delta <= 0.5)) bad.push_back("delta in (0, 0.5]");
      break;
    case Kind::locallaw:
      if (grid.points < 1) bad.push_back("grid.points >= 1");
      if (!(grid.e_min <= grid.e_max)) bad.push_back("grid.e_min <= grid.e_max");
      if (!(eta >= 0.0)) bad.push_back("eta >= 0");
      break;
    case Kind::isotropic:
      if (!(z_im >= 0.0)) bad.push_back("z_im >= 0");
      if (!(c_exponent >= 0.0)) bad.push_back("c_exponent >= 0");
      break;
    case Kind::gap:
      if (!(r > 0.0)) bad.push_back("r > 0");
      if (ladder != "spacing" && ladder != "exponent")
        bad.push_back("ladder is 'spacing' or 'exponent'");
      if (!(eps > 0.0)) bad.push_back("eps > 0");
      if (!(divisor > 1.0)) bad.push_back("divisor > 1");
      break;
    case Kind::density:
      if (grid.points < 1) bad.push_back("grid.points >= 1");
      if (!(grid.e_min <= grid.e_max)) bad.push_back("grid.e_min <= grid.e_max");
      if (eta_levels < 2) bad.push_back("eta_levels >= 2");
      if (!(eta0 > 0.0)) bad.push_back("eta0 > 0");
      break;
    case Kind::tailcheck:
      if (Ns.empty()) bad.push_back("Ns nonempty");
      for (int n : Ns)
        if (n < 2) bad.push_back("every tailcheck N >= 2");
      if (ts.empty()) bad.push_back("ts nonempty");
      for (double t : ts)
        if (!(t > 0.0)) bad.push_back("every tail threshold > 0");
      if (samples < 1000) bad.push_back("samples >= 1000");
      break;
    default:
      break;
  }
  if (ensemble == EnsembleChoice::interpolant) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) bad.push_back("gamma in [0, 1]");
    if (s && !(*s >= 0.0)) bad.push_back("s >= 0");
  }
  if (!bad.empty()) throw ValidationError("invalid experiment config", bad);
  // The heavy-tailed parameter constraints apply whenever a Levy block is
  // actually sampled.
  const bool needs_levy =
      ensemble != EnsembleChoice::gaussian || kind == Kind::locallaw ||
      kind == Kind::isotropic || kind == Kind::tailcheck;
  if (needs_levy && kind != Kind::density) {
    if (kind == Kind::tailcheck) {
      for (int n : Ns) (void)params_for(n);
    } else {
      (void)params();
    }
  }
  deformation.validate();
}

json Config::to_json() const {
  // `workers` and `out` are execution knobs, not part of the experiment
  // identity: omitting them keeps reports byte-identical across worker
  // counts and output locations.
  json j;
  j["kind"] = kind_to_string(kind);
  j["ensemble"] = ensemble_to_string(ensemble);
  j["N"] = N;
  j["a"] = a;
  if (nu) j["nu"] = *nu;
  if (rho) j["rho"] = *rho;
  j["deformation"] = deformation_to_json(deformation);
  j["seed"] = seed;
  j["trials"] = trials;
  j["gamma"] = gamma;
  if (s) j["s"] = *s;
  j["k"] = k;
  j["c"] = c;
  j["delta"] = delta;
  j["grid"] = {{"e_min", grid.e_min}, {"e_max", grid.e_max}, {"points", grid.points}};
  j["eta"] = eta;
  j["z_re"] = z_re;
  j["z_im"] = z_im;
  j["c_exponent"] = c_exponent;
  j["r"] = r;
  j["ladder"] = ladder;
  j["eps"] = eps;
  j["divisor"] = divisor;
  j["eta_levels"] = eta_levels;
  j["eta0"] = eta0;
  j["Ns"] = Ns;
  j["ts"] = ts;
  j["samples"] = samples;
  return j;
}

Config Config::from_json(const json& j) {
  static const std::vector<std::string> known = {
      "kind", "ensemble", "N", "a", "nu", "rho", "deformation", "seed",
      "trials", "workers", "out", "gamma", "s", "k", "c", "delta", "grid",
      "eta", "z_re", "z_im", "c_exponent", "r", "ladder", "eps", "divisor",
      "eta_levels", "eta0", "Ns", "ts", "samples"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(known.begin(), known.end(), it.key()) == known.end()) {
      throw ValidationError("unknown config key", {it.key()});
    }
  }
  Config c;
  if (j.contains("kind")) c.kind = kind_from_string(j["kind"].get<std::string>());
  if (j.contains("ensemble"))
    c.ensemble = ensemble_from_string(j["ensemble"].get<std::string>());
  c.N = j.value("N", c.N);
  c.a = j.value("a", c.a);
  if (j.contains("nu")) c.nu = j["nu"].get<double>();
  if (j.contains("rho")) c.rho = j["rho"].get<double>();
  if (j.contains("deformation"))
    c.deformation = deformation_from_json(j["deformation"]);
  c.seed = j.value("seed", c.seed);
  c.trials = j.value("trials", c.trials);
  c.workers = j.value("workers", c.workers);
  c.out = j.value("out", c.out);
  c.gamma = j.value("gamma", c.gamma);
  if (j.contains("s")) c.s = j["s"].get<double>();
  c.k = j.value("k", c.k);
  c.c = j.value("c", c.c);
  c.delta = j.value("delta", c.delta);
  if (j.contains("grid")) {
    const json& g = j["grid"];
    for (auto it = g.begin(); it != g.end(); ++it) {
      if (it.key() != "e_min" && it.key() != "e_max" && it.key() != "points") {
        throw ValidationError("unknown grid key", {it.key()});
      }
    }
    c.grid.e_min = g.value("e_min", c.grid.e_min);
    c.grid.e_max = g.value("e_max", c.grid.e_max);
    c.grid.points = g.value("points", c.grid.points);
  }
  c.eta = j.value("eta", c.eta);
  c.z_re = j.value("z_re", c.z_re);
  c.z_im = j.value("z_im", c.z_im);
  c.c_exponent = j.value("c_exponent", c.c_exponent);
  c.r = j.value("r", c.r);
  c.ladder = j.value("ladder", c.ladder);
  c.eps = j.value("eps", c.eps);
  c.divisor = j.value("divisor", c.divisor);
  c.eta_levels = j.value("eta_levels", c.eta_levels);
  c.eta0 = j.value("eta0", c.eta0);
  if (j.contains("Ns")) c.Ns = j["Ns"].get<std::vector<int>>();
  if (j.contains("ts")) c.ts = j["ts"].get<std::vector<double>>();
  c.samples = j.value("samples", c.samples);
  return c;
}

// ---------------------------------------------------------------------------
// report serialization

json Report::to_json() const {
  json j;
  j["artifact"] = artifact;
  j["rng"] = rng;
  j["config"] = config;
  j["counts"] = {{"requested", requested}, {"completed", completed}, {"failed", failed}};
  j["failures"] = failures;
  j["rows"] = rows;
  j["aggregates"] = aggregates;
  return j;
}

Report Report::from_json(const json& j) {
  Report r;
  r.artifact = j.at("artifact").get<std::string>();
  r.rng = j.at("rng").get<std::string>();
  r.config = j.at("config");
  r.requested = j.at("counts").at("requested").get<int>();
  r.completed = j.at("counts").at("completed").get<int>();
  r.failed = j.at("counts").at("failed").get<int>();
  r.failures = j.at("failures");
  r.rows = j.at("rows");
  r.aggregates = j.at("aggregates");
  return r;
}

void write_report(const Report& rep, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("write_report: cannot open " + path);
  f << rep.to_json().dump(2) << '\n';
  if (!f) throw Error("write_report: write failed for " + path);
}

Report load_report(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("load_report: cannot open " + path);
  json j;
  f >> j;
  return Report::from_json(j);
}

int default_workers() {
  if (const char* env = std::getenv("LEVYSPEC_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return 1;
}

// ---------------------------------------------------------------------------
// trial runner

namespace {

struct Outcome {
  bool ok = false;
  json row;
  std::string error;
};

/// Independent trials pulled off an atomic queue. Trial i always uses RNG
/// stream i + 1 of the config seed, so any worker count and any scheduling
/// produce the same per-trial results; rows are stored by index.
std::vector<Outcome> run_trials(int n, int workers, std::uint64_t seed,
                                const std::function<json(int, Rng&)>& fn) {
  std::vector<Outcome> out(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto work = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      Rng rng(seed, std::uint64_t(i) + 1);
      try {
        out[std::size_t(i)].row = fn(i, rng);
        out[std::size_t(i)].ok = true;
      } catch (const std::exception& e) {
        out[std::size_t(i)].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return out;
}

Vector ascending_singvals(const Matrix& block) {
  Eigen::BDCSVD<Matrix> svd(block);
  return svd.singularValues().reverse();
}

Vector lambdas_of_block(const Matrix& block) {
  const Vector s = ascending_singvals(block);
  const Eigen::Index n = s.size();
  Vector L(2 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    L(n - 1 - i) = -s(i);
    L(n + i) = s(i);
  }
  return L;
}

/// The N x N block whose symmetrization the experiment studies. The
/// interpolating family is assembled at block level (symmetrization is
/// linear, so this matches interpolating the 2N x 2N matrices).
Matrix sample_block(const Config& cfg, const stable::EnsembleParams& prm,
                    double t_coupling, Rng& rng) {
  switch (cfg.ensemble) {
    case EnsembleChoice::gaussian:
      return ensemble::gaussian_iid(cfg.N, rng);
    case EnsembleChoice::levy:
      return ensemble::build_levy(prm, rng);
    case EnsembleChoice::interpolant: {
      const Matrix D = ensemble::build_levy(prm, rng);
      const auto split = ensemble::split_by_threshold(D, prm);
      const Matrix L = ensemble::gaussian_iid(cfg.N, rng);
      return split.big + cfg.gamma * split.small +
             std::sqrt(t_coupling * (1.0 - cfg.gamma * cfg.gamma)) * L;
    }
  }
  throw Error("sample_block: unreachable");
}

double resolve_noise_variance(const Config& cfg,
                              const stable::EnsembleParams& prm) {
  if (cfg.s) return *cfg.s;
  Rng setup(cfg.seed, 0);  // stream 0 is reserved for pre-trial setup
  return ensemble::coupling_time(prm, 0.02, setup,
                                 ensemble::CouplingMethod::monte_carlo,
                                 2000000)
      .t;
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  if (n == 1) {
    xs[0] = lo;
    return xs;
  }
  for (int i = 0; i < n; ++i)
    xs[std::size_t(i)] = lo + (hi - lo) * double(i) / double(n - 1);
  return xs;
}

double nearest_rank_quantile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  std::size_t rank = std::size_t(std::ceil(q * double(n)));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

// -------------------------------------------------------------------------
// per-kind summaries (recomputable from rows alone; checked by self_audit)

json summarize_lsv(const Config&, const json& rows) {
  std::vector<double> scaled;
  scaled.reserve(rows.size());
  double sum = 0.0;
  for (const auto& row : rows) {
    const double v = row.at("scaled").get<double>();
    scaled.push_back(v);
    sum += v;
  }
  json s;
  s["n"] = scaled.size();
  if (!scaled.empty()) {
    s["ks"] = stats::ks_statistic(
        scaled, [](double r) { return stats::lsv_limit_cdf(std::max(0.0, r)); });
    s["mean_scaled"] = sum / double(scaled.size());
  }
  return s;
}

json summarize_bottomk(const Config& cfg, const json& rows) {
  const int k = cfg.k;
  std::vector<std::vector<double>> cols(static_cast<std::size_t>(k));
  for (const auto& row : rows) {
    const auto vals = row.at("values").get<std::vector<double>>();
    for (int j = 0; j < k; ++j) cols[std::size_t(j)].push_back(vals[std::size_t(j)]);
  }
  json means = json::array();
  json quantiles = json::object();
  const std::vector<std::pair<std::string, double>> qs = {
      {"q10", 0.10}, {"q25", 0.25}, {"q50", 0.50}, {"q75", 0.75}, {"q90", 0.90}};
  for (const auto& [name, q] : qs) quantiles[name] = json::array();
  for (int j = 0; j < k; ++j) {
    auto& col = cols[std::size_t(j)];
    double m = 0.0;
    for (double v : col) m += v;
    means.push_back(col.empty() ? 0.0 : m / double(col.size()));
    std::sort(col.begin(), col.end());
    for (const auto& [name, q] : qs)
      quantiles[name].push_back(col.empty() ? 0.0 : nearest_rank_quantile(col, q));
  }
  json s;
  s["n"] = rows.size();
  s["component_means"] = means;
  s["quantiles"] = quantiles;
  return s;
}

json summarize_deloc(const Config& cfg, const json& rows) {
  const double bound = std::pow(double(cfg.N), cfg.delta - 0.5);
  int nonempty = 0, below = 0;
  double max_sup = 0.0;
  for (const auto& row : rows) {
    if (row.at("sup").is_null()) continue;
    ++nonempty;
    const double v = row.at("sup").get<double>();
    if (v <= bound) ++below;
    max_sup = std::max(max_sup, v);
  }
  json s;
  s["n"] = rows.size();
  s["bound"] = bound;
  s["windows_nonempty"] = nonempty;
  if (nonempty > 0) {
    s["frac_below_bound"] = double(below) / double(nonempty);
    s["max_sup"] = max_sup;
  } else {
    s["frac_below_bound"] = nullptr;
    s["max_sup"] = nullptr;
  }
  return s;
}

json summarize_locallaw(const Config&, const json& rows) {
  double worst = 0.0;
  for (const auto& row : rows)
    worst = std::max(worst, row.at("max_abs_diff").get<double>());
  json s;
  s["n"] = rows.size();
  s["max_abs_diff"] = worst;
  return s;
}

json summarize_isotropic(const Config&, const json& rows) {
  std::vector<double> ratios;
  ratios.reserve(rows.size());
  for (const auto& row : rows) ratios.push_back(row.at("ratio").get<double>());
  json s;
  s["n"] = rows.size();
  if (!ratios.empty()) {
    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    s["median_ratio"] = n % 2 ? ratios[n / 2]
                              : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
    s["max_ratio"] = ratios.back();
  }
  return s;
}

json summarize_gap(const Config& cfg, const json& rows) {
  const std::size_t n = rows.size();
  int empty = 0, edges = 0;
  double sum_lo = 0.0, sum_hi = 0.0, max_narrow = 0.0, max_wide = 0.0;
  for (const auto& row : rows) {
    if (row.at("count").get<int>() == 0) ++empty;
    if (row.at("edge").get<bool>()) ++edges;
    sum_lo += row.at("q_lo").get<double>();
    sum_hi += row.at("q_hi").get<double>();
    max_narrow = std::max(max_narrow, row.at("slack_narrow").get<double>());
    max_wide = std::max(max_wide, row.at("slack_wide").get<double>());
  }
  json s;
  s["n"] = n;
  if (n > 0) {
    const double p = double(empty) / double(n);
    s["p_empty"] = p;
    s["p_stderr"] = std::sqrt(p * (1.0 - p) / double(n));
    const double mlo = sum_lo / double(n), mhi = sum_hi / double(n);
    s["mean_q_lo"] = mlo;
    s["mean_q_hi"] = mhi;
    s["bracket_slack_lo"] = std::max(0.0, mlo - p);
    s["bracket_slack_hi"] = std::max(0.0, p - mhi);
    s["max_slack_narrow"] = max_narrow;
    s["max_slack_wide"] = max_wide;
    s["edge_cases"] = edges;
  }
  s["limit_gap_prob"] = 1.0 - stats::lsv_limit_cdf(cfg.r / 2.0);
  return s;
}

json summarize_density(const Config& cfg, const json& rows) {
  double max_delta = 0.0;
  json at_zero = nullptr;
  for (const auto& row : rows) {
    max_delta = std::max(max_delta, row.at("last_delta").get<double>());
    if (row.at("E").get<double>() == 0.0) at_zero = row.at("rho");
  }
  json s;
  s["n"] = rows.size();
  s["max_last_delta"] = max_delta;
  s["closed_form_rho0"] = limitlaw::rho_zero(cfg.a);
  s["rho_at_zero"] = at_zero;
  if (!at_zero.is_null()) {
    s["abs_diff_at_zero"] =
        std::abs(at_zero.get<double>() - limitlaw::rho_zero(cfg.a));
  }
  return s;
}

json summarize_tailcheck(const Config&, const json& rows) {
  double c1 = std::numeric_limits<double>::infinity(), c2 = 0.0;
  double sc_min = std::numeric_limits<double>::infinity(), sc_max = 0.0;
  double worst_z = 0.0;
  for (const auto& row : rows) {
    for (const auto& env : row.at("envelope")) {
      const double v = env.get<double>();
      c1 = std::min(c1, v);
      c2 = std::max(c2, v);
    }
    const double sc = row.at("coupling_scaled").get<double>();
    sc_min = std::min(sc_min, sc);
    sc_max = std::max(sc_max, sc);
    worst_z = std::max(worst_z, std::abs(row.at("split_zscore").get<double>()));
  }
  json s;
  s["n"] = rows.size();
  if (!rows.empty()) {
    s["C1"] = c1;
    s["C2"] = c2;
    s["envelope_ratio"] = c2 / c1;
    s["coupling_scaled_min"] = sc_min;
    s["coupling_scaled_max"] = sc_max;
    s["coupling_scaled_ratio"] = sc_max / sc_min;
    s["max_split_zscore"] = worst_z;
  }
  return s;
}

json summarize(const Config& cfg, const json& rows) {
  switch (cfg.kind) {
    case Kind::lsv: return summarize_lsv(cfg, rows);
    case Kind::bottomk: return summarize_bottomk(cfg, rows);
    case Kind::deloc: return summarize_deloc(cfg, rows);
    case Kind::locallaw: return summarize_locallaw(cfg, rows);
    case Kind::isotropic: return summarize_isotropic(cfg, rows);
    case Kind::gap: return summarize_gap(cfg, rows);
    case Kind::density: return summarize_density(cfg, rows);
    case Kind::tailcheck: return summarize_tailcheck(cfg, rows);
  }
  throw Error("summarize: unreachable");
}

}  // namespace

// ---------------------------------------------------------------------------
// run

Report run(const Config& cfg) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const int workers = cfg.workers > 0 ? cfg.workers : default_workers();

  json setup = json::object();
  std::function<json(int, Rng&)> trial;
  int requested = cfg.trials;

  const bool uses_levy_params = cfg.ensemble != EnsembleChoice::gaussian ||
                                cfg.kind == Kind::locallaw ||
                                cfg.kind == Kind::isotropic;

  switch (cfg.kind) {
    case Kind::lsv:
    case Kind::bottomk: {
      stable::EnsembleParams prm{};
      double t_coupling = 0.0;
      if (uses_levy_params) prm = cfg.params();
      if (cfg.ensemble == EnsembleChoice::interpolant) {
        t_coupling = resolve_noise_variance(cfg, prm);
        setup["coupling_t"] = t_coupling;
        setup["gamma"] = cfg.gamma;
      }
      const double xi_factor = cfg.ensemble == EnsembleChoice::gaussian
                                   ? 1.0
                                   : limitlaw::xi(cfg.a);
      const double scale = double(cfg.N) * xi_factor;
      setup["xi"] = xi_factor;
      setup["scale_factor"] = scale;
      if (cfg.kind == Kind::lsv) {
        trial = [cfg, prm, t_coupling, scale](int i, Rng& rng) {
          const Matrix B = sample_block(cfg, prm, t_coupling, rng);
          const Vector s = ascending_singvals(B);
          json row;
          row["trial"] = i;
          row["stream"] = i + 1;
          row["s1"] = s(0);
          row["scaled"] = scale * s(0);
          return row;
        };
      } else {
        trial = [cfg, prm, t_coupling, scale](int i, Rng& rng) {
          const Matrix B = sample_block(cfg, prm, t_coupling, rng);
          const Vector s = ascending_singvals(B);
          std::vector<double> vals(std::size_t(cfg.k));
          for (int j = 0; j < cfg.k; ++j) vals[std::size_t(j)] = scale * s(j);
          json row;
          row["trial"] = i;
          row["stream"] = i + 1;
          row["values"] = vals;
          return row;
        };
      }
      break;
    }

    case Kind::deloc: {
      stable::EnsembleParams prm{};
      double t_coupling = 0.0;
      if (uses_levy_params) prm = cfg.params();
      if (cfg.ensemble == EnsembleChoice::interpolant) {
        t_coupling = resolve_noise_variance(cfg, prm);
        setup["coupling_t"] = t_coupling;
      }
      setup["c"] = cfg.c;
      setup["bound"] = std::pow(double(cfg.N), cfg.delta - 0.5);
      trial = [cfg, prm, t_coupling](int i, Rng& rng) {
        const Matrix B = sample_block(cfg, prm, t_coupling, rng);
        const auto decomp = spectral::decompose(B);
        int count = 0;
        for (int j = 0; j < decomp.N && decomp.sing(j) <= cfg.c; ++j) ++count;
        const auto sup = stats::delocalization_sup(decomp, cfg.c);
        json row;
        row["trial"] = i;
        row["stream"] = i + 1;
        row["window_count"] = count;
        if (sup) row["sup"] = *sup;
        else row["sup"] = nullptr;
        return row;
      };
      break;
    }

    case Kind::locallaw: {
      const stable::EnsembleParams prm = cfg.params();
      const double eta =
          cfg.eta > 0.0 ? cfg.eta : std::pow(double(cfg.N), -0.4);
      const std::vector<double> es =
          linspace(cfg.grid.e_min, cfg.grid.e_max, cfg.grid.points);
      std::vector<complexd> ma(es.size());
      json ma_json = json::array(), grid_json = json::array();
      for (std::size_t j = 0; j < es.size(); ++j) {
        ma[j] = limitlaw::solve(cfg.a, complexd(es[j], eta), 1e-9).m;
        grid_json.push_back(es[j]);
        ma_json.push_back({ma[j].real(), ma[j].imag()});
      }
      setup["eta"] = eta;
      setup["grid"] = grid_json;
      setup["m_a"] = ma_json;
      trial = [cfg, prm, eta, es, ma](int i, Rng& rng) {
        const Matrix D = ensemble::build_levy(prm, rng);
        const auto split = ensemble::split_by_threshold(D, prm);
        const Vector lam = lambdas_of_block(split.big);
        json diffs = json::array(), mx_json = json::array();
        double worst = 0.0;
        for (std::size_t j = 0; j < es.size(); ++j) {
          const complexd mx = spectral::stieltjes(lam, complexd(es[j], eta));
          const double d = std::abs(mx - ma[j]);
          worst = std::max(worst, d);
          diffs.push_back(d);
          mx_json.push_back({mx.real(), mx.imag()});
        }
        json row;
        row["trial"] = i;
        row["stream"] = i + 1;
        row["m_x"] = mx_json;
        row["abs_diff"] = diffs;
        row["max_abs_diff"] = worst;
        return row;
      };
      break;
    }

    case Kind::isotropic: {
      const stable::EnsembleParams prm = cfg.params();
      const double s_val = cfg.s ? *cfg.s : resolve_noise_variance(cfg, prm);
      const double zi =
          cfg.z_im > 0.0 ? cfg.z_im : std::pow(double(cfg.N), -0.6);
      const complexd z(cfg.z_re, zi);
      setup["s"] = s_val;
      setup["z"] = {z.real(), z.imag()};
      setup["c_exponent"] = cfg.c_exponent;
      trial = [cfg, prm, s_val, z](int i, Rng& rng) {
        const Matrix D = ensemble::build_levy(prm, rng);
        const auto split = ensemble::split_by_threshold(D, prm);
        const auto decomp = spectral::decompose(split.big);
        const Matrix X2 = ensemble::symmetrize(split.big);
        const Matrix W2 = ensemble::gaussian_sym(cfg.N, rng);
        Vector q(2 * cfg.N);
        for (int j = 0; j < 2 * cfg.N; ++j) q(j) = rng.normal();
        q.normalize();
        const auto chk = freeconv::isotropic_check(X2, decomp, W2, s_val, z, q,
                                                   cfg.c_exponent);
        json row;
        row["trial"] = i;
        row["stream"] = i + 1;
        row["residual"] = chk.residual;
        row["scale"] = chk.scale;
        row["ratio"] = chk.residual / chk.scale;
        row["quadratic_form"] = {chk.quadratic_form.real(), chk.quadratic_form.imag()};
        row["approximant"] = {chk.approximant.real(), chk.approximant.imag()};
        return row;
      };
      break;
    }

    case Kind::gap: {
      stable::EnsembleParams prm{};
      double t_coupling = 0.0;
      if (uses_levy_params) prm = cfg.params();
      if (cfg.ensemble == EnsembleChoice::interpolant) {
        t_coupling = resolve_noise_variance(cfg, prm);
        setup["coupling_t"] = t_coupling;
      }
      const bool gaussian = cfg.ensemble == EnsembleChoice::gaussian;
      const double rho0 =
          gaussian ? 1.0 / std::numbers::pi : limitlaw::rho_zero(cfg.a);
      const double xi_factor = gaussian ? 1.0 : limitlaw::xi(cfg.a);
      const double w = cfg.r / (2.0 * double(cfg.N) * xi_factor);
      const double spacing = 1.0 / (2.0 * double(cfg.N) * rho0);
      stats::CountingConfig ccfg;
      if (cfg.ladder == "spacing") {
        ccfg = stats::CountingConfig::from_spacing(w, spacing, cfg.divisor);
      } else {
        ccfg.w = w;
        ccfg.eta1 = std::pow(double(cfg.N), -1.0 - cfg.eps);
        ccfg.l1 = std::pow(double(cfg.N), -1.0 - 97.0 * cfg.eps);
        ccfg.validate();
      }
      setup["w"] = ccfg.w;
      setup["eta1"] = ccfg.eta1;
      setup["l1"] = ccfg.l1;
      setup["spacing"] = spacing;
      setup["xi"] = xi_factor;
      setup["rho0"] = rho0;
      trial = [cfg, prm, t_coupling, ccfg](int i, Rng& rng) {
        const Matrix B = sample_block(cfg, prm, t_coupling, rng);
        const Vector lam = lambdas_of_block(B);
        const auto sw = stats::gap_sandwich(lam, ccfg);
        const auto br = stats::gap_bracket_sample(lam, ccfg);
        json row;
        row["trial"] = i;
        row["stream"] = i + 1;
        row["count"] = br.count;
        row["q_lo"] = br.q_lo;
        row["q_hi"] = br.q_hi;
        row["smoothed_narrow"] = sw.smoothed_narrow;
        row["smoothed_wide"] = sw.smoothed_wide;
        row["slack_narrow"] = sw.slack_narrow;
        row["slack_wide"] = sw.slack_wide;
        row["edge"] = sw.edge_case;
        return row;
      };
      break;
    }

    case Kind::density: {
      requested = cfg.grid.points;
      const std::vector<double> es =
          linspace(cfg.grid.e_min, cfg.grid.e_max, cfg.grid.points);
      const auto etas =
          limitlaw::density_eta_ladder(cfg.eta_levels, cfg.eta0);
      json etas_json = json::array();
      for (double e : etas) etas_json.push_back(e);
      setup["etas"] = etas_json;
      setup["closed_form_rho0"] = limitlaw::rho_zero(cfg.a);
      trial = [cfg, es, etas](int i, Rng&) {
        const double E = es[std::size_t(i)];
        const auto ext = limitlaw::extrapolate_density(cfg.a, E, etas);
        json row;
        row["trial"] = i;
        row["E"] = E;
        row["rho"] = ext.value;
        row["last_delta"] = ext.last_delta;
        row["raw"] = ext.raw;
        return row;
      };
      break;
    }

    case Kind::tailcheck: {
      requested = int(cfg.Ns.size());
      setup["nu"] = resolved_nu(cfg);
      setup["b"] = 1.0 / cfg.a - resolved_nu(cfg);
      trial = [cfg](int i, Rng& rng) {
        const int n = cfg.Ns[std::size_t(i)];
        const auto prm = cfg.params_for(n);
        const double thr_split = prm.split_threshold();
        std::vector<std::int64_t> counts(cfg.ts.size(), 0);
        std::int64_t split_count = 0;
        for (std::int64_t d = 0; d < cfg.samples; ++d) {
          const double x = std::abs(stable::sample_entry(prm, rng));
          for (std::size_t j = 0; j < cfg.ts.size(); ++j)
            if (x >= cfg.ts[j]) ++counts[j];
          if (x >= thr_split) ++split_count;
        }
        json p_emp = json::array(), envelope = json::array();
        for (std::size_t j = 0; j < cfg.ts.size(); ++j) {
          const double p = double(counts[j]) / double(cfg.samples);
          p_emp.push_back(p);
          envelope.push_back(p * (double(n) * std::pow(cfg.ts[j], cfg.a) + 1.0));
        }
        // Predicted fraction above the split threshold, from the tail oracle.
        const double p_split = stable::entry_tail_probability(
            prm, std::pow(double(n), 1.0 / cfg.a) * thr_split);
        const double expect = double(cfg.samples) * p_split;
        const double sd =
            std::sqrt(double(cfg.samples) * p_split * (1.0 - p_split));
        bool budget_hit = false;
        double t_coupling = 0.0;
        try {
          t_coupling = ensemble::coupling_time(
                           prm, 0.02, rng,
                           ensemble::CouplingMethod::monte_carlo, 1000000)
                           .t;
        } catch (const BudgetError& e) {
          t_coupling = e.best_estimate;
          budget_hit = true;
        }
        json row;
        row["trial"] = i;
        row["stream"] = i + 1;
        row["N"] = n;
        row["samples"] = cfg.samples;
        row["ts"] = cfg.ts;
        row["p_emp"] = p_emp;
        row["envelope"] = envelope;
        row["split_count"] = split_count;
        row["split_expected"] = expect;
        row["split_zscore"] =
            sd > 0.0 ? (double(split_count) - expect) / sd : 0.0;
        row["t_coupling"] = t_coupling;
        row["coupling_scaled"] =
            t_coupling * std::pow(double(n), prm.nu * (2.0 - cfg.a));
        row["coupling_budget_hit"] = budget_hit;
        return row;
      };
      break;
    }
  }

  const auto outcomes = run_trials(requested, workers, cfg.seed, trial);

  Report rep;
  rep.rng = Rng::kGeneratorName;
  rep.config = cfg.to_json();
  rep.requested = requested;
  for (int i = 0; i < requested; ++i) {
    const auto& oc = outcomes[std::size_t(i)];
    if (oc.ok) {
      rep.rows.push_back(oc.row);
      ++rep.completed;
    } else {
      rep.failures.push_back({{"trial", i}, {"error", oc.error}});
      ++rep.failed;
    }
  }
  if (double(rep.failed) > 0.05 * double(requested)) {
    throw NumericalError("experiment aborted: " + std::to_string(rep.failed) +
                             " of " + std::to_string(requested) +
                             " trials failed (threshold 5%)",
                         double(rep.failed));
  }
  rep.aggregates["setup"] = setup;
  rep.aggregates["summary"] = summarize(cfg, rep.rows);

  const auto t1 = std::chrono::steady_clock::now();
  const double secs = std::chrono::duration<double>(t1 - t0).count();
  std::fprintf(stderr, "[levyspec] %s: %d/%d trials, %d workers, %.2fs\n",
               kind_to_string(cfg.kind).c_str(), rep.completed, requested,
               workers, secs);

  if (!cfg.out.empty()) write_report(rep, cfg.out + ".report.json");
  return rep;
}

bool self_audit(const Report& rep) {
  const Config cfg = Config::from_json(rep.config);
  return summarize(cfg, rep.rows) == rep.aggregates.at("summary");
}

// ---------------------------------------------------------------------------
// plot data

namespace {

std::ofstream open_csv(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw Error("emit_plotdata: cannot open " + path);
  f.precision(17);
  return f;
}

}  // namespace

std::vector<std::string> emit_plotdata(const Report& rep,
                                       const std::string& prefix) {
  const Config cfg = Config::from_json(rep.config);
  std::vector<std::string> written;
  auto add = [&](const std::string& suffix) {
    written.push_back(prefix + suffix);
    return open_csv(written.back());
  };

  switch (cfg.kind) {
    case Kind::lsv: {
      std::vector<double> scaled;
      for (const auto& row : rep.rows)
        scaled.push_back(row.at("scaled").get<double>());
      std::sort(scaled.begin(), scaled.end());
      {
        auto f = add(".lsv_empirical.csv");
        f << "r,F_emp\n";
        for (std::size_t i = 0; i < scaled.size(); ++i)
          f << scaled[i] << ',' << double(i + 1) / double(scaled.size()) << '\n';
      }
      {
        auto f = add(".lsv_limit.csv");
        f << "r,F_limit\n";
        for (double r : scaled)
          f << r << ',' << stats::lsv_limit_cdf(std::max(0.0, r)) << '\n';
      }
      break;
    }
    case Kind::bottomk: {
      auto f = add(".bottomk_trials.csv");
      f << "trial,stream";
      for (int j = 1; j <= cfg.k; ++j) f << ",v" << j;
      f << '\n';
      for (const auto& row : rep.rows) {
        f << row.at("trial").get<int>() << ',' << row.at("stream").get<int>();
        for (const auto& v : row.at("values")) f << ',' << v.get<double>();
        f << '\n';
      }
      break;
    }
    case Kind::deloc: {
      auto f = add(".deloc_trials.csv");
      f << "trial,stream,window_count,sup\n";
      for (const auto& row : rep.rows) {
        f << row.at("trial").get<int>() << ',' << row.at("stream").get<int>()
          << ',' << row.at("window_count").get<int>() << ',';
        if (!row.at("sup").is_null()) f << row.at("sup").get<double>();
        f << '\n';
      }
      break;
    }
    case Kind::locallaw: {
      auto f = add(".locallaw_grid.csv");
      f << "trial,E,eta,re_m_x,im_m_x,re_m_a,im_m_a,abs_diff\n";
      const auto& setup = rep.aggregates.at("setup");
      const double eta = setup.at("eta").get<double>();
      const auto& grid = setup.at("grid");
      const auto& ma = setup.at("m_a");
      for (const auto& row : rep.rows) {
        for (std::size_t j = 0; j < grid.size(); ++j) {
          f << row.at("trial").get<int>() << ',' << grid[j].get<double>() << ','
            << eta << ',' << row.at("m_x")[j][0].get<double>() << ','
            << row.at("m_x")[j][1].get<double>() << ','
            << ma[j][0].get<double>() << ',' << ma[j][1].get<double>() << ','
            << row.at("abs_diff")[j].get<double>() << '\n';
        }
      }
      break;
    }
    case Kind::isotropic: {
      auto f = add(".isotropic_trials.csv");
      f << "trial,stream,residual,scale,ratio\n";
      for (const auto& row : rep.rows) {
        f << row.at("trial").get<int>() << ',' << row.at("stream").get<int>()
          << ',' << row.at("residual").get<double>() << ','
          << row.at("scale").get<double>() << ','
          << row.at("ratio").get<double>() << '\n';
      }
      break;
    }
    case Kind::gap: {
      const auto& setup = rep.aggregates.at("setup");
      const auto& summary = rep.aggregates.at("summary");
      auto f = add(".gap_probability.csv");
      f << "w,p_emp,p_bracket_lo,p_bracket_hi\n";
      f << setup.at("w").get<double>() << ','
        << summary.at("p_empty").get<double>() << ','
        << summary.at("mean_q_lo").get<double>() << ','
        << summary.at("mean_q_hi").get<double>() << '\n';
      break;
    }
    case Kind::density: {
      auto f = add(".density.csv");
      f << "E,rho\n";
      for (const auto& row : rep.rows)
        f << row.at("E").get<double>() << ',' << row.at("rho").get<double>()
          << '\n';
      break;
    }
    case Kind::tailcheck: {
      auto f = add(".tail_envelope.csv");
      f << "N,t,p_emp,envelope\n";
      for (const auto& row : rep.rows) {
        const int n = row.at("N").get<int>();
        const auto& ts = row.at("ts");
        for (std::size_t j = 0; j < ts.size(); ++j) {
          f << n << ',' << ts[j].get<double>() << ','
            << row.at("p_emp")[j].get<double>() << ','
            << row.at("envelope")[j].get<double>() << '\n';
        }
      }
      auto g = add(".coupling_scaling.csv");
      g << "N,t_coupling,coupling_scaled\n";
      for (const auto& row : rep.rows) {
        g << row.at("N").get<int>() << ','
          << row.at("t_coupling").get<double>() << ','
          << row.at("coupling_scaled").get<double>() << '\n';
      }
      break;
    }
  }
  return written;
}

}  // namespace levyspec::experiment
