#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "levyspec/stable.hpp"

namespace levyspec::experiment {

inline constexpr const char* kArtifactVersion = "levyspec 0.1.0";

enum class Kind {
  lsv,        // least-singular-value samples vs the limit CDF
  bottomk,    // joint bottom-k singular values, scaled
  deloc,      // eigenvector sup-norms in a spectral window
  locallaw,   // empirical Stieltjes transform vs the limit law on a grid
  isotropic,  // quadratic-form resolvent vs spectral approximant
  gap,        // gap probability with smoothed-count sandwich and bracket
  density,    // limit-law density tabulation over an energy grid
  tailcheck,  // entry-tail envelope and coupling-time scaling across N
};

Kind kind_from_string(const std::string& s);
std::string kind_to_string(Kind k);

enum class EnsembleChoice { gaussian, levy, interpolant };

EnsembleChoice ensemble_from_string(const std::string& s);
std::string ensemble_to_string(EnsembleChoice e);

struct GridSpec {
  double e_min = -0.2;
  double e_max = 0.2;
  int points = 20;
};

/// One experiment, fully described. Serializes to/from a flat JSON object;
/// unknown keys are rejected so config typos fail loudly. Optional exponents
/// default to a feasible choice for the tail index.
struct Config {
  Kind kind = Kind::lsv;
  EnsembleChoice ensemble = EnsembleChoice::levy;
  int N = 64;
  double a = 1.5;
  std::optional<double> nu;
  std::optional<double> rho;
  stable::Deformation deformation{};
  std::uint64_t seed = 1;
  int trials = 10;
  int workers = 0;  // 0 -> default_workers()
  std::string out;  // output path prefix; empty -> nothing written

  // interpolant ensembles and isotropic runs
  double gamma = 1.0;
  std::optional<double> s;  // Gaussian variance; absent -> coupling time

  // bottomk
  int k = 3;

  // deloc
  double c = 0.05;      // spectral window half-width
  double delta = 0.15;  // reported sup-norm bound N^{delta - 1/2}

  // locallaw and density share the energy grid
  GridSpec grid;
  double eta = 0.0;  // locallaw spectral scale; 0 -> N^{-0.4}

  // isotropic
  double z_re = 0.05;
  double z_im = 0.0;  // 0 -> N^{-0.6}
  double c_exponent = 0.05;

  // gap
  double r = 1.0;                 // window in microscopic units
  std::string ladder = "spacing"; // "spacing" | "exponent"
  double eps = 0.01;              // exponent-ladder epsilon
  double divisor = 400.0;         // spacing-ladder divisor

  // density eta ladder
  int eta_levels = 5;
  double eta0 = 0.05;

  // tailcheck
  std::vector<int> Ns{128, 256, 512};
  std::vector<double> ts{0.5, 1.0, 2.0, 4.0};
  std::int64_t samples = 200000;

  /// Heavy-tailed ensemble parameters with optional exponents resolved.
  stable::EnsembleParams params() const;
  /// Same, for a different dimension (tailcheck sweeps N).
  stable::EnsembleParams params_for(int n) const;

  void validate() const;
  /// Canonical JSON form. Execution knobs (`workers`, `out`) are accepted on
  /// input but omitted here, so the config echo in a report is identical
  /// across worker counts and output locations.
  nlohmann::json to_json() const;
  static Config from_json(const nlohmann::json& j);
};

/// Everything an experiment produced: config echo, per-trial rows, failures,
/// and aggregates recomputable from the rows. Serialization is canonical
/// (sorted keys, shortest round-trip numbers, no volatile fields), so a rerun
/// with the same config yields byte-identical files; timing goes to stderr.
struct Report {
  std::string artifact = kArtifactVersion;
  std::string rng;
  nlohmann::json config;
  int requested = 0;
  int completed = 0;
  int failed = 0;
  nlohmann::json failures = nlohmann::json::array();
  nlohmann::json rows = nlohmann::json::array();
  nlohmann::json aggregates = nlohmann::json::object();

  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
};

/// Worker count from LEVYSPEC_WORKERS, else 1.
int default_workers();

/// Execute the configured experiment: trials are independent units pulled off
/// a shared queue, each seeded by its trial index (stream = trial + 1, stream
/// 0 is reserved for pre-trial setup), so scheduling cannot change results.
/// Per-trial failures are recorded; more than 5% failed trials aborts the run
/// with a NumericalError. Writes `<out>.report.json` when `out` is set.
Report run(const Config& cfg);

void write_report(const Report& rep, const std::string& path);
Report load_report(const std::string& path);

/// Recompute the aggregates from the stored rows and compare exactly.
bool self_audit(const Report& rep);

/// Write plot-ready CSVs next to the given prefix; returns the created paths.
std::vector<std::string> emit_plotdata(const Report& rep,
                                       const std::string& prefix);

}  // namespace levyspec::experiment
