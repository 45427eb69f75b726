#pragma once

// Config-driven job runner. A JSON job file selects one computation, the
// runner executes it and writes CSV/JSON results plus a run manifest.
// Frequencies in the config are ordinary frequencies (Hz); they are turned
// into angular rates while parsing and nowhere else.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "catq/analysis.hpp"
#include "catq/model.hpp"
#include "catq/pulse.hpp"
#include "catq/semiclassical.hpp"

namespace catq {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitIo = 4 };

/// Memory state with the buffer in vacuum.
struct StateSpec {
  std::string type = "vacuum";  // vacuum, fock, coherent, cat_even, cat_odd, thermal
  int n = 0;                    // fock
  cplx alpha{0.0, 0.0};         // coherent, cat_even, cat_odd
  double n_th = 0.0;            // thermal

  QState build(const SpaceDims& dims) const;
};

struct EvolveJob {
  StateSpec initial;
  PulseSequence sequence;
  double stabilize_alpha = 0.0;  // > 0 adds pump and buffer drive over the whole run
  double duration = 1e-6;
  int n_times = 101;
  std::vector<std::string> observables{"n_mem", "n_buf", "parity_mem"};
  cplx cat_alpha{0.0, 0.0};  // orientation of the Z observable
  std::string method = "master";  // master or jumps
  int n_traj = 100;
  CompileOptions compile;
  double rtol = 1e-8;
  double atol = 1e-10;
};

struct WignerJob {
  EvolveJob source;  // duration 0 maps the initial state
  GridSpec grid;
};

struct GapJob {
  std::vector<double> g2_over_kappa_b;  // empty: the params value only
  double alpha = 0.0;
  int max_dim = 200;
  CollapseFlags collapse;
};

struct BitflipJob {
  std::vector<double> alpha_squared{1.0, 2.0, 3.0, 4.0};
  double kappa_a_scale = 100.0;
  double n_th_mem_scale = 1.0;
  std::vector<double> durations;  // one per point, or a single value for all
  int n_times = 201;
  int n_traj = 200;
  double max_jump_probability = 0.1;
};

struct SemiclassicalJob {
  SemiclassicalState initial;
  cplx alpha{2.0, 0.0};
  cplx eps_Z{0.0, 0.0};
  double t_end = 2e-6;
  int samples = 201;
};

struct ProtocolJob {
  std::string name = "holonomic";  // holonomic, cat_prep, zeno_gate, deflation
  // holonomic
  std::vector<std::pair<std::string, StateSpec>> states;
  GridSpec grid;
  double alpha1 = 1.6;
  double alpha2 = 1.6;
  HolonomicTimings timings;
  // cat_prep, zeno_gate, deflation
  StateSpec initial;
  cplx alpha{2.0, 0.0};
  double prep_time = 1e-6;
  cplx eps_Z{0.0, 0.0};
  double angle = 0.0;
  double readout = 0.0;
  int n_times = 101;
  std::vector<std::string> observables{"n_mem", "n_buf", "parity_mem"};
};

struct FitJob {
  std::string model = "exponential";  // exponential, damped_cosine, wigner_cuts
  Series data;
  Series mixture;
  Series cat;
  Series thermal;
  std::optional<double> fixed_offset;
  CutGuess guess;
};

struct ReadoutJob {
  std::vector<cplx> pointers;
  std::vector<int> photon_numbers;  // pointers from the longitudinal response when set
  double T_int = 10e-6;
  int n_shots = 1000;
  std::optional<double> target_fidelity;
};

using JobSpec =
    std::variant<EvolveJob, WignerJob, GapJob, BitflipJob, SemiclassicalJob, ProtocolJob, FitJob, ReadoutJob>;

struct JobConfig {
  PhysicalParams params;
  int n_mem = 20;
  int n_buf = 5;
  std::string kind;
  JobSpec job;
  std::uint64_t seed = 0;
  std::string output = "out";
  int threads = 1;
  nlohmann::json resolved;  // config with defaults applied, in config units

  SpaceDims dims() const { return SpaceDims(n_mem, n_buf); }
};

/// Throws ConfigError with the field path (and line for syntax errors).
JobConfig parse_config(const std::string& text);

/// FNV-1a 64-bit hash of the canonical (sorted-key) form of the resolved config.
std::string config_hash(const nlohmann::json& resolved);

struct Table {
  std::string file;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct JobResults {
  std::vector<Table> tables;
  std::vector<std::pair<std::string, nlohmann::json>> documents;  // file name, content
};

/// Runs the job. Module errors propagate unchanged.
JobResults execute(const JobConfig& config);

/// CSV with a header line and %.17g values; JSON documents pretty-printed.
/// Files are written to a temporary name and renamed. Throws IoError.
std::vector<std::string> write_outputs(const JobResults& results, const std::string& dir);

struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  double wall_time = 0.0;  // seconds
  std::vector<std::string> warnings;
  std::vector<std::string> outputs;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

/// Atomic write of manifest.json.
void write_manifest(const RunManifest& manifest, const std::string& dir);

/// parse, execute and write; returns the manifest.
RunManifest run_job(const JobConfig& config, const std::string& dir);

/// Command-line entry point: --config, --output-dir, --seed, --threads, --quiet.
int run_cli(int argc, char** argv);

}  // namespace catq
