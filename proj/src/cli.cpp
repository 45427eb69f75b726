#include "catq/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "catq/errors.hpp"
#include "catq/lindblad.hpp"
#include "catq/trajectories.hpp"
#include "catq/warnings.hpp"

namespace catq {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Range {
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = false;
  bool hi_open = false;

  bool contains(double x) const {
    if (!std::isfinite(x)) return false;
    if (lo_open ? !(x > lo) : !(x >= lo)) return false;
    if (hi_open ? !(x < hi) : !(x <= hi)) return false;
    return true;
  }
  std::string describe() const {
    std::ostringstream os;
    os << "must be finite";
    if (lo > -kInf) os << (lo_open ? " and > " : " and >= ") << lo;
    if (hi < kInf) os << (hi_open ? " and < " : " and <= ") << hi;
    return os.str();
  }
};

const Range kAny{};
const Range kPositive{0.0, kInf, true, false};
const Range kNonNegative{0.0, kInf, false, false};
const Range kOccupation{0.0, 1.0, false, true};

// Reads one JSON object against an implicit schema: every accessor names a
// key, applies its default and records the value in `out`. finish() rejects
// the keys nobody asked for.
class Reader {
 public:
  Reader(const json* in, std::string path) : in_(in), path_(std::move(path)) {
    if (in_ != nullptr && !in_->is_object()) fail("", "must be an object");
    out_ = json::object();
  }

  bool has(const std::string& key) const { return in_ != nullptr && in_->contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    std::string where = path_;
    if (!key.empty()) where += (where.empty() ? "" : ".") + key;
    if (where.empty()) where = "config";
    throw ConfigError(where + ": " + msg);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* get(const std::string& key) {
    used_.insert(key);
    if (!has(key)) return nullptr;
    return &(*in_)[key];
  }

  double number(const std::string& key, double def, const Range& range = kAny) {
    const json* v = get(key);
    double x = def;
    if (v != nullptr) {
      if (!v->is_number()) fail(key, "must be a number");
      x = v->get<double>();
    }
    if (!range.contains(x)) fail(key, range.describe());
    out_[key] = x;
    return x;
  }

  std::optional<double> optional_number(const std::string& key, const Range& range = kAny) {
    if (!has(key)) {
      used_.insert(key);
      return std::nullopt;
    }
    return number(key, 0.0, range);
  }

  long long integer(const std::string& key, long long def, long long lo, long long hi) {
    const json* v = get(key);
    long long x = def;
    if (v != nullptr) {
      if (!v->is_number_integer()) fail(key, "must be an integer");
      if (v->is_number_unsigned() && v->get<unsigned long long>() > static_cast<unsigned long long>(hi)) {
        fail(key, "must be <= " + std::to_string(hi));
      }
      x = v->get<long long>();
    }
    if (x < lo || x > hi) fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out_[key] = x;
    return x;
  }

  bool flag(const std::string& key, bool def) {
    const json* v = get(key);
    bool x = def;
    if (v != nullptr) {
      if (!v->is_boolean()) fail(key, "must be true or false");
      x = v->get<bool>();
    }
    out_[key] = x;
    return x;
  }

  std::string text(const std::string& key, const std::string& def, const std::vector<std::string>& choices) {
    const json* v = get(key);
    std::string x = def;
    if (v != nullptr) {
      if (!v->is_string()) fail(key, "must be a string");
      x = v->get<std::string>();
    }
    if (!choices.empty() && std::find(choices.begin(), choices.end(), x) == choices.end()) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      fail(key, "must be one of " + list);
    }
    out_[key] = x;
    return x;
  }

  std::vector<double> numbers(const std::string& key, const std::vector<double>& def, const Range& range = kAny) {
    const json* v = get(key);
    std::vector<double> xs = def;
    if (v != nullptr) {
      if (!v->is_array()) fail(key, "must be an array of numbers");
      xs.clear();
      for (const auto& e : *v) {
        if (!e.is_number()) fail(key, "must be an array of numbers");
        xs.push_back(e.get<double>());
      }
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!range.contains(xs[i])) fail(key + "[" + std::to_string(i) + "]", range.describe());
    }
    out_[key] = xs;
    return xs;
  }

  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& def,
                                   const std::vector<std::string>& choices) {
    const json* v = get(key);
    std::vector<std::string> xs = def;
    if (v != nullptr) {
      if (!v->is_array()) fail(key, "must be an array of strings");
      xs.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) fail(key, "must be an array of strings");
        xs.push_back(e.get<std::string>());
      }
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (std::find(choices.begin(), choices.end(), xs[i]) == choices.end()) {
        fail(key + "[" + std::to_string(i) + "]", "unknown name '" + xs[i] + "'");
      }
    }
    out_[key] = xs;
    return xs;
  }

  // A complex value is a number or {"re": x, "im": y}.
  cplx complex(const std::string& key, cplx def) {
    const json* v = get(key);
    cplx z = def;
    if (v != nullptr) z = parse_complex(*v, key);
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) fail(key, "must be finite");
    out_[key] = json{{"re", z.real()}, {"im", z.imag()}};
    return z;
  }

  cplx parse_complex(const json& v, const std::string& key) const {
    if (v.is_number()) return {v.get<double>(), 0.0};
    if (!v.is_object()) fail(key, "must be a number or {\"re\", \"im\"}");
    double re = 0.0;
    double im = 0.0;
    for (const auto& [k, e] : v.items()) {
      if (k != "re" && k != "im") fail(key + "." + k, "unknown key");
      if (!e.is_number()) fail(key + "." + k, "must be a number");
      (k == "re" ? re : im) = e.get<double>();
    }
    return {re, im};
  }

  Reader child(const std::string& key) {
    const json* v = get(key);
    return Reader(v, field(key));
  }

  void put(const std::string& key, json value) { out_[key] = std::move(value); }

  json finish() const {
    if (in_ != nullptr) {
      for (const auto& [k, v] : in_->items()) {
        if (used_.count(k) == 0) fail(k, "unknown key");
      }
    }
    return out_;
  }

 private:
  const json* in_;
  std::string path_;
  std::set<std::string> used_;
  json out_;
};

const std::vector<std::string> kKinds{"evolve", "wigner", "gap", "bitflip", "semiclassical", "protocol", "fit",
                                      "readout"};
const std::vector<std::string> kObservables{"n_mem", "n_buf", "parity_mem", "parity_buf", "re_a", "im_a",
                                            "re_b", "im_b", "Z", "X"};
const std::vector<std::string> kStateTypes{"vacuum", "fock", "coherent", "cat_even", "cat_odd", "thermal"};

PhysicalParams read_params(Reader& r) {
  const PhysicalParams d;
  PhysicalParams p;
  p.g2 = hz_to_rad(r.complex("g2_hz", 0.763e6));
  p.kappa_b = hz_to_rad(r.number("kappa_b_hz", 2.6e6, kPositive));
  p.kappa_a = hz_to_rad(r.number("kappa_a_hz", 9.3e3, kNonNegative));
  p.n_th_mem = r.number("n_th_mem", d.n_th_mem, kOccupation);
  p.n_th_buf = r.number("n_th_buf", d.n_th_buf, kOccupation);
  p.delta_mem = hz_to_rad(r.number("delta_mem_hz", 0.0));
  p.delta_buf = hz_to_rad(r.number("delta_buf_hz", 0.0));
  p.g_l = hz_to_rad(r.number("g_l_hz", 100e3));
  p.g_sp = hz_to_rad(r.number("g_sp_hz", 100e3 * 0.5 * (0.29 / 0.06) * (0.29 / 0.06)));
  p.g_lin = hz_to_rad(r.number("g_lin_hz", 0.0));
  p.g_reset = hz_to_rad(r.number("g_reset_hz", 0.0));
  p.buffer_kerr = hz_to_rad(r.number("buffer_kerr_hz", 0.0));
  p.eta_het = r.number("eta_het", d.eta_het, Range{0.0, 1.0, true, false});
  return p;
}

// Optional circuit block: pump amplitudes replace the corresponding rates.
void read_circuit(Reader& r, PhysicalParams& p) {
  const CircuitParams d;
  CircuitParams c;
  c.E_J = r.number("E_J_hz", d.E_J, kPositive);
  c.dE_J = r.number("dE_J_hz", d.dE_J, kPositive);
  c.phi_a = r.number("phi_a", d.phi_a, Range{0.0, 1.0, true, true});
  c.phi_b = r.number("phi_b", d.phi_b, Range{0.0, 1.0, true, true});
  c.omega_a0 = r.number("omega_a0_hz", d.omega_a0, kPositive);
  c.omega_b0 = r.number("omega_b0_hz", d.omega_b0, kPositive);
  c.E_L = r.number("E_L_hz", d.E_L, kPositive);
  const Range pump{0.0, 0.5};
  const auto eps_2 = r.optional_number("eps_two_photon", pump);
  const auto eps_l = r.optional_number("eps_longitudinal", pump);
  const auto eps_r = r.optional_number("eps_reset", pump);
  try {
    if (eps_2) p.g2 = coupling_rates(c, PumpKind::two_photon, *eps_2).g2;
    if (eps_l) {
      const auto rates = coupling_rates(c, PumpKind::longitudinal, *eps_l);
      p.g_l = rates.g_l;
      p.g_sp = rates.g_sp;
    }
    if (eps_r) p.g_reset = coupling_rates(c, PumpKind::reset, *eps_r, p.kappa_b).g_reset;
  } catch (const InvalidArgument& e) {
    r.fail("", e.what());
  }
}

StateSpec read_state(Reader& r) {
  StateSpec s;
  s.type = r.text("type", "vacuum", kStateTypes);
  s.n = static_cast<int>(r.integer("n", 0, 0, 511));
  s.alpha = r.complex("alpha", 0.0);
  s.n_th = r.number("n_th", 0.0, kNonNegative);
  if ((s.type == "cat_even" || s.type == "cat_odd") && std::abs(s.alpha) == 0.0) {
    r.fail("alpha", "cat states need a nonzero amplitude");
  }
  return s;
}

PulseSequence read_sequence(Reader& parent, const std::string& key) {
  PulseSequence seq;
  const json* v = parent.get(key);
  json out = json::array();
  if (v != nullptr) {
    if (!v->is_array()) parent.fail(key, "must be an array of segments");
    for (std::size_t i = 0; i < v->size(); ++i) {
      Reader r(&(*v)[i], parent.field(key) + "[" + std::to_string(i) + "]");
      std::vector<std::string> names;
      for (int c = 0; c < kChannelCount; ++c) names.push_back(channel_name(static_cast<Channel>(c)));
      const Channel ch = channel_from_name(r.text("channel", "", names));
      const double t0 = r.number("t_start", 0.0, kNonNegative);
      const double dur = r.number("duration", 0.0, kNonNegative);
      cplx env{r.number("re", 0.0), r.number("im", 0.0)};
      // Drive envelopes are frequencies; the other channels are dimensionless.
      if (ch == Channel::buffer_drive || ch == Channel::memory_drive) env = hz_to_rad(env);
      if (ch == Channel::memory_displacement && dur != 0.0) r.fail("duration", "must be 0 for a displacement");
      if (ch != Channel::memory_displacement && dur == 0.0) r.fail("duration", "must be > 0");
      seq.add(ch, t0, dur, env);
      out.push_back(r.finish());
    }
  }
  parent.put(key, out);
  return seq;
}

CollapseFlags read_collapse(Reader& r, CollapseFlags d = {}) {
  CollapseFlags f;
  f.memory_loss = r.flag("memory_loss", d.memory_loss);
  f.memory_thermal = r.flag("memory_thermal", d.memory_thermal);
  f.buffer_loss = r.flag("buffer_loss", d.buffer_loss);
  f.buffer_thermal = r.flag("buffer_thermal", d.buffer_thermal);
  f.reset = r.flag("reset", d.reset);
  return f;
}

GridSpec read_grid(Reader& r) {
  GridSpec g;
  g.re_min = r.number("re_min", g.re_min);
  g.re_max = r.number("re_max", g.re_max);
  g.n_re = static_cast<int>(r.integer("n_re", g.n_re, 1, 4001));
  g.im_min = r.number("im_min", g.im_min);
  g.im_max = r.number("im_max", g.im_max);
  g.n_im = static_cast<int>(r.integer("n_im", g.n_im, 1, 4001));
  if (g.re_max < g.re_min) r.fail("re_max", "must be >= re_min");
  if (g.im_max < g.im_min) r.fail("im_max", "must be >= im_min");
  return g;
}

void read_compile(Reader& r, CompileOptions& c) {
  c.cancellation = r.text("cancellation", "exact", {"exact", "residual"}) == "exact" ? Cancellation::exact
                                                                                       : Cancellation::residual;
  c.allow_pump_overlap = r.flag("allow_pump_overlap", false);
  Reader cr = r.child("collapse");
  c.collapse_flags = read_collapse(cr);
  r.put("collapse", cr.finish());
}

cplx default_cat_alpha(const EvolveJob& j) {
  if (std::abs(j.cat_alpha) > 0.0) return j.cat_alpha;
  if (j.stabilize_alpha > 0.0) return j.stabilize_alpha;
  return j.initial.alpha;
}

void require_cat_alpha(Reader& r, const std::vector<std::string>& observables, cplx alpha) {
  for (const auto& o : observables) {
    if ((o == "Z") && std::abs(alpha) == 0.0) r.fail("cat_alpha", "the Z observable needs a nonzero cat_alpha");
  }
}

EvolveJob read_evolve(Reader& r, bool with_times, double default_duration) {
  EvolveJob j;
  Reader sr = r.child("initial");
  j.initial = read_state(sr);
  r.put("initial", sr.finish());
  j.sequence = read_sequence(r, "sequence");
  j.stabilize_alpha = r.number("stabilize_alpha", 0.0, kNonNegative);
  j.duration = r.number("duration", default_duration, kNonNegative);
  read_compile(r, j.compile);
  j.rtol = r.number("rtol", 1e-8, kPositive);
  j.atol = r.number("atol", 1e-10, kPositive);
  if (with_times) {
    j.n_times = static_cast<int>(r.integer("n_times", 101, 2, 100000));
    j.observables = r.strings("observables", j.observables, kObservables);
    j.cat_alpha = r.complex("cat_alpha", 0.0);
    j.cat_alpha = default_cat_alpha(j);
    require_cat_alpha(r, j.observables, j.cat_alpha);
    j.method = r.text("method", "master", {"master", "jumps"});
    j.n_traj = static_cast<int>(r.integer("n_traj", 100, 1, 10000000));
    if (!(j.duration > 0.0) && j.sequence.total_time() <= 0.0) r.fail("duration", "must be > 0");
  }
  return j;
}

Series read_series(Reader& r) {
  Series s;
  s.x = r.numbers("x", {});
  s.y = r.numbers("y", {});
  if (s.x.size() != s.y.size()) r.fail("y", "must have as many entries as x");
  return s;
}

JobSpec read_job(const std::string& kind, Reader& r, const JobConfig& cfg, const std::string& protocol_name) {
  if (kind == "evolve") return read_evolve(r, true, 1e-6);
  if (kind == "wigner") {
    WignerJob j;
    j.source = read_evolve(r, false, 0.0);
    Reader g = r.child("grid");
    j.grid = read_grid(g);
    r.put("grid", g.finish());
    return j;
  }
  if (kind == "gap") {
    GapJob j;
    j.g2_over_kappa_b = r.numbers("g2_over_kappa_b", {}, kPositive);
    j.alpha = r.number("alpha", 0.0, kNonNegative);
    j.max_dim = static_cast<int>(r.integer("max_dim", j.max_dim, 1, 512));
    Reader cr = r.child("collapse");
    j.collapse = read_collapse(cr);
    r.put("collapse", cr.finish());
    return j;
  }
  if (kind == "bitflip") {
    BitflipJob j;
    j.alpha_squared = r.numbers("alpha_squared", j.alpha_squared, kPositive);
    if (j.alpha_squared.empty()) r.fail("alpha_squared", "must not be empty");
    j.kappa_a_scale = r.number("kappa_a_scale", j.kappa_a_scale, kNonNegative);
    j.n_th_mem_scale = r.number("n_th_mem_scale", j.n_th_mem_scale, kNonNegative);
    if (!(cfg.params.n_th_mem * j.n_th_mem_scale < 1.0)) r.fail("n_th_mem_scale", "scaled n_th_mem must stay < 1");
    j.durations = r.numbers("durations", {20e-6}, kPositive);
    if (j.durations.size() != 1 && j.durations.size() != j.alpha_squared.size()) {
      r.fail("durations", "must hold one value or one per alpha_squared entry");
    }
    j.n_times = static_cast<int>(r.integer("n_times", j.n_times, 3, 100000));
    j.n_traj = static_cast<int>(r.integer("n_traj", j.n_traj, 1, 10000000));
    j.max_jump_probability = r.number("max_jump_probability", 0.1, Range{0.0, 1.0, true, true});
    return j;
  }
  if (kind == "semiclassical") {
    SemiclassicalJob j;
    Reader ir = r.child("initial");
    j.initial.a = ir.complex("a", 0.0);
    j.initial.b = ir.complex("b", 0.0);
    r.put("initial", ir.finish());
    j.alpha = r.complex("alpha", j.alpha);
    j.eps_Z = hz_to_rad(r.complex("eps_z_hz", 0.0));
    j.t_end = r.number("t_end", j.t_end, kPositive);
    j.samples = static_cast<int>(r.integer("samples", j.samples, 2, 1000000));
    return j;
  }
  if (kind == "protocol") {
    ProtocolJob j;
    j.name = r.text("name", protocol_name.empty() ? "holonomic" : protocol_name,
                    {"holonomic", "cat_prep", "zeno_gate", "deflation"});
    if (!protocol_name.empty() && j.name != protocol_name) r.fail("name", "contradicts the job kind");
    CompileOptions compile;
    if (j.name == "holonomic") {
      j.alpha1 = r.number("alpha1", j.alpha1, kPositive);
      j.alpha2 = r.number("alpha2", j.alpha2, kPositive);
      Reader tr = r.child("timings");
      j.timings.stabilize = tr.number("stabilize", j.timings.stabilize, kPositive);
      j.timings.zeno = tr.number("zeno", j.timings.zeno, kPositive);
      j.timings.deflate = tr.number("deflate", j.timings.deflate, kPositive);
      j.timings.inflate = tr.number("inflate", j.timings.inflate, kPositive);
      j.timings.ringdown = tr.number("ringdown", j.timings.ringdown, kPositive);
      j.timings.readout = tr.number("readout", j.timings.readout, kPositive);
      r.put("timings", tr.finish());
      Reader g = r.child("grid");
      j.grid = read_grid(g);
      r.put("grid", g.finish());
      const json* states = r.get("states");
      json out = json::array();
      if (states == nullptr) {
        j.states.push_back({"vacuum", StateSpec{}});
        out.push_back(json{{"label", "vacuum"}, {"type", "vacuum"}, {"n", 0}, {"alpha", {{"re", 0.0}, {"im", 0.0}}},
                           {"n_th", 0.0}});
      } else {
        if (!states->is_array() || states->empty()) r.fail("states", "must be a non-empty array of states");
        std::set<std::string> labels;
        for (std::size_t i = 0; i < states->size(); ++i) {
          Reader sr(&(*states)[i], r.field("states") + "[" + std::to_string(i) + "]");
          const std::string label = sr.text("label", "state" + std::to_string(i), {});
          if (label.empty() || label.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_-") != std::string::npos) {
            sr.fail("label", "must use lower-case letters, digits, '_' or '-'");
          }
          if (!labels.insert(label).second) sr.fail("label", "duplicate label");
          j.states.push_back({label, read_state(sr)});
          out.push_back(sr.finish());
        }
      }
      r.put("states", out);
    } else {
      j.alpha = r.complex("alpha", j.alpha);
      if (std::abs(j.alpha) == 0.0) r.fail("alpha", "must be nonzero");
      Reader sr = r.child("initial");
      j.initial = read_state(sr);
      r.put("initial", sr.finish());
      j.prep_time = r.number("prep_time", j.prep_time, kPositive);
      j.eps_Z = hz_to_rad(r.complex("eps_z_hz", 0.0));
      j.angle = r.number("angle", 0.0);
      j.readout = r.number("readout", 0.0, kNonNegative);
      j.n_times = static_cast<int>(r.integer("n_times", j.n_times, 2, 100000));
      j.observables = r.strings("observables", j.observables, kObservables);
      if (j.name == "zeno_gate" && (std::abs(j.eps_Z) == 0.0 || j.angle == 0.0)) {
        r.fail("eps_z_hz", "zeno_gate needs a nonzero eps_z_hz and angle");
      }
    }
    return j;
  }
  if (kind == "fit") {
    FitJob j;
    j.model = r.text("model", j.model, {"exponential", "damped_cosine", "wigner_cuts"});
    if (j.model == "wigner_cuts") {
      using Slot = std::pair<const char*, Series*>;
      for (const auto& [key, series] : {Slot{"mixture", &j.mixture}, Slot{"cat", &j.cat}, Slot{"thermal", &j.thermal}}) {
        Reader sr = r.child(key);
        *series = read_series(sr);
        r.put(key, sr.finish());
      }
      Reader gr = r.child("guess");
      j.guess.A = gr.number("A", j.guess.A);
      j.guess.C = gr.number("C", j.guess.C);
      j.guess.D = gr.number("D", j.guess.D);
      j.guess.B = gr.number("B", j.guess.B);
      j.guess.alpha = gr.number("alpha", j.guess.alpha);
      j.guess.n_th = gr.number("n_th", j.guess.n_th, kNonNegative);
      r.put("guess", gr.finish());
    } else {
      j.data = read_series(r);
      j.fixed_offset = r.optional_number("fixed_offset");
      if (j.fixed_offset && j.model != "exponential") r.fail("fixed_offset", "only applies to the exponential model");
    }
    return j;
  }
  ReadoutJob j;
  if (r.has("pointers") && r.has("photon_numbers")) r.fail("pointers", "give either pointers or photon_numbers");
  const json* ptrs = r.get("pointers");
  json out = json::array();
  if (ptrs != nullptr) {
    if (!ptrs->is_array()) r.fail("pointers", "must be an array");
    for (std::size_t i = 0; i < ptrs->size(); ++i) {
      const cplx z = r.parse_complex((*ptrs)[i], "pointers[" + std::to_string(i) + "]");
      j.pointers.push_back(z);
      out.push_back(json{{"re", z.real()}, {"im", z.imag()}});
    }
  }
  r.put("pointers", out);
  std::vector<double> ns = r.numbers("photon_numbers", ptrs == nullptr ? std::vector<double>{0.0, 1.0}
                                                                       : std::vector<double>{},
                                     Range{0.0, 1000.0});
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] != std::floor(ns[i])) r.fail("photon_numbers[" + std::to_string(i) + "]", "must be an integer");
    j.photon_numbers.push_back(static_cast<int>(ns[i]));
  }
  if (j.pointers.empty() && j.photon_numbers.empty()) r.fail("pointers", "need at least one pointer");
  j.T_int = r.number("T_int", j.T_int, kPositive);
  j.n_shots = static_cast<int>(r.integer("n_shots", j.n_shots, 1, 10000000));
  j.target_fidelity = r.optional_number("target_fidelity", Range{0.5, 1.0, true, true});
  return j;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) line += text[i] == '\n';
  return line;
}

}  // namespace

QState StateSpec::build(const SpaceDims& dims) const {
  if (type == "vacuum") return fock_state(0, 0, dims);
  if (type == "fock") {
    if (n >= dims.n_mem()) throw InvalidArgument("initial state: Fock level outside the memory truncation");
    return fock_state(n, 0, dims);
  }
  if (type == "coherent") return coherent_state(alpha, dims, Mode::memory);
  if (type == "cat_even") return cat_state(alpha, Parity::even, dims);
  if (type == "cat_odd") return cat_state(alpha, Parity::odd, dims);
  // thermal: geometric populations, renormalised on the truncation
  MatrixXc rho = MatrixXc::Zero(dims.n_mem(), dims.n_mem());
  double total = 0.0;
  for (int k = 0; k < dims.n_mem(); ++k) {
    rho(k, k) = std::pow(n_th, k) / std::pow(1.0 + n_th, k + 1);
    total += rho(k, k).real();
  }
  if (1.0 - total > 1e-4) throw TruncationError("thermal state: truncation drops more than 1e-4 of the population");
  rho /= total;
  return with_buffer_vacuum(rho, dims);
}

JobConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    std::ostringstream os;
    os << "line " << line_of(text, e.byte) << ": " << e.what();
    throw ConfigError(os.str());
  }
  Reader top(&doc, "");
  JobConfig cfg;

  std::string kind = top.text("job", "", {});
  std::string protocol_name;
  if (kind.rfind("protocol/", 0) == 0) {
    protocol_name = kind.substr(9);
    kind = "protocol";
  }
  if (std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end()) {
    std::string list;
    for (const auto& k : kKinds) list += (list.empty() ? "" : ", ") + k;
    top.fail("job", kind.empty() ? "required; one of " + list : "unknown job kind '" + kind + "'");
  }
  cfg.kind = kind;
  top.put("job", kind);

  Reader pr = top.child("params");
  cfg.params = read_params(pr);
  if (top.has("circuit")) {
    Reader cr = top.child("circuit");
    read_circuit(cr, cfg.params);
    top.put("circuit", cr.finish());
  } else {
    top.get("circuit");
  }
  top.put("params", pr.finish());
  try {
    cfg.params.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("params: ") + e.what());
  }

  Reader hr = top.child("hilbert");
  cfg.n_mem = static_cast<int>(hr.integer("n_mem", cfg.n_mem, 2, 512));
  cfg.n_buf = static_cast<int>(hr.integer("n_buf", cfg.n_buf, 1, 512));
  try {
    (void)cfg.dims();
  } catch (const InvalidArgument& e) {
    hr.fail("", e.what());
  }
  top.put("hilbert", hr.finish());

  cfg.seed = static_cast<std::uint64_t>(top.integer("seed", 0, 0, std::numeric_limits<long long>::max()));
  cfg.output = top.text("output", cfg.output, {});
  if (cfg.output.empty()) top.fail("output", "must not be empty");

  for (const auto& k : kKinds) {
    if (k != kind && top.has(k)) top.fail(k, "block does not match job '" + kind + "'");
  }
  Reader jr = top.child(kind);
  try {
    cfg.job = read_job(kind, jr, cfg, protocol_name);
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    jr.fail("", e.what());
  }
  top.put(kind, jr.finish());
  cfg.resolved = top.finish();
  return cfg;
}

std::string config_hash(const json& resolved) {
  const std::string canonical = resolved.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---- execution ------------------------------------------------------------------------

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  xs.back() = b;
  return xs;
}

QOperator observable(const std::string& name, const SpaceDims& dims, cplx cat_alpha) {
  const auto ops = mode_operators(dims);
  if (name == "n_mem") return number_operator(dims, Mode::memory);
  if (name == "n_buf") return number_operator(dims, Mode::buffer);
  if (name == "parity_mem" || name == "X") return parity_operator(dims, Mode::memory);
  if (name == "parity_buf") return parity_operator(dims, Mode::buffer);
  if (name == "re_a") return 0.5 * (ops.a + ops.a.adjoint());
  if (name == "im_a") return cplx(0.0, -0.5) * (ops.a - ops.a.adjoint());
  if (name == "re_b") return 0.5 * (ops.b + ops.b.adjoint());
  if (name == "im_b") return cplx(0.0, -0.5) * (ops.b - ops.b.adjoint());
  if (name == "Z") return embed(half_space_sign(cat_alpha, dims.n_mem()), Mode::memory, dims);
  throw InvalidArgument("unknown observable " + name);
}

TimeDependentProblem evolve_problem(const EvolveJob& j, const JobConfig& cfg) {
  const SpaceDims dims = cfg.dims();
  PulseSequence seq = j.sequence;
  if (j.stabilize_alpha > 0.0) {
    const double T = std::max(j.duration, seq.total_time());
    seq.add(Channel::two_photon_pump, 0.0, T, 1.0);
    seq.add(Channel::buffer_drive, 0.0, T, buffer_drive_for(j.stabilize_alpha, cfg.params.g2));
  }
  seq.set_total_time(j.duration);
  return compile(seq, cfg.params, dims, j.initial.build(dims), j.compile);
}

Table time_series_table(const std::string& file, const TimeDependentProblem& problem, const EvolveJob& j,
                        const JobConfig& cfg) {
  const SpaceDims dims = cfg.dims();
  const auto times = linspace(0.0, problem.total_time(), j.n_times);
  Table t{file, {"t"}, {}};
  if (j.method == "master") {
    EvolveOptions opts;
    opts.rtol = j.rtol;
    opts.atol = j.atol;
    for (const auto& name : j.observables) opts.observables.emplace_back(name, observable(name, dims, j.cat_alpha));
    const auto res = evolve(problem, times, opts);
    for (const auto& name : j.observables) t.columns.push_back(name);
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::vector<double> row{times[i]};
      for (const auto& name : j.observables) row.push_back(res.series(name)[i].real());
      t.rows.push_back(row);
    }
    return t;
  }
  TrajectoryOptions opts;
  opts.rtol = j.rtol;
  opts.atol = j.atol;
  opts.threads = cfg.threads;
  for (const auto& name : j.observables) opts.observables.emplace_back(name, observable(name, dims, j.cat_alpha));
  const auto records = jump_unravel(problem, times, cfg.seed, j.n_traj, opts);
  std::vector<EnsembleSeries> means;
  for (const auto& name : j.observables) {
    means.push_back(ensemble_mean(records, name));
    t.columns.push_back(name);
    t.columns.push_back(name + "_sem");
  }
  for (std::size_t i = 0; i < times.size(); ++i) {
    std::vector<double> row{times[i]};
    for (const auto& m : means) {
      row.push_back(m.mean[i]);
      row.push_back(m.sem[i]);
    }
    t.rows.push_back(row);
  }
  return t;
}

JobResults run_evolve(const EvolveJob& j, const JobConfig& cfg) {
  JobResults out;
  out.tables.push_back(time_series_table("evolve.csv", evolve_problem(j, cfg), j, cfg));
  return out;
}

Table wigner_table(const std::string& file, const WignerGrid& w) {
  Table t{file, {"re", "im", "value"}, {}};
  for (int i = 0; i < w.spec.n_re; ++i) {
    for (int k = 0; k < w.spec.n_im; ++k) t.rows.push_back({w.spec.re_at(i), w.spec.im_at(k), w.values(i, k)});
  }
  return t;
}

JobResults run_wigner(const WignerJob& j, const JobConfig& cfg) {
  const SpaceDims dims = cfg.dims();
  MatrixXc rho_mem;
  if (j.source.duration > 0.0 || j.source.sequence.total_time() > 0.0) {
    const auto problem = evolve_problem(j.source, cfg);
    EvolveOptions opts;
    opts.rtol = j.source.rtol;
    opts.atol = j.source.atol;
    const auto res = evolve(problem, {problem.total_time()}, opts);
    rho_mem = reduce_to_memory(res.final_density, dims);
  } else {
    rho_mem = reduce_to_memory(j.source.initial.build(dims));
  }
  JobResults out;
  const auto w = wigner(rho_mem, j.grid);
  out.tables.push_back(wigner_table("wigner.csv", w));
  out.documents.emplace_back("wigner_summary.json", json{{"integral", w.integral()}});
  return out;
}

JobResults run_gap(const GapJob& j, const JobConfig& cfg) {
  const SpaceDims dims = cfg.dims();
  std::vector<double> g2s;
  if (j.g2_over_kappa_b.empty()) {
    g2s.push_back(std::abs(cfg.params.g2));
  } else {
    for (double r : j.g2_over_kappa_b) g2s.push_back(r * cfg.params.kappa_b);
  }
  Table t{"gap.csv",
          {"g2_hz", "kappa_b_hz", "alpha", "re_lambda_min_hz", "im_lambda_min_hz", "steady_dimension",
           "minus_two_re_lambda_hz", "closed_form_hz", "relative_difference"},
          {}};
  for (double g2 : g2s) {
    PhysicalParams p = cfg.params;
    p.g2 = std::polar(g2, std::arg(cfg.params.g2));
    DriveSpec drive;
    drive.eps_d = buffer_drive_for(j.alpha, p.g2);
    const auto H = hamiltonian_two_photon(p, drive, dims);
    const auto L = build_liouvillian(H, collapse_operators(p, dims, j.collapse), {j.max_dim});
    const auto rep = spectral_gap(L);
    const double numeric = -2.0 * rep.lambda_min.real();
    const double closed = j.alpha == 0.0 ? alpha0_confinement_closed_form(g2, p.kappa_b)
                                         : kappa_conf_closed_form(g2, p.kappa_b, j.alpha);
    t.rows.push_back({rad_to_hz(g2), rad_to_hz(p.kappa_b), j.alpha, rad_to_hz(rep.lambda_min.real()),
                      rad_to_hz(rep.lambda_min.imag()), static_cast<double>(rep.steady_dimension),
                      rad_to_hz(numeric), rad_to_hz(closed), (numeric - closed) / closed});
  }
  if (j.alpha > 0.0) {
    warn("gap: away from alpha = 0 the closed-form column is the mean-field confinement rate, which the "
         "slowest Liouvillian mode matches only when memory loss is off");
  }
  JobResults out;
  out.tables.push_back(std::move(t));
  return out;
}

JobResults run_bitflip(const BitflipJob& j, const JobConfig& cfg) {
  const SpaceDims dims = cfg.dims();
  PhysicalParams p = cfg.params;
  p.kappa_a *= j.kappa_a_scale;
  p.n_th_mem *= j.n_th_mem_scale;
  Table t{"bitflip.csv",
          {"alpha_squared", "T_X_ensemble", "T_X_ensemble_sigma", "T_X_dwell", "dwell_ci_low", "dwell_ci_high",
           "flips", "lower_bound_only"},
          {}};
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t k = 0; k < j.alpha_squared.size(); ++k) {
    const double alpha = std::sqrt(j.alpha_squared[k]);
    const double duration = j.durations.size() == 1 ? j.durations[0] : j.durations[k];
    DriveSpec drive;
    drive.eps_d = buffer_drive_for(alpha, p.g2);
    const auto problem = constant_problem(hamiltonian_two_photon(p, drive, dims), collapse_operators(p, dims),
                                          coherent_state(alpha, dims, Mode::memory), duration);
    TrajectoryOptions opts;
    opts.threads = cfg.threads;
    opts.max_jump_probability = j.max_jump_probability;
    opts.observables.emplace_back("Z", observable("Z", dims, alpha));
    const auto records =
        jump_unravel(problem, linspace(0.0, duration, j.n_times), derive_seed(cfg.seed, k), j.n_traj, opts);
    const auto est = bitflip_time_from_trajectories(records, "Z");
    const double sigma = est.ensemble_fit ? est.ensemble_fit->sigma("T") : kNaN;
    t.rows.push_back({j.alpha_squared[k], est.T_X_ensemble, sigma, est.dwell.T_X, est.dwell.ci_low,
                      est.dwell.ci_high, static_cast<double>(est.flips), est.lower_bound_only ? 1.0 : 0.0});
    if (std::isfinite(est.T_X_ensemble) && est.T_X_ensemble > 0.0) {
      xs.push_back(j.alpha_squared[k]);
      ys.push_back(std::log(est.T_X_ensemble));
    }
  }
  json fit{{"model", "log(T_X) = intercept + slope * alpha_squared"}, {"points", xs.size()}};
  if (xs.size() >= 2) {
    // ordinary least squares on (alpha^2, log T_X)
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      mx += xs[i] / n;
      my += ys[i] / n;
    }
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxx += (xs[i] - mx) * (xs[i] - mx);
      sxy += (xs[i] - mx) * (ys[i] - my);
      syy += (ys[i] - my) * (ys[i] - my);
    }
    const double slope = sxx > 0.0 ? sxy / sxx : kNaN;
    fit["slope"] = slope;
    fit["intercept"] = my - slope * mx;
    fit["factor_per_photon"] = std::exp(slope);
    fit["r_squared"] = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  } else {
    warn("bitflip: fewer than two usable points, no log-linear fit");
  }
  JobResults out;
  out.tables.push_back(std::move(t));
  out.documents.emplace_back("bitflip_fit.json", fit);
  return out;
}

json complex_json(cplx z) { return json{{"re", z.real()}, {"im", z.imag()}}; }

JobResults run_semiclassical(const SemiclassicalJob& j, const JobConfig& cfg) {
  FlowParams fp{cfg.params.g2, cfg.params.kappa_b, j.alpha, j.eps_Z};
  const auto samples = integrate_flow(j.initial, fp, 0.0, j.t_end, j.samples);
  Table t{"semiclassical.csv", {"t", "re_a", "im_a", "re_b", "im_b"}, {}};
  for (const auto& s : samples) {
    t.rows.push_back({s.t, s.state.a.real(), s.state.a.imag(), s.state.b.real(), s.state.b.imag()});
  }
  json points = json::array();
  for (const auto& fpnt : fixed_points(cfg.params.g2, cfg.params.kappa_b, j.alpha)) {
    const auto rep = stability_at(fpnt, cfg.params.g2, cfg.params.kappa_b, j.alpha);
    json eig = json::array();
    for (const auto& e : rep.eigenvalues) eig.push_back(complex_json(cplx(rad_to_hz(e.real()), rad_to_hz(e.imag()))));
    const char* cls = rep.classification == Stability::stable     ? "stable"
                      : rep.classification == Stability::unstable ? "unstable"
                                                                   : "critical";
    points.push_back({{"a", complex_json(fpnt.a)}, {"b", complex_json(fpnt.b)}, {"classification", cls},
                      {"eigenvalues_hz", eig}, {"kappa_conf_hz", rad_to_hz(rep.kappa_conf)}});
  }
  if (std::abs(j.eps_Z) > 0.0) warn("semiclassical: fixed points are those of the undriven flow (eps_z = 0)");
  JobResults out;
  out.tables.push_back(std::move(t));
  out.documents.emplace_back(
      "fixed_points.json",
      json{{"fixed_points", points},
           {"kappa_conf_closed_form_hz",
            rad_to_hz(kappa_conf_closed_form(std::abs(cfg.params.g2), cfg.params.kappa_b, std::abs(j.alpha)))}});
  return out;
}

JobResults run_holonomic(const ProtocolJob& j, const JobConfig& cfg) {
  const SpaceDims dims = cfg.dims();
  // Only the opening displacement depends on lambda, so one Heisenberg-picture
  // propagation of the memory photon number serves the whole grid.
  const auto seq = build_holonomic_tomography(0.0, j.alpha1, j.alpha2, j.timings, cfg.params);
  const auto problem = compile(seq, cfg.params, dims);
  const double t_read = holonomic_readout_time(j.timings);
  const MatrixXc image = evolve_adjoint(problem, number_operator(dims, Mode::memory).matrix(), t_read);
  JobResults out;
  for (const auto& [label, spec] : j.states) {
    const MatrixXc rho = spec.build(dims).to_density_matrix();
    const MatrixXc rho_mem = reduce_to_memory(rho, dims);
    Table t{"holonomic_" + label + ".csv", {"re", "im", "value", "wigner"}, {}};
    for (int i = 0; i < j.grid.n_re; ++i) {
      for (int k = 0; k < j.grid.n_im; ++k) {
        const cplx lambda{j.grid.re_at(i), j.grid.im_at(k)};
        const MatrixXc D = displacement_operator(-lambda, dims, Mode::memory).matrix();
        const MatrixXc shifted = D * rho * D.adjoint();
        t.rows.push_back({lambda.real(), lambda.imag(), trace_product(image, shifted).real(),
                          wigner_at(rho_mem, lambda)});
      }
    }
    out.tables.push_back(std::move(t));
  }
  return out;
}

JobResults run_protocol(const ProtocolJob& j, const JobConfig& cfg) {
  if (j.name == "holonomic") return run_holonomic(j, cfg);
  const SpaceDims dims = cfg.dims();
  PulseSequence seq;
  QState initial = j.initial.build(dims);
  if (j.name == "cat_prep") {
    seq = build_cat_prep(j.alpha, j.prep_time, cfg.params);
  } else if (j.name == "zeno_gate") {
    seq = build_zeno_gate(j.alpha, j.eps_Z, j.angle, cfg.params);
  } else {
    seq = build_deflation_probe(j.alpha, j.prep_time, j.readout);
    initial = fock_state(0, 0, dims);
  }
  EvolveJob ej;
  ej.n_times = j.n_times;
  ej.observables = j.observables;
  ej.cat_alpha = j.alpha;
  const auto problem = compile(seq, cfg.params, dims, initial);
  JobResults out;
  out.tables.push_back(time_series_table(j.name + ".csv", problem, ej, cfg));
  return out;
}

json fit_json(const FitResult& f) {
  json values = json::object();
  json sigmas = json::object();
  for (std::size_t i = 0; i < f.names.size(); ++i) {
    values[f.names[i]] = f.values(static_cast<Eigen::Index>(i));
    sigmas[f.names[i]] = f.sigmas(static_cast<Eigen::Index>(i));
  }
  return json{{"model", f.model},          {"parameters", f.names}, {"values", values},
              {"sigmas", sigmas},          {"residual_norm", f.residual_norm},
              {"converged", f.converged},  {"at_bound", f.at_bound}, {"message", f.message}};
}

JobResults run_fit(const FitJob& j) {
  FitResult f;
  if (j.model == "exponential") {
    f = fit_exponential(j.data, j.fixed_offset);
  } else if (j.model == "damped_cosine") {
    f = fit_damped_cosine(j.data);
  } else {
    f = fit_wigner_cuts(j.mixture, j.cat, j.thermal, j.guess);
  }
  if (!f.converged) warn("fit: " + j.model + " did not converge: " + f.message);
  JobResults out;
  out.documents.emplace_back("fit.json", fit_json(f));
  return out;
}

JobResults run_readout(const ReadoutJob& j, const JobConfig& cfg) {
  std::vector<cplx> pointers = j.pointers;
  for (int n : j.photon_numbers) {
    pointers.push_back(longitudinal_response(n, cfg.params.g_l, cfg.params.g_sp, cfg.params.kappa_b));
  }
  const double eta = cfg.params.eta_het;
  const auto samples = heterodyne_readout(pointers, j.T_int, cfg.params.kappa_b, eta, cfg.seed, j.n_shots);
  Table t{"readout_samples.csv", {"pointer", "re", "im"}, {}};
  for (std::size_t p = 0; p < samples.size(); ++p) {
    for (const auto& s : samples[p]) t.rows.push_back({static_cast<double>(p), s.real(), s.imag()});
  }
  json ptrs = json::array();
  for (const auto& z : pointers) ptrs.push_back(complex_json(z));
  json doc{{"pointers", ptrs}, {"sigma", heterodyne_sigma(j.T_int, cfg.params.kappa_b, eta)}, {"eta", eta}};
  if (pointers.size() == 2) {
    const double err = heterodyne_discrimination_error(pointers[0], pointers[1], j.T_int, cfg.params.kappa_b, eta);
    doc["predicted_fidelity"] = 1.0 - err;
    doc["empirical_fidelity"] = readout_fidelity(samples[0], samples[1]);
    if (j.target_fidelity) {
      try {
        doc["required_eta"] =
            fit_heterodyne_efficiency(pointers[0], pointers[1], j.T_int, cfg.params.kappa_b, *j.target_fidelity);
      } catch (const Error& e) {
        doc["required_eta"] = nullptr;
        warn(std::string("readout: ") + e.what());
      }
    }
  } else if (j.target_fidelity) {
    warn("readout: target_fidelity needs exactly two pointers");
  }
  JobResults out;
  out.tables.push_back(std::move(t));
  out.documents.emplace_back("readout.json", doc);
  return out;
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Non-finite numbers are written as strings so the documents stay valid JSON.
json sanitize(const json& j) {
  if (j.is_number_float()) {
    const double x = j.get<double>();
    return std::isfinite(x) ? j : json(format_double(x));
  }
  if (j.is_object() || j.is_array()) {
    json out = j;
    for (auto it = out.begin(); it != out.end(); ++it) *it = sanitize(*it);
    return out;
  }
  return j;
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create output directory " + dir);
}

}  // namespace

JobResults execute(const JobConfig& config) {
  return std::visit(
      [&](const auto& job) -> JobResults {
        using T = std::decay_t<decltype(job)>;
        if constexpr (std::is_same_v<T, EvolveJob>) {
          return run_evolve(job, config);
        } else if constexpr (std::is_same_v<T, WignerJob>) {
          return run_wigner(job, config);
        } else if constexpr (std::is_same_v<T, GapJob>) {
          return run_gap(job, config);
        } else if constexpr (std::is_same_v<T, BitflipJob>) {
          return run_bitflip(job, config);
        } else if constexpr (std::is_same_v<T, SemiclassicalJob>) {
          return run_semiclassical(job, config);
        } else if constexpr (std::is_same_v<T, ProtocolJob>) {
          return run_protocol(job, config);
        } else if constexpr (std::is_same_v<T, FitJob>) {
          return run_fit(job);
        } else {
          return run_readout(job, config);
        }
      },
      config.job);
}

std::vector<std::string> write_outputs(const JobResults& results, const std::string& dir) {
  ensure_dir(dir);
  std::vector<std::string> written;
  for (const auto& t : results.tables) {
    std::string s;
    for (std::size_t c = 0; c < t.columns.size(); ++c) s += (c ? "," : "") + t.columns[c];
    s += '\n';
    for (const auto& row : t.rows) {
      if (row.size() != t.columns.size()) throw InvalidArgument("write_outputs: row width mismatch in " + t.file);
      for (std::size_t c = 0; c < row.size(); ++c) s += (c ? "," : "") + format_double(row[c]);
      s += '\n';
    }
    atomic_write(std::filesystem::path(dir) / t.file, s);
    written.push_back(t.file);
  }
  for (const auto& [file, doc] : results.documents) {
    atomic_write(std::filesystem::path(dir) / file, sanitize(doc).dump(2) + "\n");
    written.push_back(file);
  }
  return written;
}

json RunManifest::to_json() const {
  return json{{"config_hash", config_hash}, {"tool_version", tool_version}, {"seed", seed},
              {"wall_time_s", wall_time},   {"warnings", warnings},         {"outputs", outputs},
              {"config", config}};
}

void write_manifest(const RunManifest& manifest, const std::string& dir) {
  ensure_dir(dir);
  atomic_write(std::filesystem::path(dir) / "manifest.json", sanitize(manifest.to_json()).dump(2) + "\n");
}

RunManifest run_job(const JobConfig& config, const std::string& dir) {
  clear_warnings();
  const auto start = std::chrono::steady_clock::now();
  const JobResults results = execute(config);
  RunManifest m;
  m.outputs = write_outputs(results, dir);
  m.config_hash = config_hash(config.resolved);
  m.seed = config.seed;
  m.config = config.resolved;
  m.warnings = warnings();
  m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_manifest(m, dir);
  return m;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"catq: cat-qubit simulation jobs"};
  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  int threads = 1;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON job file")->required();
  app.add_option("--output-dir", output_dir, "output directory (overrides the config and CATQ_OUTPUT_DIR)");
  app.add_option("--seed", seed, "random seed (overrides the config)");
  app.add_option("--threads", threads, "parallel trajectories")->check(CLI::Range(1, 256));
  app.add_flag("--quiet", quiet, "no warnings or summary on the terminal");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }
  set_warning_echo(!quiet);
  try {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) throw ConfigError("cannot read config file " + config_path);
    std::stringstream ss;
    ss << f.rdbuf();
    JobConfig cfg = parse_config(ss.str());
    if (seed) {
      cfg.seed = *seed;
      cfg.resolved["seed"] = *seed;
    }
    cfg.threads = threads;
    std::string dir = cfg.output;
    if (const char* env = std::getenv("CATQ_OUTPUT_DIR"); env != nullptr && *env != '\0') dir = env;
    if (!output_dir.empty()) dir = output_dir;
    const auto manifest = run_job(cfg, dir);
    if (!quiet) {
      std::cout << "job " << cfg.kind << " done in " << manifest.wall_time << " s, config " << manifest.config_hash
                << "\n";
      for (const auto& o : manifest.outputs) std::cout << "  " << (std::filesystem::path(dir) / o).string() << "\n";
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace catq
