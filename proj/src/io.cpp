#include "dechist/io.hpp"

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "dechist/detail/parallel.hpp"
#include "dechist/errors.hpp"
#include "dechist/version.hpp"

namespace dechist {

namespace fs = std::filesystem;

namespace {
int threads_from(const CliOverrides& overrides) {
  return detail::resolve_threads(overrides.threads.value_or(0));
}
}  // namespace

Json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config-unreadable", "cannot open config file: " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("config-parse-error", std::string("config parse error: ") + e.what());
  }
}

std::string config_hash(const Json& config) {
  const std::string dump = config.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Strict object access

namespace {

class StrictObject {
 public:
  StrictObject(const Json& j, std::string context) : j_(j), context_(std::move(context)) {
    if (!j_.is_object()) {
      throw ValidationError("config-not-object", context_ + " must be a JSON object");
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  T get(const char* key, T fallback) {
    consumed_.insert(key);
    if (!j_.contains(key)) return fallback;
    return read<T>(key);
  }

  template <typename T>
  T require(const char* key) {
    consumed_.insert(key);
    if (!j_.contains(key)) {
      throw ValidationError("missing-field", context_ + ": required field '" + key + "' missing");
    }
    return read<T>(key);
  }

  Json raw(const char* key, Json fallback = Json::object()) {
    consumed_.insert(key);
    return j_.contains(key) ? j_.at(key) : fallback;
  }

  bool consume(const char* key) {
    consumed_.insert(key);
    return j_.contains(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!consumed_.count(key)) {
        throw ValidationError("unknown-field",
                              context_ + ": unknown field '" + key + "'");
      }
    }
  }

 private:
  template <typename T>
  T read(const char* key) {
    try {
      return j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config-bad-type", context_ + ": field '" + key + "' has wrong type");
    }
  }

  const Json& j_;
  std::string context_;
  std::set<std::string> consumed_;
};

GridPtr parse_grid(const Json& j) {
  StrictObject o(j, "grid");
  const int n = o.require<int>("n_points");
  const double x_min = o.require<double>("x_min");
  const double x_max = o.require<double>("x_max");
  o.finish();
  return make_grid(n, x_min, x_max);
}

Potential parse_potential(const Json& j) {
  StrictObject o(j, "potential");
  const std::string type = o.get<std::string>("type", "free");
  Potential pot;
  if (type == "free") {
    pot = Free{};
  } else if (type == "harmonic") {
    pot = Harmonic{o.get<double>("omega", 1.0)};
  } else if (type == "quartic") {
    pot = Quartic{o.get<double>("lambda", 1.0)};
  } else if (type == "double_slit_barrier") {
    DoubleSlitBarrier b;
    b.slit_center_1 = o.get<double>("slit_center_1", b.slit_center_1);
    b.slit_center_2 = o.get<double>("slit_center_2", b.slit_center_2);
    b.slit_width = o.get<double>("slit_width", b.slit_width);
    b.height = o.get<double>("height", b.height);
    b.thickness = o.get<double>("thickness", b.thickness);
    pot = b;
  } else if (type == "tabulated") {
    const auto values = o.require<std::vector<double>>("values");
    Tabulated t;
    t.values = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    pot = t;
  } else {
    throw ValidationError("config-bad-potential", "unknown potential type '" + type + "'");
  }
  o.finish();
  validate_potential(pot);
  return pot;
}

PhysicalParams parse_params(const Json& j) {
  StrictObject o(j, "params");
  const std::string units = o.get<std::string>("units", "natural");
  PhysicalParams p;
  if (units == "cgs") {
    p = PhysicalParams::cgs();
  } else if (units != "natural") {
    throw ValidationError("config-bad-units", "units must be 'natural' or 'cgs'");
  }
  p.hbar = o.get<double>("hbar", p.hbar);
  p.mass = o.get<double>("mass", p.mass);
  p.gamma = o.get<double>("gamma", p.gamma);
  p.temperature = o.get<double>("temperature", p.temperature);
  p.k_boltzmann = o.get<double>("k_boltzmann", p.k_boltzmann);
  if (o.has("potential")) p.potential = parse_potential(o.raw("potential"));
  o.finish();
  p.validate();
  return p;
}

Json potential_echo(const Potential& pot) {
  Json j;
  j["type"] = potential_name(pot);
  if (const auto* h = std::get_if<Harmonic>(&pot)) {
    j["omega"] = h->omega;
  } else if (const auto* q = std::get_if<Quartic>(&pot)) {
    j["lambda"] = q->lambda;
  } else if (const auto* b = std::get_if<DoubleSlitBarrier>(&pot)) {
    j["slit_center_1"] = b->slit_center_1;
    j["slit_center_2"] = b->slit_center_2;
    j["slit_width"] = b->slit_width;
    j["height"] = b->height;
    j["thickness"] = b->thickness;
  } else if (const auto* t = std::get_if<Tabulated>(&pot)) {
    j["values"] = std::vector<double>(t->values.data(), t->values.data() + t->values.size());
  }
  return j;
}

Json params_echo(const PhysicalParams& p) {
  Json j;
  j["hbar"] = p.hbar;
  j["mass"] = p.mass;
  j["gamma"] = p.gamma;
  j["temperature"] = p.temperature;
  j["k_boltzmann"] = p.k_boltzmann;
  j["potential"] = potential_echo(p.potential);
  return j;
}

Json grid_echo(const SpatialGrid& g) {
  Json j;
  j["n_points"] = g.size();
  j["x_min"] = g.x_min();
  j["x_max"] = g.x_max();
  j["dx"] = g.dx();
  return j;
}

WaveFunction parse_pure_initial(const Json& j, const GridPtr& grid, const PhysicalParams& params) {
  StrictObject o(j, "initial");
  const std::string type = o.require<std::string>("type");
  if (type == "gaussian") {
    const double x0 = o.require<double>("x0");
    const double p0 = o.get<double>("p0", 0.0);
    const double sigma = o.require<double>("sigma");
    o.finish();
    return gaussian_packet(grid, params, x0, p0, sigma);
  }
  if (type == "superposition") {
    const Json comps = o.raw("components", Json::array());
    o.finish();
    if (!comps.is_array() || comps.empty()) {
      throw ValidationError("config-bad-initial", "superposition needs a component array");
    }
    CVector amp = CVector::Zero(grid->size());
    for (const auto& cj : comps) {
      StrictObject c(cj, "initial.components[]");
      const double x0 = c.require<double>("x0");
      const double p0 = c.get<double>("p0", 0.0);
      const double sigma = c.require<double>("sigma");
      const Complex coef(c.get<double>("re", 1.0), c.get<double>("im", 0.0));
      c.finish();
      amp += coef * gaussian_packet(grid, params, x0, p0, sigma).amplitudes();
    }
    return WaveFunction::normalized(grid, std::move(amp));
  }
  throw ValidationError("config-bad-initial", "initial type must be gaussian or superposition");
}

HistoryState parse_initial_state(const Json& j, const GridPtr& grid,
                                 const PhysicalParams& params) {
  StrictObject probe(j, "initial");
  const std::string type = probe.require<std::string>("type");
  if (type == "mixed") {
    const Json comps = probe.raw("components", Json::array());
    probe.finish();
    if (!comps.is_array() || comps.empty()) {
      throw ValidationError("config-bad-initial", "mixed state needs a component array");
    }
    std::vector<std::pair<double, WaveFunction>> mixture;
    for (const auto& cj : comps) {
      StrictObject c(cj, "initial.components[]");
      const double prob = c.require<double>("probability");
      const double x0 = c.require<double>("x0");
      const double p0 = c.get<double>("p0", 0.0);
      const double sigma = c.require<double>("sigma");
      c.finish();
      mixture.emplace_back(prob, gaussian_packet(grid, params, x0, p0, sigma));
    }
    return mixed_density(mixture);
  }
  return parse_pure_initial(j, grid, params);
}

std::vector<double> parse_sample_times(StrictObject& o, double t_final) {
  if (o.has("sample_times")) {
    auto times = o.require<std::vector<double>>("sample_times");
    o.consume("sample_count");
    return times;
  }
  const int count = o.get<int>("sample_count", 11);
  if (count < 1) throw ValidationError("config-bad-samples", "sample_count must be >= 1");
  std::vector<double> times;
  if (count == 1) {
    times.push_back(0.0);
  } else {
    for (int i = 0; i < count; ++i) times.push_back(t_final * i / (count - 1));
  }
  return times;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario config parsing + echo

namespace {

DoubleSlitConfig parse_double_slit(StrictObject& o) {
  DoubleSlitConfig c;
  c.mode = o.get<std::string>("mode", c.mode);
  c.mask_slit = o.get<int>("mask_slit", c.mask_slit);
  c.pattern_n = o.get<int>("pattern_n", c.pattern_n);
  c.pattern_half_width = o.get<double>("pattern_half_width", c.pattern_half_width);
  c.pattern_separation = o.get<double>("pattern_separation", c.pattern_separation);
  c.pattern_sigma = o.get<double>("pattern_sigma", c.pattern_sigma);
  c.pattern_dt = o.get<double>("pattern_dt", c.pattern_dt);
  c.pattern_time = o.get<double>("pattern_time", c.pattern_time);
  c.hist_n = o.get<int>("hist_n", c.hist_n);
  c.hist_half_width = o.get<double>("hist_half_width", c.hist_half_width);
  c.hist_separation = o.get<double>("hist_separation", c.hist_separation);
  c.hist_sigma = o.get<double>("hist_sigma", c.hist_sigma);
  c.hist_momentum = o.get<double>("hist_momentum", c.hist_momentum);
  c.hist_dt = o.get<double>("hist_dt", c.hist_dt);
  c.screen_bin = o.get<double>("screen_bin", c.screen_bin);
  c.screen_half_region = o.get<double>("screen_half_region", c.screen_half_region);
  c.sweep_coefficients = o.get<std::vector<double>>("sweep_coefficients", c.sweep_coefficients);
  c.epsilon_threshold = o.get<double>("epsilon_threshold", c.epsilon_threshold);
  c.barrier_n = o.get<int>("barrier_n", c.barrier_n);
  c.barrier_half_width = o.get<double>("barrier_half_width", c.barrier_half_width);
  c.barrier_height = o.get<double>("barrier_height", c.barrier_height);
  c.barrier_thickness = o.get<double>("barrier_thickness", c.barrier_thickness);
  c.barrier_slit_width = o.get<double>("barrier_slit_width", c.barrier_slit_width);
  c.barrier_packet_x0 = o.get<double>("barrier_packet_x0", c.barrier_packet_x0);
  c.barrier_packet_p0 = o.get<double>("barrier_packet_p0", c.barrier_packet_p0);
  c.barrier_packet_sigma = o.get<double>("barrier_packet_sigma", c.barrier_packet_sigma);
  c.barrier_dt = o.get<double>("barrier_dt", c.barrier_dt);
  c.barrier_time = o.get<double>("barrier_time", c.barrier_time);
  c.threads = o.get<int>("threads", c.threads);
  return c;
}

Json echo_double_slit(const DoubleSlitConfig& c) {
  Json j;
  j["scenario"] = "double_slit";
  j["mode"] = c.mode;
  j["mask_slit"] = c.mask_slit;
  j["pattern_n"] = c.pattern_n;
  j["pattern_half_width"] = c.pattern_half_width;
  j["pattern_separation"] = c.pattern_separation;
  j["pattern_sigma"] = c.pattern_sigma;
  j["pattern_dt"] = c.pattern_dt;
  j["pattern_time"] = c.pattern_time;
  j["hist_n"] = c.hist_n;
  j["hist_half_width"] = c.hist_half_width;
  j["hist_separation"] = c.hist_separation;
  j["hist_sigma"] = c.hist_sigma;
  j["hist_momentum"] = c.hist_momentum;
  j["hist_dt"] = c.hist_dt;
  j["screen_bin"] = c.screen_bin;
  j["screen_half_region"] = c.screen_half_region;
  j["sweep_coefficients"] = c.sweep_coefficients;
  j["epsilon_threshold"] = c.epsilon_threshold;
  j["barrier_n"] = c.barrier_n;
  j["barrier_half_width"] = c.barrier_half_width;
  j["barrier_height"] = c.barrier_height;
  j["barrier_thickness"] = c.barrier_thickness;
  j["barrier_slit_width"] = c.barrier_slit_width;
  j["barrier_packet_x0"] = c.barrier_packet_x0;
  j["barrier_packet_p0"] = c.barrier_packet_p0;
  j["barrier_packet_sigma"] = c.barrier_packet_sigma;
  j["barrier_dt"] = c.barrier_dt;
  j["barrier_time"] = c.barrier_time;
  j["threads"] = c.threads;
  return j;
}

CatDecoherenceConfig parse_cat(StrictObject& o) {
  CatDecoherenceConfig c;
  c.n = o.get<int>("n", c.n);
  c.half_width = o.get<double>("half_width", c.half_width);
  c.separation = o.get<double>("separation", c.separation);
  c.sigma = o.get<double>("sigma", c.sigma);
  c.gamma = o.get<double>("gamma", c.gamma);
  c.temperature = o.get<double>("temperature", c.temperature);
  c.dt = o.get<double>("dt", c.dt);
  c.t_final = o.get<double>("t_final", c.t_final);
  c.sample_stride = o.get<int>("sample_stride", c.sample_stride);
  c.d0_check_window = o.get<double>("d0_check_window", c.d0_check_window);
  c.include_d0_reference = o.get<bool>("include_d0_reference", c.include_d0_reference);
  c.threads = o.get<int>("threads", c.threads);
  return c;
}

Json echo_cat(const CatDecoherenceConfig& c) {
  Json j;
  j["scenario"] = "cat_decoherence";
  j["n"] = c.n;
  j["half_width"] = c.half_width;
  j["separation"] = c.separation;
  j["sigma"] = c.sigma;
  j["gamma"] = c.gamma;
  j["temperature"] = c.temperature;
  j["dt"] = c.dt;
  j["t_final"] = c.t_final;
  j["sample_stride"] = c.sample_stride;
  j["d0_check_window"] = c.d0_check_window;
  j["include_d0_reference"] = c.include_d0_reference;
  j["threads"] = c.threads;
  return j;
}

EnergySuperpositionConfig parse_energy(StrictObject& o) {
  EnergySuperpositionConfig c;
  c.n = o.get<int>("n", c.n);
  c.half_width = o.get<double>("half_width", c.half_width);
  c.omega = o.get<double>("omega", c.omega);
  c.level_a = o.get<int>("level_a", c.level_a);
  c.level_b = o.get<int>("level_b", c.level_b);
  c.times = o.get<std::vector<double>>("times", c.times);
  c.dt = o.get<double>("dt", c.dt);
  c.position_breakpoint = o.get<double>("position_breakpoint", c.position_breakpoint);
  c.position_dt = o.get<double>("position_dt", c.position_dt);
  c.threads = o.get<int>("threads", c.threads);
  return c;
}

Json echo_energy(const EnergySuperpositionConfig& c) {
  Json j;
  j["scenario"] = "energy_superposition";
  j["n"] = c.n;
  j["half_width"] = c.half_width;
  j["omega"] = c.omega;
  j["level_a"] = c.level_a;
  j["level_b"] = c.level_b;
  j["times"] = c.times;
  j["dt"] = c.dt;
  j["position_breakpoint"] = c.position_breakpoint;
  j["position_dt"] = c.position_dt;
  j["threads"] = c.threads;
  return j;
}

EmergentTrajectoryConfig parse_emergent(StrictObject& o) {
  EmergentTrajectoryConfig c;
  c.n = o.get<int>("n", c.n);
  c.half_width = o.get<double>("half_width", c.half_width);
  c.x0 = o.get<double>("x0", c.x0);
  c.velocity = o.get<double>("velocity", c.velocity);
  c.sigma = o.get<double>("sigma", c.sigma);
  c.masses = o.get<std::vector<double>>("masses", c.masses);
  c.reference_mass = o.get<double>("reference_mass", c.reference_mass);
  c.gamma = o.get<double>("gamma", c.gamma);
  c.temperature = o.get<double>("temperature", c.temperature);
  c.times = o.get<std::vector<double>>("times", c.times);
  c.gate_width = o.get<double>("gate_width", c.gate_width);
  c.extra_widths = o.get<std::vector<double>>("extra_widths", c.extra_widths);
  c.include_full_grid_gate = o.get<bool>("include_full_grid_gate", c.include_full_grid_gate);
  c.dt = o.get<double>("dt", c.dt);
  c.langevin_samples = o.get<int>("langevin_samples", c.langevin_samples);
  c.langevin_dt = o.get<double>("langevin_dt", c.langevin_dt);
  c.seed = o.get<std::uint64_t>("seed", c.seed);
  c.score_threshold = o.get<double>("score_threshold", c.score_threshold);
  c.epsilon_threshold = o.get<double>("epsilon_threshold", c.epsilon_threshold);
  c.probability_floor = o.get<double>("probability_floor", c.probability_floor);
  c.threads = o.get<int>("threads", c.threads);
  return c;
}

Json echo_emergent(const EmergentTrajectoryConfig& c) {
  Json j;
  j["scenario"] = "emergent_trajectory";
  j["n"] = c.n;
  j["half_width"] = c.half_width;
  j["x0"] = c.x0;
  j["velocity"] = c.velocity;
  j["sigma"] = c.sigma;
  j["masses"] = c.masses;
  j["reference_mass"] = c.reference_mass;
  j["gamma"] = c.gamma;
  j["temperature"] = c.temperature;
  j["times"] = c.times;
  j["gate_width"] = c.gate_width;
  j["extra_widths"] = c.extra_widths;
  j["include_full_grid_gate"] = c.include_full_grid_gate;
  j["dt"] = c.dt;
  j["langevin_samples"] = c.langevin_samples;
  j["langevin_dt"] = c.langevin_dt;
  j["seed"] = c.seed;
  j["score_threshold"] = c.score_threshold;
  j["epsilon_threshold"] = c.epsilon_threshold;
  j["probability_floor"] = c.probability_floor;
  j["threads"] = c.threads;
  return j;
}

SpreadingConfig parse_spreading(StrictObject& o) {
  SpreadingConfig c;
  c.n = o.get<int>("n", c.n);
  c.half_width = o.get<double>("half_width", c.half_width);
  c.sigma = o.get<double>("sigma", c.sigma);
  c.dt = o.get<double>("dt", c.dt);
  c.t_final = o.get<double>("t_final", c.t_final);
  c.sample_interval = o.get<double>("sample_interval", c.sample_interval);
  c.threads = o.get<int>("threads", c.threads);
  return c;
}

Json echo_spreading(const SpreadingConfig& c) {
  Json j;
  j["scenario"] = "spreading";
  j["n"] = c.n;
  j["half_width"] = c.half_width;
  j["sigma"] = c.sigma;
  j["dt"] = c.dt;
  j["t_final"] = c.t_final;
  j["sample_interval"] = c.sample_interval;
  j["threads"] = c.threads;
  return j;
}

EhrenfestGapConfig parse_ehrenfest(StrictObject& o) {
  EhrenfestGapConfig c;
  c.n = o.get<int>("n", c.n);
  c.half_width = o.get<double>("half_width", c.half_width);
  c.omega = o.get<double>("omega", c.omega);
  c.harmonic_x0 = o.get<double>("harmonic_x0", c.harmonic_x0);
  c.harmonic_t_final = o.get<double>("harmonic_t_final", c.harmonic_t_final);
  c.quartic_lambda = o.get<double>("quartic_lambda", c.quartic_lambda);
  c.quartic_x0 = o.get<double>("quartic_x0", c.quartic_x0);
  c.quartic_sigma = o.get<double>("quartic_sigma", c.quartic_sigma);
  c.quartic_t_final = o.get<double>("quartic_t_final", c.quartic_t_final);
  c.wide_sigma = o.get<double>("wide_sigma", c.wide_sigma);
  c.narrow_sigma = o.get<double>("narrow_sigma", c.narrow_sigma);
  c.dt = o.get<double>("dt", c.dt);
  c.sample_interval = o.get<double>("sample_interval", c.sample_interval);
  c.threads = o.get<int>("threads", c.threads);
  return c;
}

Json echo_ehrenfest(const EhrenfestGapConfig& c) {
  Json j;
  j["scenario"] = "ehrenfest_gap";
  j["n"] = c.n;
  j["half_width"] = c.half_width;
  j["omega"] = c.omega;
  j["harmonic_x0"] = c.harmonic_x0;
  j["harmonic_t_final"] = c.harmonic_t_final;
  j["quartic_lambda"] = c.quartic_lambda;
  j["quartic_x0"] = c.quartic_x0;
  j["quartic_sigma"] = c.quartic_sigma;
  j["quartic_t_final"] = c.quartic_t_final;
  j["wide_sigma"] = c.wide_sigma;
  j["narrow_sigma"] = c.narrow_sigma;
  j["dt"] = c.dt;
  j["sample_interval"] = c.sample_interval;
  j["threads"] = c.threads;
  return j;
}

}  // namespace

ScenarioConfig parse_scenario_config(const Json& config, const std::string& id,
                                     const CliOverrides& overrides) {
  StrictObject o(config, "scenario config");
  if (o.has("scenario")) {
    const std::string declared = o.require<std::string>("scenario");
    if (declared != id) {
      throw ValidationError("config-scenario-mismatch",
                            "config declares scenario '" + declared + "', expected '" + id + "'");
    }
  }
  ScenarioConfig result;
  if (id == "double_slit") {
    result = parse_double_slit(o);
  } else if (id == "cat_decoherence") {
    result = parse_cat(o);
  } else if (id == "energy_superposition") {
    result = parse_energy(o);
  } else if (id == "emergent_trajectory") {
    result = parse_emergent(o);
  } else if (id == "spreading") {
    result = parse_spreading(o);
  } else if (id == "ehrenfest_gap") {
    result = parse_ehrenfest(o);
  } else {
    throw ValidationError("unknown-scenario", "unknown scenario id '" + id + "'");
  }
  o.finish();

  if (overrides.threads) {
    std::visit([&](auto& c) { c.threads = *overrides.threads; }, result);
  }
  if (overrides.seed) {
    if (auto* c = std::get_if<EmergentTrajectoryConfig>(&result)) c->seed = *overrides.seed;
  }
  return result;
}

Json scenario_config_echo(const ScenarioConfig& config) {
  return std::visit(
      [](const auto& c) -> Json {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, DoubleSlitConfig>) return echo_double_slit(c);
        else if constexpr (std::is_same_v<T, CatDecoherenceConfig>) return echo_cat(c);
        else if constexpr (std::is_same_v<T, EnergySuperpositionConfig>) return echo_energy(c);
        else if constexpr (std::is_same_v<T, EmergentTrajectoryConfig>) return echo_emergent(c);
        else if constexpr (std::is_same_v<T, SpreadingConfig>) return echo_spreading(c);
        else return echo_ehrenfest(c);
      },
      config);
}

// ---------------------------------------------------------------------------
// Generic tool commands

ScenarioReport run_evolve_command(const Json& config, const CliOverrides& overrides) {
  (void)overrides;
  StrictObject o(config, "evolve config");
  GridPtr grid = parse_grid(o.raw("grid"));
  PhysicalParams params = parse_params(o.raw("params"));
  const double dt = o.get<double>("dt", 1e-3);
  const double t_final = o.require<double>("t_final");
  auto samples = parse_sample_times(o, t_final);
  const bool write_density = o.get<bool>("write_density", false);
  WaveFunction psi0 = parse_pure_initial(o.raw("initial"), grid, params);
  o.finish();

  UnitaryStepper stepper(grid, params, dt);
  ScenarioReport report;
  report.scenario = "evolve";
  report.add_metadata("version", kVersion);
  if (stepper.phase_wrap_warning()) report.warnings.push_back("phase wrap warning");
  auto traj = evolve(stepper, psi0, t_final, samples);

  Curve obs{"observables",
            {"t", "norm", "mean_x", "mean_p", "delta_x", "delta_p", "energy", "boundary_leak"},
            {}};
  for (const auto& pt : traj) {
    obs.rows.push_back({pt.t, pt.obs.norm, pt.obs.mean_x, pt.obs.mean_p, pt.obs.delta_x,
                        pt.obs.delta_p, pt.obs.mean_energy, pt.boundary_leak});
    if (pt.leak_warning) {
      report.warnings.push_back("boundary leak at t=" + std::to_string(pt.t));
    }
  }
  report.curves.push_back(std::move(obs));

  if (write_density) {
    Curve density{"density", {"x", "initial", "final"}, {}};
    const Eigen::VectorXd d0 = traj.front().psi.amplitudes().cwiseAbs2();
    const Eigen::VectorXd d1 = traj.back().psi.amplitudes().cwiseAbs2();
    for (int j = 0; j < grid->size(); ++j) {
      density.rows.push_back({grid->x(j), d0[j], d1[j]});
    }
    report.curves.push_back(std::move(density));
  }
  return report;
}

ScenarioReport run_master_command(const Json& config, const CliOverrides& overrides) {
  (void)overrides;
  StrictObject o(config, "master config");
  GridPtr grid = parse_grid(o.raw("grid"));
  PhysicalParams params = parse_params(o.raw("params"));
  const double dt = o.get<double>("dt", 1e-3);
  const double t_final = o.require<double>("t_final");
  auto samples = parse_sample_times(o, t_final);
  const bool hamiltonian = o.get<bool>("hamiltonian", true);
  std::optional<double> d_override;
  if (o.has("d_override")) d_override = o.require<double>("d_override");

  OpenDiagnosticsConfig diag;
  if (o.has("offdiag_point")) {
    const auto pt = o.require<std::vector<double>>("offdiag_point");
    if (pt.size() != 2) {
      throw ValidationError("config-bad-diagnostics", "offdiag_point must be [x, y]");
    }
    diag.offdiag_point = {{pt[0], pt[1]}};
  }
  if (o.has("offdiag_min_separation")) {
    diag.offdiag_min_separation = o.require<double>("offdiag_min_separation");
  }
  std::vector<double> snapshot_times = o.get<std::vector<double>>("snapshot_times", {});
  HistoryState initial = parse_initial_state(o.raw("initial"), grid, params);
  o.finish();

  DensityMatrix rho0 = std::holds_alternative<WaveFunction>(initial)
                           ? pure_density(std::get<WaveFunction>(initial))
                           : std::get<DensityMatrix>(initial);

  MasterStepper stepper =
      hamiltonian ? (d_override ? MasterStepper::with_coefficient(grid, params, dt, *d_override)
                                : MasterStepper(grid, params, dt))
                  : MasterStepper::decay_only(grid, params, dt, d_override);

  ScenarioReport report;
  report.scenario = "master";
  report.add_metadata("version", kVersion);
  report.add_metadata("coefficient", std::to_string(stepper.coefficient()));
  report.add_metadata("coefficient_overridden", stepper.coefficient_overridden() ? "true" : "false");
  report.add_metadata("hamiltonian", stepper.hamiltonian_enabled() ? "on" : "off");

  auto traj = evolve_open(stepper, rho0, t_final, samples, diag);
  Curve curve{"diagnostics",
              {"t", "trace", "purity", "coherence_length", "offdiag_fixed", "offdiag_max",
               "min_eigenvalue", "boundary_leak"},
              {}};
  for (const auto& pt : traj) {
    curve.rows.push_back({pt.t, pt.diag.trace, pt.diag.purity, pt.diag.coherence_length,
                          pt.diag.offdiag_fixed, pt.diag.offdiag_max, pt.diag.min_eigenvalue,
                          pt.diag.boundary_leak});
    if (pt.diag.leak_warning) report.warnings.push_back("boundary leak at t=" + std::to_string(pt.t));
    if (pt.diag.positivity_warning) {
      report.warnings.push_back("min eigenvalue below -1e-6 at t=" + std::to_string(pt.t));
    }
  }
  report.curves.push_back(std::move(curve));

  for (double ts : snapshot_times) {
    for (const auto& pt : traj) {
      if (std::abs(pt.t - ts) < 1e-12) {
        report.snapshots.push_back({"rho_t" + std::to_string(ts), grid, pt.rho.entries()});
      }
    }
  }
  return report;
}

ScenarioReport run_histories_command(const Json& config, const CliOverrides& overrides) {
  StrictObject o(config, "histories config");
  GridPtr grid = parse_grid(o.raw("grid"));
  PhysicalParams params = parse_params(o.raw("params"));
  const double dt = o.get<double>("dt", 1e-3);
  const auto times = o.require<std::vector<double>>("times");

  const Json propagation_json = o.raw("propagation");
  StrictObject po(propagation_json, "propagation");
  const std::string ptype = po.require<std::string>("type");
  std::optional<double> d_override;
  if (po.has("d_override")) d_override = po.require<double>("d_override");
  po.finish();

  HistoryState initial = parse_initial_state(o.raw("initial"), grid, params);

  const Json partitions_json = o.raw("partitions", Json::array());
  if (!partitions_json.is_array() || partitions_json.empty()) {
    throw ValidationError("config-bad-partitions", "partitions must be a non-empty array");
  }
  std::shared_ptr<const SpectralDecomposition> spectrum;
  std::vector<ProjectivePartition> partitions;
  for (const auto& pj : partitions_json) {
    StrictObject p(pj, "partitions[]");
    const std::string type = p.require<std::string>("type");
    if (type == "position_gates") {
      partitions.push_back(ProjectivePartition::position_gates(
          grid, p.require<std::vector<double>>("breakpoints")));
    } else if (type == "energy_bands") {
      if (!spectrum) spectrum = std::make_shared<const SpectralDecomposition>(grid, params);
      partitions.push_back(ProjectivePartition::energy_bands(
          spectrum, p.require<std::vector<double>>("band_edges")));
    } else {
      throw ValidationError("config-bad-partitions",
                            "partition type must be position_gates or energy_bands");
    }
    p.finish();
  }

  HistorySpec spec{times, partitions,
                   ptype == "unitary"
                       ? HistoryPropagation(UnitaryStepper(grid, params, dt))
                       : HistoryPropagation(d_override
                                                ? MasterStepper::with_coefficient(grid, params, dt,
                                                                                  *d_override)
                                                : MasterStepper(grid, params, dt)),
                   initial};
  if (ptype != "unitary" && ptype != "open") {
    throw ValidationError("config-bad-propagation", "propagation type must be unitary or open");
  }
  spec.prune_threshold = o.get<double>("prune_threshold", spec.prune_threshold);
  spec.label_cap = o.get<std::uint64_t>("label_cap", spec.label_cap);
  const Json grouping_json = o.raw("grouping", Json::array());
  o.finish();

  const int threads = threads_from(overrides);
  const DecoherenceFunctional f = decoherence_functional(spec, threads);
  const ConsistencyResult consistency = consistency_detail(f);

  ScenarioReport report;
  report.scenario = "histories";
  report.add_metadata("version", kVersion);
  report.add_scalar("epsilon", consistency.epsilon);
  report.add_scalar("excluded_labels", consistency.excluded);
  report.add_scalar("pruned_count", f.pruned_count());
  report.add_scalar("pruned_weight", f.pruned_weight());
  report.add_scalar("total_sum_re", f.total_sum().real());
  report.add_scalar("total_sum_im", f.total_sum().imag());

  Curve entries{"functional", {"a", "b", "re", "im"}, {}};
  for (int a = 0; a < f.label_count(); ++a) {
    for (int b = 0; b < f.label_count(); ++b) {
      entries.rows.push_back({double(a), double(b), f.entries()(a, b).real(),
                              f.entries()(a, b).imag()});
    }
  }
  report.curves.push_back(std::move(entries));

  Curve labels{"labels", {"index"}, {}};
  for (std::size_t k = 0; k < times.size(); ++k) labels.columns.push_back("cell_" + std::to_string(k));
  labels.columns.push_back("probability");
  for (int i = 0; i < f.label_count(); ++i) {
    std::vector<double> row{double(i)};
    for (int c : f.labels()[i]) row.push_back(double(c));
    row.push_back(f.probability(i));
    labels.rows.push_back(std::move(row));
  }
  report.curves.push_back(std::move(labels));

  if (grouping_json.is_array() && !grouping_json.empty()) {
    std::vector<std::vector<int>> grouping;
    for (const auto& gj : grouping_json) {
      std::vector<int> group;
      for (const auto& lj : gj) {
        const int idx = f.find_label(lj.get<std::vector<int>>());
        if (idx >= 0) group.push_back(idx);
      }
      if (!group.empty()) grouping.push_back(std::move(group));
    }
    const AdditivityResult add = additivity_violation(f, grouping);
    report.add_scalar("additivity_violation", add.worst_violation);
    report.add_scalar("additivity_bound", add.bound);
  }
  return report;
}

ScenarioReport run_classical_command(const Json& config, const CliOverrides& overrides) {
  StrictObject o(config, "classical config");
  PhysicalParams params = parse_params(o.raw("params"));
  const std::string integrator = o.get<std::string>("integrator", "newton");
  const double x0 = o.require<double>("x0");
  const double p0 = o.require<double>("p0");
  const double t_final = o.require<double>("t_final");
  const double dt = o.get<double>("dt", 1e-3);
  const int stride = o.get<int>("output_stride", 1);

  ScenarioReport report;
  report.scenario = "classical";
  report.add_metadata("version", kVersion);

  std::vector<ClassicalState> traj;
  if (integrator == "newton") {
    o.consume("langevin");
    o.finish();
    traj = newton_trajectory(params, x0, p0, t_final, dt);
  } else if (integrator == "langevin") {
    LangevinParams lp;
    StrictObject lo(o.raw("langevin"), "langevin");
    lp.gamma = lo.get<double>("gamma", 0.0);
    lp.temperature = lo.get<double>("temperature", 0.0);
    lp.seed = lo.get<std::uint64_t>("seed", 0);
    lo.finish();
    o.finish();
    if (overrides.seed) lp.seed = *overrides.seed;
    report.add_metadata("seed", std::to_string(lp.seed));
    report.add_metadata("rng", langevin_rng_algorithm());
    traj = langevin_trajectory(params, lp, x0, p0, t_final, dt);
  } else {
    throw ValidationError("config-bad-integrator", "integrator must be newton or langevin");
  }

  Curve curve{"trajectory", {"t", "x", "p"}, {}};
  for (std::size_t i = 0; i < traj.size(); i += stride) {
    curve.rows.push_back({traj[i].t, traj[i].x, traj[i].p});
  }
  report.curves.push_back(std::move(curve));
  return report;
}

ScenarioReport run_sweep_command(const Json& config, const CliOverrides& overrides) {
  StrictObject o(config, "sweep config");
  const std::string id = o.require<std::string>("scenario");
  const std::string field = o.require<std::string>("field");
  const auto values = o.require<std::vector<double>>("values");
  Json base = o.raw("config");
  o.finish();
  if (values.empty()) throw ValidationError("config-bad-sweep", "sweep needs at least one value");

  ScenarioReport report;
  report.scenario = "sweep";
  report.add_metadata("version", kVersion);
  report.add_metadata("swept_scenario", id);
  report.add_metadata("swept_field", field);

  Curve summary{"sweep_summary", {"value", "all_passed"}, {}};
  for (double v : values) {
    Json point = base;
    try {
      point[Json::json_pointer(field)] = v;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("config-bad-sweep", std::string("bad field pointer: ") + e.what());
    }
    const ScenarioConfig cfg = parse_scenario_config(point, id, overrides);
    const ScenarioReport sub = run_scenario(cfg);
    summary.rows.push_back({v, sub.all_passed() ? 1.0 : 0.0});
    for (const auto& [name, value] : sub.scalars) {
      report.add_scalar(name + "@" + std::to_string(v), value);
    }
    for (const auto& check : sub.checks) {
      report.checks.push_back({check.name + "@" + std::to_string(v), check.value,
                               check.constraint, check.tolerance, check.pass});
    }
    for (const auto& warning : sub.warnings) {
      report.warnings.push_back(warning + " [value=" + std::to_string(v) + "]");
    }
  }
  report.curves.push_back(std::move(summary));
  return report;
}

// ---------------------------------------------------------------------------
// Output writing

namespace {

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc;
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

void require_written(const std::string& path) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec || size == 0) throw IoError("output-missing", "output file missing or empty: " + path);
}

}  // namespace

void write_curve_csv(const std::string& path, const Curve& curve) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("csv-unwritable", "cannot open for writing: " + path);
  for (std::size_t i = 0; i < curve.columns.size(); ++i) {
    std::fprintf(f, "%s%s", i ? "," : "", curve.columns[i].c_str());
  }
  std::fprintf(f, "\n");
  for (const auto& row : curve.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::fprintf(f, "%s%.17g", i ? "," : "", row[i]);
    }
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

void write_snapshot_binary(const std::string& path, const SpatialGrid& grid, const CMatrix& m) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError("snapshot-unwritable", "cannot open for writing: " + path);
  char header[32] = {};
  std::memcpy(header, "DHQC1\0", 6);
  const std::uint64_t n = static_cast<std::uint64_t>(grid.size());
  const double dx = grid.dx();
  const double x_min = grid.x_min();
  std::memcpy(header + 8, &n, 8);
  std::memcpy(header + 16, &dx, 8);
  std::memcpy(header + 24, &x_min, 8);
  std::fwrite(header, 1, 32, f);
  std::vector<double> row(2 * grid.size());
  for (int i = 0; i < grid.size(); ++i) {
    for (int j = 0; j < grid.size(); ++j) {
      row[2 * j] = m(i, j).real();
      row[2 * j + 1] = m(i, j).imag();
    }
    std::fwrite(row.data(), sizeof(double), row.size(), f);
  }
  std::fclose(f);
}

SnapshotData read_snapshot_binary(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("snapshot-unreadable", "cannot open: " + path);
  char header[32];
  if (std::fread(header, 1, 32, f) != 32 || std::memcmp(header, "DHQC1\0", 6) != 0) {
    std::fclose(f);
    throw IoError("snapshot-bad-header", "bad snapshot header in " + path);
  }
  SnapshotData out;
  std::memcpy(&out.n, header + 8, 8);
  std::memcpy(&out.dx, header + 16, 8);
  std::memcpy(&out.x_min, header + 24, 8);
  out.matrix.resize(out.n, out.n);
  std::vector<double> row(2 * out.n);
  for (std::uint64_t i = 0; i < out.n; ++i) {
    if (std::fread(row.data(), sizeof(double), row.size(), f) != row.size()) {
      std::fclose(f);
      throw IoError("snapshot-truncated", "snapshot truncated: " + path);
    }
    for (std::uint64_t j = 0; j < out.n; ++j) {
      out.matrix(i, j) = Complex(row[2 * j], row[2 * j + 1]);
    }
  }
  std::fclose(f);
  return out;
}

void write_snapshot_csv(const std::string& path, const SpatialGrid& grid, const CMatrix& m) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw IoError("snapshot-unwritable", "cannot open for writing: " + path);
  std::fprintf(f, "x,y,re,im\n");
  for (int i = 0; i < grid.size(); ++i) {
    for (int j = 0; j < grid.size(); ++j) {
      std::fprintf(f, "%.17g,%.17g,%.17g,%.17g\n", grid.x(i), grid.x(j), m(i, j).real(),
                   m(i, j).imag());
    }
  }
  std::fclose(f);
}

RunManifest write_outputs(const ScenarioReport& report, const OutputOptions& options) {
  std::error_code ec;
  fs::create_directories(options.dir, ec);
  if (ec) throw IoError("outdir-uncreatable", "cannot create output directory: " + options.dir);
  if (options.snapshot_format != "binary" && options.snapshot_format != "csv") {
    throw ValidationError("config-bad-snapshot-format", "snapshot format must be binary or csv");
  }

  RunManifest manifest;
  manifest.version = kVersion;
  manifest.timestamp = iso_timestamp();

  Json report_json;
  report_json["command"] = report.scenario;
  Json checks = Json::array();
  for (const auto& c : report.checks) {
    Json cj;
    cj["name"] = c.name;
    cj["value"] = c.value;
    cj["constraint"] = c.constraint;
    cj["tolerance"] = c.tolerance;
    cj["pass"] = c.pass;
    checks.push_back(cj);
    manifest.checks.emplace_back(c.name, c.pass);
  }
  report_json["checks"] = checks;
  Json scalars = Json::object();
  for (const auto& [name, value] : report.scalars) scalars[name] = value;
  report_json["scalars"] = scalars;
  Json metadata = Json::object();
  for (const auto& [key, value] : report.metadata) {
    if (key == "config_echo") {
      metadata[key] = Json::parse(value, nullptr, false);
    } else {
      metadata[key] = value;
    }
  }
  report_json["metadata"] = metadata;
  report_json["warnings"] = report.warnings;

  const std::string prefix = options.dir + "/" + report.scenario;
  Json curve_files = Json::object();
  for (const auto& curve : report.curves) {
    const std::string path = prefix + "_" + curve.name + ".csv";
    write_curve_csv(path, curve);
    curve_files[curve.name] = fs::path(path).filename().string();
    manifest.outputs.push_back(path);
  }
  report_json["curves"] = curve_files;

  Json snapshot_files = Json::object();
  for (const auto& snap : report.snapshots) {
    const bool binary = options.snapshot_format == "binary";
    const std::string path = prefix + "_" + snap.name + (binary ? ".bin" : ".csv");
    if (binary) {
      write_snapshot_binary(path, *snap.grid, snap.matrix);
    } else {
      write_snapshot_csv(path, *snap.grid, snap.matrix);
    }
    snapshot_files[snap.name] = fs::path(path).filename().string();
    manifest.outputs.push_back(path);
  }
  report_json["snapshots"] = snapshot_files;

  const std::string report_path = prefix + "_report.json";
  {
    std::ofstream out(report_path);
    if (!out) throw IoError("report-unwritable", "cannot write " + report_path);
    out << report_json.dump(2) << "\n";
  }
  manifest.outputs.push_back(report_path);

  for (const auto& path : manifest.outputs) require_written(path);

  manifest.ok = report.all_passed();
  for (const auto& [key, value] : report.metadata) {
    if (key == "config_hash") manifest.config_hash = value;
  }

  Json manifest_json;
  manifest_json["config_hash"] = manifest.config_hash;
  manifest_json["version"] = manifest.version;
  manifest_json["timestamp"] = manifest.timestamp;
  Json outs = Json::array();
  for (const auto& p : manifest.outputs) outs.push_back(fs::path(p).filename().string());
  manifest_json["outputs"] = outs;
  Json mchecks = Json::array();
  for (const auto& [name, pass] : manifest.checks) {
    Json cj;
    cj["name"] = name;
    cj["pass"] = pass;
    mchecks.push_back(cj);
  }
  manifest_json["checks"] = mchecks;
  manifest_json["status"] = manifest.ok ? "ok" : "failed";

  const std::string manifest_path = prefix + "_manifest.json";
  {
    std::ofstream out(manifest_path);
    if (!out) throw IoError("manifest-unwritable", "cannot write " + manifest_path);
    out << manifest_json.dump(2) << "\n";
  }
  require_written(manifest_path);
  return manifest;
}

}  // namespace dechist
