#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "geomflow/blowup_analysis.hpp"
#include "geomflow/error.hpp"
#include "geomflow/flow_fields.hpp"
#include "geomflow/milnor_geometry.hpp"
#include "geomflow/ode_engine.hpp"
#include "geomflow/projective_reduction.hpp"
#include "geomflow/separatrix_classify.hpp"
#include "portrait.hpp"

namespace geomflow::cli {

using nlohmann::json;

namespace {

struct RunConfig {
  std::string command;
  std::string flow = "ricci";
  std::string direction = "backward";
  std::string metric;
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_min = 1e-16;
  double t_end = 1e3;
  std::string out;
  std::string format;
  std::string config;
  std::int64_t stride = 1;
  std::string grid;
  double b_max = 1e3;
  double delta = 1e-8;
  double box = 20.0;
  double near_s0_radius = 0.0;
  bool no_fit = false;
  unsigned threads = 0;
};

std::string num(double v) { return fmt::format("{:.17g}", v); }

json num_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

Flow parse_flow(const std::string& s) {
  if (s == "ricci") return Flow::RicciNormalized;
  if (s == "xcf") return Flow::CrossCurvature;
  throw ValidationError("--flow must be 'ricci' or 'xcf', got '" + s + "'");
}

Direction parse_direction(const std::string& s) {
  if (s == "forward") return Direction::Forward;
  if (s == "backward") return Direction::Backward;
  throw ValidationError("--direction must be 'forward' or 'backward', got '" + s + "'");
}

MetricDiag parse_metric(const std::string& s) {
  if (s.empty()) throw ValidationError("--metric A,B,C is required");
  std::array<double, 3> v{};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    const auto next = s.find(',', pos);
    if ((i < 2) != (next != std::string::npos)) throw ValidationError("--metric expects three comma-separated values");
    const std::string part = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    std::size_t used = 0;
    try {
      v[i] = std::stod(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != part.size()) throw ValidationError("--metric: cannot parse '" + part + "'");
    pos = next + 1;
  }
  return MetricDiag(v[0], v[1], v[2]);
}

std::string default_format(const std::string& command) {
  if (command == "integrate" || command == "portrait" || command == "separatrix") return "csv";
  return "json";
}

void validate(RunConfig& cfg) {
  parse_flow(cfg.flow);
  parse_direction(cfg.direction);
  if (cfg.format.empty()) cfg.format = default_format(cfg.command);
  if (cfg.format != "csv" && cfg.format != "json") throw ValidationError("--format must be 'csv' or 'json'");
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(cfg.rtol) || !positive(cfg.atol)) throw ValidationError("tolerances must be positive");
  if (!positive(cfg.h_min)) throw ValidationError("--h-min must be positive");
  if (!positive(cfg.t_end)) throw ValidationError("--t-end must be positive");
  if (cfg.stride < 1) throw ValidationError("--stride must be at least 1");
  if (!positive(cfg.b_max) || cfg.b_max <= 1.0) throw ValidationError("--b-max must exceed 1");
  if (!positive(cfg.delta) || cfg.delta >= 0.1) throw ValidationError("--delta must lie in (0, 0.1)");
  if (!positive(cfg.box)) throw ValidationError("--box must be positive");
  if (!(cfg.near_s0_radius >= 0.0) || !std::isfinite(cfg.near_s0_radius))
    throw ValidationError("--near-s0-radius must be non-negative");
  if (cfg.command == "curvature" || cfg.command == "integrate" || cfg.command == "classify" ||
      cfg.command == "exponents")
    parse_metric(cfg.metric);
  if (!cfg.grid.empty()) (void)parse_grid(cfg.grid);
}

ode::IntegratorConfig integrator(const RunConfig& cfg) {
  ode::IntegratorConfig ic;
  ic.rtol = cfg.rtol;
  ic.atol = cfg.atol;
  ic.h_min = cfg.h_min;
  return ic;
}

// ---------------------------------------------------------------------------

int cmd_curvature(const RunConfig& cfg, std::ostream& os) {
  const auto rep = curvature_report(parse_metric(cfg.metric));
  const std::vector<std::pair<std::string, double>> fields{
      {"k1", rep.k[0]},     {"k2", rep.k[1]},     {"k3", rep.k[2]},     {"F1", rep.f[0]},     {"F2", rep.f[1]},
      {"F3", rep.f[2]},     {"ric1", rep.ricci[0]}, {"ric2", rep.ricci[1]}, {"ric3", rep.ricci[2]}, {"h1", rep.cross[0]},
      {"h2", rep.cross[1]}, {"h3", rep.cross[2]}, {"scalar", rep.scalar}};
  if (cfg.format == "json") {
    json j = json::object();
    for (const auto& [k, v] : fields) j[k] = num_json(v);
    os << j.dump(2) << '\n';
  } else {
    std::string head, row;
    for (const auto& [k, v] : fields) {
      head += (head.empty() ? "" : ",") + k;
      row += (row.empty() ? "" : ",") + num(v);
    }
    os << head << '\n' << row << '\n';
  }
  return kExitOk;
}

void write_trajectory(const ode::Trajectory<3>& tr, const RunConfig& cfg, std::ostream& os,
                      const std::string& trailer) {
  if (cfg.format == "json") {
    json j;
    j["flow"] = cfg.flow;
    j["direction"] = cfg.direction;
    std::vector<double> t, a, b, c;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      t.push_back(tr.times[i]);
      a.push_back(tr.states[i][0]);
      b.push_back(tr.states[i][1]);
      c.push_back(tr.states[i][2]);
    }
    j["t"] = t;
    j["A"] = a;
    j["B"] = b;
    j["C"] = c;
    j["termination"] = trailer;
    os << j.dump() << '\n';
    return;
  }
  os << "t,A,B,C\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const auto& y = tr.states[i];
    os << num(tr.times[i]) << ',' << num(y[0]) << ',' << num(y[1]) << ',' << num(y[2]) << '\n';
  }
  os << "# termination=" << trailer << '\n';
}

int cmd_integrate(const RunConfig& cfg, std::ostream& os) {
  const FlowSpec spec{parse_flow(cfg.flow), parse_direction(cfg.direction)};
  const MetricDiag m0 = parse_metric(cfg.metric);
  auto ic = integrator(cfg);
  ic.dense = false;
  ic.record_stride = cfg.stride;
  try {
    const auto tr = integrate_flow(spec, m0, cfg.t_end, ic);
    spdlog::info("integrate: {} steps, termination {}", tr.path.steps_accepted, ode::to_string(tr.path.termination));
    write_trajectory(tr.path, cfg, os, std::string(ode::to_string(tr.path.termination)));
  } catch (const ode::IntegrationError<3>& e) {
    write_trajectory(e.partial(), cfg, os, "error");
    os.flush();
    throw;
  }
  return kExitOk;
}

json fit_json(const PowerLawFit& f) {
  json j;
  j["Tb"] = num_json(f.Tb);
  j["exponents"] = f.exponents;
  j["half_widths"] = f.half_widths;
  j["etas"] = f.etas;
  j["tau_min"] = num_json(f.tau_min);
  j["tau_max"] = num_json(f.tau_max);
  j["samples"] = f.samples;
  return j;
}

int cmd_classify(const RunConfig& cfg, std::ostream& os) {
  const Flow flow = parse_flow(cfg.flow);
  ClassifyOptions opt;
  opt.integrator = integrator(cfg);
  opt.fit = !cfg.no_fit;
  opt.stop_on_trigger = cfg.no_fit;
  opt.near_s0_radius = cfg.near_s0_radius;
  const auto rep = classify(flow, parse_metric(cfg.metric), opt);
  if (cfg.format == "json") {
    json j;
    j["flow"] = cfg.flow;
    j["metric"] = rep.initial.as_array();
    j["swapped"] = rep.swapped;
    j["case"] = std::string(to_string(rep.case_label));
    if (rep.trigger) {
      j["trigger"] = {{"side", std::string(to_string(rep.trigger->side))},
                      {"time", rep.trigger->time},
                      {"state", rep.trigger->state},
                      {"at_start", rep.trigger->at_start}};
    } else {
      j["trigger"] = nullptr;
    }
    j["termination"] = std::string(ode::to_string(rep.termination));
    j["t_end"] = num_json(rep.t_end);
    j["Tb_estimate"] = num_json(rep.Tb_estimate);
    j["min_saddle_distance"] = num_json(rep.min_saddle_distance);
    j["separatrix_distance"] = num_json(rep.separatrix_distance);
    j["fit"] = rep.fit ? fit_json(*rep.fit) : json(nullptr);
    os << j.dump(2) << '\n';
  } else {
    os << "flow,case,swapped,trigger_time,termination,Tb_estimate,p1,p2,p3,eta1,eta2,eta3\n";
    os << cfg.flow << ',' << to_string(rep.case_label) << ',' << (rep.swapped ? 1 : 0) << ','
       << (rep.trigger ? num(rep.trigger->time) : std::string("nan")) << ',' << ode::to_string(rep.termination)
       << ',' << num(rep.Tb_estimate);
    for (int i = 0; i < 3; ++i) os << ',' << (rep.fit ? num(rep.fit->exponents[i]) : std::string("nan"));
    for (int i = 0; i < 3; ++i) os << ',' << (rep.fit ? num(rep.fit->etas[i]) : std::string("nan"));
    os << '\n';
  }
  return kExitOk;
}

int cmd_exponents(const RunConfig& cfg, std::ostream& os) {
  const FlowSpec spec{parse_flow(cfg.flow), Direction::Backward};
  auto ic = integrator(cfg);
  const auto tr = integrate_flow(spec, parse_metric(cfg.metric), cfg.t_end, ic);
  if (!ode::is_blowup(tr.path.termination))
    throw NumericalError("exponents: no blow-up before t_end (termination " +
                         std::string(ode::to_string(tr.path.termination)) + ")");
  const auto fit = fit_asymptotics(tr.path);
  if (cfg.format == "json") {
    json j = fit_json(fit);
    j["flow"] = cfg.flow;
    j["termination"] = std::string(ode::to_string(tr.path.termination));
    os << j.dump(2) << '\n';
  } else {
    os << "component,exponent,half_width,eta\n";
    const char* names[] = {"A", "B", "C"};
    for (int i = 0; i < 3; ++i)
      os << names[i] << ',' << num(fit.exponents[i]) << ',' << num(fit.half_widths[i]) << ',' << num(fit.etas[i])
         << '\n';
    os << "# Tb=" << num(fit.Tb) << '\n';
  }
  return kExitOk;
}

int cmd_separatrix(const RunConfig& cfg, std::ostream& os) {
  const Flow flow = parse_flow(cfg.flow);
  SeparatrixOptions so;
  so.b_max = cfg.b_max;
  so.delta = cfg.delta;
  const auto sep = trace_separatrix(flow, so);
  const bool ricci = flow == Flow::RicciNormalized;
  if (cfg.format == "json") {
    json j;
    j["flow"] = cfg.flow;
    j["chart"] = std::string(to_string(sep.chart));
    j["tangent_at_saddle"] = sep.tangent_at_saddle;
    j["param_min"] = sep.param_min;
    j["param_max"] = sep.param_max;
    j["seed_shift"] = num_json(sep.seed_shift);
    std::vector<double> x, y;
    for (const auto& p : sep.samples) {
      x.push_back(p.x);
      y.push_back(p.y);
    }
    j[ricci ? "b" : "a"] = x;
    j["c"] = y;
    os << j.dump() << '\n';
  } else {
    os << (ricci ? "b,c\n" : "a,c\n");
    for (const auto& p : sep.samples) os << num(p.x) << ',' << num(p.y) << '\n';
  }
  return kExitOk;
}

int cmd_portrait(const RunConfig& cfg, std::ostream& os) {
  const Chart chart = chart_for(parse_flow(cfg.flow));
  const GridSpec grid = cfg.grid.empty() ? default_grid(chart) : parse_grid(cfg.grid);
  PortraitOptions po;
  po.box = cfg.box;
  po.threads = cfg.threads;
  const auto lines = compute_portrait(chart, grid, po);
  if (cfg.format == "json") {
    json arr = json::array();
    for (const auto& l : lines) {
      std::vector<double> x, y;
      for (const auto& p : l.points) {
        x.push_back(p[0]);
        y.push_back(p[1]);
      }
      arr.push_back({{"line_id", l.id}, {"end", std::string(to_string(l.forward_end))}, {"x", x}, {"y", y}});
    }
    os << json{{"flow", cfg.flow}, {"lines", arr}}.dump() << '\n';
  } else {
    os << "line_id,x,y\n";
    for (const auto& l : lines)
      for (const auto& p : l.points) os << l.id << ',' << num(p[0]) << ',' << num(p[1]) << '\n';
  }
  return kExitOk;
}

int cmd_blowup_report(const RunConfig& cfg, std::ostream& os) {
  const auto eqs = blowup::circle_equilibria();
  const std::vector<std::pair<double, double>> seeds{{0.5, 0.1}, {0.2, 0.05}, {0.8, 0.3}, {0.9, 0.01},
                                                     {0.0, 0.1}, {0.3, 0.0}};
  std::vector<blowup::AxisCheckReport> checks;
  for (const auto& [th, r] : seeds) checks.push_back(blowup::axis_nonapproach_check(th, r));
  const double ts = blowup::gamma0_saddle_angle();
  const auto sd = blowup::stable_direction(ts);

  if (cfg.format == "json") {
    json j;
    json arr = json::array();
    for (const auto& e : eqs)
      arr.push_back({{"theta", e.theta},
                     {"cos2", e.cos2},
                     {"radial_rate", e.radial_rate},
                     {"angular_rate", e.angular_rate},
                     {"kind", std::string(blowup::to_string(e.kind))},
                     {"physical", e.physical}});
    j["equilibria"] = arr;
    j["gamma0_saddle"] = {{"theta", ts}, {"stable_direction", sd}};
    json ax = json::array();
    for (const auto& c : checks)
      ax.push_back({{"theta0", c.start.theta},
                    {"r0", c.start.r},
                    {"confirmed", c.confirmed},
                    {"summary", c.confirmed ? "non-approach confirmed" : "not confirmed"},
                    {"dtheta_negative", c.dtheta_negative},
                    {"above_y_orbit", c.above_y_orbit},
                    {"min_radius", c.min_radius},
                    {"final_theta", c.final_theta},
                    {"final_r", c.final_r},
                    {"note", std::string(c.note)}});
    j["axis_checks"] = ax;
    os << j.dump(2) << '\n';
  } else {
    os << "theta,cos2,radial_rate,angular_rate,kind,physical\n";
    for (const auto& e : eqs)
      os << num(e.theta) << ',' << num(e.cos2) << ',' << num(e.radial_rate) << ',' << num(e.angular_rate) << ','
         << blowup::to_string(e.kind) << ',' << (e.physical ? 1 : 0) << '\n';
    os << "# axis checks\n";
    os << "theta0,r0,confirmed,dtheta_negative,above_y_orbit,min_radius,final_theta,final_r\n";
    for (const auto& c : checks)
      os << num(c.start.theta) << ',' << num(c.start.r) << ',' << (c.confirmed ? 1 : 0) << ','
         << (c.dtheta_negative ? 1 : 0) << ',' << (c.above_y_orbit ? 1 : 0) << ',' << num(c.min_radius) << ','
         << num(c.final_theta) << ',' << num(c.final_r) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

/// Fills options that were not given on the command line from the JSON config.
void apply_config(const json& j, const std::map<std::string, std::pair<CLI::Option*, std::function<void(const json&)>>>& keys) {
  if (!j.is_object()) throw ValidationError("--config: top level must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto it = keys.find(key);
    if (it == keys.end()) throw ValidationError("--config: unknown key '" + key + "'");
    if (it->second.first->count() > 0) continue;
    try {
      it->second.second(value);
    } catch (const json::exception&) {
      throw ValidationError("--config: bad value for '" + key + "'");
    }
  }
}

}  // namespace

void configure_logging() {
  auto logger = spdlog::stderr_logger_mt("geomflow");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* lvl = std::getenv("GEOMFLOW_LOG")) {
    const std::string s(lvl);
    if (s == "error") spdlog::set_level(spdlog::level::err);
    else if (s == "warn") spdlog::set_level(spdlog::level::warn);
    else if (s == "info") spdlog::set_level(spdlog::level::info);
    else if (s == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("GEOMFLOW_LOG='{}' not recognised; using warn", s);
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  CLI::App app{"Ricci and cross curvature flows on SL(2,R): integration, phase planes, blow-up analysis"};
  app.name("geomflow");
  app.require_subcommand(1);
  app.fallthrough();

  std::map<std::string, std::pair<CLI::Option*, std::function<void(const json&)>>> keys;
  auto add_str = [&](const std::string& name, std::string& target, const std::string& help) {
    auto* o = app.add_option("--" + name, target, help);
    keys[name] = {o, [&target](const json& v) { target = v.get<std::string>(); }};
  };
  auto add_num = [&](const std::string& name, double& target, const std::string& help) {
    auto* o = app.add_option("--" + name, target, help);
    keys[name] = {o, [&target](const json& v) { target = v.get<double>(); }};
  };
  add_str("flow", cfg.flow, "ricci | xcf");
  add_str("direction", cfg.direction, "forward | backward");
  add_str("metric", cfg.metric, "A,B,C");
  add_num("rtol", cfg.rtol, "relative tolerance");
  add_num("atol", cfg.atol, "absolute tolerance");
  add_num("h-min", cfg.h_min, "smallest step; lower it for runs that blow up within ~1e-6");
  add_num("t-end", cfg.t_end, "integration horizon");
  add_str("out", cfg.out, "output file (default stdout)");
  add_str("format", cfg.format, "csv | json");
  add_str("grid", cfg.grid, "portrait grid x0:x1:nx,y0:y1:ny");
  add_num("b-max", cfg.b_max, "Ricci separatrix: largest b");
  add_num("delta", cfg.delta, "separatrix seed offset");
  add_num("box", cfg.box, "portrait: clip lines to [0, box]");
  add_num("near-s0-radius", cfg.near_s0_radius, "classify: saddle distance that marks numerical departure");
  {
    auto* o = app.add_option("--stride", cfg.stride, "integrate: keep every k-th step");
    keys["stride"] = {o, [&cfg](const json& v) { cfg.stride = v.get<std::int64_t>(); }};
    auto* f = app.add_flag("--no-fit", cfg.no_fit, "classify: stop at the trigger, no exponent fit");
    keys["no-fit"] = {f, [&cfg](const json& v) { cfg.no_fit = v.get<bool>(); }};
    auto* t = app.add_option("--threads", cfg.threads, "portrait worker threads (0 = all cores)");
    keys["threads"] = {t, [&cfg](const json& v) { cfg.threads = v.get<unsigned>(); }};
  }
  app.add_option("--config", cfg.config, "JSON file with option values; command-line flags win");

  const std::vector<std::pair<std::string, std::string>> commands{
      {"curvature", "curvature report of a metric"},
      {"integrate", "integrate a 3D flow and write the trajectory"},
      {"classify", "classify an initial metric into the blow-up cases"},
      {"separatrix", "trace the separatrix of the planar system"},
      {"portrait", "flow-line diagram of the planar system"},
      {"blowup-report", "circle equilibria of the blow-up and axis checks"},
      {"exponents", "fit blow-up exponents of a backward run"}};
  for (const auto& [name, help] : commands) app.add_subcommand(name, help);

  std::vector<const char*> argv{"geomflow"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    cfg.command = app.get_subcommands().front()->get_name();
    if (!cfg.config.empty()) {
      std::ifstream in(cfg.config);
      if (!in) throw ValidationError("--config: cannot open " + cfg.config);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ValidationError(std::string("--config: ") + e.what());
      }
      apply_config(j, keys);
    }
    validate(cfg);

    std::ofstream file;
    std::ostream* os = &out;
    if (!cfg.out.empty()) {
      file.open(cfg.out, std::ios::out | std::ios::trunc);
      if (!file) throw ValidationError("--out: cannot open " + cfg.out);
      os = &file;
    }
    spdlog::debug("command {} flow {} direction {}", cfg.command, cfg.flow, cfg.direction);
    const std::map<std::string, std::function<int(const RunConfig&, std::ostream&)>> dispatch{
        {"curvature", cmd_curvature}, {"integrate", cmd_integrate},   {"classify", cmd_classify},
        {"separatrix", cmd_separatrix}, {"portrait", cmd_portrait}, {"blowup-report", cmd_blowup_report},
        {"exponents", cmd_exponents}};
    const int code = dispatch.at(cfg.command)(cfg, *os);
    os->flush();
    return code;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace geomflow::cli
