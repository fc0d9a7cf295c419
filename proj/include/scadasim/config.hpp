#pragma once

#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scadasim/attack.hpp"
#include "scadasim/grid.hpp"
#include "scadasim/ids.hpp"
#include "scadasim/netsim.hpp"
#include "scadasim/station.hpp"

// Scenario configuration: JSON files for grids, topologies, point maps, IDS
// rulesets and scenarios. load_scenario() inlines every referenced file into
// one resolved document; that document is embedded in each run report and
// can be re-run as-is, which is what makes runs reproducible from their own
// provenance.

namespace scadasim::config {

using Json = nlohmann::json;

class ValidationError : public std::runtime_error {
 public:
  ValidationError(const std::string& path, const std::string& reason)
      : std::runtime_error(path + ": " + reason), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// ---------------------------------------------------------------------------
// JSON access helpers carrying a field path for error messages
// ---------------------------------------------------------------------------

inline const Json& require(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(path + "." + key, "required field is missing");
  return j.at(key);
}

inline double num(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = require(j, key, path);
  if (!v.is_number()) throw ValidationError(path + "." + key, "expected a number");
  return v.get<double>();
}

inline double num_or(const Json& j, const std::string& key, double fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<double>();
}

inline std::string str(const Json& j, const std::string& key, const std::string& path) {
  const Json& v = require(j, key, path);
  if (!v.is_string()) throw ValidationError(path + "." + key, "expected a string");
  return v.get<std::string>();
}

inline std::string str_or(const Json& j, const std::string& key, const std::string& fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<std::string>();
}

inline bool bool_or(const Json& j, const std::string& key, bool fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return j.at(key).get<bool>();
}

inline Json load_json_file(const std::string& file, const std::string& path) {
  std::ifstream in(file);
  if (!in) throw ValidationError(path, "cannot open file: " + file);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError(path, "invalid JSON in " + file + ": " + e.what());
  }
  return j;
}

// ---------------------------------------------------------------------------
// Grid file
// ---------------------------------------------------------------------------

inline grid::GridModel parse_grid(const Json& j, const std::string& path = "grid") {
  grid::GridModel m;
  for (const auto& bj : require(j, "buses", path)) {
    grid::Bus b;
    b.id = str(bj, "id", path + ".buses[]");
    b.is_slack = bool_or(bj, "slack", false);
    m.buses.push_back(b);
  }
  for (const auto& bj : require(j, "branches", path)) {
    grid::Branch b;
    const std::string p = path + ".branches[]";
    b.id = str(bj, "id", p);
    b.from_bus = str(bj, "from", p);
    b.to_bus = str(bj, "to", p);
    b.reactance = num(bj, "reactance", p);
    b.limit_mw = num(bj, "limit_mw", p);
    b.breaker_closed = bool_or(bj, "closed", true);
    m.branches.push_back(b);
  }
  for (const auto& gj : require(j, "generators", path)) {
    grid::Generator g;
    const std::string p = path + ".generators[]";
    g.id = str(gj, "id", p);
    g.bus = str(gj, "bus", p);
    g.setpoint_mw = num_or(gj, "setpoint_mw", 0.0);
    g.output_mw = num_or(gj, "output_mw", g.setpoint_mw);
    g.max_mw = num(gj, "max_mw", p);
    g.ramp_mw_per_s = num_or(gj, "ramp_mw_per_s", 10.0);
    g.in_service = bool_or(gj, "in_service", true);
    m.generators.push_back(g);
  }
  for (const auto& lj : require(j, "loads", path)) {
    grid::Load l;
    const std::string p = path + ".loads[]";
    l.id = str(lj, "id", p);
    l.bus = str(lj, "bus", p);
    l.demand_mw = num(lj, "demand_mw", p);
    l.in_service = bool_or(lj, "in_service", true);
    m.loads.push_back(l);
  }
  try {
    m.validate();
  } catch (const std::exception& e) {
    throw ValidationError(path, e.what());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Topology file (fixed substation LAN -- WAN -- control-center LAN shape)
// ---------------------------------------------------------------------------

struct TopologySpec {
  net::LinkSpec sub_lan, ucc_lan, wan;
  std::string sub_router_lan_ip, sub_router_wan_ip;
  std::string ucc_router_lan_ip, ucc_router_wan_ip;
  std::string adversary_ip;
  std::string master_ip_base, outstation_ip_base;
  std::uint16_t dnp3_port = 20000;
};

inline net::LinkSpec parse_link(const Json& j, const std::string& path) {
  net::LinkSpec spec;
  spec.bandwidth_bps = num_or(j, "bandwidth_bps", 10e6);
  spec.propagation_s = num_or(j, "propagation_s", 160e-6);
  spec.queue_capacity = static_cast<int>(num_or(j, "queue_capacity", 64));
  if (spec.bandwidth_bps <= 0) throw ValidationError(path + ".bandwidth_bps", "must be > 0");
  if (spec.queue_capacity < 1) throw ValidationError(path + ".queue_capacity", "must be >= 1");
  if (spec.propagation_s < 0) throw ValidationError(path + ".propagation_s", "must be >= 0");
  return spec;
}

inline TopologySpec parse_topology(const Json& j, const std::string& path = "topology") {
  TopologySpec t;
  t.sub_lan = parse_link(require(j, "sub_lan", path), path + ".sub_lan");
  t.ucc_lan = parse_link(require(j, "ucc_lan", path), path + ".ucc_lan");
  t.wan = parse_link(require(j, "wan", path), path + ".wan");
  t.sub_router_lan_ip = str_or(j, "sub_router_lan_ip", "172.16.1.1");
  t.sub_router_wan_ip = str_or(j, "sub_router_wan_ip", "172.16.2.1");
  t.ucc_router_lan_ip = str_or(j, "ucc_router_lan_ip", "172.16.0.4");
  t.ucc_router_wan_ip = str_or(j, "ucc_router_wan_ip", "172.16.2.2");
  t.adversary_ip = str_or(j, "adversary_ip", "172.16.1.66");
  t.master_ip_base = str_or(j, "master_ip_base", "172.16.0.100");
  t.outstation_ip_base = str_or(j, "outstation_ip_base", "172.16.1.100");
  t.dnp3_port = static_cast<std::uint16_t>(num_or(j, "dnp3_port", 20000));
  for (const auto* ip : {&t.sub_router_lan_ip, &t.sub_router_wan_ip, &t.ucc_router_lan_ip,
                         &t.ucc_router_wan_ip, &t.adversary_ip, &t.master_ip_base,
                         &t.outstation_ip_base}) {
    try {
      net::parse_ip(*ip);
    } catch (const std::exception& e) {
      throw ValidationError(path, e.what());
    }
  }
  return t;
}

// ---------------------------------------------------------------------------
// Point maps: one named block per outstation, rows of [kind, index, device]
// ---------------------------------------------------------------------------

struct OutstationMap {
  std::string name;
  station::PointMap map;
};

inline station::DeviceKind device_kind_from(const std::string& s, const std::string& path) {
  using station::DeviceKind;
  if (s == "branch_status") return DeviceKind::BranchStatus;
  if (s == "gen_status") return DeviceKind::GenStatus;
  if (s == "load_status") return DeviceKind::LoadStatus;
  if (s == "gen_output") return DeviceKind::GenOutput;
  if (s == "branch_flow") return DeviceKind::BranchFlow;
  if (s == "branch_breaker") return DeviceKind::BranchBreaker;
  if (s == "load_breaker") return DeviceKind::LoadBreaker;
  if (s == "gen_setpoint") return DeviceKind::GenSetpoint;
  throw ValidationError(path, "unknown point kind: " + s);
}

inline std::vector<OutstationMap> parse_pointmaps(const Json& j, const grid::GridModel& model,
                                                  const std::string& path = "pointmap") {
  std::vector<OutstationMap> out;
  for (const auto& oj : require(j, "outstations", path)) {
    OutstationMap om;
    om.name = str(oj, "name", path + ".outstations[]");
    const std::string p = path + "." + om.name;
    for (const auto& row : require(oj, "points", p)) {
      if (!row.is_array() || row.size() != 3) throw ValidationError(p + ".points[]", "expected [kind, index, device]");
      station::PointEntry e;
      e.kind = device_kind_from(row[0].get<std::string>(), p);
      e.index = static_cast<std::uint16_t>(row[1].get<int>());
      e.device = row[2].get<std::string>();
      om.map.entries.push_back(e);
    }
    try {
      om.map.validate(model);
    } catch (const std::exception& e) {
      throw ValidationError(p, e.what());
    }
    out.push_back(std::move(om));
  }
  if (out.empty()) throw ValidationError(path + ".outstations", "at least one outstation required");
  return out;
}

// ---------------------------------------------------------------------------
// Ruleset
// ---------------------------------------------------------------------------

inline std::vector<ids::Rule> parse_ruleset(const Json& j, const std::string& path = "ruleset") {
  std::vector<ids::Rule> rules;
  for (const auto& rj : require(j, "rules", path)) {
    ids::Rule r;
    const std::string p = path + ".rules[]";
    r.id = str(rj, "id", p);
    std::string kind = str(rj, "kind", p);
    if (kind == "icmp_rate")
      r.kind = ids::RuleKind::IcmpRate;
    else if (kind == "arp_binding_change")
      r.kind = ids::RuleKind::ArpBindingChange;
    else if (kind == "dnp3_function")
      r.kind = ids::RuleKind::Dnp3Function;
    else if (kind == "dnp3_crc_mismatch")
      r.kind = ids::RuleKind::Dnp3CrcMismatch;
    else
      throw ValidationError(p + ".kind", "unknown rule kind: " + kind);
    r.window_s = num_or(rj, "window_s", 1.0);
    r.threshold = static_cast<int>(num_or(rj, "threshold", 50));
    if (rj.contains("functions")) {
      r.functions.clear();
      for (const auto& f : rj.at("functions")) {
        std::string name = f.get<std::string>();
        bool known = false;
        for (auto fc : {dnp3::FunctionCode::Confirm, dnp3::FunctionCode::Read,
                        dnp3::FunctionCode::Read2, dnp3::FunctionCode::Select,
                        dnp3::FunctionCode::Operate, dnp3::FunctionCode::DirectOperate,
                        dnp3::FunctionCode::SolicitedResponse,
                        dnp3::FunctionCode::UnsolicitedResponse})
          if (name == dnp3::to_string(fc)) {
            r.functions.insert(fc);
            known = true;
          }
        if (!known) throw ValidationError(p + ".functions[]", "unknown function code: " + name);
      }
    }
    try {
      r.validate();
    } catch (const std::exception& e) {
      throw ValidationError(p, e.what());
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

enum class ScenarioKind { Baseline, UC1, UC2, UC3, UC4, DosPayloadSweep, DosIntervalSweep };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::Baseline: return "BASELINE";
    case ScenarioKind::UC1: return "UC1";
    case ScenarioKind::UC2: return "UC2";
    case ScenarioKind::UC3: return "UC3";
    case ScenarioKind::UC4: return "UC4";
    case ScenarioKind::DosPayloadSweep: return "DOS_PAYLOAD_SWEEP";
    case ScenarioKind::DosIntervalSweep: return "DOS_INTERVAL_SWEEP";
  }
  return "?";
}

inline ScenarioKind scenario_kind_from(const std::string& s, const std::string& path) {
  if (s == "BASELINE") return ScenarioKind::Baseline;
  if (s == "UC1") return ScenarioKind::UC1;
  if (s == "UC2") return ScenarioKind::UC2;
  if (s == "UC3") return ScenarioKind::UC3;
  if (s == "UC4") return ScenarioKind::UC4;
  if (s == "DOS_PAYLOAD_SWEEP") return ScenarioKind::DosPayloadSweep;
  if (s == "DOS_INTERVAL_SWEEP") return ScenarioKind::DosIntervalSweep;
  throw ValidationError(path, "unknown scenario kind: " + s);
}

struct MasterSpec {
  int count = 1;
  double poll_interval_s = 30.0;
  station::Master::CommandMode mode = station::Master::CommandMode::DirectOperate;
  double stagger_s = 0.5;
  double response_timeout_s = 15.0;
};

struct AutomationSpec {
  bool enabled = false;
  double gen_low_threshold_mw = 100.0;
  double gen_restore_setpoint_mw = 1000.0;
  bool flow_limit_action = false;
  double eval_interval_s = 120.0;
};

struct ScheduleEntry {
  enum class Cmd { CloseBranch, TripBranch, Setpoint, SetpointNominal };
  Cmd cmd = Cmd::CloseBranch;
  double at_s = 0.0;
  double repeat_s = 0.0;  // 0 = one-shot
  std::vector<std::string> devices;
  double value_mw = 0.0;  // Setpoint only
};

struct AttackSpec {
  bool enabled = false;
  attack::UseCase use_case = attack::UseCase::UC1;
  double start_s = 200.0;
  double stop_s = 0.0;  // 0 = run to end
  std::optional<double> p, q, r;
  double fci_processing_s = 0.120;
  double fdi_processing_s = 0.170;
  double sniff_processing_s = 0.005;
  bool recompute_crc = true;
  int ingress_capacity = 6;
  int uc4_bo_after_masks = 1;
  std::vector<std::string> target_breakers;
  std::vector<std::string> target_generators;
  std::vector<std::string> target_flows;
  double ao_value_mw = 0.0;
  double rr_gen_value_mw = 20.0;
  double rr_flow_value_mw = 3000.0;
};

struct DosSpec {
  bool enabled = false;
  std::string target = "sub";  // sub | ucc
  std::size_t payload_bytes = 1000;
  double interval_s = 1.0;
  double start_s = 30.0;
  double duration_s = 0.0;  // 0 = until scenario end
};

struct Scenario {
  std::string id;
  ScenarioKind kind = ScenarioKind::Baseline;
  std::uint64_t seed = 0;
  double duration_s = 600.0;       // paper-scale seconds
  double time_compression = 10.0;  // virtual = paper / compression
  double grid_step_s = 10.0;       // paper-scale
  double metrics_window_s = 10.0;  // paper-scale
  grid::GridModel grid;
  TopologySpec topology;
  std::vector<OutstationMap> pointmaps;  // one per outstation == master count
  std::vector<ids::Rule> ruleset;
  MasterSpec masters;
  AutomationSpec automation;
  std::vector<ScheduleEntry> schedule;
  AttackSpec attack;
  DosSpec dos;
  std::vector<std::string> monitored_branches;
  Json resolved;  // the canonical, fully inlined configuration

  double virtual_duration() const { return duration_s / time_compression; }
};

namespace detail {

inline void check_devices_exist(const std::vector<std::string>& devices, const grid::GridModel& m,
                                bool branches, const std::string& path) {
  for (const auto& d : devices) {
    try {
      if (branches)
        m.branch(d);
      else
        m.generator(d);
    } catch (const std::exception&) {
      throw ValidationError(path, "unknown device: " + d);
    }
  }
}

inline MasterSpec parse_masters(const Json& j, const std::string& path) {
  MasterSpec m;
  m.count = static_cast<int>(num_or(j, "count", 1));
  if (m.count < 1) throw ValidationError(path + ".count", "must be >= 1");
  m.poll_interval_s = num_or(j, "poll_interval_s", 30.0);
  if (m.poll_interval_s <= 0) throw ValidationError(path + ".poll_interval_s", "must be > 0");
  std::string mode = str_or(j, "command_mode", "DirectOperate");
  if (mode == "DirectOperate")
    m.mode = station::Master::CommandMode::DirectOperate;
  else if (mode == "SelectOperate")
    m.mode = station::Master::CommandMode::SelectOperate;
  else
    throw ValidationError(path + ".command_mode", "expected DirectOperate or SelectOperate");
  m.stagger_s = num_or(j, "stagger_s", 0.5);
  m.response_timeout_s = num_or(j, "response_timeout_s", 15.0);
  return m;
}

inline AutomationSpec parse_automation(const Json& j, const std::string& path) {
  AutomationSpec a;
  a.enabled = bool_or(j, "enabled", false);
  a.gen_low_threshold_mw = num_or(j, "gen_low_threshold_mw", 100.0);
  a.gen_restore_setpoint_mw = num_or(j, "gen_restore_setpoint_mw", 1000.0);
  a.flow_limit_action = bool_or(j, "flow_limit_action", false);
  a.eval_interval_s = num_or(j, "eval_interval_s", 120.0);
  if (a.gen_low_threshold_mw <= 0) throw ValidationError(path + ".gen_low_threshold_mw", "must be > 0");
  if (a.gen_restore_setpoint_mw <= 0)
    throw ValidationError(path + ".gen_restore_setpoint_mw", "must be > 0");
  if (a.eval_interval_s <= 0) throw ValidationError(path + ".eval_interval_s", "must be > 0");
  return a;
}

inline std::vector<ScheduleEntry> parse_schedule(const Json& j, const grid::GridModel& m,
                                                 const std::string& path) {
  std::vector<ScheduleEntry> out;
  for (const auto& ej : j) {
    ScheduleEntry e;
    const std::string p = path + "[]";
    std::string cmd = str(ej, "command", p);
    if (cmd == "close_branch")
      e.cmd = ScheduleEntry::Cmd::CloseBranch;
    else if (cmd == "trip_branch")
      e.cmd = ScheduleEntry::Cmd::TripBranch;
    else if (cmd == "set_setpoint")
      e.cmd = ScheduleEntry::Cmd::Setpoint;
    else if (cmd == "set_setpoints_nominal")
      e.cmd = ScheduleEntry::Cmd::SetpointNominal;
    else
      throw ValidationError(p + ".command", "unknown schedule command: " + cmd);
    e.at_s = num_or(ej, "at_s", 0.0);
    e.repeat_s = num_or(ej, "repeat_s", 0.0);
    for (const auto& d : require(ej, "devices", p)) e.devices.push_back(d.get<std::string>());
    e.value_mw = num_or(ej, "value_mw", 0.0);
    bool branches = e.cmd == ScheduleEntry::Cmd::CloseBranch || e.cmd == ScheduleEntry::Cmd::TripBranch;
    check_devices_exist(e.devices, m, branches, p + ".devices");
    out.push_back(std::move(e));
  }
  return out;
}

inline AttackSpec parse_attack(const Json& j, ScenarioKind kind, const grid::GridModel& m,
                               const std::string& path) {
  AttackSpec a;
  a.enabled = true;
  std::string uc = str(j, "use_case", path);
  auto parsed = attack::use_case_from(uc);
  if (!parsed) throw ValidationError(path + ".use_case", "expected UC1..UC4, got " + uc);
  a.use_case = *parsed;
  a.start_s = num_or(j, "start_s", 200.0);
  a.stop_s = num_or(j, "stop_s", 0.0);
  if (j.contains("p")) a.p = j.at("p").get<double>();
  if (j.contains("q")) a.q = j.at("q").get<double>();
  if (j.contains("r")) a.r = j.at("r").get<double>();

  // per-use-case probability requirements
  auto need = [&](const std::optional<double>& v, const char* name) {
    if (!v)
      throw ValidationError(path + "." + name,
                            std::string(to_string(a.use_case)) + " requires the " + name +
                                " mutation probability");
    if (*v < 0.0 || *v > 1.0) throw ValidationError(path + "." + name, "must be in [0,1]");
  };
  need(a.p, "p");
  if (a.use_case != attack::UseCase::UC1) need(a.q, "q");
  if (a.use_case == attack::UseCase::UC3 || a.use_case == attack::UseCase::UC4) need(a.r, "r");

  a.fci_processing_s = num_or(j, "fci_processing_ms", 120.0) / 1000.0;
  a.fdi_processing_s = num_or(j, "fdi_processing_ms", 170.0) / 1000.0;
  a.sniff_processing_s = num_or(j, "sniff_processing_ms", 5.0) / 1000.0;
  if (a.fdi_processing_s < a.fci_processing_s)
    throw ValidationError(path + ".fdi_processing_ms", "must be >= fci_processing_ms");
  a.recompute_crc = bool_or(j, "recompute_crc", true);
  a.ingress_capacity = static_cast<int>(num_or(j, "ingress_capacity", 6));
  a.uc4_bo_after_masks = static_cast<int>(num_or(j, "uc4_bo_after_masks", 1));

  const Json& t = require(j, "targets", path);
  if (t.contains("breakers"))
    for (const auto& d : t.at("breakers")) a.target_breakers.push_back(d.get<std::string>());
  if (t.contains("generators"))
    for (const auto& d : t.at("generators")) a.target_generators.push_back(d.get<std::string>());
  if (t.contains("flows"))
    for (const auto& d : t.at("flows")) a.target_flows.push_back(d.get<std::string>());
  check_devices_exist(a.target_breakers, m, true, path + ".targets.breakers");
  check_devices_exist(a.target_generators, m, false, path + ".targets.generators");
  check_devices_exist(a.target_flows, m, true, path + ".targets.flows");
  a.ao_value_mw = num_or(j, "ao_value_mw", 0.0);
  a.rr_gen_value_mw = num_or(j, "rr_gen_value_mw", 20.0);
  a.rr_flow_value_mw = num_or(j, "rr_flow_value_mw", 3000.0);
  (void)kind;
  return a;
}

inline DosSpec parse_dos(const Json& j, const std::string& path) {
  DosSpec d;
  d.enabled = true;
  d.target = str_or(j, "target", "sub");
  if (d.target != "sub" && d.target != "ucc")
    throw ValidationError(path + ".target", "expected sub or ucc");
  d.payload_bytes = static_cast<std::size_t>(num_or(j, "payload_bytes", 1000));
  if (d.payload_bytes < 1) throw ValidationError(path + ".payload_bytes", "must be >= 1");
  d.interval_s = num_or(j, "interval_ms", 1000.0) / 1000.0;
  if (d.interval_s <= 0) throw ValidationError(path + ".interval_ms", "must be > 0");
  d.start_s = num_or(j, "start_s", 30.0);
  d.duration_s = num_or(j, "duration_s", 0.0);
  return d;
}

}  // namespace detail

// Parse a fully resolved scenario document (grid/topology/pointmap/ruleset
// inlined). This is the single source of truth: file-based loading builds
// this document first and then parses it.
inline Scenario parse_resolved(const Json& j) {
  Scenario sc;
  sc.id = str(j, "id", "scenario");
  sc.kind = scenario_kind_from(str(j, "kind", "scenario"), "scenario.kind");
  if (!j.contains("seed")) throw ValidationError("scenario.seed", "required field is missing");
  sc.seed = j.at("seed").get<std::uint64_t>();
  sc.duration_s = num(j, "duration_s", "scenario");
  if (sc.duration_s <= 0) throw ValidationError("scenario.duration_s", "must be > 0");
  sc.time_compression = num_or(j, "time_compression", 10.0);
  if (sc.time_compression <= 0) throw ValidationError("scenario.time_compression", "must be > 0");
  sc.grid_step_s = num_or(j, "grid_step_s", 10.0);
  sc.metrics_window_s = num_or(j, "metrics_window_s", 10.0);
  if (sc.grid_step_s <= 0) throw ValidationError("scenario.grid_step_s", "must be > 0");
  if (sc.metrics_window_s <= 0) throw ValidationError("scenario.metrics_window_s", "must be > 0");

  sc.grid = parse_grid(require(j, "grid", "scenario"), "scenario.grid");
  sc.topology = parse_topology(require(j, "topology", "scenario"), "scenario.topology");
  sc.pointmaps = parse_pointmaps(require(j, "pointmap", "scenario"), sc.grid, "scenario.pointmap");
  sc.ruleset = parse_ruleset(require(j, "ruleset", "scenario"), "scenario.ruleset");
  sc.masters = detail::parse_masters(j.contains("masters") ? j.at("masters") : Json::object(),
                                     "scenario.masters");
  if (static_cast<int>(sc.pointmaps.size()) != sc.masters.count)
    throw ValidationError("scenario.pointmap",
                          "outstation count (" + std::to_string(sc.pointmaps.size()) +
                              ") must equal masters.count (" + std::to_string(sc.masters.count) + ")");
  sc.automation = detail::parse_automation(
      j.contains("automation") ? j.at("automation") : Json::object(), "scenario.automation");
  if (j.contains("schedule"))
    sc.schedule = detail::parse_schedule(j.at("schedule"), sc.grid, "scenario.schedule");
  bool is_uc = sc.kind == ScenarioKind::UC1 || sc.kind == ScenarioKind::UC2 ||
               sc.kind == ScenarioKind::UC3 || sc.kind == ScenarioKind::UC4;
  if (is_uc && !j.contains("attack"))
    throw ValidationError("scenario.attack", "use-case scenarios require an attack block");
  if (j.contains("attack"))
    sc.attack = detail::parse_attack(j.at("attack"), sc.kind, sc.grid, "scenario.attack");
  if (j.contains("dos")) sc.dos = detail::parse_dos(j.at("dos"), "scenario.dos");
  bool is_dos = sc.kind == ScenarioKind::DosPayloadSweep || sc.kind == ScenarioKind::DosIntervalSweep;
  if (is_dos && !sc.dos.enabled)
    throw ValidationError("scenario.dos", "DoS sweep scenarios require a dos block");
  if (j.contains("monitored_branches"))
    for (const auto& b : j.at("monitored_branches")) {
      sc.monitored_branches.push_back(b.get<std::string>());
      try {
        sc.grid.branch(sc.monitored_branches.back());
      } catch (const std::exception&) {
        throw ValidationError("scenario.monitored_branches", "unknown branch: " + sc.monitored_branches.back());
      }
    }
  sc.resolved = j;
  sc.resolved["resolved"] = true;
  return sc;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> duration_s;
  std::optional<int> masters;
  std::optional<double> poll_interval_s;
};

// Load a scenario file, inlining referenced grid/topology/pointmap/ruleset
// files. Already-resolved documents (reports embed them) load directly.
inline Scenario load_scenario(const std::string& file, const Overrides& ov = {}) {
  Json j = load_json_file(file, "scenario");
  if (bool_or(j, "resolved", false)) {
    if (ov.seed) j["seed"] = *ov.seed;
    if (ov.duration_s) j["duration_s"] = *ov.duration_s;
    return parse_resolved(j);
  }

  Json resolved = j;
  if (ov.seed) resolved["seed"] = *ov.seed;
  if (ov.duration_s) resolved["duration_s"] = *ov.duration_s;
  if (ov.masters) {
    if (!resolved.contains("masters")) resolved["masters"] = Json::object();
    resolved["masters"]["count"] = *ov.masters;
  }
  if (ov.poll_interval_s) {
    if (!resolved.contains("masters")) resolved["masters"] = Json::object();
    resolved["masters"]["poll_interval_s"] = *ov.poll_interval_s;
  }

  resolved["grid"] = load_json_file(str(j, "grid", "scenario"), "scenario.grid");
  resolved["topology"] = load_json_file(str(j, "topology", "scenario"), "scenario.topology");
  resolved["ruleset"] = load_json_file(str(j, "ruleset", "scenario"), "scenario.ruleset");

  // pointmaps are provided per master count: {"1": file, "5": file, ...}
  const Json& pm = require(j, "pointmaps", "scenario");
  int count = 1;
  if (resolved.contains("masters") && resolved.at("masters").contains("count"))
    count = resolved.at("masters").at("count").get<int>();
  std::string key = std::to_string(count);
  if (!pm.contains(key))
    throw ValidationError("scenario.pointmaps." + key,
                          "no point map provided for " + key + " masters");
  resolved["pointmap"] = load_json_file(pm.at(key).get<std::string>(), "scenario.pointmap");
  resolved.erase("pointmaps");
  return parse_resolved(resolved);
}

}  // namespace scadasim::config
