#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "scadasim/attack.hpp"
#include "scadasim/config.hpp"
#include "scadasim/grid.hpp"
#include "scadasim/ids.hpp"
#include "scadasim/netsim.hpp"
#include "scadasim/station.hpp"

// Scenario execution: builds the co-simulation (grid + network + endpoints +
// adversary + IDS) from a resolved scenario, runs it to its virtual
// duration, and assembles the run report plus JSON-lines event log, CSV
// metrics and CSV alerts. Identical resolved configs and seeds reproduce all
// three byte-for-byte.
//
// Time scaling: configured wall-clock quantities (polls, schedules, attack
// windows, durations) are divided by the scenario's time_compression to give
// virtual seconds. Sub-second protocol constants (retransmission timeout,
// adversary processing delays) are virtual-native and are not scaled.

namespace scadasim::harness {

using Json = nlohmann::json;

struct WindowRow {
  double t0 = 0.0, t1 = 0.0;
  double rtt_mean_s = 0.0;
  int rtt_count = 0;
  double throughput_bps = 0.0;
  double goodput_bps = 0.0;
  double payload_bytes = 0.0;
  int retransmissions = 0;
  int flows = 0;
  int drops = 0;
  double gen_total_mw = 0.0;
  double max_loading_pct = 0.0;
  int overload_count = 0;
  std::map<std::string, double> monitored_flows;
};

struct MutationSummary {
  attack::ClassCounters bo, ao, rr;
  long fci_attempts = 0, fci_successes = 0;
  long fdi_attempts = 0, fdi_successes = 0;
  long misses = 0;
  double miss_rate = 0.0;
  double lambda_pps = 0.0;
  double mu_pps = 0.0;
  double rho = 0.0;
};

struct RunReport {
  std::string scenario_id;
  std::string kind;
  std::uint64_t seed = 0;
  double time_compression = 1.0;
  double virtual_duration_s = 0.0;

  std::optional<double> time_to_overload_s;  // virtual
  std::vector<std::string> overloaded_branches;
  std::vector<std::string> final_overloads;

  std::vector<WindowRow> windows;
  double rtt_mean_s = 0.0;
  double rtt_max_s = 0.0;
  int rtt_count = 0;
  double throughput_mean_bps = 0.0;
  double goodput_mean_bps = 0.0;
  int retransmissions = 0;
  int link_drops = 0;
  int flows_total = 0;
  int reconnects = 0;

  bool attack_enabled = false;
  MutationSummary mutations;
  std::optional<double> expected_attempts;

  std::map<std::string, int> alert_counts;
  std::map<std::pair<std::string, long>, int> alert_histogram;
  double alert_bucket_s = 60.0;

  int commands_executed = 0;
  int poll_responses = 0;
  Json master_stats = Json::array();
  Json resolved_config;

  Json to_json() const;
};

// ---------------------------------------------------------------------------
// ScenarioRun
// ---------------------------------------------------------------------------

class ScenarioRun {
 public:
  explicit ScenarioRun(const config::Scenario& sc) : sc_(sc), sim_(sc.seed) { build(); }

  net::Sim& sim() { return sim_; }
  grid::GridModel& model() { return model_; }
  grid::GridState& state() { return state_; }
  station::Master& master(int i) { return *masters_.at(i); }
  station::Outstation& outstation(int i) { return *outstations_.at(i); }
  attack::MitmProxy* proxy() { return proxy_.get(); }
  ids::Engine& intrusion_detection() { return *ids_; }
  int master_count() const { return static_cast<int>(masters_.size()); }
  double compression() const { return sc_.time_compression; }

  RunReport run() {
    sim_.advance(sc_.virtual_duration());
    return assemble();
  }

  const std::vector<ids::AlertRecord>& alerts() const { return ids_->alerts(); }
  const std::vector<std::string>& events() const { return sim_.log_lines(); }

 private:
  double virt(double paper_seconds) const { return paper_seconds / sc_.time_compression; }

  void build() {
    const config::TopologySpec& topo = sc_.topology;
    sim_.dnp3_port = topo.dnp3_port;

    auto sub_lan = sim_.add_segment("sub_lan", topo.sub_lan);
    auto ucc_lan = sim_.add_segment("ucc_lan", topo.ucc_lan);
    auto wan = sim_.add_segment("wan", topo.wan);

    sub_router_ = sim_.add_node("sub_router", true);
    ucc_router_ = sim_.add_node("ucc_router", true);
    adversary_ = sim_.add_node("adversary");

    sim_.attach(sub_router_, sub_lan, topo.sub_router_lan_ip + "/24");
    sim_.attach(sub_router_, wan, topo.sub_router_wan_ip + "/24");
    sim_.attach(ucc_router_, ucc_lan, topo.ucc_router_lan_ip + "/24");
    sim_.attach(ucc_router_, wan, topo.ucc_router_wan_ip + "/24");
    sim_.attach(adversary_, sub_lan, topo.adversary_ip + "/24");
    sim_.set_default_route(adversary_, net::parse_ip(topo.sub_router_lan_ip));

    net::Ip sub_net = net::parse_ip(topo.sub_router_lan_ip) & 0xFFFFFF00u;
    net::Ip ucc_net = net::parse_ip(topo.ucc_router_lan_ip) & 0xFFFFFF00u;
    sim_.add_route(sub_router_, net::format_ip(ucc_net) + "/24", net::parse_ip(topo.ucc_router_wan_ip));
    sim_.add_route(ucc_router_, net::format_ip(sub_net) + "/24", net::parse_ip(topo.sub_router_wan_ip));

    model_ = sc_.grid;
    state_ = grid::dc_power_flow(model_);
    for (const auto& g : model_.generators) nominal_setpoints_[g.id] = g.setpoint_mw;

    // one master/outstation pair per point-map block
    for (int i = 0; i < sc_.masters.count; ++i) {
      net::Ip os_ip = net::parse_ip(sc_.topology.outstation_ip_base) + static_cast<net::Ip>(i);
      net::Ip ms_ip = net::parse_ip(sc_.topology.master_ip_base) + static_cast<net::Ip>(i);
      net::NodeId os_node = sim_.add_node("outstation" + std::to_string(i + 1));
      net::NodeId ms_node = sim_.add_node("master" + std::to_string(i + 1));
      sim_.attach(os_node, sub_lan, net::format_ip(os_ip) + "/24");
      sim_.attach(ms_node, ucc_lan, net::format_ip(ms_ip) + "/24");
      sim_.set_default_route(os_node, net::parse_ip(topo.sub_router_lan_ip));
      sim_.set_default_route(ms_node, net::parse_ip(topo.ucc_router_lan_ip));
      outstation_ips_.push_back(os_ip);

      station::Outstation::Config ocfg;
      ocfg.name = sc_.pointmaps[i].name;
      ocfg.dnp3_address = static_cast<std::uint16_t>(1024 + i);
      ocfg.port = topo.dnp3_port;
      outstations_.push_back(std::make_unique<station::Outstation>(
          sim_, os_node, ocfg, sc_.pointmaps[i].map, grid_port()));
      outstations_.back()->start();

      station::Master::Config mcfg;
      mcfg.name = "master" + std::to_string(i + 1);
      mcfg.dnp3_address = static_cast<std::uint16_t>(1 + i);
      mcfg.outstation_address = ocfg.dnp3_address;
      mcfg.outstation_ip = os_ip;
      mcfg.port = topo.dnp3_port;
      mcfg.poll_interval_s = virt(sc_.masters.poll_interval_s);
      mcfg.start_offset_s = virt(sc_.masters.stagger_s) * i;
      mcfg.response_timeout_s = virt(sc_.masters.response_timeout_s);
      mcfg.mode = sc_.masters.mode;
      masters_.push_back(std::make_unique<station::Master>(sim_, ms_node, mcfg, sc_.pointmaps[i].map));

      if (sc_.automation.enabled) {
        station::AutomationPolicy pol;
        pol.enabled = true;
        pol.gen_low_threshold_mw = sc_.automation.gen_low_threshold_mw;
        pol.gen_restore_setpoint_mw = sc_.automation.gen_restore_setpoint_mw;
        pol.flow_limit_action = sc_.automation.flow_limit_action;
        pol.eval_interval_s = virt(sc_.automation.eval_interval_s);
        for (const auto& e : sc_.pointmaps[i].map.group(dnp3::GroupKind::AnalogInput))
          if (e.kind == station::DeviceKind::BranchFlow)
            pol.flow_limits[e.index] = model_.branch(e.device).limit_mw;
        masters_.back()->set_automation(pol);
      }
      masters_.back()->start();
    }

    index_output_points();
    for (const auto& entry : sc_.schedule) schedule_entry(entry);

    if (sc_.attack.enabled) build_attack();
    if (sc_.dos.enabled) build_dos();

    ids_ = std::make_unique<ids::Engine>(sim_, sc_.ruleset);
    ids_->attach(sub_router_);
    ids_->attach(ucc_router_);

    // recurring grid step, then metric windows (same-instant ties resolve in
    // this insertion order)
    schedule_grid_step();
    schedule_metrics_window();
  }

  station::GridPort grid_port() {
    station::GridPort p;
    p.read_binary = [this](const station::PointEntry& e) {
      switch (e.kind) {
        case station::DeviceKind::BranchStatus: return model_.branch(e.device).breaker_closed;
        case station::DeviceKind::GenStatus: return model_.generator(e.device).in_service;
        case station::DeviceKind::LoadStatus: return model_.load(e.device).in_service;
        default: return false;
      }
    };
    p.read_analog = [this](const station::PointEntry& e) {
      if (e.kind == station::DeviceKind::GenOutput) {
        auto it = state_.outputs.find(e.device);
        return it == state_.outputs.end() ? 0.0 : it->second;
      }
      auto it = state_.flows.find(e.device);
      return it == state_.flows.end() ? 0.0 : it->second;
    };
    p.apply = [this](const grid::ControlAction& a) {
      try {
        grid::apply_control(model_, a);
      } catch (const grid::UnknownDevice&) {
        return false;
      }
      return true;  // takes effect at the next grid step's solve
    };
    return p;
  }

  void index_output_points() {
    for (std::size_t i = 0; i < sc_.pointmaps.size(); ++i) {
      for (const auto& e : sc_.pointmaps[i].map.entries) {
        if (e.kind == station::DeviceKind::BranchBreaker)
          breaker_owner_[e.device] = {static_cast<int>(i), e.index};
        if (e.kind == station::DeviceKind::GenSetpoint)
          setpoint_owner_[e.device] = {static_cast<int>(i), e.index};
      }
    }
  }

  void schedule_entry(const config::ScheduleEntry& entry) {
    auto fire = [this, entry] {
      for (const auto& device : entry.devices) {
        switch (entry.cmd) {
          case config::ScheduleEntry::Cmd::CloseBranch:
          case config::ScheduleEntry::Cmd::TripBranch: {
            auto it = breaker_owner_.find(device);
            if (it == breaker_owner_.end()) continue;
            masters_[it->second.first]->operate_binary(
                it->second.second, entry.cmd == config::ScheduleEntry::Cmd::CloseBranch
                                       ? dnp3::ControlCode::Close
                                       : dnp3::ControlCode::Trip);
            break;
          }
          case config::ScheduleEntry::Cmd::Setpoint:
          case config::ScheduleEntry::Cmd::SetpointNominal: {
            auto it = setpoint_owner_.find(device);
            if (it == setpoint_owner_.end()) continue;
            double value = entry.cmd == config::ScheduleEntry::Cmd::Setpoint
                               ? entry.value_mw
                               : nominal_setpoints_.at(device);
            masters_[it->second.first]->operate_analog(it->second.second, value);
            break;
          }
        }
      }
    };
    double first = virt(entry.at_s);
    if (entry.repeat_s > 0) {
      double period = virt(entry.repeat_s);
      schedule_recurring(first, period, fire);
    } else {
      sim_.at(first, fire);
    }
  }

  void schedule_recurring(double first, double period, std::function<void()> fn) {
    auto holder = std::make_shared<std::function<void()>>();
    *holder = [this, period, fn = std::move(fn), holder]() {
      fn();
      sim_.after(period, *holder);
    };
    sim_.at(first, *holder);
  }

  void build_attack() {
    const config::AttackSpec& a = sc_.attack;
    attack::AttackPolicy pol;
    pol.use_case = a.use_case;
    pol.p = a.p.value_or(0.8);
    pol.q = a.q.value_or(0.8);
    pol.r = a.r.value_or(0.6);
    pol.fci_processing_s = a.fci_processing_s;
    pol.fdi_processing_s = a.fdi_processing_s;
    pol.sniff_processing_s = a.sniff_processing_s;
    pol.recompute_crc = a.recompute_crc;
    pol.ingress_capacity = a.ingress_capacity;
    pol.uc4_bo_after_masks = a.uc4_bo_after_masks;

    for (std::size_t i = 0; i < sc_.pointmaps.size(); ++i) {
      attack::OutstationTargets t;
      const station::PointMap& map = sc_.pointmaps[i].map;
      for (const auto& e : map.entries) {
        for (const auto& d : a.target_breakers)
          if (e.device == d && e.kind == station::DeviceKind::BranchBreaker)
            t.bo_indices.insert(e.index);
        for (const auto& d : a.target_generators) {
          if (e.device == d && e.kind == station::DeviceKind::GenSetpoint)
            t.ao_values[e.index] = a.ao_value_mw;
          if (e.device == d && e.kind == station::DeviceKind::GenOutput)
            t.rr_gen_values[e.index] = a.rr_gen_value_mw;
        }
        for (const auto& d : a.target_flows)
          if (e.device == d && e.kind == station::DeviceKind::BranchFlow)
            t.rr_flow_values[e.index] = a.rr_flow_value_mw;
      }
      for (const auto& d : a.target_generators) {
        const station::PointEntry* ao = nullptr;
        const station::PointEntry* ai = nullptr;
        for (const auto& e : map.entries) {
          if (e.device != d) continue;
          if (e.kind == station::DeviceKind::GenSetpoint) ao = &e;
          if (e.kind == station::DeviceKind::GenOutput) ai = &e;
        }
        if (ao && ai) t.mask_ai_by_ao[ao->index] = ai->index;
      }
      if (!t.bo_indices.empty() || !t.ao_values.empty() || !t.rr_gen_values.empty() ||
          !t.rr_flow_values.empty())
        pol.targets[outstation_ips_[i]] = std::move(t);
    }

    proxy_ = std::make_unique<attack::MitmProxy>(sim_, adversary_,
                                                 net::parse_ip(sc_.topology.sub_router_lan_ip),
                                                 outstation_ips_, pol);
    proxy_->engage(virt(a.start_s));
    if (a.stop_s > 0) proxy_->disengage(virt(a.stop_s));
  }

  void build_dos() {
    const config::DosSpec& d = sc_.dos;
    attack::DosParams params;
    params.target = net::parse_ip(d.target == "ucc" ? sc_.topology.ucc_router_lan_ip
                                                    : sc_.topology.sub_router_lan_ip);
    params.payload_bytes = d.payload_bytes;
    params.interval_s = virt(d.interval_s);
    params.start_s = virt(d.start_s);
    double duration = d.duration_s > 0 ? d.duration_s : sc_.duration_s - d.start_s;
    params.duration_s = virt(duration);
    attack::dos_run(sim_, adversary_, params);
    dos_window_ = {params.start_s, params.start_s + params.duration_s};
  }

  void schedule_grid_step() {
    double period = virt(sc_.grid_step_s);
    schedule_recurring(period, period, [this] {
      state_ = grid::step(model_, sc_.grid_step_s);
      for (auto& os : outstations_) os->grid_stepped();
      auto overloads = grid::overload_report(model_, state_);
      if (!overloads.empty() && !time_to_overload_) {
        time_to_overload_ = sim_.now();
        for (const auto& o : overloads) first_overloads_.push_back(o.branch);
        Json branches = Json::array();
        for (const auto& o : overloads) branches.push_back(o.branch);
        sim_.log({{"t", sim_.now()}, {"type", "overload"}, {"branches", branches}});
      }
      last_overloads_.clear();
      for (const auto& o : overloads) last_overloads_.push_back(o.branch);
    });
  }

  void schedule_metrics_window() {
    double period = virt(sc_.metrics_window_s);
    schedule_recurring(period, period, [this, period] {
      WindowRow row;
      row.t1 = sim_.now();
      row.t0 = row.t1 - period;
      auto wm = sim_.measure(row.t0, row.t1);
      row.rtt_count = static_cast<int>(wm.rtt_s.size());
      row.rtt_mean_s = wm.rtt_s.empty() ? 0.0
                                        : std::accumulate(wm.rtt_s.begin(), wm.rtt_s.end(), 0.0) /
                                              static_cast<double>(wm.rtt_s.size());
      row.throughput_bps = wm.dnp3.throughput_bps;
      row.goodput_bps = wm.dnp3.goodput_bps;
      row.payload_bytes = wm.dnp3.total_payload_bytes;
      row.retransmissions = wm.retransmissions;
      row.flows = wm.flow_count;
      row.drops = wm.link_drops;
      for (const auto& [gid, mw] : state_.outputs) row.gen_total_mw += mw;
      for (const auto& br : model_.branches) {
        auto it = state_.flows.find(br.id);
        if (it == state_.flows.end()) continue;
        row.max_loading_pct = std::max(row.max_loading_pct, 100.0 * std::abs(it->second) / br.limit_mw);
        if (std::abs(it->second) > br.limit_mw) ++row.overload_count;
      }
      for (const auto& b : sc_.monitored_branches) {
        auto it = state_.flows.find(b);
        row.monitored_flows[b] = it == state_.flows.end() ? 0.0 : it->second;
      }
      windows_.push_back(std::move(row));
    });
  }

  RunReport assemble() {
    RunReport rep;
    rep.scenario_id = sc_.id;
    rep.kind = config::to_string(sc_.kind);
    rep.seed = sc_.seed;
    rep.time_compression = sc_.time_compression;
    rep.virtual_duration_s = sc_.virtual_duration();
    rep.time_to_overload_s = time_to_overload_;
    rep.overloaded_branches = first_overloads_;
    rep.final_overloads = last_overloads_;
    rep.windows = windows_;

    double rtt_sum = 0.0;
    for (const auto& s : sim_.rtt_samples()) {
      if (!s.dnp3) continue;
      ++rep.rtt_count;
      rtt_sum += s.rtt;
      rep.rtt_max_s = std::max(rep.rtt_max_s, s.rtt);
    }
    rep.rtt_mean_s = rep.rtt_count ? rtt_sum / rep.rtt_count : 0.0;

    double tp_sum = 0.0, gp_sum = 0.0;
    for (const auto& w : windows_) {
      tp_sum += w.throughput_bps;
      gp_sum += w.goodput_bps;
      rep.retransmissions += w.retransmissions;
      rep.link_drops += w.drops;
    }
    rep.throughput_mean_bps = windows_.empty() ? 0.0 : tp_sum / windows_.size();
    rep.goodput_mean_bps = windows_.empty() ? 0.0 : gp_sum / windows_.size();
    rep.flows_total = sim_.total_flows_seen();
    rep.reconnects = std::max(0, rep.flows_total - sc_.masters.count);

    rep.attack_enabled = sc_.attack.enabled;
    if (proxy_) {
      const attack::ProxyStats& st = proxy_->stats();
      rep.mutations.bo = st.bo;
      rep.mutations.ao = st.ao;
      rep.mutations.rr = st.rr;
      rep.mutations.fci_attempts = st.fci_attempts();
      rep.mutations.fci_successes = st.fci_successes();
      rep.mutations.fdi_attempts = st.fdi_attempts();
      rep.mutations.fdi_successes = st.fdi_successes();
      rep.mutations.misses = st.misses();
      long applicable = st.fci_attempts() + st.fdi_attempts() + st.bo.overflow_drop +
                        st.ao.overflow_drop + st.rr.overflow_drop;
      rep.mutations.miss_rate =
          applicable > 0 ? static_cast<double>(rep.mutations.misses) / static_cast<double>(applicable)
                         : 0.0;
      rep.mutations.lambda_pps = st.measured_lambda();
      double offered_service = st.bo.arrivals * sc_.attack.fci_processing_s +
                               st.ao.arrivals * sc_.attack.fci_processing_s +
                               st.rr.arrivals * sc_.attack.fdi_processing_s +
                               st.other.arrivals * sc_.attack.sniff_processing_s;
      rep.mutations.mu_pps =
          offered_service > 0 ? static_cast<double>(st.dnp3_arrivals) / offered_service : 0.0;
      rep.mutations.rho = rep.mutations.mu_pps > 0
                              ? attack::traffic_intensity(rep.mutations.lambda_pps, rep.mutations.mu_pps)
                              : 0.0;
      int m = static_cast<int>(sc_.attack.target_breakers.size());
      int n = static_cast<int>(sc_.attack.target_generators.size());
      try {
        rep.expected_attempts = attack::expected_steps(sc_.attack.use_case, m, n, 1,
                                                       sc_.attack.p.value_or(0.8),
                                                       sc_.attack.q.value_or(0.8),
                                                       sc_.attack.r.value_or(0.6));
      } catch (const attack::ZeroProbability&) {
        rep.expected_attempts.reset();
      }
    }

    for (const auto& a : ids_->alerts()) rep.alert_counts[ids::to_string(a.kind)]++;
    rep.alert_bucket_s = 60.0 / sc_.time_compression;
    rep.alert_histogram = ids::alert_histogram(ids_->alerts(), rep.alert_bucket_s);

    for (const auto& os : outstations_) rep.commands_executed += os->stats().commands_executed;
    for (const auto& ms : masters_) {
      rep.poll_responses += ms->stats().responses;
      const auto& st = ms->stats();
      rep.master_stats.push_back(Json{{"name", ms->config().name},
                                      {"polls_sent", st.polls_sent},
                                      {"polls_skipped", st.polls_skipped},
                                      {"responses", st.responses},
                                      {"poll_timeouts", st.poll_timeouts},
                                      {"commands_sent", st.commands_sent},
                                      {"command_successes", st.command_successes},
                                      {"command_failures", st.command_failures},
                                      {"automation_commands", st.automation_commands}});
    }
    rep.resolved_config = sc_.resolved;
    return rep;
  }

  config::Scenario sc_;
  net::Sim sim_;
  grid::GridModel model_;
  grid::GridState state_;
  std::map<std::string, double> nominal_setpoints_;
  net::NodeId sub_router_ = -1, ucc_router_ = -1, adversary_ = -1;
  std::vector<std::unique_ptr<station::Outstation>> outstations_;
  std::vector<std::unique_ptr<station::Master>> masters_;
  std::vector<net::Ip> outstation_ips_;
  std::map<std::string, std::pair<int, std::uint16_t>> breaker_owner_;
  std::map<std::string, std::pair<int, std::uint16_t>> setpoint_owner_;
  std::unique_ptr<attack::MitmProxy> proxy_;
  std::unique_ptr<ids::Engine> ids_;
  std::optional<double> time_to_overload_;
  std::vector<std::string> first_overloads_;
  std::vector<std::string> last_overloads_;
  std::vector<WindowRow> windows_;
  std::pair<double, double> dos_window_{0.0, 0.0};

 public:
  std::pair<double, double> dos_window() const { return dos_window_; }
};

// ---------------------------------------------------------------------------
// Report serialization and output files
// ---------------------------------------------------------------------------

inline Json counters_json(const attack::ClassCounters& c) {
  return Json{{"arrivals", c.arrivals},         {"attempted", c.attempted},
              {"succeeded", c.succeeded},       {"bernoulli_miss", c.bernoulli_miss},
              {"overflow_drop", c.overflow_drop}, {"cached_drop", c.cached_drop},
              {"forwarded_clean", c.forwarded_clean}};
}

inline Json RunReport::to_json() const {
  Json j;
  j["scenario"] = scenario_id;
  j["kind"] = kind;
  j["seed"] = seed;
  j["time_compression"] = time_compression;
  j["virtual_duration_s"] = virtual_duration_s;
  if (time_to_overload_s) {
    j["time_to_overload_s"] = *time_to_overload_s;
    j["time_to_overload_unscaled_s"] = *time_to_overload_s * time_compression;
  } else {
    j["time_to_overload_s"] = nullptr;
    j["time_to_overload_unscaled_s"] = nullptr;
  }
  j["overloaded_branches"] = overloaded_branches;
  j["final_overloads"] = final_overloads;
  j["rtt_mean_s"] = rtt_mean_s;
  j["rtt_max_s"] = rtt_max_s;
  j["rtt_count"] = rtt_count;
  j["throughput_mean_Bps"] = throughput_mean_bps;
  j["goodput_mean_Bps"] = goodput_mean_bps;
  j["retransmissions"] = retransmissions;
  j["link_drops"] = link_drops;
  j["flows_total"] = flows_total;
  j["reconnects"] = reconnects;
  j["commands_executed"] = commands_executed;
  j["poll_responses"] = poll_responses;
  j["master_stats"] = master_stats;
  if (attack_enabled) {
    Json m;
    m["bo"] = counters_json(mutations.bo);
    m["ao"] = counters_json(mutations.ao);
    m["rr"] = counters_json(mutations.rr);
    m["fci_attempts"] = mutations.fci_attempts;
    m["fci_successes"] = mutations.fci_successes;
    m["fdi_attempts"] = mutations.fdi_attempts;
    m["fdi_successes"] = mutations.fdi_successes;
    m["misses"] = mutations.misses;
    m["miss_rate"] = mutations.miss_rate;
    m["lambda_pps"] = mutations.lambda_pps;
    m["mu_pps"] = mutations.mu_pps;
    m["rho"] = mutations.rho;
    if (expected_attempts) m["expected_attempts"] = *expected_attempts;
    j["mutations"] = m;
  }
  j["alerts"] = alert_counts;
  Json hist = Json::array();
  for (const auto& [key, count] : alert_histogram)
    hist.push_back(Json{{"kind", key.first}, {"bucket", key.second}, {"count", count}});
  j["alert_histogram"] = hist;
  j["alert_bucket_s"] = alert_bucket_s;
  Json rows = Json::array();
  for (const auto& w : windows) {
    Json row{{"t0", w.t0},
             {"t1", w.t1},
             {"rtt_mean_s", w.rtt_mean_s},
             {"rtt_count", w.rtt_count},
             {"throughput_Bps", w.throughput_bps},
             {"goodput_Bps", w.goodput_bps},
             {"payload_bytes", w.payload_bytes},
             {"retx", w.retransmissions},
             {"flows", w.flows},
             {"drops", w.drops},
             {"gen_total_mw", w.gen_total_mw},
             {"max_loading_pct", w.max_loading_pct},
             {"overloads", w.overload_count}};
    for (const auto& [b, f] : w.monitored_flows) row["flow_" + b] = f;
    rows.push_back(row);
  }
  j["windows"] = rows;
  j["config"] = resolved_config;
  return j;
}

struct RunOutputs {
  RunReport report;
  std::vector<std::string> events;
  std::vector<ids::AlertRecord> alerts;
};

inline RunOutputs run_scenario(const config::Scenario& sc) {
  ScenarioRun run(sc);
  RunOutputs out;
  out.report = run.run();
  out.events = run.events();
  out.alerts = run.alerts();
  return out;
}

inline std::string metrics_csv(const RunReport& rep) {
  std::ostringstream os;
  os << "t0,t1,rtt_mean_s,rtt_count,throughput_Bps,goodput_Bps,payload_bytes,retx,flows,drops,"
        "gen_total_mw,max_loading_pct,overloads";
  std::vector<std::string> monitored;
  if (!rep.windows.empty())
    for (const auto& [b, f] : rep.windows.front().monitored_flows) {
      monitored.push_back(b);
      os << ",flow_" << b;
    }
  os << "\n";
  for (const auto& w : rep.windows) {
    os << format_double(w.t0) << ',' << format_double(w.t1) << ',' << format_double(w.rtt_mean_s)
       << ',' << w.rtt_count << ',' << format_double(w.throughput_bps) << ','
       << format_double(w.goodput_bps) << ',' << format_double(w.payload_bytes) << ','
       << w.retransmissions << ',' << w.flows << ',' << w.drops << ','
       << format_double(w.gen_total_mw) << ',' << format_double(w.max_loading_pct) << ','
       << w.overload_count;
    for (const auto& b : monitored) os << ',' << format_double(w.monitored_flows.at(b));
    os << "\n";
  }
  return os.str();
}

inline std::string alerts_csv(const std::vector<ids::AlertRecord>& alerts) {
  std::ostringstream os;
  os << "t,rule_id,kind,src,dst,detail\n";
  for (const auto& a : alerts) {
    std::string detail = a.detail;
    for (auto& c : detail)
      if (c == ',') c = ';';
    os << format_double(a.t) << ',' << a.rule_id << ',' << ids::to_string(a.kind) << ',' << a.src
       << ',' << a.dst << ',' << detail << "\n";
  }
  return os.str();
}

inline std::string report_text(const RunReport& rep) {
  std::ostringstream os;
  os << "scenario " << rep.scenario_id << " (kind " << rep.kind << ", seed " << rep.seed << ")\n";
  os << "  virtual duration: " << format_double(rep.virtual_duration_s) << " s (x"
     << format_double(rep.time_compression) << " compression)\n";
  if (rep.time_to_overload_s)
    os << "  time to overload: " << format_double(*rep.time_to_overload_s) << " s virtual ("
       << format_double(*rep.time_to_overload_s * rep.time_compression) << " s unscaled); branches:";
  else
    os << "  time to overload: none; branches:";
  for (const auto& b : rep.overloaded_branches) os << ' ' << b;
  os << "\n";
  os << "  rtt: mean " << format_double(rep.rtt_mean_s) << " s, max " << format_double(rep.rtt_max_s)
     << " s over " << rep.rtt_count << " samples\n";
  os << "  throughput mean " << format_double(rep.throughput_mean_bps) << " B/s, goodput mean "
     << format_double(rep.goodput_mean_bps) << " B/s, retransmissions " << rep.retransmissions
     << "\n";
  os << "  flows " << rep.flows_total << " (reconnects " << rep.reconnects << "), link drops "
     << rep.link_drops << "\n";
  if (rep.attack_enabled) {
    os << "  attack: FCI attempts " << rep.mutations.fci_attempts << " (ok "
       << rep.mutations.fci_successes << "), FDI attempts " << rep.mutations.fdi_attempts << " (ok "
       << rep.mutations.fdi_successes << "), miss rate " << format_double(rep.mutations.miss_rate)
       << "\n";
    os << "  adversary load: lambda " << format_double(rep.mutations.lambda_pps) << " pps, mu "
       << format_double(rep.mutations.mu_pps) << " pps, rho " << format_double(rep.mutations.rho);
    if (rep.expected_attempts)
      os << "; expected attempts (closed form) " << format_double(*rep.expected_attempts);
    os << "\n";
  }
  os << "  alerts:";
  for (const auto& [kind, count] : rep.alert_counts) os << ' ' << kind << '=' << count;
  os << "\n";
  return os.str();
}

inline void write_outputs(const RunOutputs& out, const std::string& outdir) {
  namespace fs = std::filesystem;
  fs::create_directories(outdir);
  {
    std::ofstream f(outdir + "/events.jsonl");
    for (const auto& line : out.events) f << line << "\n";
  }
  std::ofstream(outdir + "/metrics.csv") << metrics_csv(out.report);
  std::ofstream(outdir + "/alerts.csv") << alerts_csv(out.alerts);
  std::ofstream(outdir + "/report.json") << out.report.to_json().dump(2) << "\n";
  std::ofstream(outdir + "/report.txt") << report_text(out.report);
}

// ---------------------------------------------------------------------------
// DoS sweeps
// ---------------------------------------------------------------------------

struct SweepTrial {
  double value = 0.0;  // payload bytes or interval seconds
  std::uint64_t seed = 0;
  std::string target;
  double rtt_mean_s = 0.0;
  int rtt_count = 0;
  double throughput_bps = 0.0;
  double goodput_bps = 0.0;
  int retransmissions = 0;
  int drops = 0;
};

struct SweepPoint {
  double value = 0.0;
  std::string target;
  double mean_rtt_s = 0.0;
  double mean_throughput_bps = 0.0;
  double mean_goodput_bps = 0.0;
  double mean_gap_bps = 0.0;
  double mean_retransmissions = 0.0;
};

struct SweepResult {
  std::string kind;  // payload | interval
  std::vector<SweepTrial> trials;
  std::vector<SweepPoint> points;  // ordered by sweep value, per target
};

inline std::vector<double> sweep_values(config::ScenarioKind kind) {
  std::vector<double> values;
  if (kind == config::ScenarioKind::DosPayloadSweep) {
    for (int b = 800; b <= 1800; b += 200) values.push_back(static_cast<double>(b));
  } else {
    for (int ms = 1500; ms >= 500; ms -= 100) values.push_back(static_cast<double>(ms) / 1000.0);
  }
  return values;
}

// Runs every (value, seed, target) trial of a DoS sweep. The same seed set is
// applied at every sweep point so point-to-point comparisons are paired.
inline SweepResult run_sweep(const config::Scenario& base, int num_seeds,
                             const std::vector<std::string>& targets = {"sub", "ucc"}) {
  if (num_seeds < 1) throw std::invalid_argument("sweep needs at least one seed");
  bool payload_sweep = base.kind == config::ScenarioKind::DosPayloadSweep;
  SweepResult result;
  result.kind = payload_sweep ? "payload" : "interval";

  for (const std::string& target : targets) {
    for (double value : sweep_values(base.kind)) {
      double rtt_sum = 0.0, tp_sum = 0.0, gp_sum = 0.0, retx_sum = 0.0;
      int rtt_total = 0;
      for (int s = 0; s < num_seeds; ++s) {
        Json patched = base.resolved;
        patched["seed"] = base.seed + static_cast<std::uint64_t>(s);
        patched["dos"]["target"] = target;
        if (payload_sweep)
          patched["dos"]["payload_bytes"] = static_cast<std::size_t>(value);
        else
          patched["dos"]["interval_ms"] = value * 1000.0;
        config::Scenario sc = config::parse_resolved(patched);

        ScenarioRun run(sc);
        RunReport rep = run.run();
        auto [t0, t1] = run.dos_window();
        auto wm = run.sim().measure(t0, t1);

        SweepTrial trial;
        trial.value = value;
        trial.seed = sc.seed;
        trial.target = target;
        trial.rtt_count = static_cast<int>(wm.rtt_s.size());
        trial.rtt_mean_s = wm.rtt_s.empty()
                               ? 0.0
                               : std::accumulate(wm.rtt_s.begin(), wm.rtt_s.end(), 0.0) /
                                     static_cast<double>(wm.rtt_s.size());
        trial.throughput_bps = wm.dnp3.throughput_bps;
        trial.goodput_bps = wm.dnp3.goodput_bps;
        trial.retransmissions = wm.retransmissions;
        trial.drops = wm.link_drops;
        result.trials.push_back(trial);

        rtt_sum += trial.rtt_mean_s * trial.rtt_count;
        rtt_total += trial.rtt_count;
        tp_sum += trial.throughput_bps;
        gp_sum += trial.goodput_bps;
        retx_sum += trial.retransmissions;
      }
      SweepPoint pt;
      pt.value = value;
      pt.target = target;
      pt.mean_rtt_s = rtt_total ? rtt_sum / rtt_total : 0.0;
      pt.mean_throughput_bps = tp_sum / num_seeds;
      pt.mean_goodput_bps = gp_sum / num_seeds;
      pt.mean_gap_bps = pt.mean_throughput_bps - pt.mean_goodput_bps;
      pt.mean_retransmissions = retx_sum / num_seeds;
      result.points.push_back(pt);
    }
  }
  return result;
}

inline std::string sweep_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "kind,target,value,mean_rtt_s,mean_throughput_Bps,mean_goodput_Bps,mean_gap_Bps,"
        "mean_retx\n";
  for (const auto& p : r.points)
    os << r.kind << ',' << p.target << ',' << format_double(p.value) << ','
       << format_double(p.mean_rtt_s) << ',' << format_double(p.mean_throughput_bps) << ','
       << format_double(p.mean_goodput_bps) << ',' << format_double(p.mean_gap_bps) << ','
       << format_double(p.mean_retransmissions) << "\n";
  return os.str();
}

inline std::string sweep_trials_csv(const SweepResult& r) {
  std::ostringstream os;
  os << "kind,target,value,seed,rtt_mean_s,rtt_count,throughput_Bps,goodput_Bps,retx,drops\n";
  for (const auto& t : r.trials)
    os << r.kind << ',' << t.target << ',' << format_double(t.value) << ',' << t.seed << ','
       << format_double(t.rtt_mean_s) << ',' << t.rtt_count << ',' << format_double(t.throughput_bps)
       << ',' << format_double(t.goodput_bps) << ',' << t.retransmissions << ',' << t.drops << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Cross-run report aggregation
// ---------------------------------------------------------------------------

class EmptyInput : public std::runtime_error {
 public:
  EmptyInput() : std::runtime_error("no run reports found") {}
};

struct AggregateRow {
  std::string scenario;
  std::string mode;
  int runs = 0;
  double mean_fci_attempts = 0.0;
  double mean_fdi_attempts = 0.0;
  double mean_fci_successes = 0.0;
  double mean_fdi_successes = 0.0;
  double expected_attempts = 0.0;
  double monte_carlo_attempts = 0.0;
  double mean_rtt_s = 0.0;
  double mean_throughput_bps = 0.0;
  double mean_goodput_bps = 0.0;
  double mean_time_to_overload_s = -1.0;
};

inline std::vector<AggregateRow> aggregate_reports(const std::vector<Json>& reports) {
  if (reports.empty()) throw EmptyInput();
  std::map<std::pair<std::string, std::string>, std::vector<const Json*>> groups;
  for (const auto& r : reports) {
    std::string mode = "DirectOperate";
    if (r.contains("config") && r.at("config").contains("masters"))
      mode = r.at("config").at("masters").value("command_mode", "DirectOperate");
    groups[{r.value("scenario", "?"), mode}].push_back(&r);
  }
  std::vector<AggregateRow> rows;
  for (const auto& [key, members] : groups) {
    AggregateRow row;
    row.scenario = key.first;
    row.mode = key.second;
    row.runs = static_cast<int>(members.size());
    int overload_runs = 0;
    double tto_sum = 0.0;
    for (const Json* r : members) {
      row.mean_rtt_s += r->value("rtt_mean_s", 0.0);
      row.mean_throughput_bps += r->value("throughput_mean_Bps", 0.0);
      row.mean_goodput_bps += r->value("goodput_mean_Bps", 0.0);
      if (r->contains("mutations")) {
        const Json& m = r->at("mutations");
        row.mean_fci_attempts += m.value("fci_attempts", 0.0);
        row.mean_fdi_attempts += m.value("fdi_attempts", 0.0);
        row.mean_fci_successes += m.value("fci_successes", 0.0);
        row.mean_fdi_successes += m.value("fdi_successes", 0.0);
        row.expected_attempts = m.value("expected_attempts", 0.0);
      }
      if (r->contains("time_to_overload_s") && !r->at("time_to_overload_s").is_null()) {
        ++overload_runs;
        tto_sum += r->at("time_to_overload_s").get<double>();
      }
    }
    double n = static_cast<double>(row.runs);
    row.mean_rtt_s /= n;
    row.mean_throughput_bps /= n;
    row.mean_goodput_bps /= n;
    row.mean_fci_attempts /= n;
    row.mean_fdi_attempts /= n;
    row.mean_fci_successes /= n;
    row.mean_fdi_successes /= n;
    if (overload_runs) row.mean_time_to_overload_s = tto_sum / overload_runs;

    // seeded Monte-Carlo companion of the closed-form expectation
    const Json& cfg = members.front()->contains("config") ? members.front()->at("config") : Json();
    if (cfg.contains("attack")) {
      const Json& a = cfg.at("attack");
      auto uc = attack::use_case_from(a.value("use_case", ""));
      if (uc) {
        int m = a.contains("targets") && a.at("targets").contains("breakers")
                    ? static_cast<int>(a.at("targets").at("breakers").size())
                    : 0;
        int nn = a.contains("targets") && a.at("targets").contains("generators")
                     ? static_cast<int>(a.at("targets").at("generators").size())
                     : 0;
        Rng rng(0x5EEDED);
        double sum = 0.0;
        const int trials = 1000;
        try {
          for (int i = 0; i < trials; ++i)
            sum += static_cast<double>(attack::simulate_goal_attempts(
                                           *uc, m, nn, 1, a.value("p", 0.8), a.value("q", 0.8),
                                           a.value("r", 0.6), rng)
                                           .steps);
          row.monte_carlo_attempts = sum / trials;
        } catch (const std::exception&) {
          row.monte_carlo_attempts = 0.0;
        }
      }
    }
    rows.push_back(row);
  }
  return rows;
}

inline std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "scenario,mode,runs,mean_fci_attempts,mean_fdi_attempts,mean_fci_successes,"
        "mean_fdi_successes,expected_attempts,monte_carlo_attempts,mean_rtt_s,"
        "mean_throughput_Bps,mean_goodput_Bps,mean_time_to_overload_s\n";
  for (const auto& r : rows)
    os << r.scenario << ',' << r.mode << ',' << r.runs << ',' << format_double(r.mean_fci_attempts)
       << ',' << format_double(r.mean_fdi_attempts) << ',' << format_double(r.mean_fci_successes)
       << ',' << format_double(r.mean_fdi_successes) << ',' << format_double(r.expected_attempts)
       << ',' << format_double(r.monte_carlo_attempts) << ',' << format_double(r.mean_rtt_s) << ','
       << format_double(r.mean_throughput_bps) << ',' << format_double(r.mean_goodput_bps) << ','
       << format_double(r.mean_time_to_overload_s) << "\n";
  return os.str();
}

inline std::string aggregate_text(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << "scenario          mode            runs  FCI att  FDI att  expected  monte-carlo  "
        "rtt mean (s)  t-overload (s)\n";
  for (const auto& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-17s %-15s %4d  %7.2f  %7.2f  %8.2f  %11.2f  %12.6f  %14.2f\n",
                  r.scenario.c_str(), r.mode.c_str(), r.runs, r.mean_fci_attempts,
                  r.mean_fdi_attempts, r.expected_attempts, r.monte_carlo_attempts, r.mean_rtt_s,
                  r.mean_time_to_overload_s);
    os << buf;
  }
  return os.str();
}

}  // namespace scadasim::harness
