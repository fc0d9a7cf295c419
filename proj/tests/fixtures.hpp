#pragma once

// A miniature end-to-end testbed used by the attack and ids unit tests:
//
//   master --- ucc_lan --- ucc_router === wan === sub_router --- sub_lan ---+
//                                                                           |
//                                              adversary, outstation -------+
//
// One master polls one outstation over a two-bus grid. The adversary sits on
// the substation LAN; engage() turns it into the man in the middle.

#include <memory>

#include "scadasim/attack.hpp"
#include "scadasim/grid.hpp"
#include "scadasim/ids.hpp"
#include "scadasim/netsim.hpp"
#include "scadasim/station.hpp"

namespace fixtures {

using namespace scadasim;

struct MiniTestbed {
  net::Sim sim;
  net::NodeId master_node, outstation_node, sub_router, ucc_router, adversary;
  net::Ip master_ip = net::parse_ip("172.16.0.2");
  net::Ip outstation_ip = net::parse_ip("172.16.1.2");
  net::Ip gateway_ip = net::parse_ip("172.16.1.1");
  net::Ip ucc_router_ip = net::parse_ip("172.16.0.4");
  net::Ip adversary_ip = net::parse_ip("172.16.1.66");

  grid::GridModel model;
  grid::GridState state;
  station::PointMap map;
  std::unique_ptr<station::Outstation> outstation;
  std::unique_ptr<station::Master> master;
  std::unique_ptr<attack::MitmProxy> proxy;
  std::unique_ptr<ids::Engine> ids_engine;

  explicit MiniTestbed(std::uint64_t seed = 7,
                       station::Master::CommandMode mode = station::Master::CommandMode::DirectOperate,
                       double poll_interval = 5.0)
      : sim(seed) {
    net::LinkSpec lan;  // 10 Mbps / 160 us defaults
    auto sub_lan = sim.add_segment("sub_lan", lan);
    auto ucc_lan = sim.add_segment("ucc_lan", lan);
    auto wan = sim.add_segment("wan", lan);

    master_node = sim.add_node("master1");
    outstation_node = sim.add_node("outstation1");
    adversary = sim.add_node("adversary");
    sub_router = sim.add_node("sub_router", true);
    ucc_router = sim.add_node("ucc_router", true);

    sim.attach(master_node, ucc_lan, "172.16.0.2/24");
    sim.attach(ucc_router, ucc_lan, "172.16.0.4/24");
    sim.attach(ucc_router, wan, "172.16.2.2/24");
    sim.attach(sub_router, wan, "172.16.2.1/24");
    sim.attach(sub_router, sub_lan, "172.16.1.1/24");
    sim.attach(outstation_node, sub_lan, "172.16.1.2/24");
    sim.attach(adversary, sub_lan, "172.16.1.66/24");

    sim.set_default_route(master_node, ucc_router_ip);
    sim.set_default_route(outstation_node, gateway_ip);
    sim.set_default_route(adversary, gateway_ip);
    sim.add_route(ucc_router, "172.16.1.0/24", net::parse_ip("172.16.2.1"));
    sim.add_route(sub_router, "172.16.0.0/24", net::parse_ip("172.16.2.2"));

    model.buses = {{"a", true}, {"b", false}};
    model.branches = {{"ln1", "a", "b", 0.1, 500.0, true}, {"ln2", "a", "b", 0.1, 500.0, true}};
    model.generators = {{"gs", "a", 0, 0, 1e6, 1e6, true}, {"g1", "b", 300, 300, 1000, 100, true}};
    model.loads = {{"ld", "b", 400.0, true}};
    model.validate();
    state = grid::dc_power_flow(model);

    using station::DeviceKind;
    map.entries = {
        {DeviceKind::BranchStatus, 0, "ln1"},  {DeviceKind::BranchStatus, 1, "ln2"},
        {DeviceKind::GenOutput, 0, "g1"},      {DeviceKind::BranchFlow, 1, "ln1"},
        {DeviceKind::BranchBreaker, 0, "ln1"}, {DeviceKind::BranchBreaker, 1, "ln2"},
        {DeviceKind::GenSetpoint, 0, "g1"},
    };
    map.validate(model);

    station::Outstation::Config ocfg;
    ocfg.name = "outstation1";
    ocfg.dnp3_address = 1024;
    outstation = std::make_unique<station::Outstation>(sim, outstation_node, ocfg, map, port());
    outstation->start();

    station::Master::Config mcfg;
    mcfg.name = "master1";
    mcfg.outstation_address = 1024;
    mcfg.outstation_ip = outstation_ip;
    mcfg.poll_interval_s = poll_interval;
    mcfg.response_timeout_s = 3.0;
    mcfg.mode = mode;
    master = std::make_unique<station::Master>(sim, master_node, mcfg, map);
  }

  station::GridPort port() {
    station::GridPort p;
    p.read_binary = [this](const station::PointEntry& e) {
      switch (e.kind) {
        case station::DeviceKind::BranchStatus: return model.branch(e.device).breaker_closed;
        case station::DeviceKind::GenStatus: return model.generator(e.device).in_service;
        case station::DeviceKind::LoadStatus: return model.load(e.device).in_service;
        default: return false;
      }
    };
    p.read_analog = [this](const station::PointEntry& e) {
      if (e.kind == station::DeviceKind::GenOutput) return state.outputs.at(e.device);
      auto it = state.flows.find(e.device);
      return it == state.flows.end() ? 0.0 : it->second;
    };
    p.apply = [this](const grid::ControlAction& a) {
      try {
        grid::apply_control(model, a);
      } catch (const grid::UnknownDevice&) {
        return false;
      }
      state = grid::dc_power_flow(model);
      return true;
    };
    return p;
  }

  // Default attack policy targeting the ln1 breaker, the g1 setpoint and the
  // g1 output / ln1 flow readings.
  attack::AttackPolicy policy(attack::UseCase uc) {
    attack::AttackPolicy pol;
    pol.use_case = uc;
    attack::OutstationTargets t;
    t.bo_indices = {0};
    t.ao_values[0] = 0.0;
    t.rr_gen_values[0] = 20.0;
    t.rr_flow_values[1] = 3000.0;
    t.mask_ai_by_ao[0] = 0;
    pol.targets[outstation_ip] = t;
    return pol;
  }

  void start_attack(const attack::AttackPolicy& pol, double engage_at) {
    proxy = std::make_unique<attack::MitmProxy>(sim, adversary, gateway_ip,
                                                std::vector<net::Ip>{outstation_ip}, pol);
    proxy->engage(engage_at);
  }

  void attach_ids(std::vector<ids::Rule> rules) {
    ids_engine = std::make_unique<ids::Engine>(sim, std::move(rules));
    ids_engine->attach(sub_router);
    ids_engine->attach(ucc_router);
  }

  static std::vector<ids::Rule> default_rules() {
    std::vector<ids::Rule> rules(4);
    rules[0].id = "icmp_flood";
    rules[0].kind = ids::RuleKind::IcmpRate;
    rules[0].window_s = 1.0;
    rules[0].threshold = 50;
    rules[1].id = "arp_spoof";
    rules[1].kind = ids::RuleKind::ArpBindingChange;
    rules[2].id = "dnp3_operate";
    rules[2].kind = ids::RuleKind::Dnp3Function;
    rules[3].id = "dnp3_crc";
    rules[3].kind = ids::RuleKind::Dnp3CrcMismatch;
    return rules;
  }
};

}  // namespace fixtures
