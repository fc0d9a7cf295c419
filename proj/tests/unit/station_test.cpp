#include <catch2/catch_amalgamated.hpp>

#include "scadasim/station.hpp"

using namespace scadasim;
using namespace scadasim::station;
using dnp3::ControlCode;
using dnp3::GroupKind;

namespace {

// Two hosts on one LAN, a two-bus grid with a dispatchable generator and a
// breaker-equipped line pair, re-solved after every actuation.
struct Rig {
  net::Sim sim{42};
  net::NodeId mnode, onode;
  grid::GridModel model;
  grid::GridState state;
  PointMap map;
  std::unique_ptr<Outstation> outstation;
  std::unique_ptr<Master> master;
  int applied = 0;

  explicit Rig(Master::CommandMode mode = Master::CommandMode::DirectOperate,
               Outstation::Config ocfg = Outstation::Config{}) {
    auto lan = sim.add_segment("lan", {});
    mnode = sim.add_node("master");
    onode = sim.add_node("outstation");
    auto im = sim.attach(mnode, lan, "10.0.0.1/24");
    auto io = sim.attach(onode, lan, "10.0.0.2/24");
    sim.seed_arp(mnode, net::parse_ip("10.0.0.2"), sim.iface_mac(io));
    sim.seed_arp(onode, net::parse_ip("10.0.0.1"), sim.iface_mac(im));

    model.buses = {{"a", true}, {"b", false}};
    model.branches = {{"ln1", "a", "b", 0.1, 500.0, true}, {"ln2", "a", "b", 0.1, 500.0, true}};
    grid::Generator gs{"gs", "a", 0, 0, 1e6, 1e6, true};
    grid::Generator g1{"g1", "b", 300.0, 300.0, 1000.0, 100.0, true};
    model.generators = {gs, g1};
    model.loads = {{"ld", "b", 400.0, true}};
    model.validate();
    state = grid::dc_power_flow(model);

    map.entries = {
        {DeviceKind::BranchStatus, 0, "ln1"},  {DeviceKind::BranchStatus, 1, "ln2"},
        {DeviceKind::GenStatus, 2, "g1"},      {DeviceKind::GenOutput, 0, "g1"},
        {DeviceKind::BranchFlow, 1, "ln1"},    {DeviceKind::BranchBreaker, 0, "ln1"},
        {DeviceKind::BranchBreaker, 1, "ln2"}, {DeviceKind::GenSetpoint, 0, "g1"},
        {DeviceKind::LoadBreaker, 5, "ld"},
    };
    map.validate(model);

    ocfg.dnp3_address = 1024;
    outstation = std::make_unique<Outstation>(sim, onode, ocfg, map, port());
    outstation->start();

    Master::Config mcfg;
    mcfg.outstation_address = 1024;
    mcfg.outstation_ip = net::parse_ip("10.0.0.2");
    mcfg.poll_interval_s = 30.0;
    mcfg.response_timeout_s = 5.0;
    mcfg.mode = mode;
    master = std::make_unique<Master>(sim, mnode, mcfg, map);
  }

  GridPort port() {
    GridPort p;
    p.read_binary = [this](const PointEntry& e) {
      switch (e.kind) {
        case DeviceKind::BranchStatus: return model.branch(e.device).breaker_closed;
        case DeviceKind::GenStatus: return model.generator(e.device).in_service;
        case DeviceKind::LoadStatus: return model.load(e.device).in_service;
        default: return false;
      }
    };
    p.read_analog = [this](const PointEntry& e) {
      if (e.kind == DeviceKind::GenOutput) return state.outputs.at(e.device);
      auto it = state.flows.find(e.device);
      return it == state.flows.end() ? 0.0 : it->second;
    };
    p.apply = [this](const grid::ControlAction& a) {
      try {
        grid::apply_control(model, a);
      } catch (const grid::UnknownDevice&) {
        return false;
      }
      ++applied;
      state = grid::dc_power_flow(model);
      return true;
    };
    return p;
  }
};

}  // namespace

TEST_CASE("poll cycle stores a full snapshot on schedule", "[station][poll]") {
  Rig rig;
  rig.master->start();
  rig.sim.advance(61.0);
  CHECK(rig.master->stats().polls_sent == 3);  // t = 0, 30, 60
  CHECK(rig.master->stats().responses == 3);
  // snapshot holds exactly the mapped input points
  CHECK(rig.master->snapshot().size() == 5);

  SECTION("attack-free snapshots equal the grid state exactly") {
    const auto& snap = rig.master->snapshot();
    CHECK(snap.at({GroupKind::AnalogInput, 0}).value == rig.state.outputs.at("g1"));
    CHECK(snap.at({GroupKind::AnalogInput, 1}).value == rig.state.flows.at("ln1"));
    CHECK(snap.at({GroupKind::BinaryInput, 0}).value == 1.0);
    CHECK(snap.at({GroupKind::BinaryInput, 2}).value == 1.0);
  }
}

TEST_CASE("a dropped response is recovered by retransmission", "[station][poll]") {
  Rig rig;
  bool dropped = false;
  rig.sim.set_loss_filter([&](const net::Packet& p) {
    if (!dropped && p.protocol == net::Protocol::MiniTcp && p.tcp_kind == net::TcpKind::Data &&
        p.src_port == 20000) {
      dropped = true;
      return true;
    }
    return false;
  });
  rig.master->start();
  rig.sim.advance(10.0);
  CHECK(rig.master->stats().responses == 1);
  int retx = 0;
  for (const auto& rec : rig.sim.data_transmissions())
    if (rec.retransmission) ++retx;
  CHECK(retx == 1);
}

TEST_CASE("direct operate TRIP opens the branch", "[station][command]") {
  Rig rig;
  rig.master->start();
  rig.sim.advance(1.0);
  rig.master->operate_binary(0, ControlCode::Trip);
  rig.sim.advance(2.0);
  CHECK_FALSE(rig.model.branch("ln1").breaker_closed);
  CHECK(rig.master->stats().command_successes == 1);
  CHECK(rig.state.flows.count("ln1") == 0);
  CHECK(rig.state.flows.at("ln2") == Catch::Approx(100.0));

  SECTION("close on the open breaker closes it") {
    rig.master->operate_binary(0, ControlCode::Close);
    rig.sim.advance(3.0);
    CHECK(rig.model.branch("ln1").breaker_closed);
  }
  SECTION("repeated TRIP is idempotent") {
    auto flows = rig.state.flows;
    rig.master->operate_binary(0, ControlCode::Trip);
    rig.sim.advance(3.0);
    CHECK(rig.state.flows == flows);
    CHECK(rig.master->stats().command_successes == 2);
  }
}

TEST_CASE("select-before-operate", "[station][command]") {
  SECTION("select then operate lands the setpoint") {
    Rig rig(Master::CommandMode::SelectOperate);
    rig.master->start();
    rig.sim.advance(1.0);
    rig.master->operate_analog(0, 1000.0);
    rig.sim.advance(2.0);
    CHECK(rig.model.generator("g1").setpoint_mw == 1000.0);
    CHECK(rig.master->stats().command_successes == 1);
  }
  SECTION("operate without a prior select is rejected and does not touch the grid") {
    Rig rig;  // DirectOperate mode would bypass; craft a bare Operate
    rig.master->start();
    rig.sim.advance(1.0);
    // bare Operate via a raw client connection
    dnp3::AppFragment frag;
    frag.function = dnp3::FunctionCode::Operate;
    frag.objects.push_back({GroupKind::BinaryOutputCommand, {{0, ControlCode::Trip}}});
    dnp3::LinkHeader h;
    h.destination = 1024;
    h.source = 1;
    std::vector<std::uint16_t> iins;
    net::Sim::ConnHandlers handlers;
    handlers.on_message = [&](net::ConnId, const Bytes& raw) {
      iins.push_back(*dnp3::decode_message(raw).app.iin);
    };
    auto conn = rig.sim.tcp_connect(rig.mnode, net::parse_ip("10.0.0.2"), 20000, handlers);
    rig.sim.tcp_send(conn, dnp3::encode_message(h, 0, frag));
    rig.sim.advance(3.0);
    REQUIRE(iins.size() == 1);
    CHECK(iins[0] == kIinSelectMismatch);
    CHECK(rig.model.branch("ln1").breaker_closed);
    CHECK(rig.applied == 0);
  }
  SECTION("operate arriving after the select window is rejected") {
    Outstation::Config ocfg;
    ocfg.select_window_s = 0.0001;  // far below one round trip
    Rig rig(Master::CommandMode::SelectOperate, ocfg);
    rig.master->start();
    rig.sim.advance(1.0);
    rig.master->operate_analog(0, 1000.0);
    rig.sim.advance(2.0);
    CHECK(rig.master->stats().command_failures == 1);
    CHECK(rig.model.generator("g1").setpoint_mw == 300.0);
  }
}

TEST_CASE("command to an unmapped index returns an error echo", "[station][command]") {
  Rig rig;
  rig.master->start();
  rig.sim.advance(1.0);
  int before = rig.applied;
  rig.master->operate_binary(999, ControlCode::Trip);
  rig.sim.advance(2.0);
  CHECK(rig.master->stats().command_failures == 1);
  CHECK(rig.applied == before);
}

TEST_CASE("setpoint commands clamp at the outstation's device limit", "[station][command]") {
  Rig rig;
  rig.master->start();
  rig.sim.advance(1.0);
  rig.master->operate_analog(0, 1200.0);
  rig.sim.advance(2.0);
  CHECK(rig.model.generator("g1").setpoint_mw == 1000.0);
}

TEST_CASE("automation policy", "[station][automation]") {
  Rig rig;
  AutomationPolicy policy;
  policy.enabled = true;
  policy.gen_low_threshold_mw = 100.0;
  policy.gen_restore_setpoint_mw = 1000.0;
  policy.flow_limit_action = true;
  policy.eval_interval_s = 5.0;
  policy.flow_limits[1] = 500.0;  // analog index 1 = ln1 flow
  rig.master->set_automation(policy);

  SECTION("all readings nominal: no corrective commands") {
    rig.master->start();
    rig.sim.advance(31.0);
    CHECK(rig.master->stats().automation_commands == 0);
  }
  SECTION("a low generator reading triggers a setpoint restore") {
    rig.model.generator("g1").output_mw = 20.0;  // e.g. 20 MW against threshold 100
    rig.model.generator("g1").setpoint_mw = 20.0;
    rig.state = grid::dc_power_flow(rig.model);
    rig.master->start();
    rig.sim.advance(6.0);
    CHECK(rig.master->stats().automation_commands >= 1);
    rig.sim.advance(10.0);
    CHECK(rig.model.generator("g1").setpoint_mw == 1000.0);
  }
  SECTION("an over-limit flow reading trips the breaker when the flag is set") {
    rig.model.loads[0].demand_mw = 1400.0;  // ln1 carries 700 > 500
    rig.state = grid::dc_power_flow(rig.model);
    rig.master->start();
    rig.sim.advance(10.0);
    CHECK_FALSE(rig.model.branch("ln1").breaker_closed);
  }
  SECTION("without the flag, over-limit flows are left alone") {
    AutomationPolicy p2 = policy;
    p2.flow_limit_action = false;
    rig.master->set_automation(p2);
    rig.model.loads[0].demand_mw = 1400.0;
    rig.state = grid::dc_power_flow(rig.model);
    rig.master->start();
    rig.sim.advance(10.0);
    CHECK(rig.model.branch("ln1").breaker_closed);
  }
}

TEST_CASE("unsolicited responses announce breaker changes", "[station][unsolicited]") {
  Outstation::Config ocfg;
  ocfg.unsolicited = true;
  Rig rig(Master::CommandMode::DirectOperate, ocfg);
  rig.master->start();
  rig.sim.advance(1.0);
  rig.outstation->grid_stepped();  // baseline capture
  grid::apply_control(rig.model, {grid::ControlAction::Kind::TripBranch, "ln2"});
  rig.state = grid::dc_power_flow(rig.model);
  rig.outstation->grid_stepped();
  rig.sim.advance(2.0);
  CHECK(rig.outstation->stats().unsolicited_sent == 1);
  CHECK(rig.master->stats().unsolicited_confirmed == 1);
  CHECK(rig.master->snapshot().at({GroupKind::BinaryInput, 1}).value == 0.0);
}

TEST_CASE("a master only ever addresses its configured outstation", "[station]") {
  Rig rig;
  rig.master->start();
  rig.sim.advance(65.0);
  rig.master->operate_binary(0, ControlCode::Trip);
  rig.sim.advance(70.0);
  int master_frames = 0;
  for (const auto& line : rig.sim.log_lines()) {
    auto j = nlohmann::json::parse(line);
    if (j.value("type", "") != "dnp3_data") continue;
    if (j["dport"].get<int>() != 20000) continue;  // master -> outstation direction
    auto msg = dnp3::decode_message(from_hex(j["payload"].get<std::string>()));
    CHECK(msg.link.destination == 1024);
    CHECK(msg.link.source == 1);
    ++master_frames;
  }
  CHECK(master_frames >= 3);
}
