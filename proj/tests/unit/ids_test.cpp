#include <catch2/catch_amalgamated.hpp>

#include "scadasim/ids.hpp"

#include "../fixtures.hpp"

using namespace scadasim;
using namespace scadasim::ids;
using fixtures::MiniTestbed;

TEST_CASE("icmp rate rule fires once per saturated window", "[ids]") {
  MiniTestbed tb;
  tb.attach_ids(MiniTestbed::default_rules());
  // 100 echoes into each of two 1 s windows, threshold 50
  tb.sim.icmp_flood(tb.adversary, tb.gateway_ip, 100, 0.01);
  tb.sim.advance(2.0);
  CHECK(tb.ids_engine->count(RuleKind::IcmpRate) == 2);
}

TEST_CASE("sparse icmp stays quiet", "[ids]") {
  MiniTestbed tb;
  tb.attach_ids(MiniTestbed::default_rules());
  tb.sim.icmp_flood(tb.adversary, tb.gateway_ip, 100, 0.5);
  tb.sim.advance(5.0);
  CHECK(tb.ids_engine->count(RuleKind::IcmpRate) == 0);
}

TEST_CASE("arp binding change raises an alert, first sighting does not", "[ids]") {
  MiniTestbed tb;
  tb.attach_ids(MiniTestbed::default_rules());
  tb.master->start();
  tb.sim.advance(10.0);  // normal resolution traffic
  CHECK(tb.ids_engine->count(RuleKind::ArpBindingChange) == 0);
  tb.start_attack(tb.policy(attack::UseCase::UC1), 10.0);
  tb.sim.advance(15.0);
  CHECK(tb.ids_engine->count(RuleKind::ArpBindingChange) >= 1);
}

TEST_CASE("operate functions crossing a tapped router raise dnp3 alerts", "[ids]") {
  MiniTestbed tb;
  tb.attach_ids(MiniTestbed::default_rules());
  tb.master->start();
  tb.sim.advance(3.0);
  int after_polls = tb.ids_engine->count(RuleKind::Dnp3Function);
  CHECK(after_polls == 0);  // reads are not operate functions
  tb.master->operate_binary(0, dnp3::ControlCode::Trip);
  tb.sim.advance(6.0);
  CHECK(tb.ids_engine->count(RuleKind::Dnp3Function) >= 1);
}

TEST_CASE("crc-recomputing mutation is invisible, crc-skipping is caught", "[ids]") {
  SECTION("recompute on: no crc alerts, operate alerts only") {
    MiniTestbed tb;
    tb.attach_ids(MiniTestbed::default_rules());
    tb.master->start();
    auto pol = tb.policy(attack::UseCase::UC1);
    pol.p = 1.0;
    tb.start_attack(pol, 1.0);
    tb.sim.advance(3.0);
    tb.master->operate_binary(0, dnp3::ControlCode::Close);
    tb.sim.advance(8.0);
    CHECK_FALSE(tb.model.branch("ln1").breaker_closed);
    CHECK(tb.ids_engine->count(RuleKind::Dnp3CrcMismatch) == 0);
    CHECK(tb.ids_engine->count(RuleKind::Dnp3Function) >= 1);
  }
  SECTION("recompute off: the mismatch is detected at the router and the outstation") {
    MiniTestbed tb;
    tb.attach_ids(MiniTestbed::default_rules());
    tb.master->start();
    auto pol = tb.policy(attack::UseCase::UC1);
    pol.p = 1.0;
    pol.recompute_crc = false;
    tb.start_attack(pol, 1.0);
    tb.sim.advance(3.0);
    tb.master->operate_binary(0, dnp3::ControlCode::Close);
    tb.sim.advance(8.0);
    CHECK(tb.model.branch("ln1").breaker_closed);  // outstation rejected the frame
    CHECK(tb.ids_engine->count(RuleKind::Dnp3CrcMismatch) >= 1);
    bool outstation_rejected = false;
    for (const auto& line : tb.sim.log_lines())
      if (line.find("dnp3_reject") != std::string::npos &&
          line.find("BadBlockCrc") != std::string::npos)
        outstation_rejected = true;
    CHECK(outstation_rejected);
  }
}

TEST_CASE("alert histogram bucketing", "[ids]") {
  SECTION("empty log gives an empty histogram") {
    CHECK(alert_histogram({}, 60.0).empty());
  }
  SECTION("buckets follow floor(t / bucket)") {
    std::vector<AlertRecord> alerts(3);
    alerts[0] = {1.0, "dnp3_operate", RuleKind::Dnp3Function, "", "", ""};
    alerts[1] = {2.0, "dnp3_operate", RuleKind::Dnp3Function, "", "", ""};
    alerts[2] = {61.0, "dnp3_operate", RuleKind::Dnp3Function, "", "", ""};
    auto hist = alert_histogram(alerts, 60.0);
    REQUIRE(hist.size() == 2);
    CHECK(hist.at({"dnp3_function", 0}) == 2);
    CHECK(hist.at({"dnp3_function", 1}) == 1);
  }
  SECTION("bucket must be positive") {
    CHECK_THROWS_AS(alert_histogram({}, 0.0), std::invalid_argument);
  }
}
