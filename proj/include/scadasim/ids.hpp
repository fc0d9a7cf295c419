#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "scadasim/dnp3.hpp"
#include "scadasim/netsim.hpp"

// Rule-based network intrusion detection attached at router taps. Three
// alert families mirror the testbed's custom rules (ICMP flood rate, ARP
// binding changes, DNP3 operate functions) plus a CRC-mismatch rule that
// catches tampering which skipped CRC recomputation.

namespace scadasim::ids {

enum class RuleKind { IcmpRate, ArpBindingChange, Dnp3Function, Dnp3CrcMismatch };

inline const char* to_string(RuleKind k) {
  switch (k) {
    case RuleKind::IcmpRate: return "icmp_rate";
    case RuleKind::ArpBindingChange: return "arp_binding_change";
    case RuleKind::Dnp3Function: return "dnp3_function";
    case RuleKind::Dnp3CrcMismatch: return "dnp3_crc_mismatch";
  }
  return "?";
}

struct Rule {
  std::string id;
  RuleKind kind = RuleKind::IcmpRate;
  double window_s = 1.0;  // IcmpRate
  int threshold = 50;     // IcmpRate
  std::set<dnp3::FunctionCode> functions{dnp3::FunctionCode::Operate,
                                         dnp3::FunctionCode::DirectOperate};

  void validate() const {
    if (id.empty()) throw std::invalid_argument("rule id must not be empty");
    if (kind == RuleKind::IcmpRate) {
      if (window_s <= 0) throw std::invalid_argument("rate rule window must be > 0");
      if (threshold < 1) throw std::invalid_argument("rate rule threshold must be >= 1");
    }
  }
};

struct AlertRecord {
  double t = 0.0;
  std::string rule_id;
  RuleKind kind = RuleKind::IcmpRate;
  std::string src;
  std::string dst;
  std::string detail;
};

class Engine {
 public:
  Engine(net::Sim& sim, std::vector<Rule> rules) : sim_(sim), rules_(std::move(rules)) {
    for (const auto& r : rules_) r.validate();
  }

  // Tap a router; a passive observer of every frame the node receives.
  void attach(net::NodeId router) {
    sim_.set_tap(router, [this, router](const net::Packet& p) { inspect(router, p); });
  }

  const std::vector<AlertRecord>& alerts() const { return alerts_; }

  int count(RuleKind kind) const {
    int n = 0;
    for (const auto& a : alerts_)
      if (a.kind == kind) ++n;
    return n;
  }

 private:
  void inspect(net::NodeId router, const net::Packet& p) {
    for (const auto& rule : rules_) {
      switch (rule.kind) {
        case RuleKind::IcmpRate: {
          if (p.protocol != net::Protocol::Icmp || p.icmp_kind != net::IcmpKind::EchoRequest) break;
          long bucket = static_cast<long>(sim_.now() / rule.window_s);
          int& n = icmp_counts_[{rule.id, router, bucket}];
          if (++n == rule.threshold)
            raise(rule, p, "echo rate reached " + std::to_string(rule.threshold) + " in window " +
                               std::to_string(bucket));
          break;
        }
        case RuleKind::ArpBindingChange: {
          if (p.protocol != net::Protocol::Arp || p.arp_kind != net::ArpKind::Reply) break;
          auto key = std::make_pair(router, p.arp_ip);
          auto it = bindings_.find(key);
          if (it == bindings_.end()) {
            bindings_[key] = p.arp_mac;  // first sighting is baseline, not an alert
          } else if (it->second != p.arp_mac) {
            raise(rule, p, net::format_ip(p.arp_ip) + " moved " + net::format_mac(it->second) +
                               " -> " + net::format_mac(p.arp_mac));
            it->second = p.arp_mac;
          }
          break;
        }
        case RuleKind::Dnp3Function:
        case RuleKind::Dnp3CrcMismatch: {
          if (p.protocol != net::Protocol::MiniTcp || p.tcp_kind != net::TcpKind::Data) break;
          if (p.src_port != sim_.dnp3_port && p.dst_port != sim_.dnp3_port) break;
          try {
            dnp3::Message msg = dnp3::decode_message(p.payload);
            if (rule.kind == RuleKind::Dnp3Function && rule.functions.count(msg.app.function))
              raise(rule, p, std::string("function ") + dnp3::to_string(msg.app.function));
          } catch (const dnp3::DecodeError& e) {
            bool crc = e.status() == dnp3::DecodeStatus::BadBlockCrc ||
                       e.status() == dnp3::DecodeStatus::BadHeaderCrc;
            if (rule.kind == RuleKind::Dnp3CrcMismatch && crc)
              raise(rule, p, to_string(e.status()));
          }
          break;
        }
      }
    }
  }

  void raise(const Rule& rule, const net::Packet& p, const std::string& detail) {
    AlertRecord a;
    a.t = sim_.now();
    a.rule_id = rule.id;
    a.kind = rule.kind;
    a.src = net::format_ip(p.src_ip);
    a.dst = net::format_ip(p.dst_ip);
    a.detail = detail;
    alerts_.push_back(a);
    sim_.log({{"t", a.t}, {"type", "alert"}, {"rule", a.rule_id}, {"kind", to_string(a.kind)},
              {"src", a.src}, {"dst", a.dst}, {"detail", a.detail}});
  }

  net::Sim& sim_;
  std::vector<Rule> rules_;
  std::vector<AlertRecord> alerts_;
  std::map<std::tuple<std::string, net::NodeId, long>, int> icmp_counts_;
  std::map<std::pair<net::NodeId, net::Ip>, net::Mac> bindings_;
};

// Deterministic histogram: counts per (kind, floor(t / bucket)).
inline std::map<std::pair<std::string, long>, int> alert_histogram(
    const std::vector<AlertRecord>& alerts, double bucket_s) {
  if (bucket_s <= 0) throw std::invalid_argument("bucket must be > 0");
  std::map<std::pair<std::string, long>, int> hist;
  for (const auto& a : alerts) hist[{to_string(a.kind), static_cast<long>(a.t / bucket_s)}]++;
  return hist;
}

}  // namespace scadasim::ids
