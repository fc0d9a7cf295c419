#pragma once

#include <cmath>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "scadasim/dnp3.hpp"
#include "scadasim/netsim.hpp"
#include "scadasim/rng.hpp"

// Adversary implementations: an ARP-poisoning man-in-the-middle proxy that
// rewrites DNP3 traffic under resource-limited success probabilities, an
// ICMP flood driver, and the closed-form attempt/traffic-intensity
// analytics.
//
// The proxy is deliberately a single-server queue with one ingress buffer:
// every DNP3 data packet is parsed for a class-dependent service time
// (command parsing is cheaper than response parsing), the buffer tail-drops
// under load, and a failed mutation roll drops the packet rather than
// forwarding it clean, which surfaces at the victims as retransmissions and
// port-changing reconnects.

namespace scadasim::attack {

enum class UseCase { UC1, UC2, UC3, UC4 };

inline const char* to_string(UseCase uc) {
  switch (uc) {
    case UseCase::UC1: return "UC1";
    case UseCase::UC2: return "UC2";
    case UseCase::UC3: return "UC3";
    case UseCase::UC4: return "UC4";
  }
  return "?";
}

inline std::optional<UseCase> use_case_from(const std::string& s) {
  if (s == "UC1") return UseCase::UC1;
  if (s == "UC2") return UseCase::UC2;
  if (s == "UC3") return UseCase::UC3;
  if (s == "UC4") return UseCase::UC4;
  return std::nullopt;
}

enum class PacketClass { BO, AO, RR, OtherDnp3, NonDnp3 };

inline const char* to_string(PacketClass c) {
  switch (c) {
    case PacketClass::BO: return "BO";
    case PacketClass::AO: return "AO";
    case PacketClass::RR: return "RR";
    case PacketClass::OtherDnp3: return "other_dnp3";
    case PacketClass::NonDnp3: return "non_dnp3";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Analytics
// ---------------------------------------------------------------------------

class ZeroProbability : public std::domain_error {
  using std::domain_error::domain_error;
};

// Expected number of whole-sequence attempts until the intruder's goal,
// given m binary-operate, n analog-operate and o read-response operations
// per attempt. UC1 involves only binary operates; the remaining expressions
// follow the per-use-case success products (UC4 mutates read responses both
// before and after the command stage, hence the doubled exponent).
inline double expected_steps(UseCase uc, int m, int n, int o, double p, double q, double r) {
  auto need = [](double base, int exp, const char* name) {
    if (exp > 0 && base <= 0.0)
      throw ZeroProbability(std::string("probability ") + name + " is zero with nonzero exponent");
  };
  switch (uc) {
    case UseCase::UC1:
      need(p, m, "p");
      return 1.0 / std::pow(p, m);
    case UseCase::UC2:
      need(p, m, "p");
      need(q, n, "q");
      return 1.0 / (std::pow(p, m) * std::pow(q, n));
    case UseCase::UC3:
      need(r, o, "r");
      need(p, m, "p");
      return 1.0 / (std::pow(r, o) * std::pow(p, m));
    case UseCase::UC4:
      need(p, m, "p");
      need(r, 2 * o, "r");
      return 1.0 / (std::pow(p, m) * std::pow(r, 2 * o));
  }
  throw std::logic_error("unreachable");
}

inline double traffic_intensity(double lambda, double mu) {
  if (mu <= 0.0) throw std::domain_error("service rate must be > 0");
  return lambda / mu;
}

// Seeded Monte-Carlo of the attempt model behind expected_steps: each step
// rolls every required operation; the step succeeds only if all of them do.
struct AttemptTrial {
  long steps = 0;
  long fci_rolls = 0;  // BO + AO rolls
  long fdi_rolls = 0;  // RR rolls
};

inline AttemptTrial simulate_goal_attempts(UseCase uc, int m, int n, int o, double p, double q,
                                           double r, Rng& rng) {
  int bo = m, ao = 0, rr = 0;
  switch (uc) {
    case UseCase::UC1: break;
    case UseCase::UC2: ao = n; break;
    case UseCase::UC3: rr = o; break;
    case UseCase::UC4: rr = 2 * o; break;
  }
  AttemptTrial trial;
  while (true) {
    ++trial.steps;
    bool ok = true;
    for (int i = 0; i < bo; ++i) ok &= rng.bernoulli(p);
    for (int i = 0; i < ao; ++i) ok &= rng.bernoulli(q);
    for (int i = 0; i < rr; ++i) ok &= rng.bernoulli(r);
    trial.fci_rolls += bo + ao;
    trial.fdi_rolls += rr;
    if (ok) return trial;
    if (trial.steps > 100000000L) throw std::runtime_error("attempt simulation diverged");
  }
}

// ---------------------------------------------------------------------------
// Attack policy
// ---------------------------------------------------------------------------

struct OutstationTargets {
  std::set<std::uint16_t> bo_indices;                    // breakers to force open
  std::map<std::uint16_t, double> ao_values;             // setpoint index -> injected value
  std::map<std::uint16_t, double> rr_gen_values;         // analog-input index -> falsified MW
  std::map<std::uint16_t, double> rr_flow_values;        // analog-input index -> falsified MW
  std::map<std::uint16_t, std::uint16_t> mask_ai_by_ao;  // setpoint index -> masked input index
};

struct AttackPolicy {
  UseCase use_case = UseCase::UC1;
  double p = 0.8;  // binary-operate mutation success probability
  double q = 0.8;  // analog-operate
  double r = 0.6;  // read-response
  double fci_processing_s = 0.120;
  double fdi_processing_s = 0.170;
  double sniff_processing_s = 0.005;  // untargeted DNP3 parse-and-forward
  bool recompute_crc = true;
  int ingress_capacity = 6;
  int uc4_bo_after_masks = 1;  // corridor strike waits until masking is proven

  std::map<net::Ip, OutstationTargets> targets;

  void validate() const {
    auto unit = [](double v, const char* name) {
      if (v < 0.0 || v > 1.0) throw std::invalid_argument(std::string(name) + " must be in [0,1]");
    };
    unit(p, "p");
    unit(q, "q");
    unit(r, "r");
    if (fci_processing_s < 0 || fdi_processing_s < 0 || sniff_processing_s < 0)
      throw std::invalid_argument("processing delays must be >= 0");
    if (fdi_processing_s < fci_processing_s)
      throw std::invalid_argument("fdi processing delay must be >= fci processing delay");
    if (ingress_capacity < 1) throw std::invalid_argument("ingress capacity must be >= 1");
  }
};

struct MutationRecord {
  double t = 0.0;
  PacketClass cls = PacketClass::NonDnp3;
  bool attempted = false;
  bool succeeded = false;
  std::string original;
  std::string mutated;
  bool crc_recomputed = false;
  bool seq_preserved = true;
  std::string detail;  // mutated | bernoulli_miss | ingress_overflow | cached_drop | forwarded | undecodable
};

struct ClassCounters {
  long arrivals = 0;
  long attempted = 0;
  long succeeded = 0;
  long bernoulli_miss = 0;
  long overflow_drop = 0;
  long cached_drop = 0;
  long forwarded_clean = 0;
};

struct ProxyStats {
  ClassCounters bo, ao, rr, other;
  long non_dnp3_forwarded = 0;
  long undecodable = 0;
  long dnp3_arrivals = 0;
  double first_dnp3_arrival = -1.0;
  double last_dnp3_arrival = -1.0;

  long fci_attempts() const { return bo.attempted + ao.attempted; }
  long fdi_attempts() const { return rr.attempted; }
  long fci_successes() const { return bo.succeeded + ao.succeeded; }
  long fdi_successes() const { return rr.succeeded; }
  long misses() const {
    return bo.bernoulli_miss + ao.bernoulli_miss + rr.bernoulli_miss + bo.overflow_drop +
           ao.overflow_drop + rr.overflow_drop;
  }
  double measured_lambda() const {
    if (dnp3_arrivals < 2 || last_dnp3_arrival <= first_dnp3_arrival) return 0.0;
    return static_cast<double>(dnp3_arrivals) / (last_dnp3_arrival - first_dnp3_arrival);
  }
};

// ---------------------------------------------------------------------------
// Man-in-the-middle proxy
// ---------------------------------------------------------------------------

class MitmProxy {
 public:
  MitmProxy(net::Sim& sim, net::NodeId adversary, net::Ip gateway_ip,
            std::vector<net::Ip> outstation_ips, AttackPolicy policy, std::uint64_t rng_stream = 0xA77)
      : sim_(sim),
        node_(adversary),
        gateway_ip_(gateway_ip),
        outstation_ips_(std::move(outstation_ips)),
        policy_(std::move(policy)),
        rng_(sim.rng().fork(rng_stream)) {
    policy_.validate();
    sim_.set_interceptor(node_, [this](const net::Packet& p) { return intercept(p); });
  }

  // Two-phase engagement: learn the victims' true link addresses, then
  // poison the substation gateway (one binding per outstation) and every
  // outstation (the gateway binding).
  void engage(double at) {
    sim_.at(at, [this] {
      for (net::Ip victim : victims()) sim_.send_echo(node_, victim, 16, 0xAD, 0);
    });
    sim_.at(at + 0.5, [this] {
      for (net::Ip victim : victims()) {
        auto mac = sim_.arp_lookup(node_, victim);
        if (!mac) {
          sim_.log({{"t", sim_.now()}, {"type", "mitm"}, {"event", "victim_unreachable"},
                    {"ip", net::format_ip(victim)}});
          continue;
        }
        true_macs_[victim] = *mac;
      }
      Mac my_mac = sim_.iface_mac(sim_.first_iface(node_));
      auto gw_mac = true_macs_.find(gateway_ip_);
      for (net::Ip os_ip : outstation_ips_) {
        auto os_mac = true_macs_.find(os_ip);
        if (gw_mac != true_macs_.end())  // gateway now resolves the outstation to us
          sim_.send_arp_reply(node_, os_ip, my_mac, gw_mac->second);
        if (os_mac != true_macs_.end())  // outstation now resolves its gateway to us
          sim_.send_arp_reply(node_, gateway_ip_, my_mac, os_mac->second);
      }
      active_ = true;
      sim_.log({{"t", sim_.now()}, {"type", "mitm"}, {"event", "engaged"}});
    });
  }

  // Restore the true bindings and stop mutating; frames still in the service
  // queue are forwarded untouched.
  void disengage(double at) {
    sim_.at(at, [this] {
      for (net::Ip os_ip : outstation_ips_) {
        auto os_mac = true_macs_.find(os_ip);
        auto gw_mac = true_macs_.find(gateway_ip_);
        if (gw_mac != true_macs_.end() && os_mac != true_macs_.end()) {
          sim_.send_arp_reply(node_, os_ip, os_mac->second, gw_mac->second);
          sim_.send_arp_reply(node_, gateway_ip_, gw_mac->second, os_mac->second);
        }
      }
      active_ = false;
      sim_.log({{"t", sim_.now()}, {"type", "mitm"}, {"event", "disengaged"}});
    });
  }

  bool active() const { return active_; }
  const ProxyStats& stats() const { return stats_; }
  const std::vector<MutationRecord>& records() const { return records_; }

 private:
  using Mac = net::Mac;

  std::vector<net::Ip> victims() const {
    std::vector<net::Ip> v{gateway_ip_};
    v.insert(v.end(), outstation_ips_.begin(), outstation_ips_.end());
    return v;
  }

  struct QueueItem {
    net::Packet packet;
    PacketClass cls;
    net::Ip outstation = 0;
    double arrived = 0.0;
  };

  bool intercept(const net::Packet& p) {
    if (true_macs_.empty()) return false;  // not engaged yet

    bool is_dnp3_data = p.protocol == net::Protocol::MiniTcp && p.tcp_kind == net::TcpKind::Data &&
                        (p.src_port == sim_.dnp3_port || p.dst_port == sim_.dnp3_port);
    if (!active_ || !is_dnp3_data) {
      // non-DNP3 (and post-disengage) traffic is forwarded byte-identical
      ++stats_.non_dnp3_forwarded;
      forward(p);
      return true;
    }

    ++stats_.dnp3_arrivals;
    if (stats_.first_dnp3_arrival < 0) stats_.first_dnp3_arrival = sim_.now();
    stats_.last_dnp3_arrival = sim_.now();

    bool response_dir = p.src_port == sim_.dnp3_port;
    net::Ip outstation = response_dir ? p.src_ip : p.dst_ip;
    PacketClass cls = classify(p);
    counters(cls).arrivals++;

    if (busy_ && static_cast<int>(queue_.size()) >= policy_.ingress_capacity) {
      counters(cls).overflow_drop++;
      record(cls, false, false, "", "", "ingress_overflow");
      return true;  // single network buffer overflowed; sender will retransmit
    }
    queue_.push_back({p, cls, outstation, sim_.now()});
    if (!busy_) begin_service();
    return true;
  }

  PacketClass classify(const net::Packet& p) {
    dnp3::Message msg;
    try {
      msg = dnp3::decode_message(p.payload);
    } catch (const dnp3::DecodeError&) {
      return PacketClass::OtherDnp3;  // undecodable; forwarded untouched
    }
    switch (msg.app.function) {
      case dnp3::FunctionCode::Select:
      case dnp3::FunctionCode::Operate:
      case dnp3::FunctionCode::DirectOperate: {
        for (const auto& g : msg.app.objects) {
          if (g.kind == dnp3::GroupKind::BinaryOutputCommand) return PacketClass::BO;
          if (g.kind == dnp3::GroupKind::AnalogOutputCommand) return PacketClass::AO;
        }
        return PacketClass::OtherDnp3;
      }
      case dnp3::FunctionCode::SolicitedResponse:
      case dnp3::FunctionCode::UnsolicitedResponse:
        return PacketClass::RR;
      default:
        return PacketClass::OtherDnp3;
    }
  }

  double service_time(PacketClass cls) const {
    switch (cls) {
      case PacketClass::BO:
      case PacketClass::AO: return policy_.fci_processing_s;
      case PacketClass::RR: return policy_.fdi_processing_s;
      default: return policy_.sniff_processing_s;
    }
  }

  void begin_service() {
    if (queue_.empty()) {
      busy_ = false;
      return;
    }
    busy_ = true;
    QueueItem item = std::move(queue_.front());
    queue_.pop_front();
    sim_.after(service_time(item.cls), [this, item = std::move(item)]() mutable {
      complete(item);
      begin_service();
    });
  }

  struct VerdictKey {
    net::Ip src;
    std::uint16_t sport;
    net::Ip dst;
    std::uint16_t dport;
    std::uint32_t seq;
    auto operator<=>(const VerdictKey&) const = default;
  };

  void complete(QueueItem& item) {
    const net::Packet& p = item.packet;
    if (item.cls == PacketClass::OtherDnp3) {
      counters(item.cls).forwarded_clean++;
      forward(p);
      return;
    }

    dnp3::Message msg;
    try {
      msg = dnp3::decode_message(p.payload);
    } catch (const dnp3::DecodeError&) {
      ++stats_.undecodable;
      record(item.cls, false, false, "", "", "undecodable");
      forward(p);
      return;
    }

    // Remember operator setpoints for masking before any mutation decision.
    if (!(p.src_port == sim_.dnp3_port)) observe_setpoints(item.outstation, msg.app);

    auto [applicable, mutated, original_desc, mutated_desc] = mutate(item.cls, item.outstation, msg);
    if (!applicable) {
      counters(item.cls).forwarded_clean++;
      record(item.cls, false, false, original_desc, "", "forwarded");
      forward(p);
      return;
    }

    VerdictKey key{p.src_ip, p.src_port, p.dst_ip, p.dst_port, p.seq};
    auto cached = verdicts_.find(key);
    bool success;
    if (cached != verdicts_.end()) {
      success = cached->second;
      if (!success) {
        counters(item.cls).cached_drop++;
        record(item.cls, false, false, original_desc, "", "cached_drop");
        return;  // the same message keeps failing until the flow resets
      }
    } else {
      double prob = item.cls == PacketClass::BO   ? policy_.p
                    : item.cls == PacketClass::AO ? policy_.q
                                                  : policy_.r;
      success = rng_.bernoulli(prob);
      verdicts_[key] = success;
      counters(item.cls).attempted++;
      if (!success) {
        counters(item.cls).bernoulli_miss++;
        record(item.cls, true, false, original_desc, "", "bernoulli_miss");
        return;  // drop; the sender's retransmissions inherit this verdict
      }
      counters(item.cls).succeeded++;
      if (item.cls == PacketClass::RR && policy_.use_case == UseCase::UC4 && masking_possible_)
        ++mask_successes_;
    }

    net::Packet out = p;
    out.payload = reencode(p.payload, msg, mutated);
    record(item.cls, cached == verdicts_.end(), true, original_desc, mutated_desc, "mutated");
    forward(out);
  }

  // Rebuild the frame around the mutated fragment. With CRC recomputation
  // disabled the original block CRCs are kept, which any DNP3-aware decoder
  // flags immediately.
  Bytes reencode(const Bytes& original_raw, const dnp3::Message& msg,
                 const dnp3::AppFragment& mutated) {
    Bytes fresh = dnp3::encode_message(msg.link, msg.transport_seq, mutated);
    if (policy_.recompute_crc) return fresh;
    dnp3::Frame fresh_frame = dnp3::decode_frame(fresh);
    Bytes out = original_raw;
    std::size_t off = dnp3::kHeaderSize, src = 0;
    const Bytes& np = fresh_frame.payload;
    while (src < np.size() && off < out.size()) {
      std::size_t n = std::min({dnp3::kBlockSize, np.size() - src, out.size() - off});
      std::copy(np.begin() + src, np.begin() + src + n, out.begin() + off);
      off += n + 2;
      src += n;
    }
    return out;
  }

  void observe_setpoints(net::Ip outstation, const dnp3::AppFragment& frag) {
    auto t = policy_.targets.find(outstation);
    if (t == policy_.targets.end()) return;
    for (const auto& g : frag.objects) {
      if (g.kind != dnp3::GroupKind::AnalogOutputCommand) continue;
      for (const auto& pt : g.points) {
        auto m = t->second.mask_ai_by_ao.find(pt.index);
        if (m == t->second.mask_ai_by_ao.end()) continue;
        observed_setpoint_[{outstation, m->second}] = std::get<double>(pt.value);
        masking_possible_ = true;
      }
    }
  }

  struct MutationResult {
    bool applicable = false;
    dnp3::AppFragment fragment;
    std::string original;
    std::string mutated;
  };

  MutationResult mutate(PacketClass cls, net::Ip outstation, const dnp3::Message& msg) {
    MutationResult res;
    res.fragment = msg.app;
    auto t = policy_.targets.find(outstation);
    if (t == policy_.targets.end()) return res;
    const OutstationTargets& targets = t->second;

    switch (cls) {
      case PacketClass::BO: {
        if (policy_.use_case == UseCase::UC4 && mask_successes_ < policy_.uc4_bo_after_masks)
          return res;  // strike the line only once masking is established
        for (auto& g : res.fragment.objects) {
          if (g.kind != dnp3::GroupKind::BinaryOutputCommand) continue;
          for (auto& pt : g.points) {
            if (!targets.bo_indices.count(pt.index)) continue;
            auto code = std::get<dnp3::ControlCode>(pt.value);
            if (code == dnp3::ControlCode::Close || code == dnp3::ControlCode::LatchOn) {
              res.original += describe(pt.index, code);
              pt.value = dnp3::ControlCode::Trip;
              res.mutated += describe(pt.index, dnp3::ControlCode::Trip);
              res.applicable = true;
            }
          }
        }
        return res;
      }
      case PacketClass::AO: {
        if (policy_.use_case == UseCase::UC1) return res;
        for (auto& g : res.fragment.objects) {
          if (g.kind != dnp3::GroupKind::AnalogOutputCommand) continue;
          for (auto& pt : g.points) {
            auto target = targets.ao_values.find(pt.index);
            if (target == targets.ao_values.end()) continue;
            double old = std::get<double>(pt.value);
            if (old == target->second) continue;
            res.original += describe(pt.index, old);
            pt.value = target->second;
            res.mutated += describe(pt.index, target->second);
            res.applicable = true;
          }
        }
        return res;
      }
      case PacketClass::RR: {
        if (policy_.use_case == UseCase::UC1 || policy_.use_case == UseCase::UC2) return res;
        bool masking = policy_.use_case == UseCase::UC4 && masking_possible_;
        for (auto& g : res.fragment.objects) {
          if (g.kind != dnp3::GroupKind::AnalogInput) continue;
          for (auto& pt : g.points) {
            double old = std::get<double>(pt.value);
            if (masking) {
              // mask phase: show the last operator-commanded setpoint
              auto ob = observed_setpoint_.find({outstation, pt.index});
              if (ob != observed_setpoint_.end() && old != ob->second) {
                res.original += describe(pt.index, old);
                pt.value = ob->second;
                res.mutated += describe(pt.index, ob->second);
                res.applicable = true;
              }
              continue;
            }
            auto gen = targets.rr_gen_values.find(pt.index);
            if (gen != targets.rr_gen_values.end() && old != gen->second) {
              res.original += describe(pt.index, old);
              pt.value = gen->second;
              res.mutated += describe(pt.index, gen->second);
              res.applicable = true;
              continue;
            }
            if (policy_.use_case == UseCase::UC3) {
              auto flow = targets.rr_flow_values.find(pt.index);
              if (flow != targets.rr_flow_values.end() && old != flow->second) {
                res.original += describe(pt.index, old);
                pt.value = flow->second;
                res.mutated += describe(pt.index, flow->second);
                res.applicable = true;
              }
            }
          }
        }
        return res;
      }
      default: return res;
    }
  }

  static std::string describe(std::uint16_t index, dnp3::ControlCode code) {
    return "[" + std::to_string(index) + "]=" + dnp3::to_string(code) + " ";
  }
  static std::string describe(std::uint16_t index, double v) {
    return "[" + std::to_string(index) + "]=" + format_double(v) + " ";
  }

  void forward(const net::Packet& p) {
    Mac dst_mac = 0;
    auto it = true_macs_.find(p.dst_ip);
    if (it != true_macs_.end()) {
      dst_mac = it->second;
    } else {
      auto gw = true_macs_.find(gateway_ip_);
      if (gw == true_macs_.end()) return;  // cannot forward yet
      dst_mac = gw->second;
    }
    sim_.forward_frame(node_, dst_mac, p);
  }

  void record(PacketClass cls, bool attempted, bool succeeded, const std::string& original,
              const std::string& mutated, const std::string& detail) {
    MutationRecord rec;
    rec.t = sim_.now();
    rec.cls = cls;
    rec.attempted = attempted;
    rec.succeeded = succeeded;
    rec.original = original;
    rec.mutated = mutated;
    rec.crc_recomputed = succeeded && policy_.recompute_crc;
    rec.seq_preserved = true;
    rec.detail = detail;
    records_.push_back(rec);
    sim_.log({{"t", rec.t}, {"type", "mutation"}, {"class", to_string(cls)},
              {"attempted", attempted}, {"succeeded", succeeded}, {"detail", detail},
              {"original", original}, {"mutated", mutated}});
  }

  ClassCounters& counters(PacketClass cls) {
    switch (cls) {
      case PacketClass::BO: return stats_.bo;
      case PacketClass::AO: return stats_.ao;
      case PacketClass::RR: return stats_.rr;
      default: return stats_.other;
    }
  }

  net::Sim& sim_;
  net::NodeId node_;
  net::Ip gateway_ip_;
  std::vector<net::Ip> outstation_ips_;
  AttackPolicy policy_;
  Rng rng_;

  bool active_ = false;
  std::map<net::Ip, Mac> true_macs_;
  std::deque<QueueItem> queue_;
  bool busy_ = false;
  std::map<VerdictKey, bool> verdicts_;
  std::map<std::pair<net::Ip, std::uint16_t>, double> observed_setpoint_;
  bool masking_possible_ = false;
  int mask_successes_ = 0;
  ProxyStats stats_;
  std::vector<MutationRecord> records_;
};

// ---------------------------------------------------------------------------
// DoS driver
// ---------------------------------------------------------------------------

struct DosParams {
  net::Ip target = 0;
  std::size_t payload_bytes = 1000;
  double interval_s = 1.0;
  double start_s = 0.0;
  double duration_s = 0.0;  // zero-duration floods emit nothing
  double jitter_s = 0.0;    // per-emission seeded scheduling noise
};

inline net::FloodId dos_run(net::Sim& sim, net::NodeId adversary, const DosParams& params) {
  if (params.payload_bytes < 1) throw std::invalid_argument("flood payload must be >= 1 byte");
  if (params.interval_s <= 0) throw std::invalid_argument("flood interval must be > 0");
  if (params.duration_s < 0) throw std::invalid_argument("flood duration must be >= 0");
  if (params.duration_s == 0.0) return -1;  // zero-duration: no packets, no-op metrics
  net::FloodId id = sim.icmp_flood(adversary, params.target, params.payload_bytes,
                                   params.interval_s, params.start_s, params.jitter_s);
  // The cancel event's insertion order precedes any tick scheduled during
  // the run, so an emission landing exactly on start + duration loses the
  // tie and does not fire.
  sim.at(params.start_s + params.duration_s, [&sim, id] { sim.cancel_flood(id); });
  return id;
}

}  // namespace scadasim::attack
