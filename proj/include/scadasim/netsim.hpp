#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scadasim/rng.hpp"
#include "scadasim/util.hpp"

// Deterministic discrete-event IP network emulator: broadcast segments with
// per-interface FIFO egress queues (bandwidth + propagation delay +
// tail-drop), static longest-prefix routing, ARP with overwritable bindings,
// ICMP echo, and a miniature reliable transport ("MiniTcp") with sequence
// numbers, fixed RTO retransmission and port-changing reconnects.
//
// Everything runs in virtual time under a single event loop ordered by
// (timestamp, insertion order), so identical inputs and seeds replay to
// byte-identical event logs.

namespace scadasim::net {

using Json = nlohmann::json;

using NodeId = int;
using SegmentId = int;
using IfaceId = int;
using ConnId = int;
using FloodId = int;

// ---------------------------------------------------------------------------
// Addressing
// ---------------------------------------------------------------------------

using Ip = std::uint32_t;
using Mac = std::uint64_t;

constexpr Mac kBroadcastMac = 0xFFFFFFFFFFFFULL;

inline Ip parse_ip(const std::string& s) {
  unsigned a, b, c, d;
  char extra;
  if (std::sscanf(s.c_str(), "%u.%u.%u.%u%c", &a, &b, &c, &d, &extra) != 4 || a > 255 || b > 255 ||
      c > 255 || d > 255)
    throw std::invalid_argument("bad IPv4 address: " + s);
  return (a << 24) | (b << 16) | (c << 8) | d;
}

inline std::string format_ip(Ip ip) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (ip >> 24) & 0xFF, (ip >> 16) & 0xFF,
                (ip >> 8) & 0xFF, ip & 0xFF);
  return buf;
}

inline std::string format_mac(Mac mac) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x",
                static_cast<unsigned>((mac >> 40) & 0xFF), static_cast<unsigned>((mac >> 32) & 0xFF),
                static_cast<unsigned>((mac >> 24) & 0xFF), static_cast<unsigned>((mac >> 16) & 0xFF),
                static_cast<unsigned>((mac >> 8) & 0xFF), static_cast<unsigned>(mac & 0xFF));
  return buf;
}

struct Cidr {
  Ip network = 0;
  int prefix = 0;
  bool contains(Ip ip) const {
    if (prefix == 0) return true;
    Ip mask = prefix >= 32 ? 0xFFFFFFFFu : ~((1u << (32 - prefix)) - 1);
    return (ip & mask) == (network & mask);
  }
};

inline Cidr parse_cidr(const std::string& s) {
  auto slash = s.find('/');
  if (slash == std::string::npos) return {parse_ip(s), 32};
  Cidr c;
  c.network = parse_ip(s.substr(0, slash));
  c.prefix = std::stoi(s.substr(slash + 1));
  if (c.prefix < 0 || c.prefix > 32) throw std::invalid_argument("bad prefix: " + s);
  return c;
}

// ---------------------------------------------------------------------------
// Links and packets
// ---------------------------------------------------------------------------

struct LinkSpec {
  double bandwidth_bps = 10e6;     // > 0
  double propagation_s = 160e-6;   // >= 0
  int queue_capacity = 64;         // >= 1, packets waiting behind the one in service
};

enum class Protocol : std::uint8_t { MiniTcp, Icmp, Arp };

enum class TcpKind : std::uint8_t { Syn, SynAck, Data, Ack };
enum class IcmpKind : std::uint8_t { EchoRequest, EchoReply };
enum class ArpKind : std::uint8_t { Request, Reply };

struct Packet {
  std::uint64_t id = 0;
  Protocol protocol = Protocol::MiniTcp;
  Ip src_ip = 0, dst_ip = 0;
  std::uint16_t src_port = 0, dst_port = 0;  // MiniTcp only

  TcpKind tcp_kind = TcpKind::Data;
  std::uint32_t seq = 0;  // MiniTcp data sequence
  std::uint32_t ack = 0;

  IcmpKind icmp_kind = IcmpKind::EchoRequest;
  std::uint16_t icmp_id = 0, icmp_seq = 0;
  std::size_t icmp_payload = 0;  // synthetic payload size in bytes

  ArpKind arp_kind = ArpKind::Request;
  Ip arp_ip = 0;    // binding advertised / queried
  Mac arp_mac = 0;  // binding advertised (replies)

  Bytes payload;  // MiniTcp data payload
  std::size_t header_overhead = 40;
  bool is_retransmission = false;
  double created_at = 0.0;

  std::size_t size_bytes() const { return header_overhead + payload.size() + icmp_payload; }
};

inline std::size_t overhead_for(Protocol p) {
  switch (p) {
    case Protocol::MiniTcp: return 40;  // IP + TCP-ish
    case Protocol::Icmp: return 28;     // IP + ICMP echo
    case Protocol::Arp: return 28;
  }
  return 28;
}

// ---------------------------------------------------------------------------
// Telemetry
// ---------------------------------------------------------------------------

struct ThroughputSample {
  double total_payload_bytes = 0.0;
  double total_transmission_time = 0.0;
  double throughput_bps = 0.0;  // bytes per second
  double goodput_bps = 0.0;     // bytes per second, retransmitted copies excluded
};

struct WindowMetrics {
  ThroughputSample dnp3;
  std::vector<double> rtt_s;       // MiniTcp samples on the DNP3 port inside the window
  int retransmissions = 0;         // DNP3-port data retransmissions inside the window
  int flow_count = 0;              // established MiniTcp flows at window end
  int link_drops = 0;              // frames tail-dropped inside the window
};

struct RttSample {
  double t = 0.0;
  double rtt = 0.0;
  bool dnp3 = false;
};

struct DataTxRecord {
  double t = 0.0;
  std::size_t payload_bytes = 0;
  bool retransmission = false;
  bool dnp3 = false;
};

struct FlowKey {
  Ip src = 0;
  std::uint16_t src_port = 0;
  Ip dst = 0;
  std::uint16_t dst_port = 0;
  auto operator<=>(const FlowKey&) const = default;
};

enum class FlowState { Connecting, Established, Closed };

// ---------------------------------------------------------------------------
// Sim
// ---------------------------------------------------------------------------

class Sim {
 public:
  explicit Sim(std::uint64_t seed) : rng_(seed) {}
  Sim(const Sim&) = delete;
  Sim& operator=(const Sim&) = delete;

  double now() const { return now_; }
  Rng& rng() { return rng_; }

  std::uint16_t dnp3_port = 20000;
  bool log_frames = true;  // per-hop tx/rx records in the event log

  // ----- scheduling ---------------------------------------------------------

  void at(double t, std::function<void()> fn) {
    queue_.push(Event{std::max(t, now_), next_order_++, std::move(fn)});
  }
  void after(double dt, std::function<void()> fn) { at(now_ + dt, std::move(fn)); }

  // Process all events with t <= until, in (time, insertion) order; the
  // clock lands exactly on `until`. Returns the number of events processed.
  std::size_t advance(double until) {
    if (until < now_) throw std::invalid_argument("advance() target is in the past");
    std::size_t processed = 0;
    while (!queue_.empty() && queue_.top().t <= until) {
      Event ev = queue_.top();
      queue_.pop();
      now_ = ev.t;
      ev.fn();
      ++processed;
    }
    now_ = until;
    return processed;
  }

  bool idle() const { return queue_.empty(); }

  // ----- topology ------------------------------------------------------------

  NodeId add_node(const std::string& name, bool forwarding = false) {
    nodes_.push_back(std::make_unique<Node>());
    Node& n = *nodes_.back();
    n.id = static_cast<NodeId>(nodes_.size() - 1);
    n.name = name;
    n.forwarding = forwarding;
    return n.id;
  }

  SegmentId add_segment(const std::string& name, LinkSpec spec) {
    if (spec.bandwidth_bps <= 0) throw std::invalid_argument("bandwidth must be > 0");
    if (spec.queue_capacity < 1) throw std::invalid_argument("queue capacity must be >= 1");
    segments_.push_back(std::make_unique<Segment>());
    Segment& s = *segments_.back();
    s.id = static_cast<SegmentId>(segments_.size() - 1);
    s.name = name;
    s.spec = spec;
    return s.id;
  }

  IfaceId attach(NodeId node, SegmentId segment, const std::string& cidr, Mac mac = 0) {
    ifaces_.push_back(std::make_unique<Iface>());
    Iface& ifc = *ifaces_.back();
    ifc.id = static_cast<IfaceId>(ifaces_.size() - 1);
    ifc.node = node;
    ifc.segment = segment;
    Cidr c = parse_cidr(cidr);
    if (c.prefix == 32) c.prefix = 24;
    ifc.ip = c.network;
    ifc.subnet = c;
    ifc.mac = mac ? mac : (0x020000000000ULL | static_cast<Mac>(ifc.id + 1));
    nodes_[node]->ifaces.push_back(ifc.id);
    segments_[segment]->members.push_back(ifc.id);
    return ifc.id;
  }

  void add_route(NodeId node, const std::string& cidr, Ip next_hop) {
    nodes_[node]->routes.push_back({parse_cidr(cidr), next_hop});
  }
  void set_default_route(NodeId node, Ip next_hop) { add_route(node, "0.0.0.0/0", next_hop); }

  void seed_arp(NodeId node, Ip ip, Mac mac) { nodes_[node]->arp[ip] = mac; }

  const std::string& node_name(NodeId n) const { return nodes_[n]->name; }
  NodeId node_by_name(const std::string& name) const {
    for (const auto& n : nodes_)
      if (n->name == name) return n->id;
    throw std::invalid_argument("unknown node: " + name);
  }
  Ip node_ip(NodeId n) const {
    if (nodes_[n]->ifaces.empty()) throw std::logic_error("node has no interface");
    return ifaces_[nodes_[n]->ifaces.front()]->ip;
  }
  Mac iface_mac(IfaceId i) const { return ifaces_[i]->mac; }
  IfaceId first_iface(NodeId n) const { return nodes_[n]->ifaces.front(); }

  // ----- observation hooks ----------------------------------------------------

  // Ingress tap: sees every frame delivered to this node's interfaces,
  // including frames not addressed to its IP.
  void set_tap(NodeId node, std::function<void(const Packet&)> tap) {
    nodes_[node]->tap = std::move(tap);
  }

  // Interceptor: consulted for frames whose destination IP is not local.
  // Returning true consumes the packet (the normal forward/drop path is
  // skipped). Used by the man-in-the-middle proxy.
  void set_interceptor(NodeId node, std::function<bool(const Packet&)> fn) {
    nodes_[node]->interceptor = std::move(fn);
  }

  // Test hook: force-drop matching frames at enqueue time.
  void set_loss_filter(std::function<bool(const Packet&)> fn) { loss_filter_ = std::move(fn); }

  // ----- ARP -----------------------------------------------------------------

  // Direct table write; unsolicited replies funnel through here, so bindings
  // are overwritable by design (that permissiveness is the modeled
  // vulnerability).
  void arp_update(NodeId node, Ip ip, Mac mac) {
    auto& table = nodes_[node]->arp;
    auto it = table.find(ip);
    bool changed = it == table.end() || it->second != mac;
    table[ip] = mac;
    if (changed) {
      log({{"t", now_}, {"type", "arp_update"}, {"node", nodes_[node]->name},
           {"ip", format_ip(ip)}, {"mac", format_mac(mac)}});
      flush_arp_pending(node, ip);
    }
  }

  std::optional<Mac> arp_lookup(NodeId node, Ip ip) const {
    auto it = nodes_[node]->arp.find(ip);
    if (it == nodes_[node]->arp.end()) return std::nullopt;
    return it->second;
  }

  // Gratuitous/unsolicited ARP reply advertising (ip -> mac), unicast to a
  // victim's interface mac.
  void send_arp_reply(NodeId from, Ip advertised_ip, Mac advertised_mac, Mac to_mac) {
    Packet p;
    p.id = next_packet_id_++;
    p.protocol = Protocol::Arp;
    p.arp_kind = ArpKind::Reply;
    p.arp_ip = advertised_ip;
    p.arp_mac = advertised_mac;
    p.header_overhead = overhead_for(Protocol::Arp);
    p.created_at = now_;
    p.src_ip = ifaces_[first_iface(from)]->ip;
    enqueue_frame(first_iface(from), to_mac, p);
  }

  // ----- IP send ---------------------------------------------------------------

  void send_ip(NodeId node, Packet p) {
    p.created_at = now_;
    if (p.id == 0) p.id = next_packet_id_++;
    route_and_send(node, std::move(p));
  }

  // Raw forward used by the interceptor: place a frame on a specific
  // interface addressed to a specific link address, bypassing ARP.
  void forward_frame(NodeId node, Mac dst_mac, const Packet& p) {
    enqueue_frame(first_iface(node), dst_mac, p);
  }

  // ----- ICMP ------------------------------------------------------------------

  void send_echo(NodeId node, Ip dst, std::size_t payload_bytes, std::uint16_t ident,
                 std::uint16_t seq) {
    Packet p;
    p.protocol = Protocol::Icmp;
    p.icmp_kind = IcmpKind::EchoRequest;
    p.icmp_id = ident;
    p.icmp_seq = seq;
    p.icmp_payload = payload_bytes;
    p.header_overhead = overhead_for(Protocol::Icmp);
    p.src_ip = ifaces_[first_iface(node)]->ip;
    p.dst_ip = dst;
    send_ip(node, std::move(p));
  }

  // Emits one echo request every `interval_s` until cancelled. A nonzero
  // jitter adds a seeded uniform [0, jitter_s) delay to every emission,
  // modeling sender-side scheduling noise (and keeping periodic floods from
  // phase-locking with periodic polls).
  FloodId icmp_flood(NodeId node, Ip dst, std::size_t payload_bytes, double interval_s,
                     double start_at = -1.0, double jitter_s = 0.0) {
    if (payload_bytes < 1) throw std::invalid_argument("flood payload must be >= 1 byte");
    if (interval_s <= 0) throw std::invalid_argument("flood interval must be > 0");
    floods_.push_back(Flood{node, dst, payload_bytes, interval_s, jitter_s, false, 0});
    FloodId id = static_cast<FloodId>(floods_.size() - 1);
    double t0 = start_at < now_ ? now_ : start_at;
    at(t0, [this, id] { flood_tick(id); });
    return id;
  }

  void cancel_flood(FloodId id) { floods_[id].cancelled = true; }
  int flood_emissions(FloodId id) const { return floods_[id].emitted; }

  // Called on every echo reply delivered to its requester.
  std::function<void(NodeId, const Packet&)> on_echo_reply;

  // ----- MiniTcp ---------------------------------------------------------------

  struct ConnHandlers {
    std::function<void(ConnId)> on_established;
    std::function<void(ConnId, const Bytes&)> on_message;
    std::function<void(ConnId, const Bytes&)> on_send_failed;  // payload abandoned
    std::function<void(ConnId)> on_closed;
  };

  struct TcpOptions {
    double rto_s = 0.2;
    int max_retries = 5;
    bool auto_reconnect = true;
  };

  void tcp_listen(NodeId node, std::uint16_t port, ConnHandlers handlers,
                  std::function<void(ConnId)> on_accept = {}) {
    listeners_[{node, port}] = Listener{std::move(handlers), std::move(on_accept)};
  }

  ConnId tcp_connect(NodeId node, Ip dst_ip, std::uint16_t dst_port, ConnHandlers handlers) {
    return tcp_connect(node, dst_ip, dst_port, std::move(handlers), TcpOptions{});
  }

  ConnId tcp_connect(NodeId node, Ip dst_ip, std::uint16_t dst_port, ConnHandlers handlers,
                     TcpOptions opts) {
    conns_.push_back(std::make_unique<Conn>());
    Conn& c = *conns_.back();
    c.id = static_cast<ConnId>(conns_.size() - 1);
    c.node = node;
    c.client = true;
    c.local_ip = ifaces_[first_iface(node)]->ip;
    c.local_port = nodes_[node]->next_ephemeral_port++;
    c.remote_ip = dst_ip;
    c.remote_port = dst_port;
    c.handlers = std::move(handlers);
    c.opts = opts;
    c.state = FlowState::Connecting;
    register_flow(c);
    send_control(c, TcpKind::Syn);
    return c.id;
  }

  void tcp_send(ConnId id, Bytes payload) {
    Conn& c = *conns_[id];
    c.tx_queue.push_back(std::move(payload));
    pump(c);
  }

  FlowState tcp_state(ConnId id) const { return conns_[id]->state; }
  std::uint16_t tcp_local_port(ConnId id) const { return conns_[id]->local_port; }

  int established_flow_count() const {
    int n = 0;
    for (const auto& [key, st] : flows_)
      if (st == FlowState::Established) ++n;
    return n;
  }
  int total_flows_seen() const { return static_cast<int>(flows_.size()); }

  // ----- measurement -------------------------------------------------------------

  WindowMetrics measure(double t0, double t1) const {
    if (t1 <= t0) throw std::invalid_argument("measurement window must have positive length");
    WindowMetrics wm;
    double total = 0.0, retx_bytes = 0.0;
    for (const auto& rec : data_tx_) {
      if (rec.t < t0 || rec.t >= t1 || !rec.dnp3) continue;
      total += static_cast<double>(rec.payload_bytes);
      if (rec.retransmission) {
        retx_bytes += static_cast<double>(rec.payload_bytes);
        ++wm.retransmissions;
      }
    }
    wm.dnp3.total_payload_bytes = total;
    wm.dnp3.total_transmission_time = t1 - t0;
    wm.dnp3.throughput_bps = total / (t1 - t0);
    wm.dnp3.goodput_bps = (total - retx_bytes) / (t1 - t0);
    for (const auto& s : rtt_samples_)
      if (s.t >= t0 && s.t < t1 && s.dnp3) wm.rtt_s.push_back(s.rtt);
    for (const auto& d : drop_times_)
      if (d >= t0 && d < t1) ++wm.link_drops;
    wm.flow_count = established_flow_count();
    return wm;
  }

  const std::vector<RttSample>& rtt_samples() const { return rtt_samples_; }
  const std::vector<DataTxRecord>& data_transmissions() const { return data_tx_; }
  const std::map<FlowKey, FlowState>& flows() const { return flows_; }

  // conservation counters (frame copies on links)
  std::uint64_t frames_sent = 0;
  std::uint64_t frames_delivered = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t frames_inflight() const { return frames_sent - frames_delivered - frames_dropped; }

  // ----- event log ----------------------------------------------------------------

  void log(Json record) {
    if (log_sink_)
      log_sink_(record.dump());
    else
      log_lines_.push_back(record.dump());
  }
  void set_log_sink(std::function<void(const std::string&)> sink) { log_sink_ = std::move(sink); }
  const std::vector<std::string>& log_lines() const { return log_lines_; }

 private:
  struct Event {
    double t;
    std::uint64_t order;
    std::function<void()> fn;
    bool operator>(const Event& o) const { return t != o.t ? t > o.t : order > o.order; }
  };

  struct RouteEntry {
    Cidr prefix;
    Ip next_hop;
  };

  struct Node {
    NodeId id = 0;
    std::string name;
    bool forwarding = false;
    std::vector<IfaceId> ifaces;
    std::vector<RouteEntry> routes;
    std::map<Ip, Mac> arp;
    std::map<Ip, std::vector<std::pair<IfaceId, Packet>>> arp_pending;
    std::set<Ip> arp_inflight;
    std::function<void(const Packet&)> tap;
    std::function<bool(const Packet&)> interceptor;
    std::uint16_t next_ephemeral_port = 49152;
  };

  struct Iface {
    IfaceId id = 0;
    NodeId node = 0;
    SegmentId segment = 0;
    Ip ip = 0;
    Cidr subnet;
    Mac mac = 0;
    std::deque<std::pair<Mac, Packet>> queue;
    bool busy = false;
  };

  struct Segment {
    SegmentId id = 0;
    std::string name;
    LinkSpec spec;
    std::vector<IfaceId> members;
  };

  struct Listener {
    ConnHandlers handlers;
    std::function<void(ConnId)> on_accept;
  };

  struct Inflight {
    TcpKind kind = TcpKind::Data;
    std::uint32_t seq = 0;
    Bytes payload;
    double first_tx = 0.0;
    int tx_count = 0;
  };

  struct Conn {
    ConnId id = 0;
    NodeId node = 0;
    bool client = false;
    Ip local_ip = 0, remote_ip = 0;
    std::uint16_t local_port = 0, remote_port = 0;
    FlowState state = FlowState::Connecting;
    TcpOptions opts;
    ConnHandlers handlers;
    std::deque<Bytes> tx_queue;
    std::optional<Inflight> inflight;
    std::uint32_t next_seq = 1;
    std::uint32_t rx_expected = 1;
    std::uint64_t timer_gen = 0;
    ConnId peer = -1;  // server<->client linkage once established
  };

  struct Flood {
    NodeId node;
    Ip dst;
    std::size_t payload;
    double interval;
    double jitter;
    bool cancelled;
    int emitted;
  };

  // ---- internals -------------------------------------------------------------

  void flood_tick(FloodId id) {
    Flood& f = floods_[id];
    if (f.cancelled) return;
    send_echo(f.node, f.dst, f.payload, static_cast<std::uint16_t>(0xD05),
              static_cast<std::uint16_t>(f.emitted & 0xFFFF));
    ++f.emitted;
    double delay = f.interval + (f.jitter > 0 ? rng_.uniform() * f.jitter : 0.0);
    after(delay, [this, id] { flood_tick(id); });
  }

  void route_and_send(NodeId node, Packet p) {
    Node& n = *nodes_[node];
    // on-link?
    for (IfaceId ifid : n.ifaces) {
      Iface& ifc = *ifaces_[ifid];
      if (ifc.subnet.contains(p.dst_ip)) {
        resolve_and_send(ifid, p.dst_ip, std::move(p));
        return;
      }
    }
    // longest-prefix route
    const RouteEntry* best = nullptr;
    for (const auto& r : n.routes)
      if (r.prefix.contains(p.dst_ip) && (!best || r.prefix.prefix > best->prefix.prefix)) best = &r;
    if (!best) {
      log({{"t", now_}, {"type", "drop"}, {"reason", "no_route"}, {"node", n.name},
           {"dst", format_ip(p.dst_ip)}});
      drop_times_.push_back(now_);
      return;
    }
    for (IfaceId ifid : n.ifaces) {
      Iface& ifc = *ifaces_[ifid];
      if (ifc.subnet.contains(best->next_hop)) {
        resolve_and_send(ifid, best->next_hop, std::move(p));
        return;
      }
    }
    log({{"t", now_}, {"type", "drop"}, {"reason", "no_route"}, {"node", n.name},
         {"dst", format_ip(p.dst_ip)}});
    drop_times_.push_back(now_);
  }

  void resolve_and_send(IfaceId iface, Ip next_hop, Packet p) {
    Node& n = *nodes_[ifaces_[iface]->node];
    auto it = n.arp.find(next_hop);
    if (it != n.arp.end()) {
      enqueue_frame(iface, it->second, std::move(p));
      return;
    }
    n.arp_pending[next_hop].emplace_back(iface, std::move(p));
    if (!n.arp_inflight.count(next_hop)) {
      n.arp_inflight.insert(next_hop);
      Packet req;
      req.id = next_packet_id_++;
      req.protocol = Protocol::Arp;
      req.arp_kind = ArpKind::Request;
      req.arp_ip = next_hop;
      req.header_overhead = overhead_for(Protocol::Arp);
      req.src_ip = ifaces_[iface]->ip;
      req.created_at = now_;
      enqueue_frame(iface, kBroadcastMac, req);
      NodeId node = n.id;
      after(arp_timeout_s_, [this, node, next_hop] {
        Node& nn = *nodes_[node];
        nn.arp_inflight.erase(next_hop);
        if (!nn.arp.count(next_hop)) {
          auto pend = nn.arp_pending.find(next_hop);
          if (pend != nn.arp_pending.end() && !pend->second.empty()) {
            log({{"t", now_}, {"type", "drop"}, {"reason", "arp_unresolvable"},
                 {"node", nn.name}, {"ip", format_ip(next_hop)},
                 {"count", pend->second.size()}});
            for (std::size_t i = 0; i < pend->second.size(); ++i) drop_times_.push_back(now_);
            nn.arp_pending.erase(pend);
          }
        }
      });
    }
  }

  void flush_arp_pending(NodeId node, Ip ip) {
    Node& n = *nodes_[node];
    auto it = n.arp_pending.find(ip);
    if (it == n.arp_pending.end()) return;
    auto pend = std::move(it->second);
    n.arp_pending.erase(it);
    Mac mac = n.arp.at(ip);
    for (auto& [iface, pkt] : pend) enqueue_frame(iface, mac, std::move(pkt));
  }

  void enqueue_frame(IfaceId iface, Mac dst_mac, Packet p) {
    Iface& ifc = *ifaces_[iface];
    Segment& seg = *segments_[ifc.segment];
    if (loss_filter_ && loss_filter_(p)) {
      ++frames_sent;
      ++frames_dropped;
      drop_times_.push_back(now_);
      log({{"t", now_}, {"type", "drop"}, {"reason", "forced_loss"},
           {"node", nodes_[ifc.node]->name}, {"packet", p.id}});
      return;
    }
    ++frames_sent;
    if (ifc.busy && static_cast<int>(ifc.queue.size()) >= seg.spec.queue_capacity) {
      ++frames_dropped;
      drop_times_.push_back(now_);
      log({{"t", now_}, {"type", "drop"}, {"reason", "queue_full"},
           {"node", nodes_[ifc.node]->name}, {"segment", seg.name}, {"size", p.size_bytes()},
           {"proto", proto_name(p)}});
      return;
    }
    ifc.queue.emplace_back(dst_mac, std::move(p));
    if (!ifc.busy) start_service(iface);
  }

  void start_service(IfaceId iface) {
    Iface& ifc = *ifaces_[iface];
    if (ifc.queue.empty()) {
      ifc.busy = false;
      return;
    }
    ifc.busy = true;
    Mac dst_mac = ifc.queue.front().first;
    Packet pkt = std::move(ifc.queue.front().second);
    ifc.queue.pop_front();
    Segment& seg = *segments_[ifc.segment];
    double tx_time = static_cast<double>(pkt.size_bytes()) * 8.0 / seg.spec.bandwidth_bps;
    if (log_frames)
      log({{"t", now_}, {"type", "tx"}, {"node", nodes_[ifc.node]->name}, {"segment", seg.name},
           {"proto", proto_name(pkt)}, {"size", pkt.size_bytes()}, {"src", format_ip(pkt.src_ip)},
           {"dst", format_ip(pkt.dst_ip)}, {"packet", pkt.id}});
    double done = now_ + tx_time;
    double arrive = done + seg.spec.propagation_s;
    SegmentId seg_id = ifc.segment;
    at(arrive, [this, seg_id, iface, dst_mac, pkt = std::move(pkt)]() mutable {
      deliver_on_segment(seg_id, iface, dst_mac, std::move(pkt));
    });
    at(done, [this, iface] { start_service(iface); });
  }

  void deliver_on_segment(SegmentId seg, IfaceId from, Mac dst_mac, Packet pkt) {
    bool delivered = false;
    for (IfaceId member : segments_[seg]->members) {
      if (member == from) continue;
      Iface& ifc = *ifaces_[member];
      if (dst_mac == kBroadcastMac || ifc.mac == dst_mac) {
        delivered = true;
        receive_frame(member, pkt);
      } else if (nodes_[ifc.node]->tap) {
        // promiscuous observer on a shared broadcast domain (how the IDS
        // taps see host-to-host frames that never cross the router)
        nodes_[ifc.node]->tap(pkt);
      }
    }
    if (delivered)
      ++frames_delivered;
    else {
      ++frames_dropped;
      drop_times_.push_back(now_);
      log({{"t", now_}, {"type", "drop"}, {"reason", "no_receiver"},
           {"segment", segments_[seg]->name}, {"packet", pkt.id}});
    }
  }

  void receive_frame(IfaceId iface, const Packet& pkt) {
    Iface& ifc = *ifaces_[iface];
    Node& n = *nodes_[ifc.node];
    if (log_frames)
      log({{"t", now_}, {"type", "rx"}, {"node", n.name}, {"proto", proto_name(pkt)},
           {"size", pkt.size_bytes()}, {"src", format_ip(pkt.src_ip)},
           {"dst", format_ip(pkt.dst_ip)}, {"packet", pkt.id}});
    if (n.tap) n.tap(pkt);

    if (pkt.protocol == Protocol::Arp) {
      handle_arp(iface, pkt);
      return;
    }
    bool local = false;
    for (IfaceId i : n.ifaces)
      if (ifaces_[i]->ip == pkt.dst_ip) local = true;
    if (local) {
      handle_local(ifc.node, pkt);
      return;
    }
    if (n.interceptor && n.interceptor(pkt)) return;
    if (n.forwarding) {
      route_and_send(ifc.node, pkt);
      return;
    }
    log({{"t", now_}, {"type", "drop"}, {"reason", "not_for_host"}, {"node", n.name},
         {"packet", pkt.id}});
    drop_times_.push_back(now_);
  }

  void handle_arp(IfaceId iface, const Packet& pkt) {
    Node& n = *nodes_[ifaces_[iface]->node];
    if (pkt.arp_kind == ArpKind::Request) {
      for (IfaceId i : n.ifaces) {
        Iface& mine = *ifaces_[i];
        if (mine.ip == pkt.arp_ip) {
          // unicast reply to the requester; its mac is learned from the
          // segment (the requester's frame came from its interface)
          Mac requester = find_mac_by_ip(mine.segment, pkt.src_ip);
          if (requester) send_arp_reply_from(i, mine.ip, mine.mac, requester);
        }
      }
      return;
    }
    // Replies (solicited or not) overwrite the binding.
    arp_update(n.id, pkt.arp_ip, pkt.arp_mac);
  }

  Mac find_mac_by_ip(SegmentId seg, Ip ip) const {
    for (IfaceId member : segments_[seg]->members)
      if (ifaces_[member]->ip == ip) return ifaces_[member]->mac;
    return 0;
  }

  void send_arp_reply_from(IfaceId iface, Ip ip, Mac mac, Mac to_mac) {
    Packet p;
    p.id = next_packet_id_++;
    p.protocol = Protocol::Arp;
    p.arp_kind = ArpKind::Reply;
    p.arp_ip = ip;
    p.arp_mac = mac;
    p.header_overhead = overhead_for(Protocol::Arp);
    p.src_ip = ip;
    p.created_at = now_;
    enqueue_frame(iface, to_mac, p);
  }

  void handle_local(NodeId node, const Packet& pkt) {
    switch (pkt.protocol) {
      case Protocol::Icmp: handle_icmp(node, pkt); return;
      case Protocol::MiniTcp: handle_tcp(node, pkt); return;
      case Protocol::Arp: return;
    }
  }

  void handle_icmp(NodeId node, const Packet& pkt) {
    if (pkt.icmp_kind == IcmpKind::EchoRequest) {
      Packet reply;
      reply.protocol = Protocol::Icmp;
      reply.icmp_kind = IcmpKind::EchoReply;
      reply.icmp_id = pkt.icmp_id;
      reply.icmp_seq = pkt.icmp_seq;
      reply.icmp_payload = pkt.icmp_payload;
      reply.header_overhead = overhead_for(Protocol::Icmp);
      reply.src_ip = pkt.dst_ip;
      reply.dst_ip = pkt.src_ip;
      send_ip(node, std::move(reply));
    } else if (on_echo_reply) {
      on_echo_reply(node, pkt);
    }
  }

  Conn* find_conn(NodeId node, const Packet& pkt) {
    for (auto& cp : conns_) {
      Conn& c = *cp;
      if (c.node != node || c.state == FlowState::Closed) continue;
      if (c.local_ip == pkt.dst_ip && c.local_port == pkt.dst_port && c.remote_ip == pkt.src_ip &&
          c.remote_port == pkt.src_port)
        return &c;
    }
    return nullptr;
  }

  void handle_tcp(NodeId node, const Packet& pkt) {
    if (pkt.tcp_kind == TcpKind::Syn) {
      auto lit = listeners_.find({node, pkt.dst_port});
      if (lit == listeners_.end()) return;  // no listener: silently ignored
      Conn* existing = find_conn(node, pkt);
      if (!existing) {
        conns_.push_back(std::make_unique<Conn>());
        Conn& c = *conns_.back();
        c.id = static_cast<ConnId>(conns_.size() - 1);
        c.node = node;
        c.client = false;
        c.local_ip = pkt.dst_ip;
        c.local_port = pkt.dst_port;
        c.remote_ip = pkt.src_ip;
        c.remote_port = pkt.src_port;
        c.handlers = lit->second.handlers;
        c.state = FlowState::Established;
        register_flow(c);
        log_flow(c, "accepted");
        if (lit->second.on_accept) lit->second.on_accept(c.id);
        existing = &c;
      }
      // (re)announce acceptance; retransmitted Syns get the same SynAck
      Packet sa;
      sa.protocol = Protocol::MiniTcp;
      sa.tcp_kind = TcpKind::SynAck;
      sa.src_ip = existing->local_ip;
      sa.src_port = existing->local_port;
      sa.dst_ip = existing->remote_ip;
      sa.dst_port = existing->remote_port;
      sa.header_overhead = overhead_for(Protocol::MiniTcp);
      send_ip(node, std::move(sa));
      return;
    }

    Conn* c = find_conn(node, pkt);
    if (!c) return;

    switch (pkt.tcp_kind) {
      case TcpKind::SynAck: {
        if (c->state == FlowState::Connecting && c->inflight && c->inflight->kind == TcpKind::Syn) {
          c->inflight.reset();
          ++c->timer_gen;
          c->state = FlowState::Established;
          flows_[flow_key(*c)] = FlowState::Established;
          log_flow(*c, "established");
          if (c->handlers.on_established) c->handlers.on_established(c->id);
          pump(*c);
        }
        break;
      }
      case TcpKind::Data: {
        // cumulative-ack stop-and-wait receiver
        if (pkt.seq == c->rx_expected) {
          c->rx_expected++;
          send_ack(*c, pkt.seq);
          if (c->handlers.on_message) c->handlers.on_message(c->id, pkt.payload);
        } else if (pkt.seq < c->rx_expected) {
          send_ack(*c, pkt.seq);  // duplicate: re-ack, do not deliver again
        }
        break;
      }
      case TcpKind::Ack: {
        if (c->inflight && c->inflight->kind == TcpKind::Data && pkt.ack == c->inflight->seq) {
          double rtt = now_ - c->inflight->first_tx;
          bool dnp3 = c->local_port == dnp3_port || c->remote_port == dnp3_port;
          rtt_samples_.push_back({now_, rtt, dnp3});
          c->inflight.reset();
          ++c->timer_gen;
          pump(*c);
        }
        break;
      }
      default: break;
    }
  }

  void send_ack(Conn& c, std::uint32_t seq) {
    Packet p;
    p.protocol = Protocol::MiniTcp;
    p.tcp_kind = TcpKind::Ack;
    p.ack = seq;
    p.src_ip = c.local_ip;
    p.src_port = c.local_port;
    p.dst_ip = c.remote_ip;
    p.dst_port = c.remote_port;
    p.header_overhead = overhead_for(Protocol::MiniTcp);
    send_ip(c.node, std::move(p));
  }

  void send_control(Conn& c, TcpKind kind) {
    Inflight inf;
    inf.kind = kind;
    inf.first_tx = now_;
    inf.tx_count = 1;
    c.inflight = inf;
    Packet p;
    p.protocol = Protocol::MiniTcp;
    p.tcp_kind = kind;
    p.src_ip = c.local_ip;
    p.src_port = c.local_port;
    p.dst_ip = c.remote_ip;
    p.dst_port = c.remote_port;
    p.header_overhead = overhead_for(Protocol::MiniTcp);
    send_ip(c.node, std::move(p));
    arm_rto(c);
  }

  void pump(Conn& c) {
    if (c.state != FlowState::Established || c.inflight || c.tx_queue.empty()) return;
    Inflight inf;
    inf.kind = TcpKind::Data;
    inf.seq = c.next_seq++;
    inf.payload = std::move(c.tx_queue.front());
    c.tx_queue.pop_front();
    inf.first_tx = now_;
    inf.tx_count = 1;
    c.inflight = std::move(inf);
    transmit_inflight(c, false);
    arm_rto(c);
  }

  void transmit_inflight(Conn& c, bool retransmission) {
    Packet p;
    p.protocol = Protocol::MiniTcp;
    p.tcp_kind = c.inflight->kind;
    p.seq = c.inflight->seq;
    p.src_ip = c.local_ip;
    p.src_port = c.local_port;
    p.dst_ip = c.remote_ip;
    p.dst_port = c.remote_port;
    p.payload = c.inflight->payload;
    p.header_overhead = overhead_for(Protocol::MiniTcp);
    p.is_retransmission = retransmission;
    bool dnp3 = c.local_port == dnp3_port || c.remote_port == dnp3_port;
    if (p.tcp_kind == TcpKind::Data) {
      data_tx_.push_back({now_, p.payload.size(), retransmission, dnp3});
      if (dnp3)
        log({{"t", now_}, {"type", "dnp3_data"}, {"src", format_ip(p.src_ip)},
             {"sport", p.src_port}, {"dst", format_ip(p.dst_ip)}, {"dport", p.dst_port},
             {"seq", p.seq}, {"retx", retransmission}, {"payload", to_hex(p.payload)}});
    }
    send_ip(c.node, std::move(p));
  }

  void arm_rto(Conn& c) {
    std::uint64_t gen = c.timer_gen;
    ConnId id = c.id;
    after(c.opts.rto_s, [this, id, gen] { rto_fire(id, gen); });
  }

  void rto_fire(ConnId id, std::uint64_t gen) {
    Conn& c = *conns_[id];
    if (c.timer_gen != gen || !c.inflight || c.state == FlowState::Closed) return;
    if (c.inflight->tx_count > c.opts.max_retries) {
      fail_connection(c);
      return;
    }
    c.inflight->tx_count++;
    if (c.inflight->kind == TcpKind::Data) {
      transmit_inflight(c, true);
    } else {
      Packet p;
      p.protocol = Protocol::MiniTcp;
      p.tcp_kind = c.inflight->kind;
      p.src_ip = c.local_ip;
      p.src_port = c.local_port;
      p.dst_ip = c.remote_ip;
      p.dst_port = c.remote_port;
      p.header_overhead = overhead_for(Protocol::MiniTcp);
      p.is_retransmission = true;
      send_ip(c.node, std::move(p));
    }
    arm_rto(c);
  }

  void fail_connection(Conn& c) {
    Bytes abandoned;
    bool was_data = c.inflight && c.inflight->kind == TcpKind::Data;
    if (was_data) abandoned = std::move(c.inflight->payload);
    c.inflight.reset();
    ++c.timer_gen;
    c.state = FlowState::Closed;
    flows_[flow_key(c)] = FlowState::Closed;
    log_flow(c, "failed");
    if (c.handlers.on_closed) c.handlers.on_closed(c.id);
    if (was_data && c.handlers.on_send_failed) c.handlers.on_send_failed(c.id, abandoned);
    if (c.client && c.opts.auto_reconnect) {
      // Re-establish with a fresh source port; queued messages survive, the
      // abandoned in-flight payload does not.
      c.local_port = nodes_[c.node]->next_ephemeral_port++;
      c.state = FlowState::Connecting;
      c.next_seq = 1;
      c.rx_expected = 1;
      register_flow(c);
      log_flow(c, "reconnect");
      send_control(c, TcpKind::Syn);
    }
  }

  // Flows are registered under the client-side key, so the two endpoints of
  // one logical connection share a single registry entry.
  FlowKey flow_key(const Conn& c) const {
    if (c.client) return FlowKey{c.local_ip, c.local_port, c.remote_ip, c.remote_port};
    return FlowKey{c.remote_ip, c.remote_port, c.local_ip, c.local_port};
  }

  void register_flow(Conn& c) { flows_[flow_key(c)] = c.state; }

  void log_flow(const Conn& c, const char* event) {
    log({{"t", now_}, {"type", "tcp_flow"}, {"event", event}, {"src", format_ip(c.local_ip)},
         {"sport", c.local_port}, {"dst", format_ip(c.remote_ip)}, {"dport", c.remote_port}});
  }

  static const char* proto_name(const Packet& p) {
    switch (p.protocol) {
      case Protocol::MiniTcp:
        switch (p.tcp_kind) {
          case TcpKind::Syn: return "tcp.syn";
          case TcpKind::SynAck: return "tcp.synack";
          case TcpKind::Data: return "tcp.data";
          case TcpKind::Ack: return "tcp.ack";
        }
        return "tcp";
      case Protocol::Icmp:
        return p.icmp_kind == IcmpKind::EchoRequest ? "icmp.echo" : "icmp.reply";
      case Protocol::Arp:
        return p.arp_kind == ArpKind::Request ? "arp.request" : "arp.reply";
    }
    return "?";
  }

  double now_ = 0.0;
  std::uint64_t next_order_ = 0;
  std::uint64_t next_packet_id_ = 1;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> queue_;
  Rng rng_;

  std::vector<std::unique_ptr<Node>> nodes_;
  std::vector<std::unique_ptr<Segment>> segments_;
  std::vector<std::unique_ptr<Iface>> ifaces_;
  std::vector<std::unique_ptr<Conn>> conns_;
  std::map<std::pair<NodeId, std::uint16_t>, Listener> listeners_;
  std::map<FlowKey, FlowState> flows_;
  std::vector<Flood> floods_;

  std::vector<RttSample> rtt_samples_;
  std::vector<DataTxRecord> data_tx_;
  std::vector<double> drop_times_;

  std::function<bool(const Packet&)> loss_filter_;
  std::function<void(const std::string&)> log_sink_;
  std::vector<std::string> log_lines_;

  double arp_timeout_s_ = 1.0;
};

}  // namespace scadasim::net
