#pragma once

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scadasim/dnp3.hpp"
#include "scadasim/grid.hpp"
#include "scadasim/netsim.hpp"

// DNP3 endpoints: the outstation serves mapped grid devices over MiniTcp,
// the master polls it and issues commands either as single direct-operates
// or as select-before-operate pairs. Operator and RTAC-style protection
// logic is modeled by AutomationPolicy evaluated on a timer against the
// latest snapshot.

namespace scadasim::station {

// IIN bits used by the simplified outstation (registered in the high octet).
constexpr std::uint16_t kIinOk = 0x0000;
constexpr std::uint16_t kIinSelectMismatch = 0x0100;  // operate without matching select
constexpr std::uint16_t kIinUnknownIndex = 0x0200;    // command to an unmapped point

enum class DeviceKind {
  BranchStatus,   // binary input: breaker closed?
  GenStatus,      // binary input: generator in service?
  LoadStatus,     // binary input: load in service?
  GenOutput,      // analog input, MW
  BranchFlow,     // analog input, MW
  BranchBreaker,  // binary output
  LoadBreaker,    // binary output
  GenSetpoint,    // analog output
};

inline dnp3::GroupKind group_of(DeviceKind k) {
  switch (k) {
    case DeviceKind::BranchStatus:
    case DeviceKind::GenStatus:
    case DeviceKind::LoadStatus: return dnp3::GroupKind::BinaryInput;
    case DeviceKind::GenOutput:
    case DeviceKind::BranchFlow: return dnp3::GroupKind::AnalogInput;
    case DeviceKind::BranchBreaker:
    case DeviceKind::LoadBreaker: return dnp3::GroupKind::BinaryOutputCommand;
    case DeviceKind::GenSetpoint: return dnp3::GroupKind::AnalogOutputCommand;
  }
  return dnp3::GroupKind::BinaryInput;
}

inline const char* to_string(DeviceKind k) {
  switch (k) {
    case DeviceKind::BranchStatus: return "branch_status";
    case DeviceKind::GenStatus: return "gen_status";
    case DeviceKind::LoadStatus: return "load_status";
    case DeviceKind::GenOutput: return "gen_output";
    case DeviceKind::BranchFlow: return "branch_flow";
    case DeviceKind::BranchBreaker: return "branch_breaker";
    case DeviceKind::LoadBreaker: return "load_breaker";
    case DeviceKind::GenSetpoint: return "gen_setpoint";
  }
  return "?";
}

struct PointEntry {
  DeviceKind kind = DeviceKind::BranchStatus;
  std::uint16_t index = 0;
  std::string device;
};

struct PointMap {
  std::vector<PointEntry> entries;

  void validate(const grid::GridModel& model) const {
    std::set<std::pair<dnp3::GroupKind, std::uint16_t>> seen;
    for (const auto& e : entries) {
      if (!seen.insert({group_of(e.kind), e.index}).second)
        throw grid::ModelError("duplicate point index " + std::to_string(e.index));
      switch (e.kind) {
        case DeviceKind::BranchStatus:
        case DeviceKind::BranchFlow:
        case DeviceKind::BranchBreaker: model.branch(e.device); break;
        case DeviceKind::GenStatus:
        case DeviceKind::GenOutput:
        case DeviceKind::GenSetpoint: model.generator(e.device); break;
        case DeviceKind::LoadStatus:
        case DeviceKind::LoadBreaker: model.load(e.device); break;
      }
    }
  }

  std::vector<PointEntry> group(dnp3::GroupKind g) const {
    std::vector<PointEntry> out;
    for (const auto& e : entries)
      if (group_of(e.kind) == g) out.push_back(e);
    std::sort(out.begin(), out.end(),
              [](const PointEntry& a, const PointEntry& b) { return a.index < b.index; });
    return out;
  }

  const PointEntry* find(dnp3::GroupKind g, std::uint16_t index) const {
    for (const auto& e : entries)
      if (group_of(e.kind) == g && e.index == index) return &e;
    return nullptr;
  }

  // The output point paired with an input point's device (e.g. the breaker
  // for a flow measurement, the setpoint for an output reading).
  const PointEntry* paired_output(const PointEntry& input) const {
    for (const auto& e : entries) {
      if (e.device != input.device) continue;
      if (input.kind == DeviceKind::GenOutput && e.kind == DeviceKind::GenSetpoint) return &e;
      if (input.kind == DeviceKind::BranchFlow && e.kind == DeviceKind::BranchBreaker) return &e;
    }
    return nullptr;
  }
};

// Grid access handed to an outstation by the composition root.
struct GridPort {
  std::function<bool(const PointEntry&)> read_binary;
  std::function<double(const PointEntry&)> read_analog;
  std::function<bool(const grid::ControlAction&)> apply;  // false => unknown device
};

// ---------------------------------------------------------------------------
// Outstation
// ---------------------------------------------------------------------------

class Outstation {
 public:
  struct Config {
    std::string name = "outstation";
    std::uint16_t dnp3_address = 1024;
    std::uint16_t port = 20000;
    double select_window_s = 10.0;
    bool unsolicited = false;
  };

  struct Stats {
    int reads_served = 0;
    int commands_executed = 0;
    int command_errors = 0;
    int unsolicited_sent = 0;
  };

  Outstation(net::Sim& sim, net::NodeId node, Config cfg, PointMap map, GridPort port)
      : sim_(sim), node_(node), cfg_(std::move(cfg)), map_(std::move(map)), grid_(std::move(port)) {}

  void start() {
    net::Sim::ConnHandlers handlers;
    handlers.on_message = [this](net::ConnId conn, const Bytes& payload) { serve(conn, payload); };
    sim_.tcp_listen(node_, cfg_.port, std::move(handlers),
                    [this](net::ConnId conn) { last_conn_ = conn; });
  }

  const Stats& stats() const { return stats_; }
  const PointMap& points() const { return map_; }

  // Called by the harness after each grid step so enabled unsolicited
  // reporting can announce breaker state changes.
  void grid_stepped() {
    if (!cfg_.unsolicited || last_conn_ < 0) return;
    dnp3::PointGroup changed;
    changed.kind = dnp3::GroupKind::BinaryInput;
    for (const auto& e : map_.group(dnp3::GroupKind::BinaryInput)) {
      bool v = grid_.read_binary(e);
      auto it = last_binary_.find(e.index);
      if (it != last_binary_.end() && it->second != v) changed.points.push_back({e.index, v});
      last_binary_[e.index] = v;
    }
    if (changed.points.empty()) return;
    dnp3::AppFragment frag;
    frag.function = dnp3::FunctionCode::UnsolicitedResponse;
    frag.control.uns = true;
    frag.control.seq = next_seq();
    frag.iin = kIinOk;
    frag.objects.push_back(std::move(changed));
    send(last_conn_, frag);
    ++stats_.unsolicited_sent;
  }

 private:
  void serve(net::ConnId conn, const Bytes& raw) {
    last_conn_ = conn;
    dnp3::Message msg;
    try {
      msg = dnp3::decode_message(raw);
    } catch (const dnp3::DecodeError& e) {
      // link-level rejection: no application response
      sim_.log({{"t", sim_.now()}, {"type", "dnp3_reject"}, {"node", sim_.node_name(node_)},
                {"reason", to_string(e.status())}});
      return;
    }
    if (msg.link.destination != cfg_.dnp3_address) return;  // one-on-one addressing

    const dnp3::AppFragment& req = msg.app;
    switch (req.function) {
      case dnp3::FunctionCode::Confirm: return;  // nothing pending at desk scale
      case dnp3::FunctionCode::Read:
      case dnp3::FunctionCode::Read2: {
        respond(conn, msg, read_response(req));
        ++stats_.reads_served;
        return;
      }
      case dnp3::FunctionCode::Select: {
        pending_select_ = Select{encode_objects(req), sim_.now()};
        respond(conn, msg, command_echo(req, kIinOk));
        return;
      }
      case dnp3::FunctionCode::Operate: {
        std::uint16_t iin = kIinOk;
        bool armed = pending_select_ && pending_select_->objects == encode_objects(req) &&
                     sim_.now() - pending_select_->at <= cfg_.select_window_s;
        if (armed) {
          pending_select_.reset();
          iin = execute(req);
        } else {
          iin = kIinSelectMismatch;
          ++stats_.command_errors;
        }
        respond(conn, msg, command_echo(req, iin));
        return;
      }
      case dnp3::FunctionCode::DirectOperate: {
        respond(conn, msg, command_echo(req, execute(req)));
        return;
      }
      default: return;  // responses are not served
    }
  }

  static Bytes encode_objects(const dnp3::AppFragment& frag) {
    dnp3::AppFragment stripped;
    stripped.function = dnp3::FunctionCode::Select;  // objects only matter
    stripped.objects = frag.objects;
    return dnp3::encode_app(stripped);
  }

  dnp3::AppFragment read_response(const dnp3::AppFragment& req) {
    dnp3::AppFragment resp;
    resp.function = dnp3::FunctionCode::SolicitedResponse;
    resp.control.seq = req.control.seq;
    resp.iin = kIinOk;
    dnp3::PointGroup binaries;
    binaries.kind = dnp3::GroupKind::BinaryInput;
    for (const auto& e : map_.group(dnp3::GroupKind::BinaryInput))
      binaries.points.push_back({e.index, grid_.read_binary(e)});
    dnp3::PointGroup analogs;
    analogs.kind = dnp3::GroupKind::AnalogInput;
    for (const auto& e : map_.group(dnp3::GroupKind::AnalogInput))
      analogs.points.push_back({e.index, grid_.read_analog(e)});
    if (!binaries.points.empty()) resp.objects.push_back(std::move(binaries));
    if (!analogs.points.empty()) resp.objects.push_back(std::move(analogs));
    return resp;
  }

  dnp3::AppFragment command_echo(const dnp3::AppFragment& req, std::uint16_t iin) {
    dnp3::AppFragment resp;
    resp.function = dnp3::FunctionCode::SolicitedResponse;
    resp.control.seq = req.control.seq;
    resp.iin = iin;
    resp.objects = req.objects;
    return resp;
  }

  std::uint16_t execute(const dnp3::AppFragment& req) {
    std::uint16_t iin = kIinOk;
    for (const auto& group : req.objects) {
      for (const auto& pt : group.points) {
        const PointEntry* entry = map_.find(group.kind, pt.index);
        if (!entry) {
          iin |= kIinUnknownIndex;
          ++stats_.command_errors;
          continue;
        }
        grid::ControlAction action;
        if (group.kind == dnp3::GroupKind::BinaryOutputCommand) {
          auto code = std::get<dnp3::ControlCode>(pt.value);
          bool closing = code == dnp3::ControlCode::Close || code == dnp3::ControlCode::LatchOn;
          if (entry->kind == DeviceKind::BranchBreaker)
            action.kind = closing ? grid::ControlAction::Kind::CloseBranch
                                  : grid::ControlAction::Kind::TripBranch;
          else
            action.kind = closing ? grid::ControlAction::Kind::CloseLoad
                                  : grid::ControlAction::Kind::TripLoad;
          action.device = entry->device;
        } else if (group.kind == dnp3::GroupKind::AnalogOutputCommand) {
          action.kind = grid::ControlAction::Kind::SetGenSetpoint;
          action.device = entry->device;
          action.value = std::get<double>(pt.value);
        } else {
          iin |= kIinUnknownIndex;
          continue;
        }
        if (grid_.apply(action)) {
          ++stats_.commands_executed;
          sim_.log({{"t", sim_.now()}, {"type", "grid_command"}, {"node", sim_.node_name(node_)},
                    {"device", entry->device}, {"kind", to_string(entry->kind)},
                    {"detail", group.kind == dnp3::GroupKind::BinaryOutputCommand
                                   ? std::string(dnp3::to_string(std::get<dnp3::ControlCode>(pt.value)))
                                   : format_double(std::get<double>(pt.value))}});
        } else {
          iin |= kIinUnknownIndex;
          ++stats_.command_errors;
        }
      }
    }
    return iin;
  }

  void respond(net::ConnId conn, const dnp3::Message& req, const dnp3::AppFragment& frag) {
    dnp3::LinkHeader h;
    h.destination = req.link.source;
    h.source = cfg_.dnp3_address;
    sim_.tcp_send(conn, dnp3::encode_message(h, next_transport_seq_++, frag));
  }

  void send(net::ConnId conn, const dnp3::AppFragment& frag) {
    dnp3::LinkHeader h;
    h.destination = 1;  // its master
    h.source = cfg_.dnp3_address;
    sim_.tcp_send(conn, dnp3::encode_message(h, next_transport_seq_++, frag));
  }

  std::uint8_t next_seq() { return static_cast<std::uint8_t>(app_seq_++ & 0x0F); }

  struct Select {
    Bytes objects;
    double at;
  };

  net::Sim& sim_;
  net::NodeId node_;
  Config cfg_;
  PointMap map_;
  GridPort grid_;
  Stats stats_;
  std::optional<Select> pending_select_;
  net::ConnId last_conn_ = -1;
  std::uint8_t next_transport_seq_ = 0;
  unsigned app_seq_ = 0;
  std::map<std::uint16_t, bool> last_binary_;
};

// ---------------------------------------------------------------------------
// Master
// ---------------------------------------------------------------------------

// Operator/RTAC protection logic evaluated against the latest snapshot:
// low generator readings get their setpoint restored, overloaded flow
// readings get the corresponding breaker tripped.
struct AutomationPolicy {
  bool enabled = false;
  double gen_low_threshold_mw = 100.0;
  double gen_restore_setpoint_mw = 1000.0;
  bool flow_limit_action = false;
  double eval_interval_s = 60.0;
  std::map<std::uint16_t, double> flow_limits;  // analog-input index -> MW
};

class Master {
 public:
  enum class CommandMode { DirectOperate, SelectOperate };

  struct Config {
    std::string name = "master";
    std::uint16_t dnp3_address = 1;
    std::uint16_t outstation_address = 1024;
    net::Ip outstation_ip = 0;
    std::uint16_t port = 20000;
    double poll_interval_s = 30.0;
    double start_offset_s = 0.0;
    double response_timeout_s = 5.0;
    int command_retries = 3;  // re-sends after connection failures or timeouts
    CommandMode mode = CommandMode::DirectOperate;
  };

  struct Stats {
    int polls_sent = 0;
    int polls_skipped = 0;
    int responses = 0;
    int poll_timeouts = 0;
    int commands_sent = 0;
    int command_successes = 0;
    int command_failures = 0;
    int automation_commands = 0;
    int unsolicited_confirmed = 0;
  };

  struct Reading {
    double value = 0.0;  // binaries stored as 0/1
    double t = 0.0;
  };
  using Snapshot = std::map<std::pair<dnp3::GroupKind, std::uint16_t>, Reading>;

  Master(net::Sim& sim, net::NodeId node, Config cfg, PointMap map)
      : sim_(sim), node_(node), cfg_(std::move(cfg)), map_(std::move(map)) {}

  void start() {
    net::Sim::ConnHandlers handlers;
    handlers.on_message = [this](net::ConnId, const Bytes& m) { on_message(m); };
    handlers.on_send_failed = [this](net::ConnId, const Bytes&) {
      // the in-flight request died with its connection; commands get
      // re-queued a limited number of times, polls wait for the next tick
      if (pending_) {
        retry_or_drop(*pending_);
        pending_.reset();
      }
      pump();
    };
    conn_ = sim_.tcp_connect(node_, cfg_.outstation_ip, cfg_.port, std::move(handlers));
    sim_.at(cfg_.start_offset_s, [this] { poll_tick(); });
    if (automation_.enabled)
      sim_.at(cfg_.start_offset_s + automation_.eval_interval_s, [this] { automation_tick(); });
  }

  void set_automation(AutomationPolicy policy) { automation_ = std::move(policy); }

  // Operator-facing command entry points (used by scenario schedules and by
  // the automation): value semantics depend on the point's group.
  void operate_binary(std::uint16_t index, dnp3::ControlCode code, bool from_automation = false) {
    dnp3::PointGroup g;
    g.kind = dnp3::GroupKind::BinaryOutputCommand;
    g.points.push_back({index, code});
    enqueue_command(g, from_automation);
  }

  void operate_analog(std::uint16_t index, double value, bool from_automation = false) {
    dnp3::PointGroup g;
    g.kind = dnp3::GroupKind::AnalogOutputCommand;
    g.points.push_back({index, value});
    enqueue_command(g, from_automation);
  }

  const Snapshot& snapshot() const { return snapshot_; }
  const Stats& stats() const { return stats_; }
  const Config& config() const { return cfg_; }
  const PointMap& points() const { return map_; }
  std::function<void(const Snapshot&)> on_snapshot;

 private:
  struct PendingRequest {
    enum class Kind { Poll, Select, Operate } kind;
    std::uint8_t seq = 0;
    dnp3::PointGroup command;  // for Select -> Operate chaining
    bool from_automation = false;
    int retries_left = 0;
    std::uint64_t timer_gen = 0;
  };

  struct QueuedCommand {
    dnp3::PointGroup group;
    bool from_automation = false;
    int retries_left = 0;
  };

  void retry_or_drop(const PendingRequest& req) {
    if (req.kind == PendingRequest::Kind::Poll) return;
    if (req.retries_left > 0)
      queue_.push_front({req.command, req.from_automation, req.retries_left - 1});
    else
      ++stats_.command_failures;
  }

  void poll_tick() {
    if (!pending_) {
      send_request(PendingRequest::Kind::Poll, {}, false, 0, dnp3::FunctionCode::Read);
      ++stats_.polls_sent;
    } else {
      ++stats_.polls_skipped;
    }
    sim_.after(cfg_.poll_interval_s, [this] { poll_tick(); });
  }

  void automation_tick() {
    evaluate_automation();
    sim_.after(automation_.eval_interval_s, [this] { automation_tick(); });
  }

  void evaluate_automation() {
    if (!automation_.enabled || snapshot_.empty()) return;
    // deterministic command order: analog-input index ascending
    for (const auto& e : map_.group(dnp3::GroupKind::AnalogInput)) {
      auto it = snapshot_.find({dnp3::GroupKind::AnalogInput, e.index});
      if (it == snapshot_.end()) continue;
      double value = it->second.value;
      if (e.kind == DeviceKind::GenOutput && value < automation_.gen_low_threshold_mw) {
        if (const PointEntry* out = map_.paired_output(e)) {
          operate_analog(out->index, automation_.gen_restore_setpoint_mw, true);
          ++stats_.automation_commands;
        }
      }
      if (e.kind == DeviceKind::BranchFlow && automation_.flow_limit_action) {
        auto lim = automation_.flow_limits.find(e.index);
        if (lim != automation_.flow_limits.end() && std::abs(value) > lim->second) {
          if (const PointEntry* out = map_.paired_output(e)) {
            operate_binary(out->index, dnp3::ControlCode::Trip, true);
            ++stats_.automation_commands;
          }
        }
      }
    }
  }

  void enqueue_command(const dnp3::PointGroup& group, bool from_automation) {
    for (const auto& q : queue_)
      if (q.group.kind == group.kind && q.group.points.size() == group.points.size() &&
          std::equal(q.group.points.begin(), q.group.points.end(), group.points.begin(),
                     [](const dnp3::Point& a, const dnp3::Point& b) {
                       return a.index == b.index && a.value == b.value;
                     }))
        return;  // identical command already waiting
    queue_.push_back({group, from_automation, cfg_.command_retries});
    pump();
  }

  void pump() {
    if (pending_ || queue_.empty()) return;
    QueuedCommand cmd = std::move(queue_.front());
    queue_.pop_front();
    bool select_first = cfg_.mode == CommandMode::SelectOperate;
    send_request(select_first ? PendingRequest::Kind::Select : PendingRequest::Kind::Operate,
                 cmd.group, cmd.from_automation, cmd.retries_left,
                 select_first ? dnp3::FunctionCode::Select : dnp3::FunctionCode::DirectOperate);
    ++stats_.commands_sent;
  }

  void send_request(PendingRequest::Kind kind, const dnp3::PointGroup& command,
                    bool from_automation, int retries_left, dnp3::FunctionCode fn) {
    dnp3::AppFragment frag;
    frag.function = fn;
    frag.control.seq = static_cast<std::uint8_t>(app_seq_++ & 0x0F);
    if (fn != dnp3::FunctionCode::Read && fn != dnp3::FunctionCode::Read2)
      frag.objects.push_back(command);
    dnp3::LinkHeader h;
    h.destination = cfg_.outstation_address;
    h.source = cfg_.dnp3_address;
    sim_.tcp_send(conn_, dnp3::encode_message(h, next_transport_seq_++, frag));

    PendingRequest p;
    p.kind = kind;
    p.seq = frag.control.seq;
    p.command = command;
    p.from_automation = from_automation;
    p.retries_left = retries_left;
    p.timer_gen = ++timer_gen_;
    pending_ = p;
    std::uint64_t gen = p.timer_gen;
    sim_.after(cfg_.response_timeout_s, [this, gen] {
      if (pending_ && pending_->timer_gen == gen) {
        if (pending_->kind == PendingRequest::Kind::Poll) ++stats_.poll_timeouts;
        retry_or_drop(*pending_);
        pending_.reset();
        pump();
      }
    });
  }

  void on_message(const Bytes& raw) {
    dnp3::Message msg;
    try {
      msg = dnp3::decode_message(raw);
    } catch (const dnp3::DecodeError& e) {
      sim_.log({{"t", sim_.now()}, {"type", "dnp3_reject"}, {"node", sim_.node_name(node_)},
                {"reason", to_string(e.status())}});
      return;
    }
    if (msg.link.destination != cfg_.dnp3_address) return;
    const dnp3::AppFragment& resp = msg.app;

    if (resp.function == dnp3::FunctionCode::UnsolicitedResponse) {
      store_snapshot(resp);
      dnp3::AppFragment confirm;
      confirm.function = dnp3::FunctionCode::Confirm;
      confirm.control.seq = resp.control.seq;
      confirm.control.uns = true;
      dnp3::LinkHeader h;
      h.destination = cfg_.outstation_address;
      h.source = cfg_.dnp3_address;
      sim_.tcp_send(conn_, dnp3::encode_message(h, next_transport_seq_++, confirm));
      ++stats_.unsolicited_confirmed;
      return;
    }
    if (resp.function != dnp3::FunctionCode::SolicitedResponse) return;
    if (!pending_ || resp.control.seq != pending_->seq) return;  // stale response

    PendingRequest done = *pending_;
    pending_.reset();
    ++timer_gen_;
    switch (done.kind) {
      case PendingRequest::Kind::Poll: {
        ++stats_.responses;
        store_snapshot(resp);
        if (on_snapshot) on_snapshot(snapshot_);
        break;
      }
      case PendingRequest::Kind::Select: {
        if (resp.iin == kIinOk) {
          send_request(PendingRequest::Kind::Operate, done.command, done.from_automation,
                       done.retries_left, dnp3::FunctionCode::Operate);
          return;  // operate is now pending
        }
        ++stats_.command_failures;
        break;
      }
      case PendingRequest::Kind::Operate: {
        if (resp.iin == kIinOk)
          ++stats_.command_successes;
        else
          ++stats_.command_failures;
        break;
      }
    }
    pump();
  }

  void store_snapshot(const dnp3::AppFragment& resp) {
    for (const auto& group : resp.objects) {
      for (const auto& pt : group.points) {
        double v = 0.0;
        if (std::holds_alternative<bool>(pt.value))
          v = std::get<bool>(pt.value) ? 1.0 : 0.0;
        else if (std::holds_alternative<double>(pt.value))
          v = std::get<double>(pt.value);
        snapshot_[{group.kind, pt.index}] = {v, sim_.now()};
      }
    }
  }

  net::Sim& sim_;
  net::NodeId node_;
  Config cfg_;
  PointMap map_;
  AutomationPolicy automation_;
  net::ConnId conn_ = -1;
  Snapshot snapshot_;
  Stats stats_;
  std::deque<QueuedCommand> queue_;
  std::optional<PendingRequest> pending_;
  unsigned app_seq_ = 0;
  std::uint8_t next_transport_seq_ = 0;
  std::uint64_t timer_gen_ = 0;
};

}  // namespace scadasim::station
