#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

// Quasi-steady power-system model: lossless DC power flow over branch
// reactances, LODF-based outage screening, breaker/setpoint actuation and
// ramped generator dynamics. The slack generator absorbs any imbalance.

namespace scadasim::grid {

struct Bus {
  std::string id;
  bool is_slack = false;
};

struct Branch {
  std::string id;
  std::string from_bus;
  std::string to_bus;
  double reactance = 0.1;  // p.u., > 0
  double limit_mw = 0.0;   // > 0
  bool breaker_closed = true;
};

struct Generator {
  std::string id;
  std::string bus;
  double setpoint_mw = 0.0;
  double output_mw = 0.0;
  double max_mw = 0.0;
  double ramp_mw_per_s = 0.0;
  bool in_service = true;
};

struct Load {
  std::string id;
  std::string bus;
  double demand_mw = 0.0;
  bool in_service = true;
};

class ModelError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class UnknownDevice : public std::runtime_error {
  using std::runtime_error::runtime_error;
};
class IslandingOutage : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GridModel {
  std::vector<Bus> buses;
  std::vector<Branch> branches;
  std::vector<Generator> generators;
  std::vector<Load> loads;

  void validate() const {
    int slacks = 0;
    std::set<std::string> bus_ids;
    for (const auto& b : buses) {
      if (!bus_ids.insert(b.id).second) throw ModelError("duplicate bus id: " + b.id);
      if (b.is_slack) ++slacks;
    }
    if (slacks != 1) throw ModelError("model must have exactly one slack bus");
    for (const auto& br : branches) {
      if (!bus_ids.count(br.from_bus) || !bus_ids.count(br.to_bus))
        throw ModelError("branch " + br.id + " references unknown bus");
      if (br.reactance <= 0) throw ModelError("branch " + br.id + " reactance must be > 0");
      if (br.limit_mw <= 0) throw ModelError("branch " + br.id + " limit must be > 0");
    }
    for (const auto& g : generators)
      if (!bus_ids.count(g.bus)) throw ModelError("generator " + g.id + " references unknown bus");
    for (const auto& l : loads)
      if (!bus_ids.count(l.bus)) throw ModelError("load " + l.id + " references unknown bus");
    const auto& sb = slack_bus_id();
    bool slack_gen = false;
    for (const auto& g : generators)
      if (g.in_service && g.bus == sb) slack_gen = true;
    if (!slack_gen) throw ModelError("no in-service generator at the slack bus");
  }

  const std::string& slack_bus_id() const {
    for (const auto& b : buses)
      if (b.is_slack) return b.id;
    throw ModelError("no slack bus");
  }

  const Bus& bus(const std::string& id) const {
    for (const auto& b : buses)
      if (b.id == id) return b;
    throw UnknownDevice("unknown bus: " + id);
  }

  Branch& branch(const std::string& id) {
    for (auto& b : branches)
      if (b.id == id) return b;
    throw UnknownDevice("unknown branch: " + id);
  }
  const Branch& branch(const std::string& id) const {
    return const_cast<GridModel*>(this)->branch(id);
  }

  Generator& generator(const std::string& id) {
    for (auto& g : generators)
      if (g.id == id) return g;
    throw UnknownDevice("unknown generator: " + id);
  }
  const Generator& generator(const std::string& id) const {
    return const_cast<GridModel*>(this)->generator(id);
  }

  Load& load(const std::string& id) {
    for (auto& l : loads)
      if (l.id == id) return l;
    throw UnknownDevice("unknown load: " + id);
  }
  const Load& load(const std::string& id) const { return const_cast<GridModel*>(this)->load(id); }

  // The generator that absorbs imbalance: first in-service generator at the
  // slack bus.
  const Generator* slack_generator() const {
    const auto& sb = slack_bus_id();
    for (const auto& g : generators)
      if (g.in_service && g.bus == sb) return &g;
    return nullptr;
  }
};

struct GridState {
  std::map<std::string, double> flows;    // branch id -> MW, defined on the slack island only
  std::map<std::string, double> outputs;  // generator id -> MW
  std::map<std::string, bool> statuses;   // device id -> on/off
  bool solved_ok = false;
  bool islanded = false;
};

struct OverloadEntry {
  std::string branch;
  double flow_mw = 0.0;
  double limit_mw = 0.0;
  double loading_pct = 0.0;
};

namespace detail {

// Dense linear solve by Gaussian elimination with partial pivoting.
// Matrices at desk scale are tiny, so no factorization reuse is attempted.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row)
      if (std::abs(a[row][col]) > std::abs(a[pivot][col])) pivot = row;
    if (std::abs(a[pivot][col]) < 1e-12) throw ModelError("singular susceptance matrix");
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t row = col + 1; row < n; ++row) {
      double f = a[row][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[row][k] -= f * a[col][k];
      b[row] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

struct SolveContext {
  std::map<std::string, std::size_t> bus_index;      // all buses
  std::vector<char> in_island;                       // by bus index
  std::vector<std::size_t> reduced_index;            // bus index -> row in reduced system, or npos
  std::vector<std::size_t> reduced_buses;            // row -> bus index
  std::size_t slack = 0;
};

inline SolveContext island_of_slack(const GridModel& m) {
  SolveContext ctx;
  for (std::size_t i = 0; i < m.buses.size(); ++i) ctx.bus_index[m.buses[i].id] = i;
  ctx.slack = ctx.bus_index.at(m.slack_bus_id());
  ctx.in_island.assign(m.buses.size(), 0);
  std::vector<std::size_t> stack{ctx.slack};
  ctx.in_island[ctx.slack] = 1;
  std::vector<std::vector<std::size_t>> adj(m.buses.size());
  for (const auto& br : m.branches) {
    if (!br.breaker_closed) continue;
    auto i = ctx.bus_index.at(br.from_bus);
    auto j = ctx.bus_index.at(br.to_bus);
    adj[i].push_back(j);
    adj[j].push_back(i);
  }
  while (!stack.empty()) {
    auto b = stack.back();
    stack.pop_back();
    for (auto nb : adj[b])
      if (!ctx.in_island[nb]) {
        ctx.in_island[nb] = 1;
        stack.push_back(nb);
      }
  }
  constexpr auto npos = std::numeric_limits<std::size_t>::max();
  ctx.reduced_index.assign(m.buses.size(), npos);
  for (std::size_t i = 0; i < m.buses.size(); ++i) {
    if (!ctx.in_island[i] || i == ctx.slack) continue;
    ctx.reduced_index[i] = ctx.reduced_buses.size();
    ctx.reduced_buses.push_back(i);
  }
  return ctx;
}

inline std::vector<double> injections(const GridModel& m, const SolveContext& ctx) {
  std::vector<double> p(m.buses.size(), 0.0);
  for (const auto& g : m.generators)
    if (g.in_service) p[ctx.bus_index.at(g.bus)] += g.output_mw;
  for (const auto& l : m.loads)
    if (l.in_service) p[ctx.bus_index.at(l.bus)] -= l.demand_mw;
  return p;
}

// Reduced susceptance matrix over the slack island (slack row/col removed).
inline std::vector<std::vector<double>> reduced_b(const GridModel& m, const SolveContext& ctx) {
  const std::size_t n = ctx.reduced_buses.size();
  std::vector<std::vector<double>> B(n, std::vector<double>(n, 0.0));
  for (const auto& br : m.branches) {
    if (!br.breaker_closed) continue;
    auto i = ctx.bus_index.at(br.from_bus);
    auto j = ctx.bus_index.at(br.to_bus);
    if (!ctx.in_island[i] || !ctx.in_island[j]) continue;
    double y = 1.0 / br.reactance;
    auto ri = ctx.reduced_index[i];
    auto rj = ctx.reduced_index[j];
    constexpr auto npos = std::numeric_limits<std::size_t>::max();
    if (ri != npos) B[ri][ri] += y;
    if (rj != npos) B[rj][rj] += y;
    if (ri != npos && rj != npos) {
      B[ri][rj] -= y;
      B[rj][ri] -= y;
    }
  }
  return B;
}

// Solve B theta = rhs on the slack island; returns angles indexed by bus.
inline std::vector<double> solve_angles(const GridModel& m, const SolveContext& ctx,
                                        const std::vector<double>& rhs_by_bus) {
  std::vector<double> rhs(ctx.reduced_buses.size(), 0.0);
  for (std::size_t r = 0; r < ctx.reduced_buses.size(); ++r) rhs[r] = rhs_by_bus[ctx.reduced_buses[r]];
  std::vector<double> theta_bus(m.buses.size(), 0.0);
  if (!rhs.empty()) {
    auto theta = solve_dense(reduced_b(m, ctx), rhs);
    for (std::size_t r = 0; r < ctx.reduced_buses.size(); ++r) theta_bus[ctx.reduced_buses[r]] = theta[r];
  }
  return theta_bus;
}

}  // namespace detail

inline GridState dc_power_flow(const GridModel& m) {
  auto ctx = detail::island_of_slack(m);
  auto p = detail::injections(m, ctx);

  GridState st;
  st.islanded = false;
  for (std::size_t i = 0; i < m.buses.size(); ++i)
    if (!ctx.in_island[i] && std::abs(p[i]) > 1e-9) st.islanded = true;

  auto theta = detail::solve_angles(m, ctx, p);
  for (const auto& br : m.branches) {
    if (!br.breaker_closed) continue;
    auto i = ctx.bus_index.at(br.from_bus);
    auto j = ctx.bus_index.at(br.to_bus);
    if (!ctx.in_island[i] || !ctx.in_island[j]) continue;
    st.flows[br.id] = (theta[i] - theta[j]) / br.reactance;
  }

  // Slack generator output balances the island.
  double island_balance = 0.0;
  const Generator* slack_gen = m.slack_generator();
  for (const auto& g : m.generators) {
    if (!g.in_service) {
      st.outputs[g.id] = 0.0;
      continue;
    }
    st.outputs[g.id] = g.output_mw;
    if (ctx.in_island[ctx.bus_index.at(g.bus)] && (!slack_gen || g.id != slack_gen->id))
      island_balance += g.output_mw;
  }
  for (const auto& l : m.loads)
    if (l.in_service && ctx.in_island[ctx.bus_index.at(l.bus)]) island_balance -= l.demand_mw;
  if (slack_gen) st.outputs[slack_gen->id] = -island_balance;

  for (const auto& br : m.branches) st.statuses[br.id] = br.breaker_closed;
  for (const auto& g : m.generators) st.statuses[g.id] = g.in_service;
  for (const auto& l : m.loads) st.statuses[l.id] = l.in_service;
  st.solved_ok = true;
  return st;
}

inline std::vector<OverloadEntry> overload_report(const GridModel& m, const GridState& st) {
  std::vector<OverloadEntry> out;
  for (const auto& br : m.branches) {
    auto it = st.flows.find(br.id);
    if (it == st.flows.end()) continue;
    if (std::abs(it->second) > br.limit_mw)
      out.push_back({br.id, it->second, br.limit_mw, 100.0 * std::abs(it->second) / br.limit_mw});
  }
  return out;
}

// Line outage distribution factors for taking `outaged` out of service,
// computed from the pre-outage susceptance matrix (not by re-solving).
// factor[m] is the fraction of the outaged branch's pre-outage flow that
// shifts onto surviving branch m.
inline std::map<std::string, double> lodf(const GridModel& m, const std::string& outaged) {
  const Branch& out_br = m.branch(outaged);
  if (!out_br.breaker_closed) throw ModelError("outaged branch " + outaged + " is already open");

  // Outages that disconnect any bus from the slack island are islanding.
  {
    GridModel probe = m;
    probe.branch(outaged).breaker_closed = false;
    auto pre = detail::island_of_slack(m);
    auto post = detail::island_of_slack(probe);
    for (std::size_t i = 0; i < m.buses.size(); ++i)
      if (pre.in_island[i] && !post.in_island[i])
        throw IslandingOutage("outage of " + outaged + " islands bus " + m.buses[i].id);
  }

  auto ctx = detail::island_of_slack(m);
  auto i = ctx.bus_index.at(out_br.from_bus);
  auto j = ctx.bus_index.at(out_br.to_bus);

  // Angle response to a unit injection at `from` withdrawn at `to`.
  std::vector<double> rhs(m.buses.size(), 0.0);
  rhs[i] += 1.0;
  rhs[j] -= 1.0;
  auto v = detail::solve_angles(m, ctx, rhs);

  double ptdf_outaged = (v[i] - v[j]) / out_br.reactance;
  double denom = 1.0 - ptdf_outaged;
  if (std::abs(denom) < 1e-9)
    throw IslandingOutage("outage of " + outaged + " leaves no alternate path");

  std::map<std::string, double> factors;
  for (const auto& br : m.branches) {
    if (!br.breaker_closed || br.id == outaged) continue;
    auto a = ctx.bus_index.at(br.from_bus);
    auto b = ctx.bus_index.at(br.to_bus);
    if (!ctx.in_island[a] || !ctx.in_island[b]) continue;
    double ptdf = (v[a] - v[b]) / br.reactance;
    factors[br.id] = ptdf / denom;
  }
  return factors;
}

struct RankedSet {
  std::vector<std::string> branches;  // sorted lexicographically
  double score = 0.0;                 // max post-outage loading percent
  bool islanding = false;
};

// Exhaustive contingency ranking: every size-k set of closed branches is
// scored by the maximum loading percent after a full re-solve with the set
// removed; islanding sets score as maximal severity. Ties break on the
// lexicographic branch-id tuple, which makes the ranking total and
// deterministic.
inline std::vector<RankedSet> rank_contingencies(const GridModel& m, int k) {
  if (k < 1 || k > 4) throw ModelError("contingency set size must be in 1..4");
  std::vector<std::string> closed;
  for (const auto& br : m.branches)
    if (br.breaker_closed) closed.push_back(br.id);
  std::sort(closed.begin(), closed.end());

  std::vector<RankedSet> ranked;
  std::vector<std::size_t> pick(k);
  // iterate k-combinations in lexicographic order
  for (int i = 0; i < k; ++i) pick[i] = i;
  if (closed.size() < static_cast<std::size_t>(k)) return ranked;
  while (true) {
    RankedSet entry;
    for (int i = 0; i < k; ++i) entry.branches.push_back(closed[pick[i]]);
    GridModel probe = m;
    for (const auto& id : entry.branches) probe.branch(id).breaker_closed = false;
    GridState st = dc_power_flow(probe);
    if (st.islanded) {
      entry.islanding = true;
      entry.score = std::numeric_limits<double>::infinity();
    } else {
      entry.score = 0.0;
      for (const auto& br : probe.branches) {
        auto it = st.flows.find(br.id);
        if (it == st.flows.end()) continue;
        entry.score = std::max(entry.score, 100.0 * std::abs(it->second) / br.limit_mw);
      }
    }
    ranked.push_back(std::move(entry));

    int pos = k - 1;
    while (pos >= 0 && pick[pos] == closed.size() - k + pos) --pos;
    if (pos < 0) break;
    ++pick[pos];
    for (int i = pos + 1; i < k; ++i) pick[i] = pick[i - 1] + 1;
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedSet& a, const RankedSet& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.branches < b.branches;
  });
  return ranked;
}

struct ControlAction {
  enum class Kind { TripBranch, CloseBranch, SetGenSetpoint, TripLoad, CloseLoad };
  Kind kind;
  std::string device;
  double value = 0.0;  // SetGenSetpoint only
};

// Breaker actions take effect immediately (the next solve sees them);
// setpoints clamp to [0, max] and take effect through ramping in step().
inline void apply_control(GridModel& m, const ControlAction& action) {
  switch (action.kind) {
    case ControlAction::Kind::TripBranch: m.branch(action.device).breaker_closed = false; break;
    case ControlAction::Kind::CloseBranch: m.branch(action.device).breaker_closed = true; break;
    case ControlAction::Kind::SetGenSetpoint: {
      auto& g = m.generator(action.device);
      g.setpoint_mw = std::clamp(action.value, 0.0, g.max_mw);
      break;
    }
    case ControlAction::Kind::TripLoad: m.load(action.device).in_service = false; break;
    case ControlAction::Kind::CloseLoad: m.load(action.device).in_service = true; break;
  }
}

// Advance generator outputs toward their setpoints by at most ramp*dt, then
// solve. The slack generator does not ramp; it absorbs the residual.
inline GridState step(GridModel& m, double dt) {
  if (dt <= 0) throw ModelError("step dt must be > 0");
  const Generator* slack_gen = m.slack_generator();
  for (auto& g : m.generators) {
    if (!g.in_service) continue;
    if (slack_gen && g.id == slack_gen->id) continue;
    double delta = g.setpoint_mw - g.output_mw;
    double cap = g.ramp_mw_per_s * dt;
    if (std::abs(delta) <= cap)
      g.output_mw = g.setpoint_mw;
    else
      g.output_mw += (delta > 0 ? cap : -cap);
  }
  GridState st = dc_power_flow(m);
  // Reflect the slack's balancing output back into the model.
  if (slack_gen) {
    auto it = st.outputs.find(slack_gen->id);
    if (it != st.outputs.end()) m.generator(slack_gen->id).output_mw = it->second;
  }
  return st;
}

}  // namespace scadasim::grid
