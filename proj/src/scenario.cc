// Copyright 2026 The RVaaS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rvaas/scenario.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "absl/strings/ascii.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace rvaas {
namespace {

constexpr absl::string_view kQueryKinds[] = {"isolation", "sources", "geo", "summary"};

// Positional words followed by key=value options, in order of appearance.
struct Tokens {
  std::vector<std::string> words;
  std::vector<std::pair<std::string, std::string>> options;

  std::optional<std::string> Take(absl::string_view key) {
    for (auto it = options.begin(); it != options.end(); ++it) {
      if (it->first == key) {
        std::string v = it->second;
        options.erase(it);
        return v;
      }
    }
    return std::nullopt;
  }
};

Tokens Split(absl::string_view text) {
  Tokens t;
  for (absl::string_view tok : absl::StrSplit(text, ' ', absl::SkipEmpty())) {
    size_t eq = tok.find('=');
    if (eq == absl::string_view::npos) {
      t.words.emplace_back(tok);
    } else {
      t.options.emplace_back(std::string(tok.substr(0, eq)), std::string(tok.substr(eq + 1)));
    }
  }
  return t;
}

absl::Status NoLeftovers(const Tokens& t, size_t words) {
  if (t.words.size() > words) {
    return absl::InvalidArgumentError(absl::StrCat("unexpected word \"", t.words[words], "\""));
  }
  if (!t.options.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat("unexpected option \"", t.options.front().first, "=\""));
  }
  return absl::OkStatus();
}

absl::StatusOr<Bytes> ParseHex(absl::string_view hex) {
  if (hex.size() % 2 != 0) return absl::InvalidArgumentError("odd-length hex payload");
  Bytes out;
  for (size_t i = 0; i < hex.size(); i += 2) {
    int v = 0;
    for (char c : hex.substr(i, 2)) {
      int d = absl::ascii_isdigit(c) ? c - '0'
              : (c >= 'a' && c <= 'f') ? c - 'a' + 10
              : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                       : -1;
      if (d < 0) return absl::InvalidArgumentError(absl::StrCat("bad hex payload \"", hex, "\""));
      v = v * 16 + d;
    }
    out.push_back(static_cast<uint8_t>(v));
  }
  return out;
}

absl::StatusOr<TernaryString> ParseMatch(absl::string_view text, int width) {
  absl::StatusOr<TernaryString> m = TernaryString::Parse(text);
  if (!m.ok()) return m.status();
  if (m->width() != width) {
    return absl::InvalidArgumentError(
        absl::StrCat("match \"", text, "\" has width ", m->width(), ", expected ", width));
  }
  return m;
}

absl::StatusOr<uint32_t> ParsePriority(absl::string_view text) {
  uint32_t p = 0;
  if (!absl::SimpleAtoi(text, &p)) {
    return absl::InvalidArgumentError(absl::StrCat("invalid priority \"", text, "\""));
  }
  return p;
}

absl::StatusOr<PortRef> ParseAccessPoint(absl::string_view text, const Topology& topo) {
  absl::StatusOr<PortRef> p = PortRef::Parse(text);
  if (!p.ok()) return p.status();
  if (!topo.HasPort(*p)) return absl::NotFoundError(absl::StrCat("unknown port ", text));
  if (topo.AccessPointAt(*p) == nullptr) {
    return absl::InvalidArgumentError(absl::StrCat(text, " is not an access point"));
  }
  return p;
}

absl::Status RequireClient(const Topology& topo, const ClientId& client) {
  if (topo.AccessPointsOf(client).empty()) {
    return absl::NotFoundError(absl::StrCat("unknown client ", client.value()));
  }
  return absl::OkStatus();
}

// Rule fields (prio/match/action) and switch for flowmod-like directives.
absl::StatusOr<FlowModDirective> ParseFlowMod(Tokens& t, size_t first_word, const Topology& topo) {
  if (t.words.size() < first_word + 2) {
    return absl::InvalidArgumentError("expected flowmod add|remove <switch>");
  }
  FlowModDirective fm;
  const std::string& op = t.words[first_word];
  if (op == "add") {
    fm.op = FlowModOp::kAdd;
  } else if (op == "remove") {
    fm.op = FlowModOp::kRemove;
  } else {
    return absl::InvalidArgumentError(absl::StrCat("unknown flowmod operation \"", op, "\""));
  }
  fm.sw = SwitchId(t.words[first_word + 1]);
  if (!topo.HasSwitch(fm.sw)) return absl::NotFoundError(absl::StrCat("unknown switch ", fm.sw.value()));
  std::vector<std::string> rule_fields;
  for (absl::string_view key : {"prio", "match", "action"}) {
    std::optional<std::string> v = t.Take(key);
    if (!v) return absl::InvalidArgumentError(absl::StrCat("flowmod needs ", key, "="));
    rule_fields.push_back(absl::StrCat(key, "=", *v));
  }
  absl::StatusOr<FlowRule> rule = FlowRule::Parse(absl::StrJoin(rule_fields, " "),
                                                  topo.header_width());
  if (!rule.ok()) return rule.status();
  fm.rule = *std::move(rule);
  if (absl::Status s = ValidateRule(topo, fm.sw, fm.rule); !s.ok()) return s;
  return fm;
}

absl::StatusOr<Directive> ParseDirective(absl::string_view body, const Topology& topo) {
  Tokens t = Split(body);
  if (t.words.empty()) return absl::InvalidArgumentError("missing directive");
  const std::string verb = t.words[0];
  const int width = topo.header_width();

  if (verb == "flowmod") {
    absl::StatusOr<FlowModDirective> fm = ParseFlowMod(t, 1, topo);
    if (!fm.ok()) return fm.status();
    if (absl::Status s = NoLeftovers(t, 3); !s.ok()) return s;
    return *std::move(fm);
  }

  if (verb == "inject") {
    if (t.words.size() < 2) return absl::InvalidArgumentError("inject needs <sw>:<port>");
    InjectDirective inj;
    absl::StatusOr<PortRef> at = ParseAccessPoint(t.words[1], topo);
    if (!at.ok()) return at.status();
    inj.at = *at;
    std::optional<std::string> header = t.Take("header");
    if (!header) return absl::InvalidArgumentError("inject needs header=");
    absl::StatusOr<Header> h = Header::Parse(*header);
    if (!h.ok()) return h.status();
    if (h->width() != width) {
      return absl::InvalidArgumentError(
          absl::StrCat("header \"", *header, "\" has width ", h->width(), ", expected ", width));
    }
    inj.packet.header = *h;
    if (std::optional<std::string> payload = t.Take("payload")) {
      absl::StatusOr<Bytes> bytes = ParseHex(*payload);
      if (!bytes.ok()) return bytes.status();
      inj.packet.payload = *std::move(bytes);
    }
    if (absl::Status s = NoLeftovers(t, 2); !s.ok()) return s;
    return inj;
  }

  if (verb == "attack") {
    if (t.words.size() < 2) return absl::InvalidArgumentError("attack needs a template name");
    const std::string kind = t.words[1];
    if (kind == "join" || kind == "divert") {
      std::optional<std::string> client = t.Take("client");
      if (!client) return absl::InvalidArgumentError(absl::StrCat("attack ", kind, " needs client="));
      ClientId cid(*client);
      if (absl::Status s = RequireClient(topo, cid); !s.ok()) return s;
      TernaryString match = TernaryString::Wildcard(width);
      if (std::optional<std::string> m = t.Take("match")) {
        absl::StatusOr<TernaryString> pm = ParseMatch(*m, width);
        if (!pm.ok()) return pm.status();
        match = *pm;
      }
      uint32_t prio = kDefaultAttackPriority;
      if (std::optional<std::string> p = t.Take("prio")) {
        absl::StatusOr<uint32_t> pp = ParsePriority(*p);
        if (!pp.ok()) return pp.status();
        prio = *pp;
      }
      if (kind == "join") {
        std::optional<std::string> hidden = t.Take("hidden");
        if (!hidden) return absl::InvalidArgumentError("attack join needs hidden=");
        absl::StatusOr<PortRef> hp = ParseAccessPoint(*hidden, topo);
        if (!hp.ok()) return hp.status();
        if (topo.AccessPointAt(*hp)->client == cid) {
          return absl::InvalidArgumentError(
              absl::StrCat("hidden access point ", *hidden, " belongs to ", *client));
        }
        if (absl::Status s = NoLeftovers(t, 2); !s.ok()) return s;
        return JoinAttack{cid, *hp, match, prio};
      }
      std::optional<std::string> via = t.Take("via");
      if (!via) return absl::InvalidArgumentError("attack divert needs via=");
      RegionId region(*via);
      bool known = false;
      for (const auto& [id, info] : topo.switches()) known |= info.region == region;
      if (!known) return absl::NotFoundError(absl::StrCat("no switch in region ", *via));
      if (absl::Status s = NoLeftovers(t, 2); !s.ok()) return s;
      return GeoDiversion{cid, region, match, prio};
    }
    if (kind == "transient") {
      std::optional<std::string> f = t.Take("f");
      std::optional<std::string> period = t.Take("period");
      if (!f || !period) return absl::InvalidArgumentError("attack transient needs f= and period=");
      TransientRule tr;
      if (!absl::SimpleAtod(*f, &tr.on_fraction) || !(tr.on_fraction > 0.0) ||
          !(tr.on_fraction < 1.0)) {
        return absl::InvalidArgumentError(absl::StrCat("transient f must lie in (0,1), got ", *f));
      }
      if (!absl::SimpleAtoi(*period, &tr.period) || tr.period < 2) {
        return absl::InvalidArgumentError(absl::StrCat("transient period must be >= 2, got ", *period));
      }
      if (tr.on_ticks() < 1 || tr.on_ticks() >= tr.period) {
        return absl::InvalidArgumentError(
            absl::StrCat("f=", *f, " rounds to ", tr.on_ticks(), " of ", tr.period, " ticks"));
      }
      // Accept both "attack transient flowmod add <sw> ..." and "attack transient <sw> ...".
      size_t first = 2;
      if (t.words.size() > 3 && t.words[2] == "flowmod") {
        if (t.words[3] != "add") {
          return absl::InvalidArgumentError("attack transient toggles an added rule");
        }
        first = 3;
      } else {
        t.words.insert(t.words.begin() + 2, "add");
      }
      absl::StatusOr<FlowModDirective> fm = ParseFlowMod(t, first, topo);
      if (!fm.ok()) return fm.status();
      if (absl::Status s = NoLeftovers(t, first + 2); !s.ok()) return s;
      tr.sw = fm->sw;
      tr.rule = fm->rule;
      return tr;
    }
    return absl::InvalidArgumentError(absl::StrCat("unknown attack template \"", kind, "\""));
  }

  if (verb == "query") {
    if (t.words.size() < 2) return absl::InvalidArgumentError("query needs a kind");
    QueryDirective q;
    q.kind = t.words[1];
    if (std::find(std::begin(kQueryKinds), std::end(kQueryKinds), q.kind) == std::end(kQueryKinds)) {
      return absl::InvalidArgumentError(absl::StrCat("unknown query kind \"", q.kind, "\""));
    }
    std::optional<std::string> client = t.Take("client");
    std::optional<std::string> at = t.Take("at");
    if (!client || !at) return absl::InvalidArgumentError("query needs client= and at=");
    q.client = ClientId(*client);
    absl::StatusOr<PortRef> ap = ParseAccessPoint(*at, topo);
    if (!ap.ok()) return ap.status();
    q.at = *ap;
    if (t.words.size() > 2) {
      return absl::InvalidArgumentError(absl::StrCat("unexpected word \"", t.words[2], "\""));
    }
    for (auto& [k, v] : t.options) q.params[k] = v;
    return q;
  }

  if (verb == "client") {
    if (t.words.size() < 2) return absl::InvalidArgumentError("client needs an id");
    ClientDirective c;
    c.client = ClientId(t.words[1]);
    if (absl::Status s = RequireClient(topo, c.client); !s.ok()) return s;
    for (size_t i = 2; i < t.words.size(); ++i) {
      if (t.words[i] == "unregistered") {
        c.registered = false;
      } else if (t.words[i] == "silent") {
        c.responds = false;
      } else {
        return absl::InvalidArgumentError(absl::StrCat("unknown client flag \"", t.words[i], "\""));
      }
    }
    if (absl::Status s = NoLeftovers(t, t.words.size()); !s.ok()) return s;
    return c;
  }

  if (verb == "lose") {
    if (t.words.size() < 2) return absl::InvalidArgumentError("lose needs a switch");
    LoseEvents l;
    l.sw = SwitchId(t.words[1]);
    if (!topo.HasSwitch(l.sw)) {
      return absl::NotFoundError(absl::StrCat("unknown switch ", t.words[1]));
    }
    if (std::optional<std::string> count = t.Take("count")) {
      if (!absl::SimpleAtoi(*count, &l.count) || l.count < 1) {
        return absl::InvalidArgumentError(
            absl::StrCat("count must be a positive integer, got \"", *count, "\""));
      }
    }
    if (absl::Status s = NoLeftovers(t, 2); !s.ok()) return s;
    return l;
  }

  if (verb == "advance" || verb == "end") {
    if (absl::Status s = NoLeftovers(t, 1); !s.ok()) return s;
    if (verb == "end") return EndDirective{};
    return AdvanceDirective{};
  }

  return absl::InvalidArgumentError(absl::StrCat("unknown directive \"", verb, "\""));
}

// Adds `port` to the forwarding set of `sw`.
void AddPort(std::map<SwitchId, std::set<PortId>>& ports, const SwitchId& sw, PortId port) {
  if (port != 0) ports[sw].insert(port);
}

std::vector<TimedDirective> RulesFromPorts(int64_t tick, int line,
                                           const std::map<SwitchId, std::set<PortId>>& ports,
                                           const TernaryString& match, uint32_t priority) {
  std::vector<TimedDirective> out;
  for (const auto& [sw, set] : ports) {
    FlowRule rule{priority, match, ForwardAction{std::vector<PortId>(set.begin(), set.end())}};
    out.push_back(TimedDirective{tick, line, FlowModDirective{FlowModOp::kAdd, sw, rule}});
  }
  return out;
}

absl::StatusOr<std::vector<TimedDirective>> ExpandJoin(const TimedDirective& td,
                                                       const JoinAttack& join,
                                                       const Topology& topo) {
  const AccessPoint target = topo.AccessPointsOf(join.client).front();
  auto path = ShortestPath(topo, join.hidden.sw, target.port.sw);
  if (!path) {
    return absl::FailedPreconditionError(absl::StrCat(
        "no path from ", join.hidden.ToString(), " to client ", join.client.value()));
  }
  std::map<SwitchId, std::set<PortId>> ports;
  AddPort(ports, join.hidden.sw, join.hidden.port);
  AddPort(ports, target.port.sw, target.port.port);
  for (const PathStep& step : *path) {
    AddPort(ports, step.sw, step.in_port);
    AddPort(ports, step.sw, step.out_port);
  }
  return RulesFromPorts(td.tick, td.line, ports, join.match, join.priority);
}

absl::StatusOr<std::vector<TimedDirective>> ExpandDivert(const TimedDirective& td,
                                                         const GeoDiversion& div,
                                                         const Topology& topo) {
  std::vector<AccessPoint> aps = topo.AccessPointsOf(div.client);
  const AccessPoint& src = aps.front();
  const AccessPoint& dst = aps.size() > 1 ? aps[1] : aps.front();
  std::optional<std::vector<PathStep>> best_in, best_out;
  for (const auto& [id, info] : topo.switches()) {
    if (info.region != div.via) continue;
    auto in = ShortestPath(topo, src.port.sw, id);
    auto out = ShortestPath(topo, id, dst.port.sw);
    if (!in || !out) continue;
    if (!best_in || in->size() + out->size() < best_in->size() + best_out->size()) {
      best_in = std::move(in);
      best_out = std::move(out);
    }
  }
  if (!best_in) {
    return absl::FailedPreconditionError(
        absl::StrCat("region ", div.via.value(), " is not on any path of ", div.client.value()));
  }
  std::map<SwitchId, std::set<PortId>> ports;
  for (const auto* leg : {&*best_in, &*best_out}) {
    for (const PathStep& step : *leg) AddPort(ports, step.sw, step.out_port);
  }
  AddPort(ports, dst.port.sw, dst.port.port);
  return RulesFromPorts(td.tick, td.line, ports, div.match, div.priority);
}

}  // namespace

int64_t TransientRule::on_ticks() const {
  return static_cast<int64_t>(std::llround(on_fraction * static_cast<double>(period)));
}

std::optional<std::vector<PathStep>> ShortestPath(const Topology& topology, const SwitchId& from,
                                                  const SwitchId& to) {
  if (!topology.HasSwitch(from) || !topology.HasSwitch(to)) return std::nullopt;
  // Predecessor switch plus the (egress at predecessor, ingress here) ports.
  struct Pred {
    SwitchId prev;
    PortId out_port;
    PortId in_port;
  };
  std::map<SwitchId, Pred> pred;
  std::set<SwitchId> seen{from};
  std::deque<SwitchId> queue{from};
  while (!queue.empty() && !seen.contains(to)) {
    SwitchId cur = queue.front();
    queue.pop_front();
    for (const auto& [port, peer] : topology.Neighbors(cur)) {
      if (seen.insert(peer.sw).second) {
        pred[peer.sw] = Pred{cur, port, peer.port};
        queue.push_back(peer.sw);
      }
    }
  }
  if (!seen.contains(to)) return std::nullopt;
  std::vector<PathStep> rev;
  SwitchId cur = to;
  PortId out = 0;
  while (cur != from) {
    const Pred& p = pred.at(cur);
    rev.push_back(PathStep{cur, p.in_port, out});
    out = p.out_port;
    cur = p.prev;
  }
  rev.push_back(PathStep{from, 0, out});
  std::reverse(rev.begin(), rev.end());
  return rev;
}

absl::StatusOr<ScenarioScript> ScenarioScript::Parse(absl::string_view text,
                                                     const Topology& topology) {
  ScenarioScript script;
  int line_no = 0;
  for (absl::string_view raw : absl::StrSplit(text, '\n')) {
    ++line_no;
    absl::string_view line = raw.substr(0, raw.find('#'));
    line = absl::StripAsciiWhitespace(line);
    if (line.empty()) continue;
    auto fail = [line_no](const absl::Status& s) {
      return absl::Status(s.code(), absl::StrCat("line ", line_no, ": ", s.message()));
    };
    if (!absl::ConsumePrefix(&line, "@")) {
      return fail(absl::InvalidArgumentError("directive must start with @<tick>"));
    }
    size_t space = line.find(' ');
    absl::string_view tick_text = line.substr(0, space);
    int64_t tick = 0;
    if (!absl::SimpleAtoi(tick_text, &tick) || tick < 0) {
      return fail(absl::InvalidArgumentError(absl::StrCat("invalid tick \"", tick_text, "\"")));
    }
    absl::string_view body = space == absl::string_view::npos ? "" : line.substr(space + 1);
    absl::StatusOr<Directive> d = ParseDirective(body, topology);
    if (!d.ok()) return fail(d.status());
    if (std::holds_alternative<EndDirective>(*d)) {
      script.end_tick_ = std::max(script.end_tick_.value_or(0), tick);
    }
    script.directives_.push_back(TimedDirective{tick, line_no, *std::move(d)});
  }
  std::stable_sort(script.directives_.begin(), script.directives_.end(),
                   [](const TimedDirective& a, const TimedDirective& b) { return a.tick < b.tick; });
  return script;
}

absl::StatusOr<ScenarioScript> ScenarioScript::LoadFile(const std::string& path,
                                                        const Topology& topology) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open scenario ", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str(), topology);
}

int64_t ScenarioScript::last_tick() const {
  int64_t last = 0;
  for (const TimedDirective& d : directives_) last = std::max(last, d.tick);
  return last;
}

int64_t ScenarioScript::Horizon(int64_t slack) const {
  if (directives_.empty()) return 0;
  return std::max(end_tick_.value_or(0), last_tick() + slack);
}

absl::StatusOr<std::vector<TimedDirective>> ScenarioScript::Expand(const Topology& topology,
                                                                   int64_t horizon) const {
  std::vector<TimedDirective> out;
  for (const TimedDirective& td : directives_) {
    if (const auto* join = std::get_if<JoinAttack>(&td.directive)) {
      absl::StatusOr<std::vector<TimedDirective>> rules = ExpandJoin(td, *join, topology);
      if (!rules.ok()) return rules.status();
      out.insert(out.end(), rules->begin(), rules->end());
    } else if (const auto* div = std::get_if<GeoDiversion>(&td.directive)) {
      absl::StatusOr<std::vector<TimedDirective>> rules = ExpandDivert(td, *div, topology);
      if (!rules.ok()) return rules.status();
      out.insert(out.end(), rules->begin(), rules->end());
    } else if (const auto* tr = std::get_if<TransientRule>(&td.directive)) {
      for (int64_t start = td.tick; start <= horizon; start += tr->period) {
        out.push_back(TimedDirective{start, td.line, FlowModDirective{FlowModOp::kAdd, tr->sw, tr->rule}});
        out.push_back(TimedDirective{start + tr->on_ticks(), td.line,
                                     FlowModDirective{FlowModOp::kRemove, tr->sw, tr->rule}});
      }
    } else if (std::holds_alternative<AdvanceDirective>(td.directive) ||
               std::holds_alternative<EndDirective>(td.directive)) {
      continue;
    } else {
      out.push_back(td);
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TimedDirective& a, const TimedDirective& b) { return a.tick < b.tick; });
  return out;
}

absl::StatusOr<ScenarioLog> RunScenario(const ScenarioScript& script, Network& net,
                                        int64_t horizon, const ScenarioHooks& hooks) {
  absl::StatusOr<std::vector<TimedDirective>> plan = script.Expand(net.topology(), horizon);
  if (!plan.ok()) return plan.status();
  const size_t events_before = net.event_log().size();
  const size_t deliveries_before = net.delivery_log().size();
  auto next = plan->begin();
  for (int64_t tick = net.tick(); tick <= horizon; ++tick) {
    net.AdvanceTo(tick);
    if (hooks.on_tick_start) {
      if (absl::Status s = hooks.on_tick_start(tick, net); !s.ok()) return s;
    }
    for (; next != plan->end() && next->tick <= tick; ++next) {
      if (const auto* fm = std::get_if<FlowModDirective>(&next->directive)) {
        absl::StatusOr<SwitchEvent> ev = net.ApplyFlowMod(fm->sw, fm->op, fm->rule);
        if (!ev.ok()) return ev.status();
      } else if (const auto* inj = std::get_if<InjectDirective>(&next->directive)) {
        absl::StatusOr<ForwardTrace> trace = net.Inject(inj->packet, inj->at);
        if (!trace.ok()) return trace.status();
      } else if (hooks.on_directive) {
        if (absl::Status s = hooks.on_directive(tick, *next, net); !s.ok()) return s;
      }
    }
    if (hooks.on_tick_end) {
      if (absl::Status s = hooks.on_tick_end(tick, net); !s.ok()) return s;
    }
  }
  ScenarioLog log;
  log.events.assign(net.event_log().begin() + events_before, net.event_log().end());
  log.deliveries.assign(net.delivery_log().begin() + deliveries_before, net.delivery_log().end());
  return log;
}

}  // namespace rvaas
