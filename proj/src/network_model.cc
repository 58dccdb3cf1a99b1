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

#include "rvaas/network_model.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "absl/strings/match.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace rvaas {
namespace {

struct Line {
  int number;
  std::vector<std::string> tokens;
};

absl::Status LineError(const Line& line, absl::string_view message) {
  return absl::InvalidArgumentError(absl::StrCat("line ", line.number, ": ", message));
}

std::vector<Line> Tokenize(absl::string_view document) {
  std::vector<Line> lines;
  int number = 0;
  for (absl::string_view raw : absl::StrSplit(document, '\n')) {
    ++number;
    if (size_t hash = raw.find('#'); hash != absl::string_view::npos) raw = raw.substr(0, hash);
    std::vector<std::string> tokens = absl::StrSplit(raw, absl::ByAnyChar(" \t\r"), absl::SkipEmpty());
    if (!tokens.empty()) lines.push_back({number, std::move(tokens)});
  }
  return lines;
}

absl::StatusOr<PortId> ParsePortNumber(absl::string_view text) {
  uint32_t port = 0;
  if (!absl::SimpleAtoi(text, &port) || port == 0) {
    return absl::InvalidArgumentError(absl::StrCat("invalid port number \"", text, "\""));
  }
  return port;
}

absl::StatusOr<std::vector<PortId>> ParsePortList(absl::string_view text) {
  std::vector<PortId> ports;
  for (absl::string_view piece : absl::StrSplit(text, ',')) {
    absl::StatusOr<PortId> p = ParsePortNumber(piece);
    if (!p.ok()) return p.status();
    ports.push_back(*p);
  }
  return ports;
}

}  // namespace

absl::StatusOr<PortRef> PortRef::Parse(absl::string_view text) {
  size_t colon = text.rfind(':');
  if (colon == absl::string_view::npos || colon == 0) {
    return absl::InvalidArgumentError(absl::StrCat("expected <switch>:<port>, got \"", text, "\""));
  }
  absl::StatusOr<PortId> port = ParsePortNumber(text.substr(colon + 1));
  if (!port.ok()) return port.status();
  return PortRef{SwitchId(std::string(text.substr(0, colon))), *port};
}

std::string PortRef::ToString() const { return absl::StrCat(sw.value(), ":", port); }

std::string AccessPoint::Alias() const { return absl::StrCat(client.value(), ":ap", index); }

absl::StatusOr<Topology> Topology::LoadFile(const std::string& path, int default_width) {
  std::ifstream in(path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read topology file ", path));
  std::stringstream ss;
  ss << in.rdbuf();
  return Parse(ss.str(), default_width);
}

absl::StatusOr<Topology> Topology::Parse(absl::string_view document, int default_width) {
  Topology t;
  t.header_width_ = default_width;
  std::vector<Line> lines = Tokenize(document);

  // Switches and the header width first so later lines may refer to them in
  // any order.
  for (const Line& line : lines) {
    const std::vector<std::string>& tok = line.tokens;
    if (tok[0] == "headerwidth") {
      if (tok.size() != 2) return LineError(line, "expected: headerwidth <L>");
      if (t.width_declared_) return LineError(line, "duplicate headerwidth");
      int width = 0;
      if (!absl::SimpleAtoi(tok[1], &width)) return LineError(line, "invalid header width");
      if (absl::Status s = ValidateHeaderWidth(width); !s.ok()) {
        return LineError(line, s.message());
      }
      t.header_width_ = width;
      t.width_declared_ = true;
    } else if (tok[0] == "switch") {
      if (tok.size() != 4 || tok[2] != "ports") {
        return LineError(line, "expected: switch <id> ports <n>");
      }
      uint32_t n = 0;
      if (!absl::SimpleAtoi(tok[3], &n) || n == 0) {
        return LineError(line, "a switch needs at least one port");
      }
      SwitchId id(tok[1]);
      if (t.switches_.contains(id)) {
        return absl::AlreadyExistsError(
            absl::StrCat("line ", line.number, ": duplicate switch ", tok[1]));
      }
      t.switches_[id] = SwitchInfo{id, n, std::nullopt};
    }
  }
  if (absl::Status s = ValidateHeaderWidth(t.header_width_); !s.ok()) return s;

  auto require_port = [&t](const Line& line, absl::string_view text) -> absl::StatusOr<PortRef> {
    absl::StatusOr<PortRef> p = PortRef::Parse(text);
    if (!p.ok()) return LineError(line, p.status().message());
    if (!t.switches_.contains(p->sw)) {
      return absl::NotFoundError(
          absl::StrCat("line ", line.number, ": unknown switch ", p->sw.value()));
    }
    if (!t.HasPort(*p)) {
      return absl::NotFoundError(
          absl::StrCat("line ", line.number, ": unknown port ", p->ToString()));
    }
    return *p;
  };
  auto claim = [&t](const Line& line, const PortRef& p) -> absl::Status {
    if (t.link_index_.contains(p) || t.access_index_.contains(p)) {
      return absl::AlreadyExistsError(absl::StrCat(
          "line ", line.number, ": port ", p.ToString(), " is already a link endpoint or access point"));
    }
    return absl::OkStatus();
  };

  std::map<ClientId, int> per_client;
  std::vector<const Line*> locations;
  for (const Line& line : lines) {
    const std::vector<std::string>& tok = line.tokens;
    if (tok[0] == "headerwidth" || tok[0] == "switch") continue;
    if (tok[0] == "link") {
      if (tok.size() != 3 && tok.size() != 4) {
        return LineError(line, "expected: link <sw>:<port> <sw>:<port> [id=<link-id>]");
      }
      absl::StatusOr<PortRef> a = require_port(line, tok[1]);
      if (!a.ok()) return a.status();
      absl::StatusOr<PortRef> b = require_port(line, tok[2]);
      if (!b.ok()) return b.status();
      if (*a == *b) return LineError(line, "a link must connect two distinct endpoints");
      if (absl::Status s = claim(line, *a); !s.ok()) return s;
      if (absl::Status s = claim(line, *b); !s.ok()) return s;
      std::string id = absl::StrCat(a->ToString(), "-", b->ToString());
      if (tok.size() == 4) {
        if (!absl::StartsWith(tok[3], "id=") || tok[3].size() == 3) {
          return LineError(line, "expected id=<link-id>");
        }
        id = tok[3].substr(3);
      }
      for (const Link& existing : t.links_) {
        if (existing.id.value() == id) {
          return absl::AlreadyExistsError(absl::StrCat("line ", line.number, ": duplicate link id ", id));
        }
      }
      t.link_index_[*a] = t.links_.size();
      t.link_index_[*b] = t.links_.size();
      t.links_.push_back(Link{LinkId(id), *a, *b});
    } else if (tok[0] == "access") {
      if (tok.size() != 4 || tok[2] != "client") {
        return LineError(line, "expected: access <sw>:<port> client <id>");
      }
      absl::StatusOr<PortRef> p = require_port(line, tok[1]);
      if (!p.ok()) return p.status();
      if (absl::Status s = claim(line, *p); !s.ok()) return s;
      ClientId client(tok[3]);
      t.access_index_[*p] = t.access_points_.size();
      t.access_points_.push_back(AccessPoint{*p, client, ++per_client[client]});
    } else if (tok[0] == "location") {
      locations.push_back(&line);
    } else if (tok[0] == "field") {
      if (tok.size() != 4) return LineError(line, "expected: field <name> <startbit> <endbit>");
      FieldRange range;
      if (!absl::SimpleAtoi(tok[2], &range.start) || !absl::SimpleAtoi(tok[3], &range.end) ||
          range.start < 0 || range.end < range.start || range.end >= t.header_width_) {
        return LineError(line, absl::StrCat("field range must satisfy 0 <= start <= end < ",
                                            t.header_width_));
      }
      if (!t.fields_.emplace(tok[1], range).second) {
        return LineError(line, absl::StrCat("duplicate field ", tok[1]));
      }
    } else {
      return LineError(line, absl::StrCat("unknown directive \"", tok[0], "\""));
    }
  }

  for (const Line* line : locations) {
    const std::vector<std::string>& tok = line->tokens;
    if (tok.size() == 3) {
      auto it = t.switches_.find(SwitchId(tok[1]));
      if (it == t.switches_.end()) {
        return absl::NotFoundError(
            absl::StrCat("line ", line->number, ": unknown switch ", tok[1]));
      }
      it->second.region = RegionId(tok[2]);
    } else if (tok.size() == 4 && tok[1] == "link") {
      LinkId id(tok[2]);
      bool known = std::any_of(t.links_.begin(), t.links_.end(),
                               [&id](const Link& l) { return l.id == id; });
      if (!known) {
        return absl::NotFoundError(absl::StrCat("line ", line->number, ": unknown link ", tok[2]));
      }
      t.link_regions_[id] = RegionId(tok[3]);
    } else {
      return LineError(*line, "expected: location <sw> <region> | location link <id> <region>");
    }
  }

  for (const auto& [id, info] : t.switches_) {
    for (PortId p = 1; p <= info.port_count; ++p) {
      PortRef ref{id, p};
      if (!t.link_index_.contains(ref) && !t.access_index_.contains(ref)) {
        return absl::FailedPreconditionError(
            absl::StrCat("port ", ref.ToString(), " is neither linked nor an access point"));
      }
    }
  }
  return t;
}

bool Topology::HasPort(const PortRef& p) const {
  auto it = switches_.find(p.sw);
  return it != switches_.end() && p.port >= 1 && p.port <= it->second.port_count;
}

int Topology::num_ports() const {
  int n = 0;
  for (const auto& [id, info] : switches_) n += static_cast<int>(info.port_count);
  return n;
}

std::optional<PortRef> Topology::Peer(const PortRef& p) const {
  const Link* link = LinkAt(p);
  if (link == nullptr) return std::nullopt;
  return link->a == p ? link->b : link->a;
}

const Link* Topology::LinkAt(const PortRef& p) const {
  auto it = link_index_.find(p);
  return it == link_index_.end() ? nullptr : &links_[it->second];
}

const AccessPoint* Topology::AccessPointAt(const PortRef& p) const {
  auto it = access_index_.find(p);
  return it == access_index_.end() ? nullptr : &access_points_[it->second];
}

const AccessPoint* Topology::FindAlias(absl::string_view alias) const {
  for (const AccessPoint& ap : access_points_) {
    if (ap.Alias() == alias) return &ap;
  }
  return nullptr;
}

std::vector<AccessPoint> Topology::AccessPointsOf(const ClientId& client) const {
  std::vector<AccessPoint> out;
  for (const AccessPoint& ap : access_points_) {
    if (ap.client == client) out.push_back(ap);
  }
  return out;
}

std::vector<ClientId> Topology::clients() const {
  std::set<ClientId> unique;
  for (const AccessPoint& ap : access_points_) unique.insert(ap.client);
  return {unique.begin(), unique.end()};
}

std::optional<RegionId> Topology::RegionOf(const SwitchId& sw) const {
  auto it = switches_.find(sw);
  if (it == switches_.end()) return std::nullopt;
  return it->second.region;
}

std::optional<RegionId> Topology::RegionOf(const LinkId& link) const {
  auto it = link_regions_.find(link);
  if (it == link_regions_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::pair<PortId, PortRef>> Topology::Neighbors(const SwitchId& sw) const {
  std::vector<std::pair<PortId, PortRef>> out;
  auto it = switches_.find(sw);
  if (it == switches_.end()) return out;
  for (PortId p = 1; p <= it->second.port_count; ++p) {
    if (std::optional<PortRef> peer = Peer(PortRef{sw, p})) out.emplace_back(p, *peer);
  }
  return out;
}

std::map<PortRef, PortClass> ClassifyPorts(const Topology& topology) {
  std::map<PortRef, PortClass> out;
  for (const auto& [id, info] : topology.switches()) {
    for (PortId p = 1; p <= info.port_count; ++p) {
      PortRef ref{id, p};
      if (const AccessPoint* ap = topology.AccessPointAt(ref)) {
        out[ref] = PortClass{PortKind::kAccess, ap->client};
      } else {
        out[ref] = PortClass{PortKind::kInternal, std::nullopt};
      }
    }
  }
  return out;
}

// ---- Flow rules ----

absl::StatusOr<Action> ParseAction(absl::string_view text, int width) {
  if (text == "drop") return DropAction{};
  if (text == "ctrl") return ControllerAction{};
  if (absl::ConsumePrefix(&text, "fwd:")) {
    absl::StatusOr<std::vector<PortId>> ports = ParsePortList(text);
    if (!ports.ok()) return ports.status();
    return ForwardAction{*std::move(ports)};
  }
  if (absl::ConsumePrefix(&text, "rewrite:")) {
    std::vector<absl::string_view> parts = absl::StrSplit(text, absl::MaxSplits(':', 1));
    std::vector<absl::string_view> mv = absl::StrSplit(parts[0], absl::MaxSplits('/', 1));
    if (parts.size() != 2 || mv.size() != 2) {
      return absl::InvalidArgumentError(
          absl::StrCat("expected rewrite:<mask>/<value>:<ports>, got \"", text, "\""));
    }
    absl::StatusOr<Rewrite> rewrite = Rewrite::Parse(mv[0], mv[1]);
    if (!rewrite.ok()) return rewrite.status();
    if (rewrite->width() != width) {
      return absl::InvalidArgumentError(
          absl::StrCat("rewrite width ", rewrite->width(), " does not match header width ", width));
    }
    absl::StatusOr<std::vector<PortId>> ports = ParsePortList(parts[1]);
    if (!ports.ok()) return ports.status();
    return RewriteAction{*rewrite, *std::move(ports)};
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown action \"", text, "\""));
}

std::string ActionToString(const Action& action) {
  struct Printer {
    std::string operator()(const DropAction&) const { return "drop"; }
    std::string operator()(const ControllerAction&) const { return "ctrl"; }
    std::string operator()(const ForwardAction& a) const {
      return absl::StrCat("fwd:", absl::StrJoin(a.ports, ","));
    }
    std::string operator()(const RewriteAction& a) const {
      return absl::StrCat("rewrite:", a.rewrite.ToString(), ":", absl::StrJoin(a.ports, ","));
    }
  };
  return std::visit(Printer{}, action);
}

const std::vector<PortId>& ActionPorts(const Action& action) {
  static const std::vector<PortId> kNone;
  if (const auto* f = std::get_if<ForwardAction>(&action)) return f->ports;
  if (const auto* r = std::get_if<RewriteAction>(&action)) return r->ports;
  return kNone;
}

absl::StatusOr<FlowRule> FlowRule::Parse(absl::string_view text, int width) {
  std::optional<uint32_t> priority;
  std::optional<TernaryString> match;
  std::optional<Action> action;
  for (absl::string_view token : absl::StrSplit(text, ' ', absl::SkipEmpty())) {
    if (absl::ConsumePrefix(&token, "prio=")) {
      uint32_t p = 0;
      if (!absl::SimpleAtoi(token, &p)) {
        return absl::InvalidArgumentError(absl::StrCat("invalid priority \"", token, "\""));
      }
      priority = p;
    } else if (absl::ConsumePrefix(&token, "match=")) {
      absl::StatusOr<TernaryString> m = TernaryString::Parse(token);
      if (!m.ok()) return m.status();
      if (m->width() != width) {
        return absl::InvalidArgumentError(absl::StrCat(
            "match \"", token, "\" has width ", m->width(), ", expected ", width));
      }
      match = *m;
    } else if (absl::ConsumePrefix(&token, "action=")) {
      absl::StatusOr<Action> a = ParseAction(token, width);
      if (!a.ok()) return a.status();
      action = *std::move(a);
    } else {
      return absl::InvalidArgumentError(absl::StrCat("unexpected rule field \"", token, "\""));
    }
  }
  if (!priority || !match || !action) {
    return absl::InvalidArgumentError(
        absl::StrCat("rule needs prio=, match= and action=: \"", text, "\""));
  }
  return FlowRule{*priority, *match, *std::move(action)};
}

std::string FlowRule::ToString() const {
  return absl::StrCat("prio=", priority, " match=", match.ToString(),
                      " action=", ActionToString(action));
}

absl::Status ValidateRule(const Topology& topology, const SwitchId& sw, const FlowRule& rule) {
  if (!topology.HasSwitch(sw)) {
    return absl::NotFoundError(absl::StrCat("unknown switch ", sw.value()));
  }
  if (rule.match.width() != topology.header_width()) {
    return absl::InvalidArgumentError(absl::StrCat("rule width ", rule.match.width(),
                                                   " does not match header width ",
                                                   topology.header_width()));
  }
  if (const auto* r = std::get_if<RewriteAction>(&rule.action);
      r != nullptr && r->rewrite.width() != topology.header_width()) {
    return absl::InvalidArgumentError("rewrite width does not match header width");
  }
  const bool forwards = std::holds_alternative<ForwardAction>(rule.action) ||
                        std::holds_alternative<RewriteAction>(rule.action);
  const std::vector<PortId>& ports = ActionPorts(rule.action);
  if (forwards && ports.empty()) {
    return absl::InvalidArgumentError("forward port set must be non-empty");
  }
  for (PortId p : ports) {
    if (!topology.HasPort(PortRef{sw, p})) {
      return absl::NotFoundError(absl::StrCat("switch ", sw.value(), " has no port ", p));
    }
  }
  return absl::OkStatus();
}

void FlowTable::Add(FlowRule rule) {
  auto pos = std::find_if(rules_.begin(), rules_.end(), [&rule](const FlowRule& r) {
    return r.priority < rule.priority;
  });
  rules_.insert(pos, std::move(rule));
}

bool FlowTable::Remove(const FlowRule& rule) {
  auto it = std::find(rules_.begin(), rules_.end(), rule);
  if (it == rules_.end()) return false;
  rules_.erase(it);
  return true;
}

bool FlowTable::Contains(const FlowRule& rule) const {
  return std::find(rules_.begin(), rules_.end(), rule) != rules_.end();
}

const FlowRule* FlowTable::Lookup(uint64_t header) const {
  for (const FlowRule& r : rules_) {
    if (r.match.Matches(header)) return &r;
  }
  return nullptr;
}

TableLookupResult FlowTable::Lookup(const HeaderSpace& space) const {
  TableLookupResult result{{}, space};
  for (const FlowRule& r : rules_) {
    if (result.residual.empty()) break;
    HeaderSpace won = result.residual.Intersect(r.match);
    if (won.empty()) continue;
    result.residual = result.residual.Subtract(r.match);
    result.residual.Compact();
    result.matched.push_back(LookupEntry{r, std::move(won.Compact())});
  }
  return result;
}

}  // namespace rvaas
