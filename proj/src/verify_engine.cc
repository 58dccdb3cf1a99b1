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

#include "rvaas/verify_engine.h"

#include <deque>
#include <utility>

#include "absl/container/flat_hash_map.h"
#include "absl/status/status.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"

namespace rvaas {
namespace {

// Propagation state: headers that left the origin as `origin` and have been
// transformed by `rewrite` so far.
struct Item {
  SwitchId sw;
  PortId in_port = 0;
  HeaderSpace origin{1};
  Rewrite rewrite = Rewrite::Identity(1);
};

struct StateKey {
  SwitchId sw;
  PortId in_port;
  Rewrite rewrite;

  friend bool operator==(const StateKey&, const StateKey&) = default;
  template <typename H>
  friend H AbslHashValue(H h, const StateKey& k) {
    return H::combine(std::move(h), k.sw, k.in_port, k.rewrite);
  }
};

TableLookupResult LookupIgnoringShadowing(const FlowTable& table, const HeaderSpace& space) {
  TableLookupResult out{{}, space};
  for (const FlowRule& r : table.rules()) {
    HeaderSpace hit = space.Intersect(r.match);
    if (hit.empty()) continue;
    out.matched.push_back(LookupEntry{r, std::move(hit)});
    out.residual = out.residual.Subtract(r.match);
  }
  return out;
}

absl::Status RequireAccessPoint(const Topology& topo, const PortRef& p) {
  if (topo.AccessPointAt(p) == nullptr) {
    return absl::InvalidArgumentError(absl::StrCat(p.ToString(), " is not an access point"));
  }
  return absl::OkStatus();
}

std::string AliasOf(const Topology& topo, const PortRef& p) {
  const AccessPoint* ap = topo.AccessPointAt(p);
  return ap == nullptr ? "?" : ap->Alias();
}

std::string AliasList(const std::set<PortRef>& ports, const Topology& topo) {
  std::vector<std::string> aliases;
  for (const PortRef& p : ports) aliases.push_back(AliasOf(topo, p));
  std::sort(aliases.begin(), aliases.end());
  return aliases.empty() ? "-" : absl::StrJoin(aliases, ",");
}

}  // namespace

std::set<PortRef> IsolationResult::all() const {
  std::set<PortRef> out = own;
  out.insert(foreign.begin(), foreign.end());
  return out;
}

VerifyEngine::VerifyEngine(std::shared_ptr<const Topology> topology, EngineOptions options)
    : topology_(std::move(topology)), options_(options) {}

absl::StatusOr<ReachResult> VerifyEngine::ReachableEndpoints(const PortRef& from,
                                                             const HeaderSpace& s0,
                                                             const Snapshot& snap) const {
  const Topology& topo = *topology_;
  if (absl::Status s = RequireAccessPoint(topo, from); !s.ok()) return s;
  const int width = topo.header_width();
  if (s0.width() != width) {
    return absl::InvalidArgumentError(
        absl::StrCat("header space width ", s0.width(), " != ", width));
  }
  if (s0.empty()) return absl::InvalidArgumentError("initial header space is empty");

  ReachResult result;
  absl::flat_hash_map<StateKey, HeaderSpace> visited;
  std::deque<Item> work;
  work.push_back(Item{from.sw, from.port, s0, Rewrite::Identity(width)});
  while (!work.empty()) {
    Item item = std::move(work.front());
    work.pop_front();
    ++result.iterations;

    StateKey key{item.sw, item.in_port, item.rewrite};
    auto [it, inserted] = visited.try_emplace(key, HeaderSpace::Empty(width));
    HeaderSpace fresh = item.origin.Subtract(it->second);
    fresh.Compact();
    if (fresh.empty()) {
      result.loops.insert(PortRef{item.sw, item.in_port});
      continue;
    }
    if (!inserted && !item.origin.Subtract(fresh).empty()) {
      result.loops.insert(PortRef{item.sw, item.in_port});
    }
    it->second = it->second.Union(fresh);
    it->second.Compact();
    result.switches.insert(item.sw);

    const HeaderSpace current = fresh.Rewritten(item.rewrite);
    const FlowTable& table = snap.table(item.sw);
    TableLookupResult lookup = options_.mutate_ignore_shadowing
                                   ? LookupIgnoringShadowing(table, current)
                                   : table.Lookup(current);
    for (const LookupEntry& entry : lookup.matched) {
      const std::vector<PortId>& ports = ActionPorts(entry.rule.action);
      if (ports.empty()) continue;
      HeaderSpace origin = fresh.PreimageWithin(item.rewrite, entry.space);
      origin.Compact();
      if (origin.empty()) continue;
      Rewrite next = item.rewrite;
      if (const auto* rw = std::get_if<RewriteAction>(&entry.rule.action)) {
        next = item.rewrite.Then(rw->rewrite);
      }
      for (PortId port : ports) {
        const PortRef out{item.sw, port};
        if (topo.AccessPointAt(out) != nullptr) {
          ReachEntry& e = result.entries.try_emplace(out, ReachEntry{out, HeaderSpace::Empty(width),
                                                                     HeaderSpace::Empty(width)})
                              .first->second;
          e.arriving = e.arriving.Union(origin.Rewritten(next));
          e.arriving.Compact();
          e.sent = e.sent.Union(origin);
          e.sent.Compact();
        } else if (std::optional<PortRef> peer = topo.Peer(out)) {
          if (const Link* link = topo.LinkAt(out)) result.links.insert(link->id);
          work.push_back(Item{peer->sw, peer->port, origin, next});
        }
      }
    }
  }
  result.states = visited.size();
  return result;
}

absl::StatusOr<std::vector<SourceEntry>> VerifyEngine::ReachableSources(const PortRef& to,
                                                                        const Snapshot& snap) const {
  if (absl::Status s = RequireAccessPoint(*topology_, to); !s.ok()) return s;
  const HeaderSpace full = HeaderSpace::Full(topology_->header_width());
  std::vector<SourceEntry> out;
  for (const AccessPoint& ap : topology_->access_points()) {
    if (ap.port == to) continue;
    absl::StatusOr<ReachResult> r = ReachableEndpoints(ap.port, full, snap);
    if (!r.ok()) return r.status();
    auto it = r->entries.find(to);
    if (it != r->entries.end()) out.push_back(SourceEntry{ap.port, it->second.sent});
  }
  std::sort(out.begin(), out.end(),
            [](const SourceEntry& a, const SourceEntry& b) { return a.source < b.source; });
  return out;
}

absl::StatusOr<IsolationResult> VerifyEngine::IsolationCandidates(const PortRef& request_point,
                                                                  const ClientId& client,
                                                                  const Snapshot& snap) const {
  if (absl::Status s = RequireAccessPoint(*topology_, request_point); !s.ok()) return s;
  if (topology_->AccessPointAt(request_point)->client != client) {
    return absl::FailedPreconditionError(
        absl::StrCat("request point does not belong to ", client.value()));
  }
  absl::StatusOr<ReachResult> forward =
      ReachableEndpoints(request_point, HeaderSpace::Full(topology_->header_width()), snap);
  if (!forward.ok()) return forward.status();
  absl::StatusOr<std::vector<SourceEntry>> sources = ReachableSources(request_point, snap);
  if (!sources.ok()) return sources.status();

  std::set<PortRef> candidates;
  for (const auto& [egress, entry] : forward->entries) candidates.insert(egress);
  for (const SourceEntry& s : *sources) candidates.insert(s.source);
  IsolationResult result;
  for (const PortRef& p : candidates) {
    (topology_->AccessPointAt(p)->client == client ? result.own : result.foreign).insert(p);
  }
  return result;
}

absl::StatusOr<GeoReport> VerifyEngine::GeoExposure(const ClientId& client,
                                                    const Snapshot& snap) const {
  std::vector<AccessPoint> aps = topology_->AccessPointsOf(client);
  if (aps.empty()) return absl::NotFoundError(absl::StrCat("unknown client ", client.value()));
  GeoReport report;
  const HeaderSpace full = HeaderSpace::Full(topology_->header_width());
  for (const AccessPoint& ap : aps) {
    absl::StatusOr<ReachResult> r = ReachableEndpoints(ap.port, full, snap);
    if (!r.ok()) return r.status();
    for (const SwitchId& sw : r->switches) {
      if (std::optional<RegionId> region = topology_->RegionOf(sw)) {
        report.regions.insert(*region);
        report.witnesses.try_emplace(*region, sw);
      }
    }
    for (const LinkId& link : r->links) {
      if (std::optional<RegionId> region = topology_->RegionOf(link)) {
        report.regions.insert(*region);
        for (const Link& l : topology_->links()) {
          if (l.id == link) report.witnesses.try_emplace(*region, l.a.sw);
        }
      }
    }
  }
  return report;
}

absl::StatusOr<TransferSummary> VerifyEngine::Summary(const ClientId& client,
                                                      const Snapshot& snap) const {
  std::vector<AccessPoint> aps = topology_->AccessPointsOf(client);
  if (aps.empty()) return absl::NotFoundError(absl::StrCat("unknown client ", client.value()));
  TransferSummary summary;
  const HeaderSpace full = HeaderSpace::Full(topology_->header_width());
  for (const AccessPoint& ap : aps) {
    absl::StatusOr<ReachResult> r = ReachableEndpoints(ap.port, full, snap);
    if (!r.ok()) return r.status();
    for (const auto& [egress, entry] : r->entries) {
      summary.rows.push_back(TransferRow{ap.port, egress, entry.sent, entry.arriving});
    }
  }
  return summary;
}

absl::StatusOr<QueryAnswer> VerifyEngine::Answer(QueryKind kind, const ClientId& client,
                                                  const PortRef& request_point,
                                                  const std::map<std::string, std::string>& params,
                                                  const Snapshot& snap) const {
  const AccessPoint* rp = topology_->AccessPointAt(request_point);
  if (rp == nullptr) return absl::InvalidArgumentError("request point is not an access point");
  if (rp->client != client) {
    return absl::FailedPreconditionError(
        absl::StrCat("request point does not belong to ", client.value()));
  }
  for (const auto& [key, value] : params) {
    if (kind != QueryKind::kGeo || key != "allow") {
      return absl::InvalidArgumentError(
          absl::StrCat("unknown parameter \"", key, "\" for ", QueryKindName(kind)));
    }
  }

  QueryAnswer answer;
  answer.body = {absl::StrCat("kind=", QueryKindName(kind)), absl::StrCat("request=", rp->Alias())};
  auto append = [&](const std::vector<std::string>& lines) {
    answer.body.insert(answer.body.end(), lines.begin(), lines.end());
  };
  switch (kind) {
    case QueryKind::kIsolation: {
      absl::StatusOr<IsolationResult> r = IsolationCandidates(request_point, client, snap);
      if (!r.ok()) return r.status();
      append(RenderIsolation(*r, *topology_));
      for (const PortRef& p : r->all()) answer.challenge.push_back(p);
      answer.finding = !r->foreign.empty();
      break;
    }
    case QueryKind::kSources: {
      absl::StatusOr<std::vector<SourceEntry>> r = ReachableSources(request_point, snap);
      if (!r.ok()) return r.status();
      append(RenderSources(*r, *topology_));
      break;
    }
    case QueryKind::kGeo: {
      absl::StatusOr<GeoReport> r = GeoExposure(client, snap);
      if (!r.ok()) return r.status();
      append(RenderGeo(*r));
      if (auto it = params.find("allow"); it != params.end()) {
        std::set<std::string> allowed;
        for (absl::string_view region : absl::StrSplit(it->second, ',', absl::SkipEmpty())) {
          allowed.insert(std::string(region));
        }
        std::vector<std::string> outside;
        for (const RegionId& region : r->regions) {
          if (!allowed.contains(region.value())) outside.push_back(region.value());
        }
        answer.body.push_back(
            absl::StrCat("violation=", outside.empty() ? "-" : absl::StrJoin(outside, ",")));
        answer.finding = !outside.empty();
      }
      break;
    }
    case QueryKind::kSummary: {
      absl::StatusOr<TransferSummary> r = Summary(client, snap);
      if (!r.ok()) return r.status();
      append(RenderSummary(*r, *topology_));
      break;
    }
  }
  if (snap.gap) answer.body.push_back("gap=detected");
  return answer;
}

absl::string_view QueryKindName(QueryKind kind) {
  switch (kind) {
    case QueryKind::kIsolation:
      return "isolation";
    case QueryKind::kSources:
      return "sources";
    case QueryKind::kGeo:
      return "geo";
    case QueryKind::kSummary:
      return "summary";
  }
  return "?";
}

absl::StatusOr<QueryKind> ParseQueryKind(absl::string_view name) {
  for (QueryKind k : {QueryKind::kIsolation, QueryKind::kSources, QueryKind::kGeo, QueryKind::kSummary}) {
    if (QueryKindName(k) == name) return k;
  }
  return absl::InvalidArgumentError(absl::StrCat("unknown query kind \"", name, "\""));
}

std::vector<std::string> RenderReach(const ReachResult& result, const Topology& topology) {
  std::vector<std::string> lines;
  for (const auto& [egress, entry] : result.entries) {
    lines.push_back(absl::StrCat("egress=", AliasOf(topology, egress), " sent=", entry.sent.ToString(),
                                 " arrives=", entry.arriving.ToString()));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

std::vector<std::string> RenderSources(const std::vector<SourceEntry>& sources,
                                       const Topology& topology) {
  std::vector<std::string> lines;
  for (const SourceEntry& s : sources) {
    lines.push_back(absl::StrCat("source=", AliasOf(topology, s.source), " sent=", s.sent.ToString()));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

std::vector<std::string> RenderIsolation(const IsolationResult& result, const Topology& topology) {
  return {absl::StrCat("own=", AliasList(result.own, topology)),
          absl::StrCat("foreign=", AliasList(result.foreign, topology))};
}

std::vector<std::string> RenderGeo(const GeoReport& report) {
  std::vector<std::string> regions;
  for (const RegionId& r : report.regions) regions.push_back(r.value());
  return {absl::StrCat("regions=", regions.empty() ? "-" : absl::StrJoin(regions, ","))};
}

std::vector<std::string> RenderSummary(const TransferSummary& summary, const Topology& topology) {
  std::vector<std::string> lines;
  for (const TransferRow& row : summary.rows) {
    lines.push_back(absl::StrCat("ingress=", AliasOf(topology, row.ingress),
                                 " egress=", AliasOf(topology, row.egress),
                                 " sent=", row.input.ToString(), " arrives=", row.output.ToString()));
  }
  std::sort(lines.begin(), lines.end());
  return lines;
}

}  // namespace rvaas
