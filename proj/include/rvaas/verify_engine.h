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

// Header-space reachability over an immutable snapshot. Results that leave
// the controller name access points by their client-scoped alias only; the
// traversed switches and links are kept for internal use (geo exposure) and
// are never rendered.

#ifndef RVAAS_VERIFY_ENGINE_H_
#define RVAAS_VERIFY_ENGINE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "rvaas/header_space.h"
#include "rvaas/network_model.h"
#include "rvaas/snapshot_service.h"

namespace rvaas {

struct ReachEntry {
  PortRef egress;
  // Headers as they arrive at `egress`.
  HeaderSpace arriving{1};
  // Headers the sender must emit for them to arrive at `egress`.
  HeaderSpace sent{1};
};

struct ReachResult {
  // Keyed by egress access point; arriving spaces are never empty.
  std::map<PortRef, ReachEntry> entries;
  // Ingress ports at which already-propagated headers were cut.
  std::set<PortRef> loops;
  // Traversed by some non-empty header space. Internal only.
  std::set<SwitchId> switches;
  std::set<LinkId> links;
  // Work items processed; bounded by distinct (port, rewrite) states times
  // the number of headers.
  uint64_t iterations = 0;
  // Distinct (switch, ingress port, composed rewrite) states visited.
  size_t states = 0;
};

struct SourceEntry {
  PortRef source;
  // Headers the source may send that arrive at the queried access point.
  HeaderSpace sent{1};
};

struct IsolationResult {
  std::set<PortRef> own;
  std::set<PortRef> foreign;

  std::set<PortRef> all() const;
};

struct GeoReport {
  std::set<RegionId> regions;
  // One traversed switch per region. Internal only.
  std::map<RegionId, SwitchId> witnesses;
};

struct TransferRow {
  PortRef ingress;
  PortRef egress;
  HeaderSpace input{1};
  HeaderSpace output{1};
};

struct TransferSummary {
  std::vector<TransferRow> rows;
};

enum class QueryKind : uint8_t { kIsolation = 1, kSources = 2, kGeo = 3, kSummary = 4 };

absl::string_view QueryKindName(QueryKind kind);
absl::StatusOr<QueryKind> ParseQueryKind(absl::string_view name);

// Client-facing answer to one query. `body` is the report body shared by the
// in-band protocol and the command line; `challenge` lists the access points
// to authenticate (isolation only).
struct QueryAnswer {
  std::vector<std::string> body;
  std::vector<PortRef> challenge;
  // Foreign endpoints or a region outside the allowed set.
  bool finding = false;
};

struct EngineOptions {
  // Fault injection for the oracle harness: every matching rule receives its
  // whole match instead of the part not shadowed by higher priorities.
  bool mutate_ignore_shadowing = false;
};

class VerifyEngine {
 public:
  explicit VerifyEngine(std::shared_ptr<const Topology> topology, EngineOptions options = {});

  const Topology& topology() const { return *topology_; }

  absl::StatusOr<ReachResult> ReachableEndpoints(const PortRef& from, const HeaderSpace& s0,
                                                 const Snapshot& snap) const;
  // Forward analysis from every other access point, keeping what reaches
  // `to`. Ordered by source access point.
  absl::StatusOr<std::vector<SourceEntry>> ReachableSources(const PortRef& to,
                                                            const Snapshot& snap) const;
  // Access points that can reach or be reached from the request point,
  // partitioned by ownership.
  absl::StatusOr<IsolationResult> IsolationCandidates(const PortRef& request_point,
                                                      const ClientId& client,
                                                      const Snapshot& snap) const;
  absl::StatusOr<GeoReport> GeoExposure(const ClientId& client, const Snapshot& snap) const;
  absl::StatusOr<TransferSummary> Summary(const ClientId& client, const Snapshot& snap) const;

  // Evaluates a query received at `request_point` on behalf of `client`.
  // Only geo accepts a parameter, `allow=<region>,...`.
  absl::StatusOr<QueryAnswer> Answer(QueryKind kind, const ClientId& client,
                                     const PortRef& request_point,
                                     const std::map<std::string, std::string>& params,
                                     const Snapshot& snap) const;

 private:
  std::shared_ptr<const Topology> topology_;
  EngineOptions options_;
};

// Client-facing renderings. Every access point is written as its alias.
std::vector<std::string> RenderReach(const ReachResult& result, const Topology& topology);
std::vector<std::string> RenderSources(const std::vector<SourceEntry>& sources,
                                       const Topology& topology);
std::vector<std::string> RenderIsolation(const IsolationResult& result, const Topology& topology);
std::vector<std::string> RenderGeo(const GeoReport& report);
std::vector<std::string> RenderSummary(const TransferSummary& summary, const Topology& topology);

}  // namespace rvaas

#endif  // RVAAS_VERIFY_ENGINE_H_
