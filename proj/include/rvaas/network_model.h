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

// Static infrastructure description (switches, wiring plan, client access
// points, locations) and the per-switch match-action flow tables.
//
// Topology document grammar, one directive per line, `#` starts a comment:
//
//   headerwidth <L>
//   switch <id> ports <n>                  ports are numbered 1..n
//   link <sw>:<port> <sw>:<port> [id=<link-id>]
//   access <sw>:<port> client <id>
//   location <sw> <region>
//   location link <link-id> <region>
//   field <name> <startbit> <endbit>       inclusive, bit 0 is leftmost
//
// Every port must be either the endpoint of exactly one link or an access
// point of exactly one client.

#ifndef RVAAS_NETWORK_MODEL_H_
#define RVAAS_NETWORK_MODEL_H_

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "rvaas/header_space.h"

namespace rvaas {

inline constexpr int kDefaultHeaderWidth = 16;

// Opaque, non-empty identifier in its own namespace.
template <typename Tag>
class Id {
 public:
  Id() = default;
  explicit Id(std::string value) : value_(std::move(value)) {}

  const std::string& value() const { return value_; }
  bool empty() const { return value_.empty(); }

  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;
  template <typename H>
  friend H AbslHashValue(H h, const Id& id) {
    return H::combine(std::move(h), id.value_);
  }

 private:
  std::string value_;
};

using SwitchId = Id<struct SwitchIdTag>;
using LinkId = Id<struct LinkIdTag>;
using ClientId = Id<struct ClientIdTag>;
using RegionId = Id<struct RegionIdTag>;
using PortId = uint32_t;

struct PortRef {
  SwitchId sw;
  PortId port = 0;

  // "<sw>:<port>"
  static absl::StatusOr<PortRef> Parse(absl::string_view text);
  std::string ToString() const;

  friend auto operator<=>(const PortRef&, const PortRef&) = default;
  friend bool operator==(const PortRef&, const PortRef&) = default;
  template <typename H>
  friend H AbslHashValue(H h, const PortRef& p) {
    return H::combine(std::move(h), p.sw, p.port);
  }
};

struct Link {
  LinkId id;
  PortRef a;
  PortRef b;
};

struct AccessPoint {
  PortRef port;
  ClientId client;
  // 1-based position among the client's access points in declaration order.
  int index = 0;

  // Client-scoped opaque name, "<client>:ap<index>". Never contains the
  // switch identifier.
  std::string Alias() const;
};

struct FieldRange {
  int start = 0;
  int end = 0;
};

struct SwitchInfo {
  SwitchId id;
  PortId port_count = 0;
  std::optional<RegionId> region;
};

class Topology {
 public:
  static absl::StatusOr<Topology> Parse(absl::string_view document,
                                        int default_width = kDefaultHeaderWidth);
  static absl::StatusOr<Topology> LoadFile(const std::string& path,
                                           int default_width = kDefaultHeaderWidth);

  int header_width() const { return header_width_; }
  // True when the document carried an explicit `headerwidth` line.
  bool width_declared() const { return width_declared_; }

  const std::map<SwitchId, SwitchInfo>& switches() const { return switches_; }
  const std::vector<Link>& links() const { return links_; }
  const std::vector<AccessPoint>& access_points() const { return access_points_; }
  const std::map<std::string, FieldRange>& fields() const { return fields_; }

  bool HasSwitch(const SwitchId& sw) const { return switches_.contains(sw); }
  bool HasPort(const PortRef& p) const;
  int num_ports() const;

  // The far end of the link attached at `p`, if `p` is internal.
  std::optional<PortRef> Peer(const PortRef& p) const;
  const Link* LinkAt(const PortRef& p) const;
  const AccessPoint* AccessPointAt(const PortRef& p) const;
  const AccessPoint* FindAlias(absl::string_view alias) const;
  std::vector<AccessPoint> AccessPointsOf(const ClientId& client) const;
  // Sorted, without duplicates.
  std::vector<ClientId> clients() const;

  std::optional<RegionId> RegionOf(const SwitchId& sw) const;
  std::optional<RegionId> RegionOf(const LinkId& link) const;

  // Neighbouring switches reached over links, in ascending port order.
  std::vector<std::pair<PortId, PortRef>> Neighbors(const SwitchId& sw) const;

 private:
  int header_width_ = kDefaultHeaderWidth;
  bool width_declared_ = false;
  std::map<SwitchId, SwitchInfo> switches_;
  std::vector<Link> links_;
  std::vector<AccessPoint> access_points_;
  std::map<LinkId, RegionId> link_regions_;
  std::map<std::string, FieldRange> fields_;
  std::map<PortRef, size_t> link_index_;
  std::map<PortRef, size_t> access_index_;
};

enum class PortKind { kInternal, kAccess };

struct PortClass {
  PortKind kind = PortKind::kInternal;
  std::optional<ClientId> client;

  friend bool operator==(const PortClass&, const PortClass&) = default;
};

// Total over every port of every switch.
std::map<PortRef, PortClass> ClassifyPorts(const Topology& topology);

// ---- Flow rules ----

struct ForwardAction {
  std::vector<PortId> ports;
  friend bool operator==(const ForwardAction&, const ForwardAction&) = default;
};
struct RewriteAction {
  Rewrite rewrite;
  std::vector<PortId> ports;
  friend bool operator==(const RewriteAction&, const RewriteAction&) = default;
};
struct DropAction {
  friend bool operator==(const DropAction&, const DropAction&) = default;
};
struct ControllerAction {
  friend bool operator==(const ControllerAction&, const ControllerAction&) = default;
};

using Action = std::variant<DropAction, ForwardAction, RewriteAction, ControllerAction>;

// `fwd:<ports>`, `rewrite:<mask>/<value>:<ports>`, `drop` or `ctrl`; ports
// are comma separated.
absl::StatusOr<Action> ParseAction(absl::string_view text, int width);
std::string ActionToString(const Action& action);
// Output ports of a forwarding action; empty for drop and controller.
const std::vector<PortId>& ActionPorts(const Action& action);

struct FlowRule {
  uint32_t priority = 0;
  TernaryString match = TernaryString::Wildcard(1);
  Action action;

  // Parses "prio=<p> match=<ternary> action=<action>" (any order).
  static absl::StatusOr<FlowRule> Parse(absl::string_view text, int width);
  std::string ToString() const;

  friend bool operator==(const FlowRule&, const FlowRule&) = default;
};

// Checks widths, that forward port sets are non-empty and that every port
// exists on `sw`.
absl::Status ValidateRule(const Topology& topology, const SwitchId& sw, const FlowRule& rule);

struct LookupEntry {
  FlowRule rule;
  // Headers of the queried space won by `rule`.
  HeaderSpace space;
};

struct TableLookupResult {
  std::vector<LookupEntry> matched;
  // Headers matched by no rule; dropped.
  HeaderSpace residual;
};

// Rules kept in descending priority; equal priorities keep insertion order.
class FlowTable {
 public:
  FlowTable() = default;
  explicit FlowTable(SwitchId owner) : owner_(std::move(owner)) {}

  const SwitchId& owner() const { return owner_; }
  const std::vector<FlowRule>& rules() const { return rules_; }
  bool empty() const { return rules_.empty(); }

  void Add(FlowRule rule);
  // Removes the first rule equal to `rule`; false if there is none.
  bool Remove(const FlowRule& rule);
  bool Contains(const FlowRule& rule) const;

  // Winning rule for a concrete header, or nullptr on a table miss.
  const FlowRule* Lookup(uint64_t header) const;
  // Splits `space` by winning rule. Entries appear in lookup order and only
  // for rules that win a non-empty part.
  TableLookupResult Lookup(const HeaderSpace& space) const;

  friend bool operator==(const FlowTable&, const FlowTable&) = default;

 private:
  SwitchId owner_;
  std::vector<FlowRule> rules_;
};

}  // namespace rvaas

#endif  // RVAAS_NETWORK_MODEL_H_
