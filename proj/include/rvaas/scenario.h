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

// Scripted behaviour of the (possibly compromised) management plane.
//
// One directive per line, each prefixed by the tick it fires at; `#` starts a
// comment:
//
//   @<t> flowmod add|remove <sw> prio=<p> match=<ternary> action=<action>
//   @<t> inject <sw>:<port> header=<bits> [payload=<hex>]
//   @<t> attack join client=<id> hidden=<sw>:<port> [match=<ternary>] [prio=<p>]
//   @<t> attack divert client=<id> via=<region> [match=<ternary>] [prio=<p>]
//   @<t> attack transient [flowmod add] <sw> prio=<p> match=<m> action=<a>
//        f=<fraction> period=<ticks>
//   @<t> query isolation|sources|geo|summary client=<id> at=<sw>:<port>
//        [<key>=<value> ...]
//   @<t> client <id> unregistered|silent
//   @<t> lose <sw> [count=<n>]
//   @<t> advance
//   @<t> end
//
// Attack templates expand into plain flow-mods. `query`, `client` and `lose`
// are consumed by the verification service; the simulator only schedules
// them.

#ifndef RVAAS_SCENARIO_H_
#define RVAAS_SCENARIO_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "rvaas/dataplane_sim.h"
#include "rvaas/network_model.h"

namespace rvaas {

inline constexpr uint32_t kDefaultAttackPriority = 1000;

struct FlowModDirective {
  FlowModOp op = FlowModOp::kAdd;
  SwitchId sw;
  FlowRule rule;
};

struct InjectDirective {
  PortRef at;
  Packet packet;
};

struct JoinAttack {
  ClientId client;
  PortRef hidden;
  TernaryString match = TernaryString::Wildcard(1);
  uint32_t priority = kDefaultAttackPriority;
};

struct GeoDiversion {
  ClientId client;
  RegionId via;
  TernaryString match = TernaryString::Wildcard(1);
  uint32_t priority = kDefaultAttackPriority;
};

struct TransientRule {
  SwitchId sw;
  FlowRule rule;
  double on_fraction = 0.5;
  int64_t period = 10;

  // Ticks per period during which the rule is installed.
  int64_t on_ticks() const;
};

struct QueryDirective {
  // "isolation", "sources", "geo" or "summary".
  std::string kind;
  ClientId client;
  PortRef at;
  std::map<std::string, std::string> params;
};

struct ClientDirective {
  ClientId client;
  // Unregistered clients sign with a key the controller does not know.
  bool registered = true;
  // Silent clients never answer authentication challenges.
  bool responds = true;
};

// The next `count` events of `sw` never reach the verification controller.
struct LoseEvents {
  SwitchId sw;
  int count = 1;
};

struct AdvanceDirective {};
struct EndDirective {};

using Directive = std::variant<FlowModDirective, InjectDirective, JoinAttack, GeoDiversion,
                               TransientRule, QueryDirective, ClientDirective, LoseEvents,
                               AdvanceDirective, EndDirective>;

struct TimedDirective {
  int64_t tick = 0;
  // 1-based source line, 0 for directives produced by expansion.
  int line = 0;
  Directive directive;
};

class ScenarioScript {
 public:
  // Parses and validates every reference against `topology`.
  static absl::StatusOr<ScenarioScript> Parse(absl::string_view text, const Topology& topology);
  static absl::StatusOr<ScenarioScript> LoadFile(const std::string& path,
                                                 const Topology& topology);

  const std::vector<TimedDirective>& directives() const { return directives_; }
  bool empty() const { return directives_.empty(); }
  int64_t last_tick() const;
  std::optional<int64_t> end_tick() const { return end_tick_; }

  // Last tick to simulate: the explicit `end`, or `last_tick() + slack`.
  int64_t Horizon(int64_t slack) const;

  // Replaces attack templates by flow-mods. Transient rules toggle until
  // `horizon`. The result is ordered by tick, then by script position.
  absl::StatusOr<std::vector<TimedDirective>> Expand(const Topology& topology,
                                                     int64_t horizon) const;

 private:
  std::vector<TimedDirective> directives_;
  std::optional<int64_t> end_tick_;
};

// Shortest switch-level path between two switches; ties are broken by
// ascending port order. Each step names the ingress port (0 at the start)
// and the egress port (0 at the end).
struct PathStep {
  SwitchId sw;
  PortId in_port = 0;
  PortId out_port = 0;
};
std::optional<std::vector<PathStep>> ShortestPath(const Topology& topology, const SwitchId& from,
                                                  const SwitchId& to);

struct ScenarioHooks {
  // Called before the directives of each tick.
  std::function<absl::Status(int64_t tick, Network& net)> on_tick_start;
  // Receives `query`, `client` and `lose` directives.
  std::function<absl::Status(int64_t tick, const TimedDirective& d, Network& net)> on_directive;
  // Called after the directives of each tick.
  std::function<absl::Status(int64_t tick, Network& net)> on_tick_end;
};

struct ScenarioLog {
  std::vector<SwitchEvent> events;
  std::vector<Delivery> deliveries;
};

// Runs ticks 0..horizon. The logs contain what the run added to `net`.
absl::StatusOr<ScenarioLog> RunScenario(const ScenarioScript& script, Network& net,
                                        int64_t horizon, const ScenarioHooks& hooks = {});

}  // namespace rvaas

#endif  // RVAAS_SCENARIO_H_
