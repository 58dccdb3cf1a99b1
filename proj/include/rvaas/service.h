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

// One process hosting the simulated network, the verification controller and
// the client responders. The controller sees the network only through the
// ordered event stream, its own polls and packet-in/packet-out.

#ifndef RVAAS_SERVICE_H_
#define RVAAS_SERVICE_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "rvaas/crypto.h"
#include "rvaas/dataplane_sim.h"
#include "rvaas/inband_auth.h"
#include "rvaas/netgen.h"
#include "rvaas/network_model.h"
#include "rvaas/scenario.h"
#include "rvaas/snapshot_service.h"
#include "rvaas/verify_engine.h"

namespace rvaas {

inline constexpr double kDefaultPollRate = 0.1;

struct ServiceConfig {
  uint64_t seed = 1;
  double poll_rate = kDefaultPollRate;
  // Defaults to DefaultMagic(topology).
  std::optional<TernaryString> magic;
  int64_t auth_timeout = kDefaultAuthTimeout;
  SnapshotOptions snapshot;
};

struct Finding {
  int64_t tick = 0;
  // transient, poll-mismatch, gap, isolation-foreign, auth-shortfall,
  // geo-violation, spoofed-query, report-rejected or magic-rule-missing.
  std::string kind;
  std::string detail;

  std::string ToString() const;
};

// A report as received and checked by the requesting client.
struct ReceivedReport {
  int64_t tick = 0;
  std::string to;
  VerificationReport report;
  bool signature_ok = false;

  std::vector<std::string> Render() const;
};

class VerificationService {
 public:
  static absl::StatusOr<std::unique_ptr<VerificationService>> Create(
      std::shared_ptr<const Topology> topology, ServiceConfig config);

  // Runs the script to its horizon: the explicit end, or the last directive
  // plus enough ticks for every authentication round to finish.
  absl::Status Run(const ScenarioScript& script);

  int64_t horizon() const { return horizon_; }
  const Topology& topology() const { return *topology_; }
  const Network& network() const { return net_; }
  const SnapshotService& snapshots() const { return snapshots_; }
  const VerifyEngine& engine() const { return engine_; }
  const AuthController& controller() const { return *controller_; }
  const KeyRegistry& registry() const { return registry_; }
  const TernaryString& magic() const { return magic_; }
  const std::vector<int64_t>& poll_ticks() const { return poll_ticks_; }
  // Events that were dropped on the way to the controller.
  const std::vector<SwitchEvent>& lost_events() const { return lost_events_; }
  const std::vector<ReceivedReport>& reports() const { return reports_; }

  // Findings raised during the run followed by the end-of-run transient scan.
  std::vector<Finding> findings() const;

  std::string EventsLog() const;
  std::string DeliveriesLog() const;
  std::string SnapshotText() const;
  std::string ReportsText() const;
  std::string FindingsText() const;
  std::string TranscriptText() const;
  // Writes events.log, deliveries.log, snapshot.txt, reports.txt,
  // findings.txt and transcript.log into `dir`, creating it if needed.
  absl::Status WriteArtifacts(const std::string& dir) const;

 private:
  VerificationService(std::shared_ptr<const Topology> topology, ServiceConfig config,
                      TernaryString magic);

  absl::Status OnDirective(int64_t tick, const TimedDirective& d, Network& net);
  absl::Status OnTickEnd(int64_t tick, Network& net);
  absl::Status Pump(Network& net);
  absl::Status HandleEvent(const SwitchEvent& event, Network& net);
  absl::Status HandleDelivery(const Delivery& delivery, Network& net);
  void CheckMagicRules(int64_t tick);
  void Raise(int64_t tick, std::string kind, std::string detail);

  std::shared_ptr<const Topology> topology_;
  ServiceConfig config_;
  TernaryString magic_;
  Network net_;
  SnapshotService snapshots_;
  VerifyEngine engine_;
  SeededRandom controller_rng_;
  KeyRegistry registry_;
  std::unique_ptr<AuthController> controller_;
  std::map<ClientId, std::unique_ptr<SeededRandom>> agent_rngs_;
  std::map<ClientId, ClientAgent> agents_;
  std::vector<std::pair<SwitchId, FlowRule>> magic_rules_;

  int64_t horizon_ = 0;
  std::vector<int64_t> poll_ticks_;
  size_t next_poll_ = 0;
  std::map<SwitchId, int> lose_;
  std::vector<SwitchEvent> lost_events_;
  std::set<SwitchId> missing_magic_;
  size_t transcript_seen_ = 0;
  size_t reports_seen_ = 0;
  std::vector<ReceivedReport> reports_;
  std::vector<Finding> findings_;
};

// Outcome of one generated network in the reachability oracle harness.
struct OracleCase {
  uint64_t seed = 0;
  size_t switches = 0;
  size_t rules = 0;
  // (access point, header) pairs on which the engine and exhaustive
  // simulation disagree about egress points or arriving headers.
  int mismatches = 0;

  std::string ToString() const;
};

OracleCase RunOracleCase(uint64_t seed, const NetGenOptions& options, bool mutate);

}  // namespace rvaas

#endif  // RVAAS_SERVICE_H_
