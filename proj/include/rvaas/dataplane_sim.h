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

// Executable model of the trusted switches and links. Flow tables are
// written only through ApplyFlowMod; every applied change and every packet
// punted to the controller is recorded as a SwitchEvent with a per-switch
// sequence number. Time is a discrete tick counter.

#ifndef RVAAS_DATAPLANE_SIM_H_
#define RVAAS_DATAPLANE_SIM_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "rvaas/header_space.h"
#include "rvaas/network_model.h"

namespace rvaas {

using Bytes = std::vector<uint8_t>;

struct Packet {
  Header header{0, 1};
  Bytes payload;

  friend bool operator==(const Packet&, const Packet&) = default;
};

enum class HopEgress { kPort, kDrop, kController };

struct Hop {
  SwitchId sw;
  PortId in_port = 0;
  // Applied rule; nullopt on a table miss (implicit drop).
  std::optional<FlowRule> rule;
  HopEgress egress = HopEgress::kDrop;
  // Meaningful only for HopEgress::kPort.
  PortId out_port = 0;
};

enum class BranchEnd { kDelivered, kDropped, kToController, kLoop };

absl::string_view BranchEndName(BranchEnd end);

// One root-to-leaf path of a (possibly multicast) forwarding tree.
struct TraceBranch {
  std::vector<Hop> hops;
  BranchEnd end = BranchEnd::kDropped;
  // Header as it leaves the last hop.
  Header header{0, 1};
  // Delivery access point, or the switch/ingress port that punted the packet
  // to the controller.
  std::optional<PortRef> endpoint;
};

struct ForwardTrace {
  std::vector<TraceBranch> branches;

  std::set<PortRef> DeliveredAt() const;
  bool looped() const;
  std::string ToString() const;
};

enum class FlowModOp { kAdd, kRemove };

struct FlowModApplied {
  FlowModOp op = FlowModOp::kAdd;
  FlowRule rule;
  // A removal of a rule that was not installed; the table is unchanged.
  bool noop = false;
};

struct PacketIn {
  Packet packet;
  PortId in_port = 0;
};

struct PortStatus {
  PortId port = 0;
  std::string status;
};

struct SwitchEvent {
  uint64_t seq = 0;
  int64_t tick = 0;
  SwitchId sw;
  std::variant<FlowModApplied, PacketIn, PortStatus> kind;

  // "seq=<n> t=<tick> sw=<id> <kind> ..."
  std::string ToString() const;
};

struct Delivery {
  int64_t tick = 0;
  PortRef at;
  ClientId client;
  Packet packet;

  std::string ToString() const;
};

struct PacketOutResult {
  // Set when the port is an access point.
  std::optional<Delivery> delivered;
  // Set when the port is internal; the packet entered the neighbour.
  std::optional<ForwardTrace> trace;
};

struct SimOptions {
  // Maximum hops per branch; 0 selects 4 x number of switches.
  int hop_limit = 0;
};

class Network {
 public:
  explicit Network(std::shared_ptr<const Topology> topology, SimOptions options = {});

  const Topology& topology() const { return *topology_; }
  std::shared_ptr<const Topology> shared_topology() const { return topology_; }
  int hop_limit() const { return hop_limit_; }

  int64_t tick() const { return tick_; }
  // Time never moves backwards.
  void AdvanceTo(int64_t tick);

  const FlowTable& table(const SwitchId& sw) const;
  const std::map<SwitchId, FlowTable>& tables() const { return tables_; }
  // Sequence number of the last event emitted by `sw`; 0 before the first.
  uint64_t last_seq(const SwitchId& sw) const;

  // Pure trace of a packet entering switch `at.sw` on port `at.port`. No
  // events or deliveries are produced.
  ForwardTrace Forward(const Packet& packet, const PortRef& at) const;
  // As Forward, but `at` must be an access point and the header width must
  // match.
  absl::StatusOr<ForwardTrace> Trace(const Packet& packet, const PortRef& at) const;

  absl::StatusOr<SwitchEvent> ApplyFlowMod(const SwitchId& sw, FlowModOp op, const FlowRule& rule);
  absl::StatusOr<PacketOutResult> PacketOut(const SwitchId& sw, PortId port, const Packet& packet);
  // Sends a packet from the client at access point `at` into the network,
  // recording deliveries and packet-ins.
  absl::StatusOr<ForwardTrace> Inject(const Packet& packet, const PortRef& at);

  const std::vector<SwitchEvent>& event_log() const { return event_log_; }
  const std::vector<Delivery>& delivery_log() const { return delivery_log_; }

  // Events and deliveries not yet handed out, oldest first. Nothing is lost
  // or reordered between the log and the drained stream.
  std::vector<SwitchEvent> DrainEvents();
  std::vector<Delivery> DrainDeliveries();

 private:
  void Emit(SwitchEvent event);
  void RecordOutcomes(const ForwardTrace& trace, const Bytes& payload);

  std::shared_ptr<const Topology> topology_;
  int hop_limit_;
  int64_t tick_ = 0;
  std::map<SwitchId, FlowTable> tables_;
  std::map<SwitchId, uint64_t> last_seq_;
  std::vector<SwitchEvent> event_log_;
  std::vector<Delivery> delivery_log_;
  size_t events_drained_ = 0;
  size_t deliveries_drained_ = 0;
};

}  // namespace rvaas

#endif  // RVAAS_DATAPLANE_SIM_H_
