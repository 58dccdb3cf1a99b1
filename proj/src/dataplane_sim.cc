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

#include "rvaas/dataplane_sim.h"

#include <algorithm>
#include <utility>

#include "absl/container/flat_hash_set.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace rvaas {
namespace {

std::string HexPayload(const Bytes& payload) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(payload.size() * 2);
  for (uint8_t b : payload) {
    out.push_back(kHex[b >> 4]);
    out.push_back(kHex[b & 0xf]);
  }
  return out;
}

struct HopState {
  SwitchId sw;
  PortId in_port;
  uint64_t header;

  friend bool operator==(const HopState&, const HopState&) = default;
  template <typename H>
  friend H AbslHashValue(H h, const HopState& s) {
    return H::combine(std::move(h), s.sw, s.in_port, s.header);
  }
};

class Tracer {
 public:
  Tracer(const Network& net, int width) : net_(net), width_(width) {}

  ForwardTrace Run(const PortRef& at, uint64_t header) {
    Visit(at.sw, at.port, header);
    return std::move(trace_);
  }

 private:
  void Finish(BranchEnd end, uint64_t header, std::optional<PortRef> endpoint) {
    TraceBranch b;
    b.hops = path_;
    b.end = end;
    b.header = Header(header, width_);
    b.endpoint = std::move(endpoint);
    trace_.branches.push_back(std::move(b));
  }

  void Visit(const SwitchId& sw, PortId in_port, uint64_t header) {
    HopState state{sw, in_port, header};
    // A repeated (switch, port, header) on one branch can only cycle.
    if (static_cast<int>(path_.size()) >= net_.hop_limit() || on_path_.contains(state)) {
      Finish(BranchEnd::kLoop, header, std::nullopt);
      return;
    }
    const FlowRule* rule = net_.table(sw).Lookup(header);
    Hop hop;
    hop.sw = sw;
    hop.in_port = in_port;
    if (rule == nullptr) {
      path_.push_back(hop);
      Finish(BranchEnd::kDropped, header, std::nullopt);
      path_.pop_back();
      return;
    }
    hop.rule = *rule;
    if (std::holds_alternative<DropAction>(rule->action)) {
      path_.push_back(hop);
      Finish(BranchEnd::kDropped, header, std::nullopt);
      path_.pop_back();
      return;
    }
    if (std::holds_alternative<ControllerAction>(rule->action)) {
      hop.egress = HopEgress::kController;
      path_.push_back(hop);
      Finish(BranchEnd::kToController, header, PortRef{sw, in_port});
      path_.pop_back();
      return;
    }
    uint64_t out_header = header;
    if (const auto* rw = std::get_if<RewriteAction>(&rule->action)) {
      out_header = rw->rewrite.Apply(header);
    }
    on_path_.insert(state);
    const Topology& topo = net_.topology();
    for (PortId port : ActionPorts(rule->action)) {
      hop.egress = HopEgress::kPort;
      hop.out_port = port;
      path_.push_back(hop);
      PortRef out{sw, port};
      if (topo.AccessPointAt(out) != nullptr) {
        Finish(BranchEnd::kDelivered, out_header, out);
      } else if (auto peer = topo.Peer(out)) {
        Visit(peer->sw, peer->port, out_header);
      } else {
        Finish(BranchEnd::kDropped, out_header, std::nullopt);
      }
      path_.pop_back();
    }
    on_path_.erase(state);
  }

  const Network& net_;
  int width_;
  std::vector<Hop> path_;
  absl::flat_hash_set<HopState> on_path_;
  ForwardTrace trace_;
};

std::string HopToString(const Hop& hop) {
  std::string out = absl::StrCat(hop.sw.value(), ":", hop.in_port);
  switch (hop.egress) {
    case HopEgress::kPort:
      absl::StrAppend(&out, "->", hop.out_port);
      break;
    case HopEgress::kDrop:
      absl::StrAppend(&out, "->drop");
      break;
    case HopEgress::kController:
      absl::StrAppend(&out, "->ctrl");
      break;
  }
  return out;
}

}  // namespace

absl::string_view BranchEndName(BranchEnd end) {
  switch (end) {
    case BranchEnd::kDelivered:
      return "delivered";
    case BranchEnd::kDropped:
      return "drop";
    case BranchEnd::kToController:
      return "ctrl";
    case BranchEnd::kLoop:
      return "loop";
  }
  return "?";
}

std::set<PortRef> ForwardTrace::DeliveredAt() const {
  std::set<PortRef> out;
  for (const TraceBranch& b : branches) {
    if (b.end == BranchEnd::kDelivered) out.insert(*b.endpoint);
  }
  return out;
}

bool ForwardTrace::looped() const {
  return std::any_of(branches.begin(), branches.end(),
                     [](const TraceBranch& b) { return b.end == BranchEnd::kLoop; });
}

std::string ForwardTrace::ToString() const {
  std::vector<std::string> lines;
  for (const TraceBranch& b : branches) {
    std::vector<std::string> hops;
    for (const Hop& h : b.hops) hops.push_back(HopToString(h));
    std::string line = absl::StrCat(absl::StrJoin(hops, " "), " => ", BranchEndName(b.end));
    if (b.endpoint) absl::StrAppend(&line, " ", b.endpoint->ToString());
    lines.push_back(std::move(line));
  }
  return absl::StrJoin(lines, "\n");
}

std::string SwitchEvent::ToString() const {
  std::string out = absl::StrCat("seq=", seq, " t=", tick, " sw=", sw.value(), " ");
  if (const auto* fm = std::get_if<FlowModApplied>(&kind)) {
    absl::StrAppend(&out, "flowmod ", fm->op == FlowModOp::kAdd ? "add " : "remove ",
                    fm->rule.ToString());
    if (fm->noop) absl::StrAppend(&out, " noop");
  } else if (const auto* pin = std::get_if<PacketIn>(&kind)) {
    absl::StrAppend(&out, "packetin port=", pin->in_port,
                    " header=", pin->packet.header.ToString());
    if (!pin->packet.payload.empty()) {
      absl::StrAppend(&out, " payload=", HexPayload(pin->packet.payload));
    }
  } else if (const auto* ps = std::get_if<PortStatus>(&kind)) {
    absl::StrAppend(&out, "portstatus port=", ps->port, " status=", ps->status);
  }
  return out;
}

std::string Delivery::ToString() const {
  std::string out = absl::StrCat("t=", tick, " at=", at.ToString(), " client=", client.value(),
                                 " header=", packet.header.ToString());
  if (!packet.payload.empty()) absl::StrAppend(&out, " payload=", HexPayload(packet.payload));
  return out;
}

Network::Network(std::shared_ptr<const Topology> topology, SimOptions options)
    : topology_(std::move(topology)) {
  hop_limit_ = options.hop_limit > 0 ? options.hop_limit
                                     : 4 * static_cast<int>(topology_->switches().size());
  for (const auto& [id, info] : topology_->switches()) {
    tables_.emplace(id, FlowTable(id));
    last_seq_.emplace(id, 0);
  }
}

void Network::AdvanceTo(int64_t tick) { tick_ = std::max(tick_, tick); }

const FlowTable& Network::table(const SwitchId& sw) const {
  static const FlowTable* const kEmpty = new FlowTable();
  auto it = tables_.find(sw);
  return it == tables_.end() ? *kEmpty : it->second;
}

uint64_t Network::last_seq(const SwitchId& sw) const {
  auto it = last_seq_.find(sw);
  return it == last_seq_.end() ? 0 : it->second;
}

ForwardTrace Network::Forward(const Packet& packet, const PortRef& at) const {
  return Tracer(*this, topology_->header_width()).Run(at, packet.header.bits());
}

absl::StatusOr<ForwardTrace> Network::Trace(const Packet& packet, const PortRef& at) const {
  if (topology_->AccessPointAt(at) == nullptr) {
    return absl::InvalidArgumentError(absl::StrCat(at.ToString(), " is not an access point"));
  }
  if (packet.header.width() != topology_->header_width()) {
    return absl::InvalidArgumentError(absl::StrCat("packet header width ", packet.header.width(),
                                                   " != ", topology_->header_width()));
  }
  return Forward(packet, at);
}

void Network::Emit(SwitchEvent event) {
  event.seq = ++last_seq_[event.sw];
  event.tick = tick_;
  event_log_.push_back(std::move(event));
}

absl::StatusOr<SwitchEvent> Network::ApplyFlowMod(const SwitchId& sw, FlowModOp op,
                                                  const FlowRule& rule) {
  if (absl::Status s = ValidateRule(*topology_, sw, rule); !s.ok()) return s;
  FlowTable& table = tables_.at(sw);
  FlowModApplied applied{op, rule, false};
  if (op == FlowModOp::kAdd) {
    table.Add(rule);
  } else {
    applied.noop = !table.Remove(rule);
  }
  SwitchEvent event;
  event.sw = sw;
  event.kind = std::move(applied);
  Emit(std::move(event));
  return event_log_.back();
}

void Network::RecordOutcomes(const ForwardTrace& trace, const Bytes& payload) {
  for (const TraceBranch& b : trace.branches) {
    if (b.end == BranchEnd::kDelivered) {
      const AccessPoint* ap = topology_->AccessPointAt(*b.endpoint);
      delivery_log_.push_back(Delivery{tick_, *b.endpoint, ap->client, Packet{b.header, payload}});
    } else if (b.end == BranchEnd::kToController) {
      SwitchEvent event;
      event.sw = b.endpoint->sw;
      event.kind = PacketIn{Packet{b.header, payload}, b.endpoint->port};
      Emit(std::move(event));
    }
  }
}

absl::StatusOr<PacketOutResult> Network::PacketOut(const SwitchId& sw, PortId port,
                                                   const Packet& packet) {
  PortRef out{sw, port};
  if (!topology_->HasPort(out)) {
    return absl::NotFoundError(absl::StrCat("unknown port ", out.ToString()));
  }
  if (packet.header.width() != topology_->header_width()) {
    return absl::InvalidArgumentError("packet header width does not match the topology");
  }
  PacketOutResult result;
  if (const AccessPoint* ap = topology_->AccessPointAt(out)) {
    Delivery d{tick_, out, ap->client, packet};
    delivery_log_.push_back(d);
    result.delivered = std::move(d);
    return result;
  }
  PortRef peer = *topology_->Peer(out);
  ForwardTrace trace = Forward(packet, peer);
  RecordOutcomes(trace, packet.payload);
  result.trace = std::move(trace);
  return result;
}

absl::StatusOr<ForwardTrace> Network::Inject(const Packet& packet, const PortRef& at) {
  absl::StatusOr<ForwardTrace> trace = Trace(packet, at);
  if (!trace.ok()) return trace.status();
  RecordOutcomes(*trace, packet.payload);
  return trace;
}

std::vector<SwitchEvent> Network::DrainEvents() {
  std::vector<SwitchEvent> out(event_log_.begin() + events_drained_, event_log_.end());
  events_drained_ = event_log_.size();
  return out;
}

std::vector<Delivery> Network::DrainDeliveries() {
  std::vector<Delivery> out(delivery_log_.begin() + deliveries_drained_, delivery_log_.end());
  deliveries_drained_ = delivery_log_.size();
  return out;
}

}  // namespace rvaas
