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

#include "rvaas/service.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <utility>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/strip.h"

namespace rvaas {
namespace {

// Slack after the last directive: one authentication round plus a margin.
int64_t HorizonSlack(const ServiceConfig& config) { return config.auth_timeout + 2; }

std::string JoinLines(const std::vector<std::string>& lines) {
  std::string out;
  for (const std::string& l : lines) absl::StrAppend(&out, l, "\n");
  return out;
}

}  // namespace

std::string Finding::ToString() const { return absl::StrCat("t=", tick, " ", kind, " ", detail); }

std::vector<std::string> ReceivedReport::Render() const {
  std::vector<std::string> lines = {absl::StrCat("report t=", tick, " to=", to, " signature=",
                                                 signature_ok ? "valid" : "invalid")};
  for (const std::string& l : report.Render()) lines.push_back(l);
  return lines;
}

absl::StatusOr<std::unique_ptr<VerificationService>> VerificationService::Create(
    std::shared_ptr<const Topology> topology, ServiceConfig config) {
  if (!(config.poll_rate > 0 && config.poll_rate <= 1)) {
    return absl::InvalidArgumentError(
        absl::StrCat("poll rate must lie in (0, 1], got ", config.poll_rate));
  }
  if (config.auth_timeout < 1) return absl::InvalidArgumentError("timeout must be positive");
  TernaryString magic = TernaryString::Wildcard(1);
  if (config.magic) {
    if (absl::Status s = ValidateMagic(*config.magic, *topology); !s.ok()) return s;
    magic = *config.magic;
  } else {
    absl::StatusOr<TernaryString> m = DefaultMagic(*topology);
    if (!m.ok()) return m.status();
    magic = *m;
  }
  return std::unique_ptr<VerificationService>(
      new VerificationService(std::move(topology), std::move(config), magic));
}

VerificationService::VerificationService(std::shared_ptr<const Topology> topology,
                                         ServiceConfig config, TernaryString magic)
    : topology_(std::move(topology)),
      config_(std::move(config)),
      magic_(magic),
      net_(topology_),
      snapshots_(topology_, config_.snapshot),
      engine_(topology_),
      controller_rng_(config_.seed, "controller"),
      registry_([&] {
        SeededRandom key_rng(config_.seed, "controller-key");
        return KeyPair::Generate(key_rng);
      }()) {
  for (const ClientId& client : topology_->clients()) {
    SeededRandom key_rng(config_.seed, absl::StrCat("client-key:", client.value()));
    KeyPair identity = KeyPair::Generate(key_rng);
    (void)registry_.Register(client, identity.public_key());
    auto rng = std::make_unique<SeededRandom>(config_.seed, absl::StrCat("client:", client.value()));
    agents_.try_emplace(client, topology_, client, identity, registry_.controller().public_key(),
                        magic_, rng.get());
    agent_rngs_.emplace(client, std::move(rng));
  }
  const VerifyEngine* engine = &engine_;
  controller_ = std::make_unique<AuthController>(
      topology_, &registry_, &controller_rng_,
      AuthOptions{magic_, config_.auth_timeout, kDefaultReplayWindow},
      [engine](const ClientQuery& q, const PortRef& rp, const Snapshot& snap) {
        return engine->Answer(q.kind, q.client, rp, q.params, snap);
      });
  magic_rules_ = MagicRules(*topology_, magic_);
}

void VerificationService::Raise(int64_t tick, std::string kind, std::string detail) {
  findings_.push_back(Finding{tick, std::move(kind), std::move(detail)});
}

absl::Status VerificationService::Run(const ScenarioScript& script) {
  horizon_ = script.Horizon(HorizonSlack(config_));
  absl::StatusOr<std::vector<int64_t>> polls =
      SchedulePolls(config_.seed, config_.poll_rate, horizon_);
  if (!polls.ok()) return polls.status();
  poll_ticks_ = *std::move(polls);
  next_poll_ = 0;

  for (const auto& [sw, rule] : magic_rules_) {
    absl::StatusOr<SwitchEvent> ev = net_.ApplyFlowMod(sw, FlowModOp::kAdd, rule);
    if (!ev.ok()) return ev.status();
  }

  ScenarioHooks hooks;
  hooks.on_directive = [this](int64_t tick, const TimedDirective& d, Network& net) {
    return OnDirective(tick, d, net);
  };
  hooks.on_tick_end = [this](int64_t tick, Network& net) { return OnTickEnd(tick, net); };
  absl::StatusOr<ScenarioLog> log = RunScenario(script, net_, horizon_, hooks);
  return log.status();
}

absl::Status VerificationService::OnDirective(int64_t tick, const TimedDirective& d, Network& net) {
  if (const auto* q = std::get_if<QueryDirective>(&d.directive)) {
    absl::StatusOr<QueryKind> kind = ParseQueryKind(q->kind);
    if (!kind.ok()) return kind.status();
    const AccessPoint* ap = topology_->AccessPointAt(q->at);
    if (ap == nullptr) {
      return absl::InvalidArgumentError(absl::StrCat(q->at.ToString(), " is not an access point"));
    }
    // The query is built by whoever sits at the access point; it may claim
    // another client's identity.
    absl::StatusOr<Packet> packet = agents_.at(ap->client).NewQuery(*kind, q->params, q->client);
    if (!packet.ok()) return packet.status();
    absl::StatusOr<ForwardTrace> trace = net.Inject(*packet, q->at);
    return trace.status();
  }
  if (const auto* c = std::get_if<ClientDirective>(&d.directive)) {
    ClientAgent& agent = agents_.at(c->client);
    agent.set_responds(c->responds);
    if (!c->registered) {
      registry_.Unregister(c->client);
    } else if (registry_.Find(c->client) == nullptr) {
      (void)registry_.Register(c->client, agent.public_key());
    }
    return absl::OkStatus();
  }
  if (const auto* l = std::get_if<LoseEvents>(&d.directive)) {
    lose_[l->sw] += l->count;
    return absl::OkStatus();
  }
  (void)tick;
  return absl::OkStatus();
}

absl::Status VerificationService::OnTickEnd(int64_t tick, Network& net) {
  if (absl::Status s = Pump(net); !s.ok()) return s;
  bool polled = false;
  while (next_poll_ < poll_ticks_.size() && poll_ticks_[next_poll_] <= tick) {
    ++next_poll_;
    polled = true;
  }
  // A final full poll closes the run so trailing gaps cannot go unnoticed.
  if (polled || tick == horizon_) snapshots_.PollAll(net);
  if (absl::Status s = controller_->OnTick(tick, net); !s.ok()) return s;
  if (absl::Status s = Pump(net); !s.ok()) return s;
  CheckMagicRules(tick);

  const std::vector<TranscriptEntry>& transcript = controller_->transcript();
  for (; transcript_seen_ < transcript.size(); ++transcript_seen_) {
    const TranscriptEntry& e = transcript[transcript_seen_];
    if (e.kind == TranscriptKind::kQueryRejected && absl::StrContains(e.detail, "reason=spoofed")) {
      const AccessPoint* ap = topology_->AccessPointAt(e.at);
      Raise(e.tick, "spoofed-query",
            absl::StrCat("at=", ap != nullptr ? ap->Alias() : e.at.ToString(), " ", e.detail));
    }
  }
  const std::vector<CompletedReport>& done = controller_->reports();
  for (; reports_seen_ < done.size(); ++reports_seen_) {
    const CompletedReport& r = done[reports_seen_];
    const std::string request = topology_->AccessPointAt(r.request_point)->Alias();
    const std::string who = absl::StrCat("client=", r.report.client.value(), " request=", request);
    if (r.finding) {
      const std::string kind =
          r.report.kind == QueryKind::kGeo ? "geo-violation" : "isolation-foreign";
      std::vector<std::string> evidence;
      for (const std::string& l : r.report.body) {
        if (absl::StartsWith(l, "foreign=") || absl::StartsWith(l, "violation=")) {
          evidence.push_back(l);
        }
      }
      Raise(r.tick, kind, absl::StrCat(who, " ", absl::StrJoin(evidence, " ")));
    }
    if (r.report.auth_received < r.report.auth_requested) {
      Raise(r.tick, "auth-shortfall",
            absl::StrCat(who, " requested=", r.report.auth_requested,
                         " received=", r.report.auth_received));
    }
  }
  return absl::OkStatus();
}

absl::Status VerificationService::Pump(Network& net) {
  // Each round answers what the previous one produced; challenge, reply and
  // report need at most a handful of rounds.
  for (int round = 0; round < 64; ++round) {
    std::vector<SwitchEvent> events = net.DrainEvents();
    std::vector<Delivery> deliveries = net.DrainDeliveries();
    if (events.empty() && deliveries.empty()) return absl::OkStatus();
    for (const SwitchEvent& ev : events) {
      if (absl::Status s = HandleEvent(ev, net); !s.ok()) return s;
    }
    for (const Delivery& d : deliveries) {
      if (absl::Status s = HandleDelivery(d, net); !s.ok()) return s;
    }
  }
  return absl::InternalError("control traffic did not settle within one tick");
}

absl::Status VerificationService::HandleEvent(const SwitchEvent& event, Network& net) {
  if (int& lose = lose_[event.sw]; lose > 0) {
    --lose;
    lost_events_.push_back(event);
    return absl::OkStatus();
  }
  absl::StatusOr<std::shared_ptr<const Snapshot>> snap = snapshots_.IngestEvent(event);
  if (!snap.ok() && !IsGapDetected(snap.status())) return snap.status();
  if (std::holds_alternative<PacketIn>(event.kind)) {
    return controller_->OnPacketIn(event, *snapshots_.current(), net);
  }
  return absl::OkStatus();
}

absl::Status VerificationService::HandleDelivery(const Delivery& delivery, Network& net) {
  if (!magic_.Matches(delivery.packet.header)) return absl::OkStatus();
  absl::StatusOr<FrameType> type = PeekFrameType(delivery.packet.payload);
  if (!type.ok()) return absl::OkStatus();
  ClientAgent& agent = agents_.at(delivery.client);
  if (*type == FrameType::kChallenge) {
    if (std::optional<Packet> reply = agent.AnswerChallenge(delivery)) {
      absl::StatusOr<ForwardTrace> trace = net.Inject(*reply, delivery.at);
      return trace.status();
    }
  } else if (*type == FrameType::kReport) {
    absl::StatusOr<VerificationReport> report = DecodeReport(delivery.packet.payload);
    const std::string to = topology_->AccessPointAt(delivery.at)->Alias();
    if (!report.ok()) {
      Raise(delivery.tick, "report-rejected", absl::StrCat("to=", to, " reason=malformed"));
      return absl::OkStatus();
    }
    const bool ok = agent.VerifyReport(*report);
    if (!ok) Raise(delivery.tick, "report-rejected", absl::StrCat("to=", to, " reason=signature"));
    reports_.push_back(ReceivedReport{delivery.tick, to, *std::move(report), ok});
  }
  return absl::OkStatus();
}

void VerificationService::CheckMagicRules(int64_t tick) {
  std::shared_ptr<const Snapshot> snap = snapshots_.current();
  for (const auto& [sw, rule] : magic_rules_) {
    const bool present = snap->table(sw).Contains(rule);
    if (!present && missing_magic_.insert(sw).second) {
      Raise(tick, "magic-rule-missing", absl::StrCat("sw=", sw.value()));
    } else if (present) {
      missing_magic_.erase(sw);
    }
  }
}

std::vector<Finding> VerificationService::findings() const {
  std::vector<Finding> out = findings_;
  for (const GapRecord& g : snapshots_.gaps()) {
    out.push_back(Finding{g.tick, "gap",
                          absl::StrCat("sw=", g.sw.value(), " expected=", g.expected,
                                       g.by_poll ? " switch_seq=" : " got=", g.got,
                                       g.by_poll ? " by=poll" : "")});
  }
  for (const TransientFinding& f : snapshots_.poll_findings()) {
    out.push_back(Finding{f.last_seen, "poll-mismatch",
                          std::string(absl::StripPrefix(f.ToString(), "transient "))});
  }
  for (const TransientFinding& f : snapshots_.DetectTransients()) {
    out.push_back(Finding{f.last_seen, "transient",
                          std::string(absl::StripPrefix(f.ToString(), "transient "))});
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Finding& a, const Finding& b) { return a.tick < b.tick; });
  return out;
}

std::string VerificationService::EventsLog() const {
  std::vector<std::string> lines;
  for (const SwitchEvent& e : net_.event_log()) lines.push_back(e.ToString());
  return JoinLines(lines);
}

std::string VerificationService::DeliveriesLog() const {
  std::vector<std::string> lines;
  for (const Delivery& d : net_.delivery_log()) lines.push_back(d.ToString());
  return JoinLines(lines);
}

std::string VerificationService::SnapshotText() const { return snapshots_.current()->Dump(); }

std::string VerificationService::ReportsText() const {
  std::string out;
  for (const ReceivedReport& r : reports_) absl::StrAppend(&out, JoinLines(r.Render()), "\n");
  return out;
}

std::string VerificationService::FindingsText() const {
  std::vector<std::string> lines;
  for (const Finding& f : findings()) lines.push_back(f.ToString());
  return JoinLines(lines);
}

std::string VerificationService::TranscriptText() const {
  std::vector<std::string> lines = {registry_.attestation().ToString()};
  for (const TranscriptEntry& e : controller_->transcript()) lines.push_back(e.ToString());
  return JoinLines(lines);
}

absl::Status VerificationService::WriteArtifacts(const std::string& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return absl::InternalError(absl::StrCat("cannot create ", dir, ": ", ec.message()));
  const std::pair<const char*, std::string> files[] = {
      {"events.log", EventsLog()},     {"deliveries.log", DeliveriesLog()},
      {"snapshot.txt", SnapshotText()}, {"reports.txt", ReportsText()},
      {"findings.txt", FindingsText()}, {"transcript.log", TranscriptText()},
  };
  for (const auto& [name, body] : files) {
    const std::string path = (std::filesystem::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
    if (!out) return absl::InternalError(absl::StrCat("cannot write ", path));
  }
  return absl::OkStatus();
}

std::string OracleCase::ToString() const {
  return absl::StrCat("seed=", seed, " switches=", switches, " rules=", rules,
                      " mismatches=", mismatches, " ", mismatches == 0 ? "pass" : "FAIL");
}

OracleCase RunOracleCase(uint64_t seed, const NetGenOptions& options, bool mutate) {
  GeneratedNet g = GenerateNetwork(seed, options);
  OracleCase out;
  out.seed = seed;
  out.switches = g.topology->switches().size();
  // A hop limit no branch can reach: loops end on a repeated state instead.
  Network net(g.topology, SimOptions{.hop_limit = 1 << 20});
  for (const auto& [sw, rules] : g.rules) {
    for (const FlowRule& r : rules) {
      if (net.ApplyFlowMod(sw, FlowModOp::kAdd, r).ok()) ++out.rules;
    }
  }
  const Snapshot snap = CaptureSnapshot(net);
  VerifyEngine engine(g.topology, EngineOptions{.mutate_ignore_shadowing = mutate});
  const int width = g.topology->header_width();
  for (const AccessPoint& ap : g.topology->access_points()) {
    absl::StatusOr<ReachResult> r = engine.ReachableEndpoints(ap.port, HeaderSpace::Full(width), snap);
    if (!r.ok()) {
      ++out.mismatches;
      continue;
    }
    for (uint64_t h = 0; h < (uint64_t{1} << width); ++h) {
      std::map<PortRef, std::set<uint64_t>> simulated;
      for (const TraceBranch& b : net.Forward(Packet{Header(h, width), {}}, ap.port).branches) {
        if (b.end == BranchEnd::kDelivered) simulated[*b.endpoint].insert(b.header.bits());
      }
      bool agree = true;
      for (const auto& [egress, entry] : r->entries) {
        auto it = simulated.find(egress);
        if (entry.sent.Contains(h) != (it != simulated.end())) agree = false;
      }
      for (const auto& [egress, outs] : simulated) {
        auto it = r->entries.find(egress);
        if (it == r->entries.end()) {
          agree = false;
          continue;
        }
        for (uint64_t o : outs) agree = agree && it->second.arriving.Contains(o);
      }
      if (!agree) ++out.mismatches;
    }
  }
  return out;
}

}  // namespace rvaas
