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

// The verification controller's view of the network configuration. The view
// is built passively from switch events and checked by active polls at
// random times; a bounded history of versions exposes rules that come and go
// between observations.

#ifndef RVAAS_SNAPSHOT_SERVICE_H_
#define RVAAS_SNAPSHOT_SERVICE_H_

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "rvaas/dataplane_sim.h"
#include "rvaas/network_model.h"

namespace rvaas {

inline constexpr size_t kDefaultHistorySize = 256;
inline constexpr int64_t kDefaultRetentionTicks = 1024;

struct PassiveProvenance {
  uint64_t seq = 0;
  friend bool operator==(const PassiveProvenance&, const PassiveProvenance&) = default;
};
struct PolledProvenance {
  int64_t tick = 0;
  friend bool operator==(const PolledProvenance&, const PolledProvenance&) = default;
};
using Provenance = std::variant<PassiveProvenance, PolledProvenance>;

struct Snapshot {
  uint64_t version = 0;
  int64_t tick = 0;
  std::map<SwitchId, std::shared_ptr<const FlowTable>> tables;
  std::map<SwitchId, Provenance> provenance;
  // Sticky: an update was missed at or before this version.
  bool gap = false;

  const FlowTable& table(const SwitchId& sw) const;

  // "version=<v> tick=<t>" followed by one `flowmod add` line per rule, in
  // switch order and then lookup order.
  std::string Dump() const;
  // Inverse of Dump. Provenance is not part of the dump.
  static absl::StatusOr<Snapshot> Parse(absl::string_view text, const Topology& topology);
};

// Ground-truth copy of every table, version 0, provenance Polled(now).
Snapshot CaptureSnapshot(const Network& net);

enum class TransientStatus { kAppeared, kVanished, kFlapping };

absl::string_view TransientStatusName(TransientStatus status);

struct TransientFinding {
  SwitchId sw;
  FlowRule rule;
  int64_t first_seen = 0;
  int64_t last_seen = 0;
  // Number of polls that observed the rule.
  int present_in = 0;
  TransientStatus status = TransientStatus::kFlapping;

  std::string ToString() const;
  friend bool operator==(const TransientFinding&, const TransientFinding&) = default;
};

struct GapRecord {
  SwitchId sw;
  uint64_t expected = 0;
  // Sequence number of the arriving event, or the switch's last sequence
  // number when a poll found events that never arrived.
  uint64_t got = 0;
  int64_t tick = 0;
  bool by_poll = false;

  std::string ToString() const;
};

struct PollRecord {
  uint64_t version = 0;
  int64_t tick = 0;
  SwitchId sw;
  std::shared_ptr<const FlowTable> table;
};

struct SnapshotOptions {
  size_t history_size = kDefaultHistorySize;
  int64_t retention_ticks = kDefaultRetentionTicks;
  // When false the view is built from polls alone; events only advance the
  // sequence check.
  bool passive = true;
};

// Error code used for a sequence gap.
inline constexpr absl::StatusCode kGapDetectedCode = absl::StatusCode::kDataLoss;
bool IsGapDetected(const absl::Status& status);

// Poll ticks in (0, horizon] with geometric inter-arrival gaps of mean
// 1/rate. Deterministic in (seed, rate, horizon). rate must lie in (0, 1].
absl::StatusOr<std::vector<int64_t>> SchedulePolls(uint64_t seed, double rate, int64_t horizon);

// Thread-compatible for a single writer; snapshots handed out are immutable
// and safe to read from any thread.
class SnapshotService {
 public:
  explicit SnapshotService(std::shared_ptr<const Topology> topology, SnapshotOptions options = {});

  // Applies one switch event. A sequence number other than last + 1 returns
  // a GapDetected error; the gap is recorded and marked on every later
  // version. Packet-ins and port status only advance the sequence.
  absl::StatusOr<std::shared_ptr<const Snapshot>> IngestEvent(const SwitchEvent& event);

  // Copies the ground-truth table of `sw` into a new Polled version. Rules
  // that differ from the passive view become Appeared/Vanished findings;
  // a switch sequence ahead of the view is recorded as a gap.
  std::shared_ptr<const Snapshot> ActivePoll(const SwitchId& sw, const Network& net);
  // Polls every switch at the current tick.
  std::shared_ptr<const Snapshot> PollAll(const Network& net);

  std::shared_ptr<const Snapshot> current() const;
  std::vector<std::shared_ptr<const Snapshot>> history() const;
  std::vector<PollRecord> polls() const;
  std::vector<GapRecord> gaps() const;
  bool gap_detected() const;
  // Discrepancies found by active polls, in poll order.
  std::vector<TransientFinding> poll_findings() const;

  // Rules that appear and disappear among the observations of the last
  // `window` ticks. Flapping needs two or more presence changes, Vanished is
  // a single present-to-absent change. Rules that only appear are not
  // reported.
  std::vector<TransientFinding> DetectTransients(int64_t window) const;
  std::vector<TransientFinding> DetectTransients() const {
    return DetectTransients(options_.retention_ticks);
  }

  // Number of retained polls of `sw` whose table held `rule`.
  int TimesPolledPresent(const SwitchId& sw, const FlowRule& rule) const;

  const SnapshotOptions& options() const { return options_; }

 private:
  void Publish(std::shared_ptr<Snapshot> next);
  void Retain(int64_t now);

  std::shared_ptr<const Topology> topology_;
  SnapshotOptions options_;
  mutable std::mutex mu_;
  std::shared_ptr<const Snapshot> current_;
  std::deque<std::shared_ptr<const Snapshot>> history_;
  std::deque<PollRecord> polls_;
  std::map<SwitchId, uint64_t> last_seq_;
  std::vector<GapRecord> gaps_;
  std::vector<TransientFinding> poll_findings_;
};

}  // namespace rvaas

#endif  // RVAAS_SNAPSHOT_SERVICE_H_
