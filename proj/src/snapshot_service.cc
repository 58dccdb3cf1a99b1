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

#include "rvaas/snapshot_service.h"

#include <algorithm>
#include <random>
#include <set>
#include <utility>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace rvaas {
namespace {

// Rules of `a` not matched one-for-one by a rule of `b`.
std::vector<FlowRule> MultisetMinus(const std::vector<FlowRule>& a, const std::vector<FlowRule>& b) {
  std::vector<bool> used(b.size(), false);
  std::vector<FlowRule> out;
  for (const FlowRule& r : a) {
    bool found = false;
    for (size_t i = 0; i < b.size() && !found; ++i) {
      if (!used[i] && b[i] == r) used[i] = found = true;
    }
    if (!found) out.push_back(r);
  }
  return out;
}

}  // namespace

const FlowTable& Snapshot::table(const SwitchId& sw) const {
  static const FlowTable* const kEmpty = new FlowTable();
  auto it = tables.find(sw);
  return it == tables.end() ? *kEmpty : *it->second;
}

std::string Snapshot::Dump() const {
  std::string out = absl::StrCat("version=", version, " tick=", tick, "\n");
  for (const auto& [sw, table] : tables) {
    for (const FlowRule& r : table->rules()) {
      absl::StrAppend(&out, "flowmod add ", sw.value(), " ", r.ToString(), "\n");
    }
  }
  return out;
}

absl::StatusOr<Snapshot> Snapshot::Parse(absl::string_view text, const Topology& topology) {
  Snapshot snap;
  std::map<SwitchId, FlowTable> tables;
  for (const auto& [id, info] : topology.switches()) tables.emplace(id, FlowTable(id));
  bool header_seen = false;
  int line_no = 0;
  for (absl::string_view raw : absl::StrSplit(text, '\n')) {
    ++line_no;
    absl::string_view line = absl::StripAsciiWhitespace(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto fail = [line_no](absl::string_view msg) {
      return absl::InvalidArgumentError(absl::StrCat("snapshot line ", line_no, ": ", msg));
    };
    if (!header_seen) {
      std::vector<absl::string_view> parts = absl::StrSplit(line, ' ', absl::SkipEmpty());
      if (parts.size() != 2 || !absl::ConsumePrefix(&parts[0], "version=") ||
          !absl::ConsumePrefix(&parts[1], "tick=") ||
          !absl::SimpleAtoi(parts[0], &snap.version) || !absl::SimpleAtoi(parts[1], &snap.tick)) {
        return fail("expected \"version=<v> tick=<t>\"");
      }
      header_seen = true;
      continue;
    }
    if (!absl::ConsumePrefix(&line, "flowmod add ")) return fail("expected \"flowmod add\"");
    size_t space = line.find(' ');
    if (space == absl::string_view::npos) return fail("missing rule");
    SwitchId sw(std::string(line.substr(0, space)));
    if (!topology.HasSwitch(sw)) return fail(absl::StrCat("unknown switch ", sw.value()));
    absl::StatusOr<FlowRule> rule = FlowRule::Parse(line.substr(space + 1), topology.header_width());
    if (!rule.ok()) return fail(rule.status().message());
    if (absl::Status s = ValidateRule(topology, sw, *rule); !s.ok()) return fail(s.message());
    tables.at(sw).Add(*std::move(rule));
  }
  if (!header_seen) return absl::InvalidArgumentError("empty snapshot");
  for (auto& [sw, table] : tables) {
    snap.tables.emplace(sw, std::make_shared<const FlowTable>(std::move(table)));
  }
  return snap;
}

Snapshot CaptureSnapshot(const Network& net) {
  Snapshot snap;
  snap.tick = net.tick();
  for (const auto& [sw, table] : net.tables()) {
    snap.tables.emplace(sw, std::make_shared<const FlowTable>(table));
    snap.provenance.emplace(sw, PolledProvenance{net.tick()});
  }
  return snap;
}

absl::string_view TransientStatusName(TransientStatus status) {
  switch (status) {
    case TransientStatus::kAppeared:
      return "appeared";
    case TransientStatus::kVanished:
      return "vanished";
    case TransientStatus::kFlapping:
      return "flapping";
  }
  return "?";
}

std::string TransientFinding::ToString() const {
  return absl::StrCat("transient status=", TransientStatusName(status), " sw=", sw.value(),
                      " first_seen=", first_seen, " last_seen=", last_seen,
                      " present_in=", present_in, " ", rule.ToString());
}

std::string GapRecord::ToString() const {
  if (by_poll) {
    return absl::StrCat("gap sw=", sw.value(), " expected=", expected, " switch_seq=", got,
                        " t=", tick, " by=poll");
  }
  return absl::StrCat("gap sw=", sw.value(), " expected=", expected, " got=", got, " t=", tick);
}

bool IsGapDetected(const absl::Status& status) {
  return status.code() == kGapDetectedCode &&
         absl::StartsWith(status.message(), "GapDetected");
}

absl::StatusOr<std::vector<int64_t>> SchedulePolls(uint64_t seed, double rate, int64_t horizon) {
  if (!(rate > 0.0) || rate > 1.0) {
    return absl::InvalidArgumentError(absl::StrCat("poll rate must lie in (0, 1], got ", rate));
  }
  std::mt19937_64 rng(seed);
  std::geometric_distribution<int64_t> failures(rate);
  std::vector<int64_t> ticks;
  for (int64_t t = 1 + failures(rng); t <= horizon; t += 1 + failures(rng)) ticks.push_back(t);
  return ticks;
}

SnapshotService::SnapshotService(std::shared_ptr<const Topology> topology, SnapshotOptions options)
    : topology_(std::move(topology)), options_(options) {
  auto initial = std::make_shared<Snapshot>();
  for (const auto& [id, info] : topology_->switches()) {
    initial->tables.emplace(id, std::make_shared<const FlowTable>(FlowTable(id)));
    initial->provenance.emplace(id, PassiveProvenance{0});
    last_seq_.emplace(id, 0);
  }
  current_ = initial;
  history_.push_back(std::move(initial));
}

void SnapshotService::Publish(std::shared_ptr<Snapshot> next) {
  next->version = current_->version + 1;
  next->gap = next->gap || !gaps_.empty();
  current_ = next;
  history_.push_back(std::move(next));
  Retain(current_->tick);
}

void SnapshotService::Retain(int64_t now) {
  while (history_.size() > options_.history_size) history_.pop_front();
  while (!polls_.empty() && polls_.front().tick < now - options_.retention_ticks) polls_.pop_front();
}

absl::StatusOr<std::shared_ptr<const Snapshot>> SnapshotService::IngestEvent(
    const SwitchEvent& event) {
  std::lock_guard<std::mutex> lock(mu_);
  auto seq_it = last_seq_.find(event.sw);
  if (seq_it == last_seq_.end()) {
    return absl::NotFoundError(absl::StrCat("event from unknown switch ", event.sw.value()));
  }
  const uint64_t expected = seq_it->second + 1;
  absl::Status gap = absl::OkStatus();
  if (event.seq != expected) {
    gaps_.push_back(GapRecord{event.sw, expected, event.seq, event.tick});
    gap = absl::Status(kGapDetectedCode,
                       absl::StrCat("GapDetected: switch ", event.sw.value(), " expected seq ",
                                    expected, ", got ", event.seq));
    // Stale or duplicate events carry nothing new.
    if (event.seq < expected) return gap;
  }
  seq_it->second = event.seq;

  const auto* fm = std::get_if<FlowModApplied>(&event.kind);
  if (fm == nullptr || !options_.passive) {
    if (!gap.ok()) {
      auto next = std::make_shared<Snapshot>(*current_);
      next->tick = std::max(current_->tick, event.tick);
      Publish(std::move(next));
      return gap;
    }
    return current_;
  }
  auto next = std::make_shared<Snapshot>(*current_);
  next->tick = std::max(current_->tick, event.tick);
  FlowTable table = next->table(event.sw);
  if (fm->op == FlowModOp::kAdd) {
    table.Add(fm->rule);
  } else {
    table.Remove(fm->rule);
  }
  next->tables[event.sw] = std::make_shared<const FlowTable>(std::move(table));
  next->provenance[event.sw] = PassiveProvenance{event.seq};
  Publish(next);
  if (!gap.ok()) return gap;
  return std::shared_ptr<const Snapshot>(std::move(next));
}

std::shared_ptr<const Snapshot> SnapshotService::ActivePoll(const SwitchId& sw, const Network& net) {
  std::lock_guard<std::mutex> lock(mu_);
  const int64_t now = net.tick();
  const FlowTable& truth = net.table(sw);
  if (options_.passive) {
    const FlowTable& view = current_->table(sw);
    for (const FlowRule& r : MultisetMinus(truth.rules(), view.rules())) {
      poll_findings_.push_back(TransientFinding{sw, r, now, now, 1, TransientStatus::kAppeared});
    }
    for (const FlowRule& r : MultisetMinus(view.rules(), truth.rules())) {
      poll_findings_.push_back(TransientFinding{sw, r, now, now, 0, TransientStatus::kVanished});
    }
    if (net.last_seq(sw) > last_seq_[sw]) {
      gaps_.push_back(GapRecord{sw, last_seq_[sw] + 1, net.last_seq(sw), now, true});
      // The polled table supersedes the missed events; later events continue
      // from the switch's sequence.
      last_seq_[sw] = net.last_seq(sw);
    }
  }
  auto next = std::make_shared<Snapshot>(*current_);
  next->tick = std::max(current_->tick, now);
  auto table = std::make_shared<const FlowTable>(truth);
  next->tables[sw] = table;
  next->provenance[sw] = PolledProvenance{now};
  Publish(next);
  polls_.push_back(PollRecord{current_->version, now, sw, std::move(table)});
  Retain(now);
  return current_;
}

std::shared_ptr<const Snapshot> SnapshotService::PollAll(const Network& net) {
  std::shared_ptr<const Snapshot> last = current();
  for (const auto& [id, info] : topology_->switches()) last = ActivePoll(id, net);
  return last;
}

std::shared_ptr<const Snapshot> SnapshotService::current() const {
  std::lock_guard<std::mutex> lock(mu_);
  return current_;
}

std::vector<std::shared_ptr<const Snapshot>> SnapshotService::history() const {
  std::lock_guard<std::mutex> lock(mu_);
  return {history_.begin(), history_.end()};
}

std::vector<PollRecord> SnapshotService::polls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return {polls_.begin(), polls_.end()};
}

std::vector<GapRecord> SnapshotService::gaps() const {
  std::lock_guard<std::mutex> lock(mu_);
  return gaps_;
}

bool SnapshotService::gap_detected() const {
  std::lock_guard<std::mutex> lock(mu_);
  return !gaps_.empty();
}

std::vector<TransientFinding> SnapshotService::poll_findings() const {
  std::lock_guard<std::mutex> lock(mu_);
  return poll_findings_;
}

std::vector<TransientFinding> SnapshotService::DetectTransients(int64_t window) const {
  std::lock_guard<std::mutex> lock(mu_);
  const int64_t since = current_->tick - window;
  struct Obs {
    int64_t tick = 0;
    const FlowTable* table = nullptr;
    bool polled = false;
  };
  // (switch, version) -> observation; polls override snapshot entries.
  std::map<SwitchId, std::map<uint64_t, Obs>> obs;
  for (const auto& snap : history_) {
    if (snap->tick < since) continue;
    for (const auto& [sw, table] : snap->tables) {
      obs[sw][snap->version] = Obs{snap->tick, table.get(), false};
    }
  }
  for (const PollRecord& p : polls_) {
    if (p.tick < since) continue;
    obs[p.sw][p.version] = Obs{p.tick, p.table.get(), true};
  }

  std::vector<TransientFinding> out;
  for (const auto& [sw, by_version] : obs) {
    std::map<std::string, FlowRule> universe;
    for (const auto& [v, o] : by_version) {
      for (const FlowRule& r : o.table->rules()) universe.emplace(r.ToString(), r);
    }
    for (const auto& [key, rule] : universe) {
      int changes = 0, present_in = 0;
      bool first_present = false, have_prev = false, prev = false;
      int64_t first_seen = 0, last_seen = 0;
      bool seen = false;
      for (const auto& [v, o] : by_version) {
        const bool present = o.table->Contains(rule);
        if (!have_prev) {
          first_present = present;
          have_prev = true;
        } else if (present != prev) {
          ++changes;
        }
        prev = present;
        if (present) {
          if (!seen) first_seen = o.tick;
          seen = true;
          last_seen = o.tick;
          present_in += o.polled;
        }
      }
      if (changes >= 2) {
        out.push_back(TransientFinding{sw, rule, first_seen, last_seen, present_in,
                                       TransientStatus::kFlapping});
      } else if (changes == 1 && first_present) {
        out.push_back(TransientFinding{sw, rule, first_seen, last_seen, present_in,
                                       TransientStatus::kVanished});
      }
    }
  }
  return out;
}

int SnapshotService::TimesPolledPresent(const SwitchId& sw, const FlowRule& rule) const {
  std::lock_guard<std::mutex> lock(mu_);
  int n = 0;
  for (const PollRecord& p : polls_) n += p.sw == sw && p.table->Contains(rule);
  return n;
}

}  // namespace rvaas
