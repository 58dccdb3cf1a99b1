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

// rvaas: drive the simulated network and the verification service.
//
//   rvaas run --topology T --scenario S --out DIR
//   rvaas query <kind> --topology T (--snapshot F | --scenario S) --client C --at A
//   rvaas snapshot dump --topology T --scenario S
//   rvaas oracle [--count N] [--width L] [--mutate]
//   rvaas scenario check --topology T --scenario S
//
// Exit status: 0 clean, 1 usage or input error, 2 security findings (run) or
// oracle failures.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "rvaas/network_model.h"
#include "rvaas/scenario.h"
#include "rvaas/service.h"
#include "rvaas/snapshot_service.h"
#include "rvaas/verify_engine.h"

namespace rvaas {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitFindings = 2;

struct Flags {
  std::string topology;
  std::string scenario;
  std::string snapshot;
  std::string out;
  std::string magic;
  std::string client;
  std::string at;
  std::string kind;
  std::vector<std::string> params;
  uint64_t seed = 1;
  double poll_rate = kDefaultPollRate;
  int width = 0;
  int64_t timeout = kDefaultAuthTimeout;
  size_t history = kDefaultHistorySize;
  int64_t window = kDefaultRetentionTicks;
  bool poll_only = false;
  int count = 100;
  bool mutate = false;
};

int Fail(const absl::Status& status) {
  std::cerr << "rvaas: " << status << "\n";
  return kExitError;
}

absl::Status ApplySeedOverride(Flags& f) {
  const char* env = std::getenv("RVAAS_SEED");
  if (env == nullptr) return absl::OkStatus();
  if (!absl::SimpleAtoi(env, &f.seed)) {
    return absl::InvalidArgumentError(absl::StrCat("RVAAS_SEED is not an integer: ", env));
  }
  return absl::OkStatus();
}

absl::StatusOr<std::shared_ptr<const Topology>> LoadTopology(const Flags& f) {
  if (f.topology.empty()) return absl::InvalidArgumentError("--topology is required");
  absl::StatusOr<Topology> t =
      f.width > 0 ? Topology::LoadFile(f.topology, f.width) : Topology::LoadFile(f.topology);
  if (!t.ok()) return t.status();
  if (f.width > 0 && t->header_width() != f.width) {
    return absl::InvalidArgumentError(absl::StrCat("--width ", f.width,
                                                   " conflicts with the topology header width ",
                                                   t->header_width()));
  }
  return std::make_shared<const Topology>(*std::move(t));
}

absl::StatusOr<ScenarioScript> LoadScript(const Flags& f, const Topology& topo) {
  if (f.scenario.empty()) return absl::InvalidArgumentError("--scenario is required");
  return ScenarioScript::LoadFile(f.scenario, topo);
}

absl::StatusOr<ServiceConfig> MakeConfig(const Flags& f, const Topology& topo) {
  ServiceConfig c;
  c.seed = f.seed;
  c.poll_rate = f.poll_rate;
  c.auth_timeout = f.timeout;
  c.snapshot.history_size = f.history;
  c.snapshot.retention_ticks = f.window;
  c.snapshot.passive = !f.poll_only;
  if (!f.magic.empty()) {
    absl::StatusOr<TernaryString> m = TernaryString::Parse(f.magic);
    if (!m.ok()) return m.status();
    if (absl::Status s = ValidateMagic(*m, topo); !s.ok()) return s;
    c.magic = *m;
  }
  return c;
}

absl::StatusOr<std::unique_ptr<VerificationService>> RunService(const Flags& f,
                                                                std::shared_ptr<const Topology> topo) {
  absl::StatusOr<ScenarioScript> script = LoadScript(f, *topo);
  if (!script.ok()) return script.status();
  absl::StatusOr<ServiceConfig> config = MakeConfig(f, *topo);
  if (!config.ok()) return config.status();
  absl::StatusOr<std::unique_ptr<VerificationService>> svc =
      VerificationService::Create(topo, *std::move(config));
  if (!svc.ok()) return svc.status();
  if (absl::Status s = (*svc)->Run(*script); !s.ok()) return s;
  return svc;
}

int CmdRun(const Flags& f) {
  absl::StatusOr<std::shared_ptr<const Topology>> topo = LoadTopology(f);
  if (!topo.ok()) return Fail(topo.status());
  if (f.out.empty()) return Fail(absl::InvalidArgumentError("--out is required"));
  absl::StatusOr<std::unique_ptr<VerificationService>> svc = RunService(f, *topo);
  if (!svc.ok()) return Fail(svc.status());
  if (absl::Status s = (*svc)->WriteArtifacts(f.out); !s.ok()) return Fail(s);
  const std::vector<Finding> findings = (*svc)->findings();
  std::cout << "horizon=" << (*svc)->horizon() << " events=" << (*svc)->network().event_log().size()
            << " reports=" << (*svc)->reports().size() << " findings=" << findings.size() << "\n";
  for (const Finding& finding : findings) std::cout << finding.ToString() << "\n";
  return findings.empty() ? kExitOk : kExitFindings;
}

absl::StatusOr<PortRef> ResolveAccessPoint(const Topology& topo, const std::string& text) {
  if (const AccessPoint* ap = topo.FindAlias(text)) return ap->port;
  absl::StatusOr<PortRef> p = PortRef::Parse(text);
  if (!p.ok() || topo.AccessPointAt(*p) == nullptr) {
    return absl::NotFoundError(absl::StrCat("unknown access point \"", text, "\""));
  }
  return *p;
}

int CmdQuery(const Flags& f) {
  absl::StatusOr<std::shared_ptr<const Topology>> topo = LoadTopology(f);
  if (!topo.ok()) return Fail(topo.status());
  absl::StatusOr<QueryKind> kind = ParseQueryKind(f.kind);
  if (!kind.ok()) return Fail(kind.status());
  const ClientId client(f.client);
  if ((*topo)->AccessPointsOf(client).empty()) {
    return Fail(absl::NotFoundError(absl::StrCat("unknown client \"", f.client, "\"")));
  }
  PortRef at;
  if (f.at.empty()) {
    at = (*topo)->AccessPointsOf(client).front().port;
  } else {
    absl::StatusOr<PortRef> p = ResolveAccessPoint(**topo, f.at);
    if (!p.ok()) return Fail(p.status());
    at = *p;
  }
  std::map<std::string, std::string> params;
  for (const std::string& kv : f.params) {
    const size_t eq = kv.find('=');
    if (eq == 0 || eq == std::string::npos) {
      return Fail(absl::InvalidArgumentError(absl::StrCat("bad --param \"", kv, "\"")));
    }
    params[kv.substr(0, eq)] = kv.substr(eq + 1);
  }

  Snapshot snap;
  if (!f.snapshot.empty()) {
    std::ifstream in(f.snapshot);
    if (!in) return Fail(absl::NotFoundError(absl::StrCat("cannot read ", f.snapshot)));
    std::stringstream ss;
    ss << in.rdbuf();
    absl::StatusOr<Snapshot> parsed = Snapshot::Parse(ss.str(), **topo);
    if (!parsed.ok()) return Fail(parsed.status());
    snap = *std::move(parsed);
  } else {
    absl::StatusOr<std::unique_ptr<VerificationService>> svc = RunService(f, *topo);
    if (!svc.ok()) return Fail(svc.status());
    snap = *(*svc)->snapshots().current();
  }
  VerifyEngine engine(*topo);
  absl::StatusOr<QueryAnswer> answer = engine.Answer(*kind, client, at, params, snap);
  if (!answer.ok()) return Fail(answer.status());
  for (const std::string& line : answer->body) std::cout << line << "\n";
  return kExitOk;
}

int CmdSnapshotDump(const Flags& f) {
  absl::StatusOr<std::shared_ptr<const Topology>> topo = LoadTopology(f);
  if (!topo.ok()) return Fail(topo.status());
  absl::StatusOr<std::unique_ptr<VerificationService>> svc = RunService(f, *topo);
  if (!svc.ok()) return Fail(svc.status());
  std::cout << (*svc)->SnapshotText();
  return kExitOk;
}

int CmdOracle(const Flags& f) {
  if (f.count < 0) return Fail(absl::InvalidArgumentError("--count must be non-negative"));
  NetGenOptions options;
  if (f.width != 0) options.width = f.width;
  if (options.width < 1 || options.width > 10) {
    return Fail(absl::InvalidArgumentError("oracle header width must lie in [1, 10]"));
  }
  int failed = 0;
  for (int i = 0; i < f.count; ++i) {
    OracleCase c = RunOracleCase(f.seed + static_cast<uint64_t>(i), options, f.mutate);
    failed += c.mismatches != 0;
    std::cout << "case " << i << " " << c.ToString() << "\n";
  }
  std::cout << "cases=" << f.count << " passed=" << f.count - failed << " failed=" << failed
            << "\n";
  return failed == 0 ? kExitOk : kExitFindings;
}

int CmdScenarioCheck(const Flags& f) {
  absl::StatusOr<std::shared_ptr<const Topology>> topo = LoadTopology(f);
  if (!topo.ok()) return Fail(topo.status());
  absl::StatusOr<ScenarioScript> script = LoadScript(f, **topo);
  if (!script.ok()) return Fail(script.status());
  const int64_t horizon = script->Horizon(f.timeout + 2);
  absl::StatusOr<std::vector<TimedDirective>> plan = script->Expand(**topo, horizon);
  if (!plan.ok()) return Fail(plan.status());
  std::cout << "ok directives=" << script->directives().size() << " expanded=" << plan->size()
            << " horizon=" << horizon << "\n";
  return kExitOk;
}

void AddInputs(CLI::App* cmd, Flags& f, bool needs_scenario) {
  cmd->add_option("--topology", f.topology, "Topology file")->required();
  auto* scenario = cmd->add_option("--scenario", f.scenario, "Scenario script");
  if (needs_scenario) scenario->required();
  cmd->add_option("--width", f.width, "Header width when the topology does not declare one");
}

void AddServiceFlags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--seed", f.seed, "Seed for polls, keys and nonces (RVAAS_SEED overrides)");
  cmd->add_option("--poll-rate", f.poll_rate, "Active poll probability per tick, in (0, 1]");
  cmd->add_option("--magic", f.magic, "Ternary pattern of in-band protocol headers");
  cmd->add_option("--timeout", f.timeout, "Ticks to wait for authentication replies");
  cmd->add_option("--history", f.history, "Snapshot versions kept");
  cmd->add_option("--window", f.window, "Poll retention window in ticks");
  cmd->add_flag("--poll-only", f.poll_only, "Build the view from active polls alone");
}

}  // namespace
}  // namespace rvaas

int main(int argc, char** argv) {
  using namespace rvaas;
  Flags f;
  CLI::App app{"Verification service for a simulated software-defined network"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "Run a scenario and write artifacts");
  AddInputs(run, f, true);
  AddServiceFlags(run, f);
  run->add_option("--out", f.out, "Artifact directory")->required();

  CLI::App* query = app.add_subcommand("query", "Answer one client query");
  query->add_option("kind", f.kind, "isolation, sources, geo or summary")->required();
  AddInputs(query, f, false);
  AddServiceFlags(query, f);
  query->add_option("--snapshot", f.snapshot, "Snapshot dump to query instead of a scenario run");
  query->add_option("--client", f.client, "Client identifier")->required();
  query->add_option("--at", f.at, "Request point, as alias or <sw>:<port>");
  query->add_option("--param", f.params, "Query parameter key=value");

  CLI::App* snapshot = app.add_subcommand("snapshot", "Snapshot tools");
  snapshot->require_subcommand(1);
  CLI::App* dump = snapshot->add_subcommand("dump", "Print the controller snapshot after a run");
  AddInputs(dump, f, true);
  AddServiceFlags(dump, f);

  CLI::App* oracle = app.add_subcommand("oracle", "Compare reachability with exhaustive simulation");
  oracle->add_option("--seed", f.seed, "First network seed (RVAAS_SEED overrides)");
  oracle->add_option("--count", f.count, "Number of random networks");
  oracle->add_option("--width", f.width, "Header width, at most 10");
  oracle->add_flag("--mutate", f.mutate, "Inject a shadowing bug into the engine");

  CLI::App* scenario = app.add_subcommand("scenario", "Scenario tools");
  scenario->require_subcommand(1);
  CLI::App* check = scenario->add_subcommand("check", "Parse and expand a scenario");
  AddInputs(check, f, true);
  check->add_option("--timeout", f.timeout, "Ticks to wait for authentication replies");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }
  if (absl::Status s = ApplySeedOverride(f); !s.ok()) return Fail(s);

  if (run->parsed()) return CmdRun(f);
  if (query->parsed()) {
    if (f.snapshot.empty() && f.scenario.empty()) {
      return Fail(absl::InvalidArgumentError("query needs --snapshot or --scenario"));
    }
    return CmdQuery(f);
  }
  if (dump->parsed()) return CmdSnapshotDump(f);
  if (oracle->parsed()) return CmdOracle(f);
  if (check->parsed()) return CmdScenarioCheck(f);
  return kExitError;
}
