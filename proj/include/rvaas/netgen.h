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

// Seeded generator of small random networks with random flow tables, used by
// the reachability oracle and by property tests.

#ifndef RVAAS_NETGEN_H_
#define RVAAS_NETGEN_H_

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rvaas/network_model.h"

namespace rvaas {

struct NetGenOptions {
  int width = 8;
  int min_switches = 2;
  int max_switches = 6;
  int max_rules = 12;
  // Extra links beyond a spanning tree, as a fraction of the switch count.
  double extra_link_fraction = 0.5;
  double rewrite_p = 0.2;
  double drop_p = 0.1;
  double ctrl_p = 0.05;
  // Probability that a match bit is a wildcard.
  double wildcard_p = 0.6;
};

struct GeneratedNet {
  std::string topology_text;
  std::shared_ptr<const Topology> topology;
  // Rules per switch in installation order.
  std::map<SwitchId, std::vector<FlowRule>> rules;
};

// Deterministic in (seed, options).
GeneratedNet GenerateNetwork(uint64_t seed, const NetGenOptions& options = {});

}  // namespace rvaas

#endif  // RVAAS_NETGEN_H_
