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

#include "rvaas/netgen.h"

#include <algorithm>
#include <random>
#include <set>
#include <utility>

#include "absl/strings/str_cat.h"

namespace rvaas {
namespace {

TernaryString RandomMatch(std::mt19937_64& rng, int width, double wildcard_p) {
  std::bernoulli_distribution wild(wildcard_p);
  std::bernoulli_distribution one(0.5);
  uint64_t care = 0, value = 0;
  for (int i = 0; i < width; ++i) {
    if (wild(rng)) continue;
    care |= uint64_t{1} << i;
    if (one(rng)) value |= uint64_t{1} << i;
  }
  return TernaryString::FromMasks(care, value, width);
}

std::vector<PortId> RandomPorts(std::mt19937_64& rng, PortId port_count) {
  std::uniform_int_distribution<PortId> pick(1, port_count);
  std::set<PortId> ports{pick(rng)};
  if (port_count > 1 && std::bernoulli_distribution(0.25)(rng)) ports.insert(pick(rng));
  return {ports.begin(), ports.end()};
}

}  // namespace

GeneratedNet GenerateNetwork(uint64_t seed, const NetGenOptions& options) {
  std::mt19937_64 rng(seed);
  const int n = std::uniform_int_distribution<int>(options.min_switches, options.max_switches)(rng);

  // Spanning tree plus a few random extra links, no self links.
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n; ++i) edges.emplace_back(std::uniform_int_distribution<int>(0, i - 1)(rng), i);
  const int extra = static_cast<int>(options.extra_link_fraction * n);
  for (int k = 0; k < extra; ++k) {
    int a = std::uniform_int_distribution<int>(0, n - 1)(rng);
    int b = std::uniform_int_distribution<int>(0, n - 1)(rng);
    if (a != b) edges.emplace_back(a, b);
  }

  std::vector<PortId> next_port(n, 1);
  std::string links;
  for (const auto& [a, b] : edges) {
    absl::StrAppend(&links, "link n", a, ":", next_port[a]++, " n", b, ":", next_port[b]++, "\n");
  }
  // One or two access points per switch, owned by a small set of clients.
  std::string access;
  const int clients = std::max(2, n / 2);
  for (int i = 0; i < n; ++i) {
    const int aps = std::uniform_int_distribution<int>(1, 2)(rng);
    for (int k = 0; k < aps; ++k) {
      absl::StrAppend(&access, "access n", i, ":", next_port[i]++, " client c",
                      std::uniform_int_distribution<int>(0, clients - 1)(rng), "\n");
    }
  }

  GeneratedNet net;
  net.topology_text = absl::StrCat("headerwidth ", options.width, "\n");
  for (int i = 0; i < n; ++i) {
    absl::StrAppend(&net.topology_text, "switch n", i, " ports ", next_port[i] - 1, "\n");
  }
  absl::StrAppend(&net.topology_text, links, access);
  for (int i = 0; i < n; ++i) {
    absl::StrAppend(&net.topology_text, "location n", i, " g", i % 3, "\n");
  }
  absl::StatusOr<Topology> topo = Topology::Parse(net.topology_text);
  // The generator only emits well-formed documents.
  net.topology = std::make_shared<const Topology>(*std::move(topo));

  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    SwitchId sw(absl::StrCat("n", i));
    const PortId port_count = next_port[i] - 1;
    const int count = std::uniform_int_distribution<int>(0, options.max_rules)(rng);
    std::vector<FlowRule>& rules = net.rules[sw];
    for (int r = 0; r < count; ++r) {
      FlowRule rule;
      rule.priority = std::uniform_int_distribution<uint32_t>(0, 7)(rng);
      rule.match = RandomMatch(rng, options.width, options.wildcard_p);
      const double x = u(rng);
      if (x < options.drop_p) {
        rule.action = DropAction{};
      } else if (x < options.drop_p + options.ctrl_p) {
        rule.action = ControllerAction{};
      } else if (x < options.drop_p + options.ctrl_p + options.rewrite_p) {
        const uint64_t all = WidthMask(options.width);
        Rewrite rw = Rewrite::FromMasks(
            std::uniform_int_distribution<uint64_t>(0, all)(rng) &
                std::uniform_int_distribution<uint64_t>(0, all)(rng),
            std::uniform_int_distribution<uint64_t>(0, all)(rng), options.width);
        rule.action = RewriteAction{rw, RandomPorts(rng, port_count)};
      } else {
        rule.action = ForwardAction{RandomPorts(rng, port_count)};
      }
      rules.push_back(std::move(rule));
    }
  }
  return net;
}

}  // namespace rvaas
