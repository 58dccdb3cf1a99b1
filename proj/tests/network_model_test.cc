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

#include "rvaas/network_model.h"

#include <random>

#include "gtest/gtest.h"
#include "test_util.h"

namespace rvaas {
namespace {

using ::rvaas::testing::Denote;
using ::rvaas::testing::TestDataPath;

FlowRule Rule(absl::string_view text, int width) {
  absl::StatusOr<FlowRule> r = FlowRule::Parse(text, width);
  EXPECT_TRUE(r.ok()) << r.status();
  return *r;
}

TEST(LoadTopologyTest, SmallestConnectedTopology) {
  absl::StatusOr<Topology> t = Topology::LoadFile(TestDataPath("line.topo"));
  ASSERT_OK(t);
  EXPECT_EQ(t->switches().size(), 2u);
  EXPECT_EQ(t->links().size(), 1u);
  EXPECT_EQ(t->clients().size(), 2u);
  EXPECT_EQ(t->header_width(), 4);
  EXPECT_EQ(t->Peer(PortRef{SwitchId("s1"), 2}), (PortRef{SwitchId("s2"), 2}));
  EXPECT_EQ(t->RegionOf(SwitchId("s2")), RegionId("south"));
}

TEST(LoadTopologyTest, TriangleHasThreeLinks) {
  absl::StatusOr<Topology> t = Topology::LoadFile(TestDataPath("triangle.topo"));
  ASSERT_OK(t);
  EXPECT_EQ(t->links().size(), 3u);
  EXPECT_EQ(t->clients().size(), 3u);
  EXPECT_EQ(t->fields().at("dst").end, 1);
}

TEST(LoadTopologyTest, DanglingSwitchReference) {
  absl::StatusOr<Topology> t = Topology::Parse(
      "switch s1 ports 1\n"
      "link s1:1 s9:1\n");
  EXPECT_EQ(t.status().code(), absl::StatusCode::kNotFound);
  EXPECT_NE(t.status().message().find("s9"), std::string::npos);
}

TEST(LoadTopologyTest, PortBothInternalAndAccessRejected) {
  absl::StatusOr<Topology> t = Topology::Parse(
      "switch a ports 1\nswitch b ports 1\n"
      "link a:1 b:1\n"
      "access a:1 client x\n");
  EXPECT_EQ(t.status().code(), absl::StatusCode::kAlreadyExists);
}

TEST(LoadTopologyTest, UnattachedPortRejected) {
  absl::StatusOr<Topology> t = Topology::Parse("switch a ports 2\naccess a:1 client x\n");
  EXPECT_EQ(t.status().code(), absl::StatusCode::kFailedPrecondition);
}

TEST(LoadTopologyTest, MalformedInputs) {
  EXPECT_FALSE(Topology::Parse("headerwidth 0\nswitch a ports 1\naccess a:1 client x\n").ok());
  EXPECT_FALSE(Topology::Parse("switch a ports 0\n").ok());
  EXPECT_FALSE(Topology::Parse("switch a ports 1\naccess a:1 client x\nbogus line\n").ok());
  EXPECT_FALSE(Topology::Parse("switch a ports 2\nlink a:1 a:1\n").ok());
  EXPECT_FALSE(Topology::Parse("switch a ports 1\naccess a:2 client x\n").ok());
  EXPECT_FALSE(
      Topology::Parse("headerwidth 4\nswitch a ports 1\naccess a:1 client x\nfield f 2 4\n").ok());
  EXPECT_FALSE(Topology::Parse("switch a ports 1\naccess a:1 client x\nlocation b r\n").ok());
}

TEST(LoadTopologyTest, DeclarationOrderDoesNotMatter) {
  absl::StatusOr<Topology> t = Topology::Parse(
      "access a:1 client x   # before the switch line\n"
      "switch a ports 1\n");
  ASSERT_OK(t);
  EXPECT_EQ(t->access_points()[0].Alias(), "x:ap1");
}

TEST(ClassifyPortsTest, SmallestTopology) {
  Topology t = *Topology::LoadFile(TestDataPath("line.topo"));
  std::map<PortRef, PortClass> classes = ClassifyPorts(t);
  int internal = 0, access = 0;
  for (const auto& [port, cls] : classes) {
    (cls.kind == PortKind::kInternal ? internal : access)++;
  }
  EXPECT_EQ(internal, 2);
  EXPECT_EQ(access, 2);
}

TEST(ClassifyPortsTest, IsolatedSwitchPortsAreAllAccess) {
  Topology t = *Topology::Parse("switch lone ports 2\naccess lone:1 client a\naccess lone:2 client b\n");
  for (const auto& [port, cls] : ClassifyPorts(t)) {
    EXPECT_EQ(cls.kind, PortKind::kAccess);
  }
}

TEST(ClassifyPortsTest, TenPortPartitionIsExact) {
  Topology t = *Topology::LoadFile(TestDataPath("ten_ports.topo"));
  std::map<PortRef, PortClass> classes = ClassifyPorts(t);
  ASSERT_EQ(classes.size(), 10u);
  int internal = 0, access = 0;
  for (const auto& [port, cls] : classes) {
    if (cls.kind == PortKind::kInternal) {
      ++internal;
      EXPECT_NE(t.LinkAt(port), nullptr);
    } else {
      ++access;
      EXPECT_EQ(t.AccessPointAt(port)->client, *cls.client);
    }
  }
  EXPECT_EQ(internal, 6);
  EXPECT_EQ(access, 4);
  EXPECT_EQ(t.RegionOf(LinkId("backdoor")), RegionId("offshore"));
  EXPECT_EQ(t.AccessPointsOf(ClientId("ops")).size(), 2u);
  EXPECT_EQ(t.AccessPointsOf(ClientId("ops"))[1].Alias(), "ops:ap2");
}

TEST(FlowRuleTest, ParsePrintRoundTrip) {
  for (const char* text : {"prio=7 match=1x0x action=fwd:1,2", "prio=0 match=xxxx action=drop",
                           "prio=3 match=0xxx action=ctrl",
                           "prio=9 match=x1xx action=rewrite:1100/10__:2"}) {
    EXPECT_EQ(Rule(text, 4).ToString(), text);
  }
  EXPECT_FALSE(FlowRule::Parse("prio=1 match=1x action=drop", 4).ok());
  EXPECT_FALSE(FlowRule::Parse("prio=1 match=1xxx", 4).ok());
  EXPECT_FALSE(FlowRule::Parse("prio=1 match=1xxx action=fwd:", 4).ok());
  EXPECT_FALSE(FlowRule::Parse("prio=-1 match=1xxx action=drop", 4).ok());
}

TEST(ValidateRuleTest, PortsMustExistOnOwner) {
  Topology t = *Topology::LoadFile(TestDataPath("line.topo"));
  EXPECT_TRUE(ValidateRule(t, SwitchId("s1"), Rule("prio=1 match=xxxx action=fwd:2", 4)).ok());
  EXPECT_FALSE(ValidateRule(t, SwitchId("s1"), Rule("prio=1 match=xxxx action=fwd:3", 4)).ok());
  EXPECT_FALSE(ValidateRule(t, SwitchId("s7"), Rule("prio=1 match=xxxx action=drop", 4)).ok());
  EXPECT_FALSE(ValidateRule(t, SwitchId("s1"), Rule("prio=1 match=xxx action=drop", 3)).ok());
}

TEST(FlowTableTest, DescendingPriorityWithInsertionTieBreak) {
  FlowTable table(SwitchId("s"));
  FlowRule low = Rule("prio=1 match=xx action=drop", 2);
  FlowRule first = Rule("prio=5 match=1x action=fwd:1", 2);
  FlowRule second = Rule("prio=5 match=xx action=fwd:2", 2);
  table.Add(low);
  table.Add(first);
  table.Add(second);
  ASSERT_EQ(table.rules().size(), 3u);
  EXPECT_EQ(table.rules()[0], first);
  EXPECT_EQ(table.rules()[1], second);
  EXPECT_EQ(table.rules()[2], low);
  EXPECT_EQ(*table.Lookup(0b10), first);
  EXPECT_EQ(*table.Lookup(0b01), second);
  EXPECT_TRUE(table.Remove(second));
  EXPECT_FALSE(table.Remove(second));
}

TEST(TableLookupTest, SingleRuleCoversSpace) {
  FlowTable table(SwitchId("s"));
  table.Add(Rule("prio=1 match=xx action=fwd:1", 2));
  TableLookupResult r = table.Lookup(HeaderSpace::Full(2));
  ASSERT_EQ(r.matched.size(), 1u);
  EXPECT_EQ(Denote(r.matched[0].space), Denote(HeaderSpace::Full(2)));
  EXPECT_TRUE(r.residual.empty());
}

TEST(TableLookupTest, HighPriorityDropShadowsForward) {
  FlowTable table(SwitchId("s"));
  table.Add(Rule("prio=1 match=xx action=fwd:1", 2));
  table.Add(Rule("prio=9 match=1x action=drop", 2));
  TableLookupResult r = table.Lookup(HeaderSpace::Full(2));
  ASSERT_EQ(r.matched.size(), 2u);
  EXPECT_TRUE(std::holds_alternative<DropAction>(r.matched[0].rule.action));
  EXPECT_EQ(Denote(r.matched[0].space), Denote(*HeaderSpace::Parse("1x", 2)));
  EXPECT_TRUE(std::holds_alternative<ForwardAction>(r.matched[1].rule.action));
  EXPECT_EQ(Denote(r.matched[1].space), Denote(*HeaderSpace::Parse("0x", 2)));
}

FlowTable RandomTable(std::mt19937_64& rng, int width, std::vector<FlowRule>& inserted) {
  FlowTable table(SwitchId("s"));
  const int n = std::uniform_int_distribution<int>(0, 10)(rng);
  for (int i = 0; i < n; ++i) {
    FlowRule r;
    r.priority = std::uniform_int_distribution<uint32_t>(0, 5)(rng);
    r.match = testing::RandomTerm(rng, width);
    r.action = ForwardAction{{static_cast<PortId>(i + 1)}};
    inserted.push_back(r);
    table.Add(r);
  }
  return table;
}

// Per-header winners from the symbolic split agree with a brute-force scan
// for the highest-priority (earliest on ties) matching rule, and the pieces
// partition the queried space.
TEST(TableLookupTest, WinnerMatchesBruteForceAndPartitions) {
  const int width = 8;
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<FlowRule> inserted;
    FlowTable table = RandomTable(rng, width, inserted);
    HeaderSpace query = testing::RandomSpace(rng, width, 3);
    if (iter % 3 == 0) query = HeaderSpace::Full(width);
    TableLookupResult r = table.Lookup(query);
    std::vector<std::vector<bool>> pieces;
    for (const LookupEntry& e : r.matched) pieces.push_back(Denote(e.space));
    std::vector<bool> residual = Denote(r.residual);
    for (uint64_t h = 0; h < 256; ++h) {
      // Oracle: scan in insertion order; strictly higher priority replaces.
      const FlowRule* best = nullptr;
      for (const FlowRule& rule : inserted) {
        if (rule.match.Matches(h) && (best == nullptr || rule.priority > best->priority)) best = &rule;
      }
      int owner = -1, hits = 0;
      for (size_t i = 0; i < pieces.size(); ++i) {
        if (pieces[i][h]) {
          owner = static_cast<int>(i);
          ++hits;
        }
      }
      hits += residual[h];
      if (!query.Contains(h)) {
        EXPECT_EQ(hits, 0);
        continue;
      }
      ASSERT_EQ(hits, 1) << "header " << h;
      if (best == nullptr) {
        EXPECT_TRUE(residual[h]);
      } else {
        ASSERT_GE(owner, 0);
        EXPECT_EQ(r.matched[owner].rule, *best);
        EXPECT_EQ(*table.Lookup(h), *best);
      }
    }
    // Deterministic.
    TableLookupResult again = table.Lookup(query);
    ASSERT_EQ(again.matched.size(), r.matched.size());
    for (size_t i = 0; i < r.matched.size(); ++i) {
      EXPECT_EQ(again.matched[i].space.ToString(), r.matched[i].space.ToString());
    }
  }
}

}  // namespace
}  // namespace rvaas
