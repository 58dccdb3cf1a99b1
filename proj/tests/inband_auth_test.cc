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

#include "rvaas/inband_auth.h"

#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "absl/strings/match.h"
#include "absl/strings/str_cat.h"
#include "gtest/gtest.h"
#include "rvaas/crypto.h"
#include "rvaas/dataplane_sim.h"
#include "rvaas/snapshot_service.h"
#include "rvaas/verify_engine.h"
#include "test_util.h"

namespace rvaas {
namespace {

using ::rvaas::testing::TestDataPath;

std::shared_ptr<const Topology> Load(const std::string& name) {
  absl::StatusOr<Topology> t = Topology::LoadFile(TestDataPath(name));
  EXPECT_TRUE(t.ok()) << t.status();
  return std::make_shared<const Topology>(*std::move(t));
}

FlowRule Rule(absl::string_view text, int width) {
  absl::StatusOr<FlowRule> r = FlowRule::Parse(text, width);
  EXPECT_TRUE(r.ok()) << r.status();
  return *r;
}

PortRef P(absl::string_view sw, PortId port) { return PortRef{SwitchId(std::string(sw)), port}; }

Nonce FixedNonce(uint8_t fill) {
  Nonce n;
  n.fill(fill);
  return n;
}

TernaryString T(absl::string_view text) {
  absl::StatusOr<TernaryString> t = TernaryString::Parse(text);
  EXPECT_TRUE(t.ok()) << t.status();
  return *t;
}

// Wires a network, snapshot service, controller and client agents together
// the way the service does, but leaves every step under test control.
class Harness {
 public:
  explicit Harness(const std::string& topo_file, uint64_t seed = 1)
      : topo_(Load(topo_file)),
        net_(topo_),
        snaps_(topo_),
        engine_(topo_),
        ctl_rng_(seed, "controller"),
        registry_([&] {
          SeededRandom r(seed, "controller-key");
          return KeyPair::Generate(r);
        }()),
        magic_(*DefaultMagic(*topo_)) {
    for (const ClientId& c : topo_->clients()) {
      SeededRandom key_rng(seed, absl::StrCat("client-key:", c.value()));
      KeyPair identity = KeyPair::Generate(key_rng);
      EXPECT_TRUE(registry_.Register(c, identity.public_key()).ok());
      rngs_.emplace(c, std::make_unique<SeededRandom>(seed, absl::StrCat("client:", c.value())));
      agents_.try_emplace(c, topo_, c, identity, registry_.controller().public_key(), magic_,
                          rngs_.at(c).get());
    }
    const VerifyEngine* engine = &engine_;
    ctl_ = std::make_unique<AuthController>(
        topo_, &registry_, &ctl_rng_, AuthOptions{magic_, kDefaultAuthTimeout, 64},
        [engine](const ClientQuery& q, const PortRef& rp, const Snapshot& snap) {
          return engine->Answer(q.kind, q.client, rp, q.params, snap);
        });
    for (const auto& [sw, rule] : MagicRules(*topo_, magic_)) Add(sw.value(), rule);
  }

  void Add(absl::string_view sw, const FlowRule& rule) {
    absl::StatusOr<SwitchEvent> ev =
        net_.ApplyFlowMod(SwitchId(std::string(sw)), FlowModOp::kAdd, rule);
    ASSERT_TRUE(ev.ok()) << ev.status();
  }
  void Add(absl::string_view sw, absl::string_view rule) {
    Add(sw, Rule(rule, topo_->header_width()));
  }

  void Inject(const Packet& p, const PortRef& at) {
    absl::StatusOr<ForwardTrace> t = net_.Inject(p, at);
    ASSERT_TRUE(t.ok()) << t.status();
  }

  // Handles everything queued, then lets the controller time sessions out.
  void Tick(int64_t t) {
    net_.AdvanceTo(t);
    Pump();
    ASSERT_TRUE(ctl_->OnTick(t, net_).ok());
    Pump();
  }

  void Pump() {
    for (int round = 0; round < 64; ++round) {
      std::vector<SwitchEvent> events = net_.DrainEvents();
      std::vector<Delivery> deliveries = net_.DrainDeliveries();
      if (events.empty() && deliveries.empty()) return;
      for (const SwitchEvent& ev : events) {
        ++events_seen_;
        (void)snaps_.IngestEvent(ev);
        if (std::holds_alternative<PacketIn>(ev.kind)) {
          ++packet_ins_;
          ASSERT_TRUE(ctl_->OnPacketIn(ev, *snaps_.current(), net_).ok());
        }
      }
      for (const Delivery& d : deliveries) HandleDelivery(d);
    }
    FAIL() << "control traffic did not settle";
  }

  ClientAgent& agent(absl::string_view c) { return agents_.at(ClientId(std::string(c))); }
  KeyRegistry& registry() { return registry_; }
  AuthController& ctl() { return *ctl_; }
  const Topology& topo() const { return *topo_; }
  const TernaryString& magic() const { return magic_; }
  Network& net() { return net_; }

  int packet_ins() const { return packet_ins_; }
  const std::vector<Delivery>& challenges() const { return challenges_; }
  struct Received {
    VerificationReport report;
    bool ok = false;
  };
  const std::vector<Received>& received() const { return received_; }
  const std::vector<Bytes>& report_frames() const { return report_frames_; }

  std::vector<TranscriptEntry> Entries(TranscriptKind kind) const {
    std::vector<TranscriptEntry> out;
    for (const TranscriptEntry& e : ctl_->transcript()) {
      if (e.kind == kind) out.push_back(e);
    }
    return out;
  }

  void set_auto_answer(bool on) { auto_answer_ = on; }

 private:
  void HandleDelivery(const Delivery& d) {
    if (!magic_.Matches(d.packet.header)) return;
    absl::StatusOr<FrameType> type = PeekFrameType(d.packet.payload);
    if (!type.ok()) return;
    if (*type == FrameType::kChallenge) {
      challenges_.push_back(d);
      if (!auto_answer_) return;
      if (std::optional<Packet> reply = agents_.at(d.client).AnswerChallenge(d)) {
        Inject(*reply, d.at);
      }
    } else if (*type == FrameType::kReport) {
      report_frames_.push_back(d.packet.payload);
      absl::StatusOr<VerificationReport> r = DecodeReport(d.packet.payload);
      ASSERT_TRUE(r.ok()) << r.status();
      const bool ok = agents_.at(d.client).VerifyReport(*r);
      received_.push_back(Received{*r, ok});
    }
  }

  std::shared_ptr<const Topology> topo_;
  Network net_;
  SnapshotService snaps_;
  VerifyEngine engine_;
  SeededRandom ctl_rng_;
  KeyRegistry registry_;
  TernaryString magic_;
  std::map<ClientId, std::unique_ptr<SeededRandom>> rngs_;
  std::map<ClientId, ClientAgent> agents_;
  std::unique_ptr<AuthController> ctl_;
  bool auto_answer_ = true;
  int events_seen_ = 0;
  int packet_ins_ = 0;
  std::vector<Delivery> challenges_;
  std::vector<Received> received_;
  std::vector<Bytes> report_frames_;
};

void AddBenignJoinRoutes(Harness& h) {
  h.Add("s1", "prio=100 match=0xxxxxxx action=fwd:1");
  h.Add("s1", "prio=100 match=1xxxxxxx action=fwd:3");
  h.Add("s3", "prio=100 match=1xxxxxxx action=fwd:1");
  h.Add("s3", "prio=100 match=0xxxxxxx action=fwd:3");
}

// Leaks alice's s1 traffic towards eve on s2:3.
void AddJoin(Harness& h) {
  h.Add("s1", "prio=200 match=1xxxxxxx action=fwd:2,3");
  h.Add("s2", "prio=200 match=1xxxxxxx action=fwd:3");
}

Packet Query(Harness& h, absl::string_view from, QueryKind kind = QueryKind::kIsolation,
             std::optional<ClientId> claimed = std::nullopt) {
  absl::StatusOr<Packet> p = h.agent(from).NewQuery(kind, {}, claimed);
  EXPECT_TRUE(p.ok()) << p.status();
  return *p;
}

// ---------------------------------------------------------------------------
// Crypto primitives.

TEST(CryptoTest, SeededRandomIsDeterministicPerStream) {
  SeededRandom a(5, "x"), b(5, "x"), c(5, "y"), d(6, "x");
  const Nonce na = a.NewNonce();
  EXPECT_EQ(na, b.NewNonce());
  EXPECT_NE(na, c.NewNonce());
  EXPECT_NE(na, d.NewNonce());
  EXPECT_NE(na, a.NewNonce());
}

TEST(CryptoTest, SignVerifyAndWrongKey) {
  SeededRandom rng(1, "k");
  KeyPair k1 = KeyPair::Generate(rng);
  KeyPair k2 = KeyPair::Generate(rng);
  const Bytes msg = {1, 2, 3, 4};
  const Signature sig = k1.Sign(msg);
  EXPECT_TRUE(VerifySignature(k1.public_key(), msg, sig));
  EXPECT_FALSE(VerifySignature(k2.public_key(), msg, sig));
  Bytes other = msg;
  other[0] ^= 1;
  EXPECT_FALSE(VerifySignature(k1.public_key(), other, sig));
}

TEST(CryptoTest, RandomSignaturesNeverVerify) {
  SeededRandom rng(2, "k");
  KeyPair k = KeyPair::Generate(rng);
  const Bytes msg = {9, 9, 9};
  for (int i = 0; i < 100; ++i) {
    Signature sig;
    rng.Fill(absl::MakeSpan(sig));
    EXPECT_FALSE(VerifySignature(k.public_key(), msg, sig));
  }
}

TEST(CryptoTest, SealOpensOnlyForRecipient) {
  SeededRandom rng(3, "k");
  KeyPair k1 = KeyPair::Generate(rng);
  KeyPair k2 = KeyPair::Generate(rng);
  const Bytes plain = {'h', 'e', 'l', 'l', 'o'};
  absl::StatusOr<Bytes> sealed = Seal(k1.public_key(), plain, rng);
  ASSERT_TRUE(sealed.ok());
  absl::StatusOr<Bytes> opened = k1.Open(*sealed);
  ASSERT_TRUE(opened.ok()) << opened.status();
  EXPECT_EQ(*opened, plain);
  EXPECT_FALSE(k2.Open(*sealed).ok());
  for (size_t i = 0; i < sealed->size(); ++i) {
    Bytes bad = *sealed;
    bad[i] ^= 0x20;
    EXPECT_FALSE(k1.Open(bad).ok()) << "byte " << i;
  }
  EXPECT_FALSE(k1.Open(Bytes(10, 0)).ok());
}

TEST(CryptoTest, FingerprintDistinguishesKeys) {
  SeededRandom rng(4, "k");
  KeyPair k1 = KeyPair::Generate(rng);
  KeyPair k2 = KeyPair::Generate(rng);
  EXPECT_EQ(k1.public_key().Fingerprint(), k1.public_key().Fingerprint());
  EXPECT_NE(k1.public_key().Fingerprint(), k2.public_key().Fingerprint());
  EXPECT_EQ(k1.public_key().Fingerprint().size(), 32u);
}

TEST(KeyRegistryTest, RegisterFindUnregister) {
  SeededRandom rng(1, "k");
  KeyRegistry reg(KeyPair::Generate(rng));
  KeyPair alice = KeyPair::Generate(rng);
  const ClientId id("alice");
  EXPECT_EQ(reg.Find(id), nullptr);
  ASSERT_TRUE(reg.Register(id, alice.public_key()).ok());
  EXPECT_EQ(reg.Register(id, alice.public_key()).code(), absl::StatusCode::kAlreadyExists);
  ASSERT_NE(reg.Find(id), nullptr);
  EXPECT_EQ(*reg.Find(id), alice.public_key());
  reg.Unregister(id);
  EXPECT_EQ(reg.Find(id), nullptr);
  EXPECT_TRUE(absl::StartsWith(reg.attestation().ToString(), "attestation version=1 key="));
}

// ---------------------------------------------------------------------------
// Wire formats.

VerificationReport SampleReport() {
  VerificationReport r;
  r.kind = QueryKind::kIsolation;
  r.client = ClientId("alice");
  r.nonce = FixedNonce(7);
  r.body = {"kind=isolation", "request=alice:ap1", "own=alice:ap1,alice:ap2", "foreign="};
  r.verified = {"alice:ap1", "alice:ap2"};
  r.auth_requested = 3;
  r.auth_received = 2;
  return r;
}

template <typename T, typename Decode>
void ExpectPrefixesRejected(const Bytes& frame, Decode decode) {
  for (size_t n = 0; n < frame.size(); ++n) {
    absl::StatusOr<T> d = decode(absl::MakeConstSpan(frame.data(), n));
    EXPECT_FALSE(d.ok()) << "prefix of " << n << " bytes decoded";
  }
  Bytes longer = frame;
  longer.push_back(0);
  EXPECT_FALSE(decode(absl::MakeConstSpan(longer)).ok()) << "trailing byte accepted";
}

TEST(WireTest, QueryPlaintextRoundTrip) {
  ClientQuery q{QueryKind::kGeo, ClientId("alice"), FixedNonce(3), {{"allow", "zurich,geneva"}}};
  absl::StatusOr<Bytes> b = EncodeQueryPlaintext(q);
  ASSERT_TRUE(b.ok()) << b.status();
  absl::StatusOr<ClientQuery> d = DecodeQueryPlaintext(*b);
  ASSERT_TRUE(d.ok()) << d.status();
  EXPECT_EQ(*d, q);
  ExpectPrefixesRejected<ClientQuery>(
      *b, [](absl::Span<const uint8_t> s) { return DecodeQueryPlaintext(s); });
  Bytes bad_version = *b;
  bad_version[0] = kWireVersion + 1;
  EXPECT_FALSE(DecodeQueryPlaintext(bad_version).ok());
  Bytes bad_kind = *b;
  bad_kind[1] = 99;
  EXPECT_FALSE(DecodeQueryPlaintext(bad_kind).ok());
}

TEST(WireTest, ChallengeRoundTrip) {
  AuthChallenge c{FixedNonce(9), "alice:ap2"};
  absl::StatusOr<Bytes> b = EncodeChallenge(c);
  ASSERT_TRUE(b.ok());
  EXPECT_EQ(*PeekFrameType(*b), FrameType::kChallenge);
  absl::StatusOr<AuthChallenge> d = DecodeChallenge(*b);
  ASSERT_TRUE(d.ok()) << d.status();
  EXPECT_EQ(*d, c);
  ExpectPrefixesRejected<AuthChallenge>(
      *b, [](absl::Span<const uint8_t> s) { return DecodeChallenge(s); });
}

TEST(WireTest, ReplyRoundTripAndVerify) {
  SeededRandom rng(1, "k");
  KeyPair alice = KeyPair::Generate(rng);
  KeyPair other = KeyPair::Generate(rng);
  AuthChallenge c{FixedNonce(1), "alice:ap1"};
  absl::StatusOr<AuthReply> r = MakeReply(c, ClientId("alice"), alice);
  ASSERT_TRUE(r.ok());
  EXPECT_TRUE(VerifyReply(*r, alice.public_key()));
  EXPECT_FALSE(VerifyReply(*r, other.public_key()));
  absl::StatusOr<Bytes> b = EncodeReply(*r);
  ASSERT_TRUE(b.ok());
  absl::StatusOr<AuthReply> d = DecodeReply(*b);
  ASSERT_TRUE(d.ok()) << d.status();
  EXPECT_EQ(*d, *r);
  ExpectPrefixesRejected<AuthReply>(*b,
                                    [](absl::Span<const uint8_t> s) { return DecodeReply(s); });

  AuthReply moved = *r;
  moved.alias = "alice:ap2";
  EXPECT_FALSE(VerifyReply(moved, alice.public_key()));
  AuthReply renamed = *r;
  renamed.client = ClientId("eve");
  EXPECT_FALSE(VerifyReply(renamed, alice.public_key()));
}

TEST(WireTest, ReportRoundTrip) {
  VerificationReport r = SampleReport();
  absl::StatusOr<Bytes> b = EncodeReport(r);
  ASSERT_TRUE(b.ok());
  EXPECT_EQ(*PeekFrameType(*b), FrameType::kReport);
  absl::StatusOr<VerificationReport> d = DecodeReport(*b);
  ASSERT_TRUE(d.ok()) << d.status();
  EXPECT_EQ(*d, r);
  ExpectPrefixesRejected<VerificationReport>(
      *b, [](absl::Span<const uint8_t> s) { return DecodeReport(s); });
}

TEST(WireTest, ReportRejectsMoreReceivedThanRequested) {
  VerificationReport r = SampleReport();
  r.auth_received = r.auth_requested + 1;
  absl::StatusOr<Bytes> b = EncodeReport(r);
  ASSERT_TRUE(b.ok());
  EXPECT_FALSE(DecodeReport(*b).ok());
  EXPECT_FALSE(VerifyReportSignature(r, PublicKey{}));
}

TEST(WireTest, ReportRenderAppendsAuthLines) {
  const std::vector<std::string> lines = SampleReport().Render();
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_EQ(lines[4], "verified=alice:ap1,alice:ap2");
  EXPECT_EQ(lines[5], "auth_requested=3");
  EXPECT_EQ(lines[6], "auth_received=2");
}

TEST(WireTest, PeekRejectsUnknownFrames) {
  EXPECT_FALSE(PeekFrameType(Bytes{}).ok());
  EXPECT_FALSE(PeekFrameType(Bytes{0}).ok());
  EXPECT_FALSE(PeekFrameType(Bytes{77}).ok());
}

// ---------------------------------------------------------------------------
// Magic pattern and query packets.

TEST(MagicTest, DefaultFromFieldOrTopBits) {
  EXPECT_EQ(DefaultMagic(*Load("join.topo"))->ToString(), "xxxx1111");
  EXPECT_EQ(DefaultMagic(*Load("line.topo"))->ToString(), "1111");
  EXPECT_EQ(DefaultMagic(*Load("triangle.topo"))->ToString(), "1111xxxx");
}

TEST(MagicTest, Validate) {
  std::shared_ptr<const Topology> t = Load("join.topo");
  EXPECT_TRUE(ValidateMagic(T("1xxxxxxx"), *t).ok());
  EXPECT_FALSE(ValidateMagic(T("1xxx"), *t).ok());
  EXPECT_FALSE(ValidateMagic(T("xxxxxxxx"), *t).ok());
}

TEST(MagicTest, HeaderMatchesPattern) {
  const TernaryString m = T("x1x0x1xx");
  const Header h = MagicHeader(m);
  EXPECT_TRUE(m.Matches(h));
  EXPECT_EQ(h.ToString(), "01000100");
}

TEST(MagicTest, RulesCoverEveryAccessPointSwitch) {
  std::shared_ptr<const Topology> t = Load("join.topo");
  const auto rules = MagicRules(*t, *DefaultMagic(*t));
  std::set<SwitchId> sws;
  for (const auto& [sw, rule] : rules) {
    sws.insert(sw);
    EXPECT_EQ(rule.priority, kMagicPriority);
    EXPECT_TRUE(std::holds_alternative<ControllerAction>(rule.action));
    EXPECT_EQ(rule.match.ToString(), "xxxx1111");
  }
  std::set<SwitchId> expected;
  for (const AccessPoint& ap : t->access_points()) expected.insert(ap.port.sw);
  EXPECT_EQ(sws, expected);
  EXPECT_EQ(rules.size(), expected.size());
}

TEST(QueryPacketTest, RoundTripThroughSeal) {
  SeededRandom rng(1, "q");
  KeyPair ctl = KeyPair::Generate(rng);
  KeyPair other = KeyPair::Generate(rng);
  const TernaryString m = T("xxxx1111");
  ClientQuery q{QueryKind::kSources, ClientId("alice"), FixedNonce(4), {}};
  absl::StatusOr<Packet> p = EncodeQuery(q, ctl.public_key(), m, rng);
  ASSERT_TRUE(p.ok()) << p.status();
  EXPECT_TRUE(m.Matches(p->header));
  EXPECT_EQ(*PeekFrameType(p->payload), FrameType::kQuery);
  absl::StatusOr<ClientQuery> d = DecodeQuery(*p, ctl);
  ASSERT_TRUE(d.ok()) << d.status();
  EXPECT_EQ(*d, q);
  EXPECT_FALSE(DecodeQuery(*p, other).ok());
}

TEST(QueryPacketTest, OversizedQueryRejected) {
  SeededRandom rng(1, "q");
  KeyPair ctl = KeyPair::Generate(rng);
  ClientQuery q{QueryKind::kGeo, ClientId("alice"), FixedNonce(4),
                {{"allow", std::string(kMaxQueryBytes, 'a')}}};
  absl::StatusOr<Packet> p = EncodeQuery(q, ctl.public_key(), T("xxxx1111"), rng);
  EXPECT_EQ(p.status().code(), absl::StatusCode::kOutOfRange);
}

TEST(QueryPacketTest, PayloadHidesQueryContents) {
  SeededRandom rng(1, "q");
  KeyPair ctl = KeyPair::Generate(rng);
  ClientQuery q{QueryKind::kGeo, ClientId("alice"), FixedNonce(4), {{"allow", "zurich"}}};
  absl::StatusOr<Packet> p = EncodeQuery(q, ctl.public_key(), T("xxxx1111"), rng);
  ASSERT_TRUE(p.ok());
  const std::string payload(p->payload.begin(), p->payload.end());
  EXPECT_FALSE(absl::StrContains(payload, "alice"));
  EXPECT_FALSE(absl::StrContains(payload, "zurich"));
}

TEST(QueryPacketTest, MagicRuleYieldsExactlyOnePacketIn) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  h.Pump();
  const int before = h.packet_ins();
  const size_t deliveries = h.net().delivery_log().size();
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Pump();
  // The query itself is one packet-in; replies to its challenges add more.
  const auto accepted = h.Entries(TranscriptKind::kQueryAccepted);
  ASSERT_EQ(accepted.size(), 1u);
  const int replies = static_cast<int>(h.Entries(TranscriptKind::kReplyAccepted).size() +
                                       h.Entries(TranscriptKind::kReplyRejected).size());
  EXPECT_EQ(h.packet_ins() - before, 1 + replies);
  // Nothing but control traffic reached an access point.
  for (size_t i = deliveries; i < h.net().delivery_log().size(); ++i) {
    EXPECT_TRUE(h.magic().Matches(h.net().delivery_log()[i].packet.header));
  }
}

TEST(QueryPacketTest, NonMagicPacketInIgnored) {
  Harness h("join.topo");
  h.Add("s1", "prio=10 match=0xxxxxxx action=ctrl");
  h.Pump();
  h.Inject(Packet{Header(0, 8), {1, 2, 3}}, P("s1", 1));
  h.Pump();
  EXPECT_EQ(h.packet_ins(), 1);
  EXPECT_TRUE(h.ctl().transcript().empty());
}

// ---------------------------------------------------------------------------
// Protocol runs.

TEST(ProtocolTest, BenignIsolationFullyAuthenticated) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  ASSERT_EQ(h.received().size(), 1u);
  const auto& got = h.received()[0];
  EXPECT_TRUE(got.ok);
  EXPECT_EQ(got.report.auth_requested, 2u);
  EXPECT_EQ(got.report.auth_received, 2u);
  EXPECT_EQ(got.report.verified, (std::vector<std::string>{"alice:ap1", "alice:ap2"}));
  EXPECT_EQ(h.ctl().open_sessions(), 0u);
  ASSERT_EQ(h.ctl().reports().size(), 1u);
  EXPECT_FALSE(h.ctl().reports()[0].finding);
  // Complete sessions are answered without waiting for the timeout.
  EXPECT_EQ(h.ctl().reports()[0].tick, 1);
}

TEST(ProtocolTest, ZeroCandidatesGivesZeroCounts) {
  Harness h("join.topo");
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  ASSERT_EQ(h.received().size(), 1u);
  EXPECT_EQ(h.received()[0].report.auth_requested, 0u);
  EXPECT_EQ(h.received()[0].report.auth_received, 0u);
  EXPECT_TRUE(h.challenges().empty());
}

TEST(ProtocolTest, JoinedUnregisteredEndpointFallsShortByOne) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  AddJoin(h);
  h.registry().Unregister(ClientId("eve"));
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  const auto accepted = h.Entries(TranscriptKind::kQueryAccepted);
  ASSERT_EQ(accepted.size(), 1u);
  const int64_t deadline = accepted[0].tick + kDefaultAuthTimeout;
  for (int64_t t = 2; t <= deadline; ++t) {
    EXPECT_TRUE(h.received().empty()) << "t=" << t;
    h.Tick(t);
  }
  ASSERT_EQ(h.received().size(), 1u);
  const VerificationReport& r = h.received()[0].report;
  EXPECT_TRUE(h.received()[0].ok);
  EXPECT_EQ(r.auth_requested, 3u);
  EXPECT_EQ(r.auth_received, 2u);
  EXPECT_TRUE(h.ctl().reports()[0].finding);
  EXPECT_EQ(h.ctl().reports()[0].tick, deadline);
  bool saw_foreign = false;
  for (const std::string& l : r.body) saw_foreign |= l == "foreign=eve:ap1";
  EXPECT_TRUE(saw_foreign);
  const auto rejected = h.Entries(TranscriptKind::kReplyRejected);
  ASSERT_EQ(rejected.size(), 1u);
  EXPECT_TRUE(absl::StrContains(rejected[0].detail, "unregistered")) << rejected[0].detail;
}

TEST(ProtocolTest, JoinedRegisteredEndpointStillFlaggedForeign) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  AddJoin(h);
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  ASSERT_EQ(h.received().size(), 1u);
  EXPECT_EQ(h.received()[0].report.auth_requested, 3u);
  EXPECT_EQ(h.received()[0].report.auth_received, 3u);
  EXPECT_TRUE(h.ctl().reports()[0].finding);
}

TEST(ProtocolTest, ReplayedQueryRejected) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  h.Tick(0);
  const Packet q = Query(h, "alice");
  h.Inject(q, P("s1", 1));
  h.Tick(1);
  h.Inject(q, P("s1", 1));
  h.Tick(2);
  EXPECT_EQ(h.ctl().reports().size(), 1u);
  const auto rejected = h.Entries(TranscriptKind::kQueryRejected);
  ASSERT_EQ(rejected.size(), 1u);
  EXPECT_TRUE(absl::StrContains(rejected[0].detail, "replayed")) << rejected[0].detail;
}

TEST(ProtocolTest, SpoofedClaimRejectedAtIngress) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  h.Tick(0);
  h.Inject(Query(h, "eve", QueryKind::kIsolation, ClientId("alice")), P("s2", 3));
  h.Tick(1);
  EXPECT_TRUE(h.ctl().reports().empty());
  EXPECT_TRUE(h.challenges().empty());
  const auto rejected = h.Entries(TranscriptKind::kQueryRejected);
  ASSERT_EQ(rejected.size(), 1u);
  EXPECT_TRUE(absl::StrContains(rejected[0].detail, "spoofed")) << rejected[0].detail;
}

TEST(ProtocolTest, QuerySealedToWrongKeyRejected) {
  Harness h("join.topo");
  h.Tick(0);
  SeededRandom rng(9, "x");
  KeyPair wrong = KeyPair::Generate(rng);
  ClientQuery q{QueryKind::kSummary, ClientId("alice"), FixedNonce(1), {}};
  absl::StatusOr<Packet> p = EncodeQuery(q, wrong.public_key(), h.magic(), rng);
  ASSERT_TRUE(p.ok());
  h.Inject(*p, P("s1", 1));
  h.Tick(1);
  const auto rejected = h.Entries(TranscriptKind::kQueryRejected);
  ASSERT_EQ(rejected.size(), 1u);
  EXPECT_TRUE(absl::StrContains(rejected[0].detail, "undecryptable")) << rejected[0].detail;
}

TEST(ProtocolTest, UnexpectedFrameRejected) {
  Harness h("join.topo");
  h.Tick(0);
  h.Inject(Packet{MagicHeader(h.magic()), *EncodeChallenge({FixedNonce(2), "alice:ap1"})},
           P("s1", 1));
  h.Inject(Packet{MagicHeader(h.magic()), {0xee, 0x01}}, P("s1", 1));
  h.Tick(1);
  EXPECT_EQ(h.Entries(TranscriptKind::kQueryRejected).size() +
                h.Entries(TranscriptKind::kReplyRejected).size(),
            2u);
  EXPECT_TRUE(h.ctl().reports().empty());
}

// Runs a query with alice silent so the test can answer challenges itself.
struct Captured {
  Delivery ap1;
  Delivery ap2;
};

Captured StartSilent(Harness& h) {
  AddBenignJoinRoutes(h);
  h.set_auto_answer(false);
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  EXPECT_EQ(h.challenges().size(), 2u);
  Captured c;
  for (const Delivery& d : h.challenges()) {
    (d.at == P("s1", 1) ? c.ap1 : c.ap2) = d;
  }
  return c;
}

Packet ReplyPacket(const Harness& h, const AuthReply& r) {
  return Packet{MagicHeader(h.magic()), *EncodeReply(r)};
}

std::string LastReplyRejection(const Harness& h) {
  const auto r = h.Entries(TranscriptKind::kReplyRejected);
  return r.empty() ? "" : r.back().detail;
}

TEST(ReplyTest, HonestRepliesAccepted) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  for (const Delivery* d : {&c.ap1, &c.ap2}) {
    std::optional<Packet> reply = h.agent("alice").AnswerChallenge(*d);
    ASSERT_TRUE(reply.has_value());
    h.Inject(*reply, d->at);
  }
  h.Tick(2);
  ASSERT_EQ(h.received().size(), 1u);
  EXPECT_EQ(h.received()[0].report.auth_received, 2u);
}

TEST(ReplyTest, WrongKeyRejected) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  SeededRandom rng(77, "forger");
  KeyPair forger = KeyPair::Generate(rng);
  AuthChallenge ch = *DecodeChallenge(c.ap2.packet.payload);
  h.Inject(ReplyPacket(h, *MakeReply(ch, ClientId("alice"), forger)), c.ap2.at);
  h.Tick(2);
  EXPECT_TRUE(absl::StrContains(LastReplyRejection(h), "bad-signature")) << LastReplyRejection(h);
  EXPECT_TRUE(h.Entries(TranscriptKind::kReplyAccepted).empty());
}

TEST(ReplyTest, ReplayedChallengeNonceRejected) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  const Packet reply = *h.agent("alice").AnswerChallenge(c.ap1);
  h.Inject(reply, c.ap1.at);
  h.Tick(2);
  h.Inject(reply, c.ap1.at);
  h.Tick(3);
  EXPECT_EQ(h.Entries(TranscriptKind::kReplyAccepted).size(), 1u);
  EXPECT_TRUE(absl::StrContains(LastReplyRejection(h), "replayed")) << LastReplyRejection(h);
}

TEST(ReplyTest, LateReplyAfterTimeoutRejected) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  for (int t = 2; t <= 1 + kDefaultAuthTimeout; ++t) h.Tick(t);
  ASSERT_EQ(h.received().size(), 1u);
  EXPECT_EQ(h.received()[0].report.auth_received, 0u);
  h.Inject(*h.agent("alice").AnswerChallenge(c.ap1), c.ap1.at);
  h.Tick(2 + kDefaultAuthTimeout);
  EXPECT_TRUE(h.Entries(TranscriptKind::kReplyAccepted).empty());
  EXPECT_FALSE(LastReplyRejection(h).empty());
}

TEST(ReplyTest, UnknownNonceRejected) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  SeededRandom rng(1, "client-key:alice");
  KeyPair alice = KeyPair::Generate(rng);
  h.Inject(ReplyPacket(h, *MakeReply({FixedNonce(0x55), "alice:ap1"}, ClientId("alice"), alice)),
           c.ap1.at);
  h.Tick(2);
  EXPECT_TRUE(absl::StrContains(LastReplyRejection(h), "unknown-nonce")) << LastReplyRejection(h);
}

TEST(ReplyTest, ReplyFromOtherAccessPointRejected) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  // A valid reply for ap2, sent from ap1.
  const Packet reply = *h.agent("alice").AnswerChallenge(c.ap2);
  h.Inject(reply, c.ap1.at);
  h.Tick(2);
  EXPECT_TRUE(absl::StrContains(LastReplyRejection(h), "wrong-access-point"))
      << LastReplyRejection(h);
}

TEST(ReplyTest, AliasMismatchRejected) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  SeededRandom rng(1, "client-key:alice");
  KeyPair alice = KeyPair::Generate(rng);
  AuthChallenge ch = *DecodeChallenge(c.ap1.packet.payload);
  ch.alias = "alice:ap2";
  h.Inject(ReplyPacket(h, *MakeReply(ch, ClientId("alice"), alice)), c.ap1.at);
  h.Tick(2);
  EXPECT_TRUE(absl::StrContains(LastReplyRejection(h), "alias-mismatch")) << LastReplyRejection(h);
}

TEST(ReplyTest, OtherClientCannotAnswerForOwner) {
  Harness h("join.topo");
  Captured c = StartSilent(h);
  SeededRandom rng(1, "client-key:eve");
  KeyPair eve = KeyPair::Generate(rng);
  AuthChallenge ch = *DecodeChallenge(c.ap1.packet.payload);
  h.Inject(ReplyPacket(h, *MakeReply(ch, ClientId("eve"), eve)), c.ap1.at);
  h.Tick(2);
  EXPECT_TRUE(absl::StrContains(LastReplyRejection(h), "identity-mismatch"))
      << LastReplyRejection(h);
}

// ---------------------------------------------------------------------------
// Report verification at the client.

TEST(ReportTest, TamperedReportFailsVerification) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  ASSERT_EQ(h.report_frames().size(), 1u);
  const Bytes frame = h.report_frames()[0];
  const PublicKey ctl = h.registry().controller().public_key();
  ASSERT_TRUE(VerifyReportSignature(*DecodeReport(frame), ctl));
  int flips = 0;
  for (size_t i = 0; i < frame.size(); ++i) {
    Bytes bad = frame;
    bad[i] ^= static_cast<uint8_t>(1u << (i % 8));
    absl::StatusOr<VerificationReport> d = DecodeReport(bad);
    if (d.ok()) EXPECT_FALSE(VerifyReportSignature(*d, ctl)) << "byte " << i;
    ++flips;
  }
  EXPECT_EQ(flips, static_cast<int>(frame.size()));
}

TEST(ReportTest, WrongControllerKeyFails) {
  Harness h("join.topo");
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  ASSERT_EQ(h.received().size(), 1u);
  SeededRandom rng(3, "other");
  KeyPair other = KeyPair::Generate(rng);
  EXPECT_FALSE(VerifyReportSignature(h.received()[0].report, other.public_key()));
}

TEST(ReportTest, ClientAcceptsEachReportOnce) {
  Harness h("join.topo");
  h.Tick(0);
  h.Inject(Query(h, "alice"), P("s1", 1));
  h.Tick(1);
  ASSERT_EQ(h.received().size(), 1u);
  EXPECT_TRUE(h.received()[0].ok);
  EXPECT_FALSE(h.agent("alice").VerifyReport(h.received()[0].report));
  // A validly signed report for a nonce alice never used is also refused.
  VerificationReport unsolicited = h.received()[0].report;
  unsolicited.nonce = FixedNonce(0x42);
  absl::StatusOr<Bytes> signed_bytes = ReportSignedBytes(unsolicited);
  ASSERT_TRUE(signed_bytes.ok());
  unsolicited.signature = h.registry().controller().Sign(*signed_bytes);
  ASSERT_TRUE(VerifyReportSignature(unsolicited, h.registry().controller().public_key()));
  EXPECT_FALSE(h.agent("alice").VerifyReport(unsolicited));
}

TEST(ReportTest, AllQueryKindsAnswered) {
  Harness h("join.topo");
  AddBenignJoinRoutes(h);
  h.Tick(0);
  int t = 1;
  for (QueryKind k : {QueryKind::kIsolation, QueryKind::kSources, QueryKind::kGeo,
                      QueryKind::kSummary}) {
    h.Inject(Query(h, "alice", k), P("s1", 1));
    h.Tick(t++);
  }
  ASSERT_EQ(h.received().size(), 4u);
  for (const auto& r : h.received()) {
    EXPECT_TRUE(r.ok);
    ASSERT_FALSE(r.report.body.empty());
    EXPECT_EQ(r.report.body[0], absl::StrCat("kind=", QueryKindName(r.report.kind)));
  }
  // Only isolation queries trigger challenges.
  EXPECT_EQ(h.challenges().size(), 2u);
}

// ---------------------------------------------------------------------------
// Counting soundness and binding, over randomized responder behaviour.

class CountingTest : public ::testing::TestWithParam<int> {};

TEST_P(CountingTest, CountsMatchTranscript) {
  std::mt19937_64 rng(GetParam());
  std::bernoulli_distribution coin(0.5);
  Harness h("join.topo", GetParam());
  AddBenignJoinRoutes(h);
  if (coin(rng)) AddJoin(h);
  h.agent("alice").set_responds(coin(rng));
  h.agent("eve").set_responds(coin(rng));
  if (coin(rng)) h.registry().Unregister(ClientId("eve"));
  h.Tick(0);
  h.Inject(Query(h, coin(rng) ? "alice" : "eve"), coin(rng) ? P("s1", 1) : P("s2", 3));
  for (int t = 1; t <= 2 + kDefaultAuthTimeout; ++t) h.Tick(t);

  EXPECT_EQ(h.ctl().open_sessions(), 0u);
  const std::vector<TranscriptEntry>& tr = h.ctl().transcript();
  for (const CompletedReport& done : h.ctl().reports()) {
    const VerificationReport& r = done.report;
    std::map<std::string, PortRef> challenged;
    std::set<PortRef> accepted_at;
    for (const TranscriptEntry& e : tr) {
      if (e.session != r.nonce) continue;
      if (e.kind == TranscriptKind::kChallengeSent) {
        challenged[h.topo().AccessPointAt(e.at)->Alias()] = e.at;
      }
      if (e.kind == TranscriptKind::kReplyAccepted) accepted_at.insert(e.at);
    }
    EXPECT_EQ(r.auth_requested, challenged.size());
    EXPECT_EQ(r.auth_received, accepted_at.size());
    EXPECT_EQ(r.verified.size(), r.auth_received);
    EXPECT_LE(r.auth_received, r.auth_requested);
    // Binding: each verified alias was challenged, and answered at that port.
    for (const std::string& alias : r.verified) {
      ASSERT_TRUE(challenged.contains(alias)) << alias;
      EXPECT_TRUE(accepted_at.contains(challenged.at(alias))) << alias;
      // And its owner was the registered, responding client.
      const AccessPoint* ap = h.topo().FindAlias(alias);
      ASSERT_NE(ap, nullptr);
      EXPECT_NE(h.registry().Find(ap->client), nullptr);
    }
  }
  for (const auto& got : h.received()) EXPECT_TRUE(got.ok);
}

INSTANTIATE_TEST_SUITE_P(Seeds, CountingTest, ::testing::Range(0, 40));

}  // namespace
}  // namespace rvaas
