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

// In-band client protocol. Clients send sealed queries in packets whose
// header matches the magic pattern; controller-owned rules punt those packets
// to the controller as packet-ins. For an isolation query the controller
// challenges every candidate access point with a packet-out, collects signed
// replies until a timeout, and returns a signed report to the request point.
//
// Frame layouts are documented in docs/wire_format.md.

#ifndef RVAAS_INBAND_AUTH_H_
#define RVAAS_INBAND_AUTH_H_

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/types/span.h"
#include "rvaas/crypto.h"
#include "rvaas/dataplane_sim.h"
#include "rvaas/header_space.h"
#include "rvaas/network_model.h"
#include "rvaas/snapshot_service.h"
#include "rvaas/verify_engine.h"

namespace rvaas {

inline constexpr uint8_t kWireVersion = 1;
inline constexpr size_t kMaxQueryBytes = 1024;
inline constexpr int64_t kDefaultAuthTimeout = 8;
inline constexpr size_t kDefaultReplayWindow = 4096;
// Above any priority a scenario may use for its own rules.
inline constexpr uint32_t kMagicPriority = 65535;

enum class FrameType : uint8_t { kQuery = 1, kChallenge = 2, kReply = 3, kReport = 4 };

absl::StatusOr<FrameType> PeekFrameType(absl::Span<const uint8_t> frame);

struct ClientQuery {
  QueryKind kind = QueryKind::kIsolation;
  ClientId client;
  Nonce nonce{};
  std::map<std::string, std::string> params;

  friend bool operator==(const ClientQuery&, const ClientQuery&) = default;
};

struct AuthChallenge {
  Nonce nonce{};
  // Alias of the access point the challenge is sent to.
  std::string alias;

  friend bool operator==(const AuthChallenge&, const AuthChallenge&) = default;
};

struct AuthReply {
  Nonce nonce{};
  ClientId client;
  std::string alias;
  Signature signature{};

  friend bool operator==(const AuthReply&, const AuthReply&) = default;
};

struct VerificationReport {
  QueryKind kind = QueryKind::kIsolation;
  ClientId client;
  Nonce nonce{};
  std::vector<std::string> body;
  // Aliases whose replies verified, sorted.
  std::vector<std::string> verified;
  uint32_t auth_requested = 0;
  uint32_t auth_received = 0;
  Signature signature{};

  // Body followed by verified=, auth_requested= and auth_received= lines.
  std::vector<std::string> Render() const;
  friend bool operator==(const VerificationReport&, const VerificationReport&) = default;
};

// Plaintext of a query, before sealing.
absl::StatusOr<Bytes> EncodeQueryPlaintext(const ClientQuery& q);
absl::StatusOr<ClientQuery> DecodeQueryPlaintext(absl::Span<const uint8_t> plain);

absl::StatusOr<Bytes> EncodeChallenge(const AuthChallenge& c);
absl::StatusOr<AuthChallenge> DecodeChallenge(absl::Span<const uint8_t> frame);

// Signed portion of a reply frame: everything before the signature.
absl::StatusOr<Bytes> ReplySignedBytes(const Nonce& nonce, const ClientId& client,
                                       absl::string_view alias);
absl::StatusOr<AuthReply> MakeReply(const AuthChallenge& challenge, const ClientId& client,
                                    const KeyPair& key);
absl::StatusOr<Bytes> EncodeReply(const AuthReply& r);
absl::StatusOr<AuthReply> DecodeReply(absl::Span<const uint8_t> frame);
bool VerifyReply(const AuthReply& r, const PublicKey& key);

// Signed portion of a report frame: everything before the signature.
absl::StatusOr<Bytes> ReportSignedBytes(const VerificationReport& r);
absl::StatusOr<Bytes> EncodeReport(const VerificationReport& r);
absl::StatusOr<VerificationReport> DecodeReport(absl::Span<const uint8_t> frame);
// Signature check only.
bool VerifyReportSignature(const VerificationReport& r, const PublicKey& controller);

// Magic pattern: the `magic` field of the topology set to all ones, or the
// top four header bits when no such field is declared.
absl::StatusOr<TernaryString> DefaultMagic(const Topology& topology);
absl::Status ValidateMagic(const TernaryString& magic, const Topology& topology);
// Concrete header: magic bits as specified, all others zero.
Header MagicHeader(const TernaryString& magic);
// One ToController rule per switch that hosts an access point.
std::vector<std::pair<SwitchId, FlowRule>> MagicRules(const Topology& topology,
                                                      const TernaryString& magic);

absl::StatusOr<Packet> EncodeQuery(const ClientQuery& q, const PublicKey& controller,
                                   const TernaryString& magic, RandomSource& rng);
absl::StatusOr<ClientQuery> DecodeQuery(const Packet& packet, const KeyPair& controller);

class KeyRegistry {
 public:
  explicit KeyRegistry(KeyPair controller) : controller_(std::move(controller)) {}

  const KeyPair& controller() const { return controller_; }
  Attestation attestation() const;

  // AlreadyExists if the client holds a key.
  absl::Status Register(const ClientId& client, const PublicKey& key);
  void Unregister(const ClientId& client);
  const PublicKey* Find(const ClientId& client) const;

 private:
  KeyPair controller_;
  std::map<ClientId, PublicKey> clients_;
};

enum class TranscriptKind {
  kQueryAccepted,
  kQueryRejected,
  kChallengeSent,
  kReplyAccepted,
  kReplyRejected,
  kReportSent,
};

absl::string_view TranscriptKindName(TranscriptKind kind);

// Controller-side protocol log. Internal: names switch ports.
struct TranscriptEntry {
  int64_t tick = 0;
  TranscriptKind kind = TranscriptKind::kQueryAccepted;
  // Session (query nonce), when known.
  std::optional<Nonce> session;
  PortRef at;
  std::string detail;

  std::string ToString() const;
};

struct CompletedReport {
  int64_t tick = 0;
  PortRef request_point;
  VerificationReport report;
  // The answer flagged foreign endpoints or a region violation.
  bool finding = false;
};

struct AuthOptions {
  TernaryString magic = TernaryString::Wildcard(1);
  int64_t timeout = kDefaultAuthTimeout;
  size_t replay_window = kDefaultReplayWindow;
};

using QueryEvaluator = std::function<absl::StatusOr<QueryAnswer>(
    const ClientQuery& q, const PortRef& request_point, const Snapshot& snap)>;

// Drives protocol sessions from ordered simulator events. Single writer.
class AuthController {
 public:
  AuthController(std::shared_ptr<const Topology> topology, const KeyRegistry* registry,
                 RandomSource* rng, AuthOptions options, QueryEvaluator evaluator);

  // Handles one packet-in. Packets whose header misses the magic pattern are
  // ignored. Rejections are recorded in the transcript, not returned.
  absl::Status OnPacketIn(const SwitchEvent& event, const Snapshot& snap, Network& net);
  // Sends the report of every session that is complete or has timed out.
  absl::Status OnTick(int64_t now, Network& net);

  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  const std::vector<CompletedReport>& reports() const { return reports_; }
  size_t open_sessions() const { return sessions_.size(); }

 private:
  struct Session {
    ClientQuery query;
    PortRef request_point;
    int64_t deadline = 0;
    QueryAnswer answer;
    std::set<std::string> verified;
    std::set<Nonce> pending;
  };
  struct Pending {
    Nonce session;
    PortRef target;
  };

  void Record(int64_t tick, TranscriptKind kind, std::optional<Nonce> session, const PortRef& at,
              std::string detail);
  void HandleQuery(absl::Span<const uint8_t> frame, const PortRef& ingress, const Snapshot& snap,
                   Network& net);
  void HandleReply(absl::Span<const uint8_t> frame, const PortRef& ingress, int64_t now);
  absl::Status Finish(const Nonce& session_id, int64_t now, Network& net);
  void RememberUsed(const Nonce& challenge);

  std::shared_ptr<const Topology> topology_;
  const KeyRegistry* registry_;
  RandomSource* rng_;
  AuthOptions options_;
  QueryEvaluator evaluator_;
  Header magic_header_;

  std::map<Nonce, Session> sessions_;
  std::map<Nonce, Pending> challenges_;
  std::set<Nonce> used_challenges_;
  std::deque<Nonce> used_order_;
  std::map<ClientId, std::set<Nonce>> seen_queries_;
  std::map<ClientId, std::deque<Nonce>> seen_order_;
  std::vector<TranscriptEntry> transcript_;
  std::vector<CompletedReport> reports_;
};

// Client-side responder and query originator. One agent serves every access
// point of its client.
class ClientAgent {
 public:
  ClientAgent(std::shared_ptr<const Topology> topology, ClientId id, KeyPair identity,
              PublicKey controller, TernaryString magic, RandomSource* rng);

  const ClientId& id() const { return id_; }
  const PublicKey& public_key() const { return identity_.public_key(); }
  void set_responds(bool responds) { responds_ = responds; }

  // Builds a query claiming to come from `claimed` (normally the agent's own
  // client) and remembers its nonce.
  absl::StatusOr<Packet> NewQuery(QueryKind kind, std::map<std::string, std::string> params,
                                  std::optional<ClientId> claimed = std::nullopt);
  // Reply packet for a challenge delivered at one of this client's access
  // points; nullopt when silent or the delivery is not a challenge.
  std::optional<Packet> AnswerChallenge(const Delivery& delivery) const;
  // True iff the signature verifies under the controller key and the nonce
  // matches an outstanding query, which is then consumed.
  bool VerifyReport(const VerificationReport& report);

 private:
  std::shared_ptr<const Topology> topology_;
  ClientId id_;
  KeyPair identity_;
  PublicKey controller_;
  TernaryString magic_;
  RandomSource* rng_;
  bool responds_ = true;
  std::set<Nonce> outstanding_;
};

}  // namespace rvaas

#endif  // RVAAS_INBAND_AUTH_H_
