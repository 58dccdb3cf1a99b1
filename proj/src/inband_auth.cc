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

#include <algorithm>
#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace rvaas {
namespace {

class Writer {
 public:
  void U8(uint8_t v) { out_.push_back(v); }
  void U16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
  }
  void U32(uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<uint8_t>(v >> shift));
  }
  void Raw(absl::Span<const uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  absl::Status Count(size_t n) {
    if (n > 0xffff) return absl::InvalidArgumentError("too many entries for a frame");
    U16(static_cast<uint16_t>(n));
    return absl::OkStatus();
  }
  absl::Status Str(absl::string_view s) {
    if (s.size() > 0xffff) return absl::InvalidArgumentError("string too long for a frame");
    U16(static_cast<uint16_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
    return absl::OkStatus();
  }

  Bytes Take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(absl::Span<const uint8_t> in) : in_(in) {}

  absl::StatusOr<uint8_t> U8() {
    if (in_.size() < 1) return Truncated();
    uint8_t v = in_[0];
    in_.remove_prefix(1);
    return v;
  }
  absl::StatusOr<uint16_t> U16() {
    if (in_.size() < 2) return Truncated();
    uint16_t v = static_cast<uint16_t>(in_[0] << 8 | in_[1]);
    in_.remove_prefix(2);
    return v;
  }
  absl::StatusOr<uint32_t> U32() {
    if (in_.size() < 4) return Truncated();
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | in_[i];
    in_.remove_prefix(4);
    return v;
  }
  template <size_t N>
  absl::Status Fixed(std::array<uint8_t, N>& out) {
    if (in_.size() < N) return Truncated();
    std::copy(in_.begin(), in_.begin() + N, out.begin());
    in_.remove_prefix(N);
    return absl::OkStatus();
  }
  absl::StatusOr<std::string> Str() {
    absl::StatusOr<uint16_t> n = U16();
    if (!n.ok()) return n.status();
    if (in_.size() < *n) return Truncated();
    std::string s(in_.begin(), in_.begin() + *n);
    in_.remove_prefix(*n);
    return s;
  }
  absl::Status Done() const {
    if (!in_.empty()) return absl::InvalidArgumentError("trailing bytes after frame");
    return absl::OkStatus();
  }

 private:
  static absl::Status Truncated() { return absl::InvalidArgumentError("truncated frame"); }

  absl::Span<const uint8_t> in_;
};

#define RVAAS_RETURN_IF_ERROR(expr)            \
  do {                                         \
    if (absl::Status _s = (expr); !_s.ok()) {  \
      return _s;                               \
    }                                          \
  } while (0)

#define RVAAS_ASSIGN_OR_RETURN(lhs, expr) \
  auto lhs##_or = (expr);                 \
  if (!lhs##_or.ok()) return lhs##_or.status(); \
  auto lhs = *std::move(lhs##_or)

absl::Status ExpectHeader(Reader& r, FrameType type) {
  RVAAS_ASSIGN_OR_RETURN(t, r.U8());
  if (t != static_cast<uint8_t>(type)) return absl::InvalidArgumentError("unexpected frame type");
  RVAAS_ASSIGN_OR_RETURN(v, r.U8());
  if (v != kWireVersion) {
    return absl::InvalidArgumentError(absl::StrCat("unsupported wire version ", v));
  }
  return absl::OkStatus();
}

absl::StatusOr<QueryKind> KindFromByte(uint8_t b) {
  if (b < 1 || b > 4) return absl::InvalidArgumentError(absl::StrCat("unknown query kind ", b));
  return static_cast<QueryKind>(b);
}

absl::Status WriteLines(Writer& w, const std::vector<std::string>& lines) {
  RVAAS_RETURN_IF_ERROR(w.Count(lines.size()));
  for (const std::string& l : lines) RVAAS_RETURN_IF_ERROR(w.Str(l));
  return absl::OkStatus();
}

absl::StatusOr<std::vector<std::string>> ReadLines(Reader& r) {
  RVAAS_ASSIGN_OR_RETURN(n, r.U16());
  std::vector<std::string> out;
  for (uint16_t i = 0; i < n; ++i) {
    RVAAS_ASSIGN_OR_RETURN(s, r.Str());
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> SortedAliases(const std::set<std::string>& aliases) {
  return std::vector<std::string>(aliases.begin(), aliases.end());
}

}  // namespace

absl::StatusOr<FrameType> PeekFrameType(absl::Span<const uint8_t> frame) {
  if (frame.empty()) return absl::InvalidArgumentError("empty frame");
  if (frame[0] < 1 || frame[0] > 4) {
    return absl::InvalidArgumentError(absl::StrCat("unknown frame type ", frame[0]));
  }
  return static_cast<FrameType>(frame[0]);
}

std::vector<std::string> VerificationReport::Render() const {
  std::vector<std::string> lines = body;
  lines.push_back(absl::StrCat("verified=", verified.empty() ? "-" : absl::StrJoin(verified, ",")));
  lines.push_back(absl::StrCat("auth_requested=", auth_requested));
  lines.push_back(absl::StrCat("auth_received=", auth_received));
  return lines;
}

absl::StatusOr<Bytes> EncodeQueryPlaintext(const ClientQuery& q) {
  Writer w;
  w.U8(kWireVersion);
  w.U8(static_cast<uint8_t>(q.kind));
  RVAAS_RETURN_IF_ERROR(w.Str(q.client.value()));
  w.Raw(q.nonce);
  RVAAS_RETURN_IF_ERROR(w.Count(q.params.size()));
  for (const auto& [key, value] : q.params) {
    if (key.empty() || key.find('=') != std::string::npos) {
      return absl::InvalidArgumentError(absl::StrCat("bad parameter name \"", key, "\""));
    }
    RVAAS_RETURN_IF_ERROR(w.Str(absl::StrCat(key, "=", value)));
  }
  return w.Take();
}

absl::StatusOr<ClientQuery> DecodeQueryPlaintext(absl::Span<const uint8_t> plain) {
  Reader r(plain);
  RVAAS_ASSIGN_OR_RETURN(version, r.U8());
  if (version != kWireVersion) {
    return absl::InvalidArgumentError(absl::StrCat("unsupported wire version ", version));
  }
  ClientQuery q;
  RVAAS_ASSIGN_OR_RETURN(kind_byte, r.U8());
  RVAAS_ASSIGN_OR_RETURN(kind, KindFromByte(kind_byte));
  q.kind = kind;
  RVAAS_ASSIGN_OR_RETURN(client, r.Str());
  if (client.empty()) return absl::InvalidArgumentError("empty client id");
  q.client = ClientId(client);
  RVAAS_RETURN_IF_ERROR(r.Fixed(q.nonce));
  RVAAS_ASSIGN_OR_RETURN(pairs, ReadLines(r));
  for (const std::string& kv : pairs) {
    size_t eq = kv.find('=');
    if (eq == 0 || eq == std::string::npos) {
      return absl::InvalidArgumentError(absl::StrCat("bad parameter \"", kv, "\""));
    }
    if (!q.params.emplace(kv.substr(0, eq), kv.substr(eq + 1)).second) {
      return absl::InvalidArgumentError(absl::StrCat("duplicate parameter \"", kv, "\""));
    }
  }
  RVAAS_RETURN_IF_ERROR(r.Done());
  return q;
}

absl::StatusOr<Bytes> EncodeChallenge(const AuthChallenge& c) {
  Writer w;
  w.U8(static_cast<uint8_t>(FrameType::kChallenge));
  w.U8(kWireVersion);
  w.Raw(c.nonce);
  RVAAS_RETURN_IF_ERROR(w.Str(c.alias));
  return w.Take();
}

absl::StatusOr<AuthChallenge> DecodeChallenge(absl::Span<const uint8_t> frame) {
  Reader r(frame);
  RVAAS_RETURN_IF_ERROR(ExpectHeader(r, FrameType::kChallenge));
  AuthChallenge c;
  RVAAS_RETURN_IF_ERROR(r.Fixed(c.nonce));
  RVAAS_ASSIGN_OR_RETURN(alias, r.Str());
  c.alias = std::move(alias);
  RVAAS_RETURN_IF_ERROR(r.Done());
  return c;
}

absl::StatusOr<Bytes> ReplySignedBytes(const Nonce& nonce, const ClientId& client,
                                       absl::string_view alias) {
  Writer w;
  w.U8(static_cast<uint8_t>(FrameType::kReply));
  w.U8(kWireVersion);
  w.Raw(nonce);
  RVAAS_RETURN_IF_ERROR(w.Str(client.value()));
  RVAAS_RETURN_IF_ERROR(w.Str(alias));
  return w.Take();
}

absl::StatusOr<AuthReply> MakeReply(const AuthChallenge& challenge, const ClientId& client,
                                    const KeyPair& key) {
  RVAAS_ASSIGN_OR_RETURN(signed_bytes, ReplySignedBytes(challenge.nonce, client, challenge.alias));
  return AuthReply{challenge.nonce, client, challenge.alias, key.Sign(signed_bytes)};
}

absl::StatusOr<Bytes> EncodeReply(const AuthReply& r) {
  RVAAS_ASSIGN_OR_RETURN(out, ReplySignedBytes(r.nonce, r.client, r.alias));
  out.insert(out.end(), r.signature.begin(), r.signature.end());
  return out;
}

absl::StatusOr<AuthReply> DecodeReply(absl::Span<const uint8_t> frame) {
  Reader r(frame);
  RVAAS_RETURN_IF_ERROR(ExpectHeader(r, FrameType::kReply));
  AuthReply reply;
  RVAAS_RETURN_IF_ERROR(r.Fixed(reply.nonce));
  RVAAS_ASSIGN_OR_RETURN(client, r.Str());
  reply.client = ClientId(client);
  RVAAS_ASSIGN_OR_RETURN(alias, r.Str());
  reply.alias = std::move(alias);
  RVAAS_RETURN_IF_ERROR(r.Fixed(reply.signature));
  RVAAS_RETURN_IF_ERROR(r.Done());
  return reply;
}

bool VerifyReply(const AuthReply& r, const PublicKey& key) {
  absl::StatusOr<Bytes> signed_bytes = ReplySignedBytes(r.nonce, r.client, r.alias);
  return signed_bytes.ok() && VerifySignature(key, *signed_bytes, r.signature);
}

absl::StatusOr<Bytes> ReportSignedBytes(const VerificationReport& r) {
  Writer w;
  w.U8(static_cast<uint8_t>(FrameType::kReport));
  w.U8(kWireVersion);
  w.U8(static_cast<uint8_t>(r.kind));
  RVAAS_RETURN_IF_ERROR(w.Str(r.client.value()));
  w.Raw(r.nonce);
  RVAAS_RETURN_IF_ERROR(WriteLines(w, r.body));
  RVAAS_RETURN_IF_ERROR(WriteLines(w, r.verified));
  w.U32(r.auth_requested);
  w.U32(r.auth_received);
  return w.Take();
}

absl::StatusOr<Bytes> EncodeReport(const VerificationReport& r) {
  RVAAS_ASSIGN_OR_RETURN(out, ReportSignedBytes(r));
  out.insert(out.end(), r.signature.begin(), r.signature.end());
  return out;
}

absl::StatusOr<VerificationReport> DecodeReport(absl::Span<const uint8_t> frame) {
  Reader r(frame);
  RVAAS_RETURN_IF_ERROR(ExpectHeader(r, FrameType::kReport));
  VerificationReport report;
  RVAAS_ASSIGN_OR_RETURN(kind_byte, r.U8());
  RVAAS_ASSIGN_OR_RETURN(kind, KindFromByte(kind_byte));
  report.kind = kind;
  RVAAS_ASSIGN_OR_RETURN(client, r.Str());
  report.client = ClientId(client);
  RVAAS_RETURN_IF_ERROR(r.Fixed(report.nonce));
  RVAAS_ASSIGN_OR_RETURN(body, ReadLines(r));
  report.body = std::move(body);
  RVAAS_ASSIGN_OR_RETURN(verified, ReadLines(r));
  report.verified = std::move(verified);
  RVAAS_ASSIGN_OR_RETURN(requested, r.U32());
  RVAAS_ASSIGN_OR_RETURN(received, r.U32());
  if (received > requested) {
    return absl::InvalidArgumentError("report counts more replies than challenges");
  }
  report.auth_requested = requested;
  report.auth_received = received;
  RVAAS_RETURN_IF_ERROR(r.Fixed(report.signature));
  RVAAS_RETURN_IF_ERROR(r.Done());
  return report;
}

bool VerifyReportSignature(const VerificationReport& r, const PublicKey& controller) {
  if (r.auth_received > r.auth_requested) return false;
  absl::StatusOr<Bytes> signed_bytes = ReportSignedBytes(r);
  return signed_bytes.ok() && VerifySignature(controller, *signed_bytes, r.signature);
}

absl::StatusOr<TernaryString> DefaultMagic(const Topology& topology) {
  const int width = topology.header_width();
  uint64_t care = 0;
  auto it = topology.fields().find("magic");
  if (it != topology.fields().end()) {
    for (int bit = it->second.start; bit <= it->second.end; ++bit) {
      care |= uint64_t{1} << (width - 1 - bit);
    }
  } else {
    const int bits = std::min(4, width);
    for (int bit = 0; bit < bits; ++bit) care |= uint64_t{1} << (width - 1 - bit);
  }
  TernaryString magic = TernaryString::FromMasks(care, care, width);
  if (absl::Status s = ValidateMagic(magic, topology); !s.ok()) return s;
  return magic;
}

absl::Status ValidateMagic(const TernaryString& magic, const Topology& topology) {
  if (magic.width() != topology.header_width()) {
    return absl::InvalidArgumentError(absl::StrCat("magic pattern width ", magic.width(),
                                                   " != header width ", topology.header_width()));
  }
  if (magic.care() == 0) {
    return absl::InvalidArgumentError("magic pattern must fix at least one bit");
  }
  return absl::OkStatus();
}

Header MagicHeader(const TernaryString& magic) {
  return Header(magic.value() & magic.care(), magic.width());
}

std::vector<std::pair<SwitchId, FlowRule>> MagicRules(const Topology& topology,
                                                      const TernaryString& magic) {
  std::set<SwitchId> hosts;
  for (const AccessPoint& ap : topology.access_points()) hosts.insert(ap.port.sw);
  std::vector<std::pair<SwitchId, FlowRule>> out;
  for (const SwitchId& sw : hosts) {
    out.emplace_back(sw, FlowRule{kMagicPriority, magic, ControllerAction{}});
  }
  return out;
}

absl::StatusOr<Packet> EncodeQuery(const ClientQuery& q, const PublicKey& controller,
                                   const TernaryString& magic, RandomSource& rng) {
  RVAAS_ASSIGN_OR_RETURN(plain, EncodeQueryPlaintext(q));
  Bytes payload{static_cast<uint8_t>(FrameType::kQuery)};
  RVAAS_ASSIGN_OR_RETURN(sealed, Seal(controller, plain, rng));
  payload.insert(payload.end(), sealed.begin(), sealed.end());
  if (payload.size() > kMaxQueryBytes) {
    return absl::OutOfRangeError(
        absl::StrCat("query payload of ", payload.size(), " bytes exceeds ", kMaxQueryBytes));
  }
  return Packet{MagicHeader(magic), std::move(payload)};
}

absl::StatusOr<ClientQuery> DecodeQuery(const Packet& packet, const KeyPair& controller) {
  absl::Span<const uint8_t> frame(packet.payload);
  RVAAS_ASSIGN_OR_RETURN(type, PeekFrameType(frame));
  if (type != FrameType::kQuery) return absl::InvalidArgumentError("not a query frame");
  if (frame.size() > kMaxQueryBytes) return absl::OutOfRangeError("query payload too large");
  RVAAS_ASSIGN_OR_RETURN(plain, controller.Open(frame.subspan(1)));
  return DecodeQueryPlaintext(plain);
}

Attestation KeyRegistry::attestation() const {
  return Attestation{controller_.public_key().Fingerprint(), 1};
}

absl::Status KeyRegistry::Register(const ClientId& client, const PublicKey& key) {
  if (!clients_.emplace(client, key).second) {
    return absl::AlreadyExistsError(absl::StrCat(client.value(), " already holds a key"));
  }
  return absl::OkStatus();
}

void KeyRegistry::Unregister(const ClientId& client) { clients_.erase(client); }

const PublicKey* KeyRegistry::Find(const ClientId& client) const {
  auto it = clients_.find(client);
  return it == clients_.end() ? nullptr : &it->second;
}

absl::string_view TranscriptKindName(TranscriptKind kind) {
  switch (kind) {
    case TranscriptKind::kQueryAccepted:
      return "query-accepted";
    case TranscriptKind::kQueryRejected:
      return "query-rejected";
    case TranscriptKind::kChallengeSent:
      return "challenge-sent";
    case TranscriptKind::kReplyAccepted:
      return "reply-accepted";
    case TranscriptKind::kReplyRejected:
      return "reply-rejected";
    case TranscriptKind::kReportSent:
      return "report-sent";
  }
  return "?";
}

std::string TranscriptEntry::ToString() const {
  std::string out = absl::StrCat("t=", tick, " ", TranscriptKindName(kind), " at=", at.ToString());
  if (session) absl::StrAppend(&out, " session=", HexNonce(*session));
  if (!detail.empty()) absl::StrAppend(&out, " ", detail);
  return out;
}

AuthController::AuthController(std::shared_ptr<const Topology> topology,
                               const KeyRegistry* registry, RandomSource* rng, AuthOptions options,
                               QueryEvaluator evaluator)
    : topology_(std::move(topology)),
      registry_(registry),
      rng_(rng),
      options_(std::move(options)),
      evaluator_(std::move(evaluator)),
      magic_header_(MagicHeader(options_.magic)) {}

void AuthController::Record(int64_t tick, TranscriptKind kind, std::optional<Nonce> session,
                            const PortRef& at, std::string detail) {
  transcript_.push_back(TranscriptEntry{tick, kind, session, at, std::move(detail)});
}

absl::Status AuthController::OnPacketIn(const SwitchEvent& event, const Snapshot& snap,
                                        Network& net) {
  const auto* in = std::get_if<PacketIn>(&event.kind);
  if (in == nullptr || !options_.magic.Matches(in->packet.header)) return absl::OkStatus();
  const PortRef ingress{event.sw, in->in_port};
  if (topology_->AccessPointAt(ingress) == nullptr) {
    Record(event.tick, TranscriptKind::kQueryRejected, std::nullopt, ingress,
           "reason=not-an-access-point");
    return absl::OkStatus();
  }
  absl::StatusOr<FrameType> type = PeekFrameType(in->packet.payload);
  if (!type.ok()) {
    Record(event.tick, TranscriptKind::kQueryRejected, std::nullopt, ingress, "reason=malformed");
    return absl::OkStatus();
  }
  switch (*type) {
    case FrameType::kQuery:
      HandleQuery(in->packet.payload, ingress, snap, net);
      break;
    case FrameType::kReply:
      HandleReply(in->packet.payload, ingress, event.tick);
      break;
    default:
      Record(event.tick, TranscriptKind::kQueryRejected, std::nullopt, ingress,
             "reason=unexpected-frame");
      break;
  }
  return OnTick(net.tick(), net);
}

void AuthController::HandleQuery(absl::Span<const uint8_t> frame, const PortRef& ingress,
                                 const Snapshot& snap, Network& net) {
  const int64_t now = net.tick();
  absl::StatusOr<ClientQuery> q =
      DecodeQuery(Packet{magic_header_, Bytes(frame.begin(), frame.end())}, registry_->controller());
  if (!q.ok()) {
    Record(now, TranscriptKind::kQueryRejected, std::nullopt, ingress, "reason=undecryptable");
    return;
  }
  const AccessPoint* ap = topology_->AccessPointAt(ingress);
  if (ap->client != q->client) {
    Record(now, TranscriptKind::kQueryRejected, q->nonce, ingress,
           absl::StrCat("reason=spoofed claimed=", q->client.value(), " owner=", ap->client.value()));
    return;
  }
  std::set<Nonce>& seen = seen_queries_[q->client];
  if (seen.contains(q->nonce) || sessions_.contains(q->nonce)) {
    Record(now, TranscriptKind::kQueryRejected, q->nonce, ingress, "reason=replayed");
    return;
  }
  seen.insert(q->nonce);
  std::deque<Nonce>& order = seen_order_[q->client];
  order.push_back(q->nonce);
  if (order.size() > options_.replay_window) {
    seen.erase(order.front());
    order.pop_front();
  }

  absl::StatusOr<QueryAnswer> answer = evaluator_(*q, ingress, snap);
  if (!answer.ok()) {
    Record(now, TranscriptKind::kQueryRejected, q->nonce, ingress,
           absl::StrCat("reason=invalid detail=\"", answer.status().message(), "\""));
    return;
  }
  Record(now, TranscriptKind::kQueryAccepted, q->nonce, ingress,
         absl::StrCat("kind=", QueryKindName(q->kind), " client=", q->client.value()));

  Session session{*q, ingress, now + options_.timeout, *std::move(answer), {}, {}};
  for (const PortRef& target : session.answer.challenge) {
    AuthChallenge c{rng_->NewNonce(), topology_->AccessPointAt(target)->Alias()};
    absl::StatusOr<Bytes> frame_bytes = EncodeChallenge(c);
    if (!frame_bytes.ok()) continue;
    absl::StatusOr<PacketOutResult> sent =
        net.PacketOut(target.sw, target.port, Packet{magic_header_, *std::move(frame_bytes)});
    if (!sent.ok()) continue;
    session.pending.insert(c.nonce);
    challenges_.emplace(c.nonce, Pending{q->nonce, target});
    Record(now, TranscriptKind::kChallengeSent, q->nonce, target,
           absl::StrCat("nonce=", HexNonce(c.nonce), " alias=", c.alias));
  }
  sessions_.emplace(q->nonce, std::move(session));
}

void AuthController::RememberUsed(const Nonce& challenge) {
  used_challenges_.insert(challenge);
  used_order_.push_back(challenge);
  if (used_order_.size() > options_.replay_window) {
    used_challenges_.erase(used_order_.front());
    used_order_.pop_front();
  }
}

void AuthController::HandleReply(absl::Span<const uint8_t> frame, const PortRef& ingress,
                                 int64_t now) {
  absl::StatusOr<AuthReply> reply = DecodeReply(frame);
  if (!reply.ok()) {
    Record(now, TranscriptKind::kReplyRejected, std::nullopt, ingress, "reason=malformed");
    return;
  }
  auto it = challenges_.find(reply->nonce);
  if (it == challenges_.end()) {
    Record(now, TranscriptKind::kReplyRejected, std::nullopt, ingress,
           used_challenges_.contains(reply->nonce) ? "reason=replayed" : "reason=unknown-nonce");
    return;
  }
  const Pending pending = it->second;
  auto reject = [&](absl::string_view reason) {
    Record(now, TranscriptKind::kReplyRejected, pending.session, ingress,
           absl::StrCat("reason=", reason, " nonce=", HexNonce(reply->nonce)));
  };
  const AccessPoint* target = topology_->AccessPointAt(pending.target);
  if (ingress != pending.target) return reject("wrong-access-point");
  if (reply->alias != target->Alias()) return reject("alias-mismatch");
  if (reply->client != target->client) return reject("identity-mismatch");
  const PublicKey* key = registry_->Find(reply->client);
  if (key == nullptr) return reject("unregistered");
  if (!VerifyReply(*reply, *key)) return reject("bad-signature");

  challenges_.erase(it);
  RememberUsed(reply->nonce);
  Session& session = sessions_.at(pending.session);
  session.pending.erase(reply->nonce);
  session.verified.insert(reply->alias);
  Record(now, TranscriptKind::kReplyAccepted, pending.session, ingress,
         absl::StrCat("nonce=", HexNonce(reply->nonce), " alias=", reply->alias));
}

absl::Status AuthController::OnTick(int64_t now, Network& net) {
  std::vector<Nonce> done;
  for (const auto& [id, session] : sessions_) {
    if (session.pending.empty() || session.deadline <= now) done.push_back(id);
  }
  for (const Nonce& id : done) {
    if (absl::Status s = Finish(id, now, net); !s.ok()) return s;
  }
  return absl::OkStatus();
}

absl::Status AuthController::Finish(const Nonce& session_id, int64_t now, Network& net) {
  auto node = sessions_.extract(session_id);
  Session& session = node.mapped();
  for (const Nonce& n : session.pending) {
    challenges_.erase(n);
    RememberUsed(n);
  }
  VerificationReport report;
  report.kind = session.query.kind;
  report.client = session.query.client;
  report.nonce = session.query.nonce;
  report.body = session.answer.body;
  report.verified = SortedAliases(session.verified);
  report.auth_requested = static_cast<uint32_t>(session.answer.challenge.size());
  report.auth_received = static_cast<uint32_t>(session.verified.size());
  absl::StatusOr<Bytes> signed_bytes = ReportSignedBytes(report);
  if (!signed_bytes.ok()) return signed_bytes.status();
  report.signature = registry_->controller().Sign(*signed_bytes);
  absl::StatusOr<Bytes> frame = EncodeReport(report);
  if (!frame.ok()) return frame.status();
  absl::StatusOr<PacketOutResult> sent =
      net.PacketOut(session.request_point.sw, session.request_point.port,
                    Packet{magic_header_, *std::move(frame)});
  if (!sent.ok()) return sent.status();
  Record(now, TranscriptKind::kReportSent, session_id, session.request_point,
         absl::StrCat("requested=", report.auth_requested, " received=", report.auth_received));
  reports_.push_back(CompletedReport{now, session.request_point, std::move(report),
                                     session.answer.finding});
  return absl::OkStatus();
}

ClientAgent::ClientAgent(std::shared_ptr<const Topology> topology, ClientId id, KeyPair identity,
                         PublicKey controller, TernaryString magic, RandomSource* rng)
    : topology_(std::move(topology)),
      id_(std::move(id)),
      identity_(std::move(identity)),
      controller_(controller),
      magic_(magic),
      rng_(rng) {}

absl::StatusOr<Packet> ClientAgent::NewQuery(QueryKind kind,
                                             std::map<std::string, std::string> params,
                                             std::optional<ClientId> claimed) {
  ClientQuery q{kind, claimed.value_or(id_), rng_->NewNonce(), std::move(params)};
  absl::StatusOr<Packet> packet = EncodeQuery(q, controller_, magic_, *rng_);
  if (packet.ok()) outstanding_.insert(q.nonce);
  return packet;
}

std::optional<Packet> ClientAgent::AnswerChallenge(const Delivery& delivery) const {
  if (!responds_) return std::nullopt;
  const AccessPoint* ap = topology_->AccessPointAt(delivery.at);
  if (ap == nullptr || ap->client != id_) return std::nullopt;
  absl::StatusOr<AuthChallenge> c = DecodeChallenge(delivery.packet.payload);
  if (!c.ok() || c->alias != ap->Alias()) return std::nullopt;
  absl::StatusOr<AuthReply> reply = MakeReply(*c, id_, identity_);
  if (!reply.ok()) return std::nullopt;
  absl::StatusOr<Bytes> frame = EncodeReply(*reply);
  if (!frame.ok()) return std::nullopt;
  return Packet{MagicHeader(magic_), *std::move(frame)};
}

bool ClientAgent::VerifyReport(const VerificationReport& report) {
  if (!VerifyReportSignature(report, controller_)) return false;
  return outstanding_.erase(report.nonce) == 1;
}

}  // namespace rvaas
