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

// Signing and sealing primitives for the in-band protocol, backed by
// libsodium: Ed25519 signatures and X25519 sealed boxes. All randomness is
// drawn from a RandomSource so that seeded runs are reproducible byte for
// byte.

#ifndef RVAAS_CRYPTO_H_
#define RVAAS_CRYPTO_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "absl/types/span.h"

namespace rvaas {

inline constexpr size_t kNonceBytes = 16;

using Nonce = std::array<uint8_t, kNonceBytes>;
using Signature = std::array<uint8_t, 64>;

std::string HexNonce(const Nonce& nonce);

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void Fill(absl::Span<uint8_t> out) = 0;

  Nonce NewNonce();
};

// Deterministic stream keyed by (seed, stream name). Distinct names give
// independent streams from one seed.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(uint64_t seed, absl::string_view stream = "");
  void Fill(absl::Span<uint8_t> out) override;

 private:
  std::array<uint8_t, 32> key_;
  uint64_t counter_ = 0;
};

// Operating system entropy.
class SystemRandom final : public RandomSource {
 public:
  void Fill(absl::Span<uint8_t> out) override;
};

struct PublicKey {
  // Ed25519 verification key.
  std::array<uint8_t, 32> sign{};
  // X25519 key that sealed payloads are addressed to.
  std::array<uint8_t, 32> box{};

  // First 16 bytes of BLAKE2b over both keys, hex encoded.
  std::string Fingerprint() const;
  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

class KeyPair {
 public:
  static KeyPair Generate(RandomSource& rng);

  const PublicKey& public_key() const { return public_; }
  Signature Sign(absl::Span<const uint8_t> message) const;
  // Opens a payload produced by Seal for this key pair.
  absl::StatusOr<std::vector<uint8_t>> Open(absl::Span<const uint8_t> sealed) const;

 private:
  KeyPair() = default;

  PublicKey public_;
  std::array<uint8_t, 64> sign_secret_{};
  std::array<uint8_t, 32> box_secret_{};
};

bool VerifySignature(const PublicKey& key, absl::Span<const uint8_t> message,
                     const Signature& signature);

// Anonymous sealed box to `recipient`. The ephemeral key comes from `rng`; the
// output opens with libsodium's crypto_box_seal_open. Fails on a degenerate
// recipient key.
absl::StatusOr<std::vector<uint8_t>> Seal(const PublicKey& recipient,
                                          absl::Span<const uint8_t> plaintext, RandomSource& rng);

// Stub attestation: the controller proves nothing beyond naming its key.
struct Attestation {
  std::string fingerprint;
  int version = 1;

  std::string ToString() const;
};

}  // namespace rvaas

#endif  // RVAAS_CRYPTO_H_
