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

#include "rvaas/crypto.h"

#include <sodium.h>

#include <cstdlib>

#include "absl/status/status.h"
#include "absl/strings/escaping.h"
#include "absl/strings/str_cat.h"

namespace rvaas {
namespace {

void EnsureSodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) std::abort();
    return true;
  }();
  (void)ready;
}

std::string Hex(const uint8_t* data, size_t n) {
  return absl::BytesToHexString(absl::string_view(reinterpret_cast<const char*>(data), n));
}

}  // namespace

std::string HexNonce(const Nonce& nonce) { return Hex(nonce.data(), nonce.size()); }

Nonce RandomSource::NewNonce() {
  Nonce n;
  Fill(absl::MakeSpan(n));
  return n;
}

SeededRandom::SeededRandom(uint64_t seed, absl::string_view stream) {
  EnsureSodium();
  uint8_t seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<uint8_t>(seed >> (8 * i));
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, key_.size());
  crypto_generichash_update(&st, seed_bytes, sizeof(seed_bytes));
  crypto_generichash_update(&st, reinterpret_cast<const uint8_t*>(stream.data()), stream.size());
  crypto_generichash_final(&st, key_.data(), key_.size());
}

void SeededRandom::Fill(absl::Span<uint8_t> out) {
  static_assert(randombytes_SEEDBYTES == 32);
  uint8_t block_seed[randombytes_SEEDBYTES];
  uint8_t counter[8];
  for (int i = 0; i < 8; ++i) counter[i] = static_cast<uint8_t>(counter_ >> (8 * i));
  ++counter_;
  crypto_generichash(block_seed, sizeof(block_seed), counter, sizeof(counter), key_.data(),
                     key_.size());
  randombytes_buf_deterministic(out.data(), out.size(), block_seed);
}

void SystemRandom::Fill(absl::Span<uint8_t> out) {
  EnsureSodium();
  randombytes_buf(out.data(), out.size());
}

std::string PublicKey::Fingerprint() const {
  EnsureSodium();
  uint8_t digest[16];
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, sizeof(digest));
  crypto_generichash_update(&st, sign.data(), sign.size());
  crypto_generichash_update(&st, box.data(), box.size());
  crypto_generichash_final(&st, digest, sizeof(digest));
  return Hex(digest, sizeof(digest));
}

KeyPair KeyPair::Generate(RandomSource& rng) {
  EnsureSodium();
  KeyPair kp;
  uint8_t seed[32];
  rng.Fill(absl::MakeSpan(seed));
  crypto_sign_seed_keypair(kp.public_.sign.data(), kp.sign_secret_.data(), seed);
  rng.Fill(absl::MakeSpan(seed));
  crypto_box_seed_keypair(kp.public_.box.data(), kp.box_secret_.data(), seed);
  sodium_memzero(seed, sizeof(seed));
  return kp;
}

Signature KeyPair::Sign(absl::Span<const uint8_t> message) const {
  Signature sig;
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), sign_secret_.data());
  return sig;
}

absl::StatusOr<std::vector<uint8_t>> KeyPair::Open(absl::Span<const uint8_t> sealed) const {
  if (sealed.size() < crypto_box_SEALBYTES) {
    return absl::InvalidArgumentError("sealed payload too short");
  }
  std::vector<uint8_t> plain(sealed.size() - crypto_box_SEALBYTES);
  if (crypto_box_seal_open(plain.data(), sealed.data(), sealed.size(), public_.box.data(),
                           box_secret_.data()) != 0) {
    return absl::PermissionDeniedError("sealed payload does not open");
  }
  return plain;
}

bool VerifySignature(const PublicKey& key, absl::Span<const uint8_t> message,
                     const Signature& signature) {
  EnsureSodium();
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     key.sign.data()) == 0;
}

absl::StatusOr<std::vector<uint8_t>> Seal(const PublicKey& recipient,
                                          absl::Span<const uint8_t> plaintext, RandomSource& rng) {
  EnsureSodium();
  uint8_t seed[crypto_box_SEEDBYTES];
  rng.Fill(absl::MakeSpan(seed));
  uint8_t eph_pk[crypto_box_PUBLICKEYBYTES];
  uint8_t eph_sk[crypto_box_SECRETKEYBYTES];
  crypto_box_seed_keypair(eph_pk, eph_sk, seed);

  // Same nonce derivation as crypto_box_seal: BLAKE2b(eph_pk || recipient_pk).
  uint8_t nonce[crypto_box_NONCEBYTES];
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, sizeof(nonce));
  crypto_generichash_update(&st, eph_pk, sizeof(eph_pk));
  crypto_generichash_update(&st, recipient.box.data(), recipient.box.size());
  crypto_generichash_final(&st, nonce, sizeof(nonce));

  std::vector<uint8_t> out(crypto_box_PUBLICKEYBYTES + crypto_box_MACBYTES + plaintext.size());
  std::copy(eph_pk, eph_pk + sizeof(eph_pk), out.begin());
  const int rc = crypto_box_easy(out.data() + crypto_box_PUBLICKEYBYTES, plaintext.data(),
                                 plaintext.size(), nonce, recipient.box.data(), eph_sk);
  sodium_memzero(eph_sk, sizeof(eph_sk));
  sodium_memzero(seed, sizeof(seed));
  if (rc != 0) return absl::InvalidArgumentError("cannot seal to this public key");
  return out;
}

std::string Attestation::ToString() const {
  return absl::StrCat("attestation version=", version, " key=", fingerprint);
}

}  // namespace rvaas
