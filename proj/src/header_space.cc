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

#include "rvaas/header_space.h"

#include <algorithm>
#include <bit>
#include <cassert>
#include <utility>

#include "absl/container/flat_hash_set.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "absl/strings/strip.h"

namespace rvaas {
namespace {

uint64_t BitAt(int position, int width) { return uint64_t{1} << (width - 1 - position); }

absl::Status WidthMismatch(int a, int b) {
  return absl::InvalidArgumentError(
      absl::StrCat("header width mismatch: ", a, " vs ", b));
}

}  // namespace

absl::Status ValidateHeaderWidth(int width) {
  if (width < 1 || width > kMaxHeaderWidth) {
    return absl::InvalidArgumentError(
        absl::StrCat("header width must be in [1, ", kMaxHeaderWidth, "], got ", width));
  }
  return absl::OkStatus();
}

absl::StatusOr<Header> Header::Parse(absl::string_view text) {
  const int width = static_cast<int>(text.size());
  if (absl::Status s = ValidateHeaderWidth(width); !s.ok()) return s;
  uint64_t bits = 0;
  for (int i = 0; i < width; ++i) {
    switch (text[i]) {
      case '0':
        break;
      case '1':
        bits |= BitAt(i, width);
        break;
      default:
        return absl::InvalidArgumentError(
            absl::StrCat("invalid header bit '", std::string(1, text[i]), "' in \"", text, "\""));
    }
  }
  return Header(bits, width);
}

std::string Header::ToString() const {
  std::string out(width_, '0');
  for (int i = 0; i < width_; ++i) {
    if (bits_ & BitAt(i, width_)) out[i] = '1';
  }
  return out;
}

absl::StatusOr<TernaryString> TernaryString::Parse(absl::string_view text) {
  const int width = static_cast<int>(text.size());
  if (absl::Status s = ValidateHeaderWidth(width); !s.ok()) return s;
  uint64_t care = 0;
  uint64_t value = 0;
  for (int i = 0; i < width; ++i) {
    switch (text[i]) {
      case '0':
        care |= BitAt(i, width);
        break;
      case '1':
        care |= BitAt(i, width);
        value |= BitAt(i, width);
        break;
      case 'x':
      case 'X':
        break;
      default:
        return absl::InvalidArgumentError(absl::StrCat(
            "invalid ternary symbol '", std::string(1, text[i]), "' in \"", text, "\""));
    }
  }
  return TernaryString(care, value, width);
}

std::optional<TernaryString> TernaryString::Meet(const TernaryString& other) const {
  assert(width_ == other.width_);
  if (((value_ ^ other.value_) & care_ & other.care_) != 0) return std::nullopt;
  return TernaryString(care_ | other.care_, value_ | other.value_, width_);
}

std::vector<TernaryString> TernaryString::Minus(const TernaryString& other) const {
  assert(width_ == other.width_);
  if (!Meet(other).has_value()) return {*this};
  uint64_t free_bits = other.care_ & ~care_;
  std::vector<TernaryString> pieces;
  pieces.reserve(std::popcount(free_bits));
  uint64_t care = care_;
  uint64_t value = value_;
  // Walk from the most significant free bit; each piece differs from
  // `other` at exactly the first free bit not yet pinned to it.
  while (free_bits != 0) {
    const uint64_t bit = uint64_t{1} << (63 - std::countl_zero(free_bits));
    free_bits &= ~bit;
    pieces.push_back(TernaryString(care | bit, value | (~other.value_ & bit), width_));
    care |= bit;
    value |= other.value_ & bit;
  }
  return pieces;
}

uint64_t TernaryString::Cardinality() const {
  const int free = width_ - std::popcount(care_);
  return free >= 63 ? (uint64_t{1} << 63) : (uint64_t{1} << free);
}

std::string TernaryString::ToString() const {
  std::string out(width_, 'x');
  for (int i = 0; i < width_; ++i) {
    const uint64_t bit = BitAt(i, width_);
    if (care_ & bit) out[i] = (value_ & bit) ? '1' : '0';
  }
  return out;
}

absl::StatusOr<Rewrite> Rewrite::Parse(absl::string_view mask_text,
                                       absl::string_view value_text) {
  const int width = static_cast<int>(mask_text.size());
  if (absl::Status s = ValidateHeaderWidth(width); !s.ok()) return s;
  if (value_text.size() != mask_text.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("rewrite mask \"", mask_text, "\" and value \"", value_text,
                     "\" differ in width"));
  }
  uint64_t mask = 0;
  uint64_t value = 0;
  for (int i = 0; i < width; ++i) {
    const uint64_t bit = BitAt(i, width);
    const char m = mask_text[i];
    const char v = value_text[i];
    if (m == '1') {
      mask |= bit;
      if (v == '1') {
        value |= bit;
      } else if (v != '0') {
        return absl::InvalidArgumentError(
            absl::StrCat("rewrite value \"", value_text, "\" must be 0/1 at masked bit ", i));
      }
    } else if (m != '0') {
      return absl::InvalidArgumentError(
          absl::StrCat("rewrite mask \"", mask_text, "\" must be over {0,1}"));
    } else if (v != '0' && v != '1' && v != 'x' && v != '_') {
      return absl::InvalidArgumentError(
          absl::StrCat("invalid rewrite value symbol in \"", value_text, "\""));
    }
  }
  return Rewrite(mask, value, width);
}

std::optional<TernaryString> Rewrite::Preimage(const TernaryString& t) const {
  assert(width_ == t.width());
  if (((value_ ^ t.value()) & t.care() & mask_) != 0) return std::nullopt;
  return TernaryString::FromMasks(t.care() & ~mask_, t.value() & ~mask_, width_);
}

Rewrite Rewrite::Then(const Rewrite& next) const {
  assert(width_ == next.width_);
  return Rewrite(mask_ | next.mask_, (value_ & ~next.mask_) | next.value_, width_);
}

std::string Rewrite::ToString() const {
  std::string mask(width_, '0');
  std::string value(width_, '_');
  for (int i = 0; i < width_; ++i) {
    const uint64_t bit = BitAt(i, width_);
    if (mask_ & bit) {
      mask[i] = '1';
      value[i] = (value_ & bit) ? '1' : '0';
    }
  }
  return absl::StrCat(mask, "/", value);
}

HeaderSpace::HeaderSpace(int width, std::vector<TernaryString> terms)
    : width_(width), terms_(std::move(terms)) {
  for ([[maybe_unused]] const TernaryString& t : terms_) assert(t.width() == width_);
}

absl::StatusOr<HeaderSpace> HeaderSpace::Parse(absl::string_view text, int width) {
  text = absl::StripAsciiWhitespace(text);
  HeaderSpace space(width);
  if (text.empty() || text == "-") return space;
  for (absl::string_view piece : absl::StrSplit(text, ',')) {
    absl::StatusOr<TernaryString> term = TernaryString::Parse(absl::StripAsciiWhitespace(piece));
    if (!term.ok()) return term.status();
    if (term->width() != width) return WidthMismatch(term->width(), width);
    space.terms_.push_back(*term);
  }
  return space;
}

bool HeaderSpace::Contains(uint64_t bits) const {
  return std::any_of(terms_.begin(), terms_.end(),
                     [bits](const TernaryString& t) { return t.Matches(bits); });
}

HeaderSpace HeaderSpace::Union(const HeaderSpace& other) const {
  assert(width_ == other.width_);
  HeaderSpace out = *this;
  out.terms_.insert(out.terms_.end(), other.terms_.begin(), other.terms_.end());
  return out;
}

HeaderSpace HeaderSpace::Intersect(const TernaryString& term) const {
  HeaderSpace out(width_);
  for (const TernaryString& t : terms_) {
    if (std::optional<TernaryString> m = t.Meet(term)) out.terms_.push_back(*m);
  }
  return out;
}

HeaderSpace HeaderSpace::Intersect(const HeaderSpace& other) const {
  assert(width_ == other.width_);
  HeaderSpace out(width_);
  for (const TernaryString& a : terms_) {
    for (const TernaryString& b : other.terms_) {
      if (std::optional<TernaryString> m = a.Meet(b)) out.terms_.push_back(*m);
    }
  }
  return out;
}

HeaderSpace HeaderSpace::Subtract(const TernaryString& term) const {
  HeaderSpace out(width_);
  for (const TernaryString& t : terms_) {
    std::vector<TernaryString> pieces = t.Minus(term);
    out.terms_.insert(out.terms_.end(), pieces.begin(), pieces.end());
  }
  return out;
}

HeaderSpace HeaderSpace::Subtract(const HeaderSpace& other) const {
  assert(width_ == other.width_);
  HeaderSpace out(width_);
  for (const TernaryString& t : terms_) {
    HeaderSpace remaining = HeaderSpace::Of(t);
    for (const TernaryString& u : other.terms_) {
      remaining = remaining.Subtract(u);
      if (remaining.empty()) break;
    }
    remaining.Compact();
    out.terms_.insert(out.terms_.end(), remaining.terms_.begin(), remaining.terms_.end());
  }
  return out;
}

HeaderSpace HeaderSpace::Rewritten(const Rewrite& rewrite) const {
  assert(width_ == rewrite.width());
  if (rewrite.is_identity()) return *this;
  HeaderSpace out(width_);
  out.terms_.reserve(terms_.size());
  for (const TernaryString& t : terms_) out.terms_.push_back(rewrite.Apply(t));
  return out;
}

HeaderSpace HeaderSpace::PreimageWithin(const Rewrite& rewrite,
                                        const HeaderSpace& target) const {
  HeaderSpace pre(width_);
  for (const TernaryString& t : target.terms_) {
    if (std::optional<TernaryString> p = rewrite.Preimage(t)) pre.terms_.push_back(*p);
  }
  return Intersect(pre);
}

HeaderSpace& HeaderSpace::Compact() {
  if (terms_.size() < 2) return *this;
  // Wider terms first so that a covering term is kept before what it covers.
  std::stable_sort(terms_.begin(), terms_.end(),
                   [](const TernaryString& a, const TernaryString& b) {
                     return std::popcount(a.care()) < std::popcount(b.care());
                   });
  std::vector<TernaryString> kept;
  kept.reserve(terms_.size());
  for (const TernaryString& t : terms_) {
    const bool covered = std::any_of(kept.begin(), kept.end(),
                                     [&t](const TernaryString& k) { return k.Covers(t); });
    if (!covered) kept.push_back(t);
  }
  terms_ = std::move(kept);
  return *this;
}

std::string HeaderSpace::ToString() const {
  if (terms_.empty()) return "-";
  HeaderSpace compact = *this;
  compact.Compact();
  std::vector<std::string> parts;
  parts.reserve(compact.terms_.size());
  for (const TernaryString& t : compact.terms_) parts.push_back(t.ToString());
  std::sort(parts.begin(), parts.end());
  return absl::StrJoin(parts, ",");
}

absl::StatusOr<bool> HsMember(const Header& h, const HeaderSpace& s) {
  if (h.width() != s.width()) return WidthMismatch(h.width(), s.width());
  return s.Contains(h);
}

absl::StatusOr<HeaderSpace> HsUnion(const HeaderSpace& a, const HeaderSpace& b) {
  if (a.width() != b.width()) return WidthMismatch(a.width(), b.width());
  return a.Union(b);
}

absl::StatusOr<HeaderSpace> HsIntersect(const HeaderSpace& a, const HeaderSpace& b) {
  if (a.width() != b.width()) return WidthMismatch(a.width(), b.width());
  return a.Intersect(b);
}

absl::StatusOr<HeaderSpace> HsDifference(const HeaderSpace& a, const HeaderSpace& b) {
  if (a.width() != b.width()) return WidthMismatch(a.width(), b.width());
  return a.Subtract(b);
}

absl::StatusOr<HeaderSpace> HsApplyRewrite(const HeaderSpace& s, const Rewrite& r) {
  if (s.width() != r.width()) return WidthMismatch(s.width(), r.width());
  return s.Rewritten(r);
}

}  // namespace rvaas
