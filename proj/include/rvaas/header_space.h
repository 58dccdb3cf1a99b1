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

// Ternary wildcard set algebra over fixed-width packet headers.
//
// A header is a flat bit vector of width L (1 <= L <= 64). Text forms are
// written most significant bit first, so the string "10x" has bit position 0
// (the leftmost character) stored in bit L-1 of the underlying word. Field
// ranges elsewhere in the project use the same left-to-right positions.

#ifndef RVAAS_HEADER_SPACE_H_
#define RVAAS_HEADER_SPACE_H_

#include <cstdint>
#include <optional>
#include <string>
#include "absl/strings/string_view.h"
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace rvaas {

inline constexpr int kMaxHeaderWidth = 64;

// Returns the low `width` bits set.
constexpr uint64_t WidthMask(int width) {
  return width >= 64 ? ~uint64_t{0} : (uint64_t{1} << width) - 1;
}

absl::Status ValidateHeaderWidth(int width);

// A concrete L-bit header.
class Header {
 public:
  Header(uint64_t bits, int width) : bits_(bits & WidthMask(width)), width_(width) {}

  // Parses a string over {0,1}.
  static absl::StatusOr<Header> Parse(absl::string_view text);

  uint64_t bits() const { return bits_; }
  int width() const { return width_; }
  std::string ToString() const;

  friend bool operator==(const Header&, const Header&) = default;

 private:
  uint64_t bits_;
  int width_;
};

// One ternary term over {0,1,x}. Never denotes the empty set.
class TernaryString {
 public:
  // All-wildcard term of the given width.
  static TernaryString Wildcard(int width) { return TernaryString(0, 0, width); }
  static TernaryString Exact(const Header& h) {
    return TernaryString(WidthMask(h.width()), h.bits(), h.width());
  }
  // `care` marks fixed positions; `value` bits outside `care` are ignored.
  static TernaryString FromMasks(uint64_t care, uint64_t value, int width) {
    return TernaryString(care, value, width);
  }
  static absl::StatusOr<TernaryString> Parse(absl::string_view text);

  uint64_t care() const { return care_; }
  uint64_t value() const { return value_; }
  int width() const { return width_; }

  bool Matches(uint64_t bits) const { return ((bits ^ value_) & care_) == 0; }
  bool Matches(const Header& h) const { return Matches(h.bits()); }
  // True iff every header of `other` is matched by this term.
  bool Covers(const TernaryString& other) const {
    return (care_ & ~other.care_) == 0 && ((value_ ^ other.value_) & care_) == 0;
  }
  // Bitwise meet; nullopt when some position is 0 on one side and 1 on the
  // other.
  std::optional<TernaryString> Meet(const TernaryString& other) const;
  // Disjoint pieces of `this` minus `other`; at most L pieces.
  std::vector<TernaryString> Minus(const TernaryString& other) const;
  // Number of concrete headers denoted, saturating at 2^63.
  uint64_t Cardinality() const;

  std::string ToString() const;

  friend bool operator==(const TernaryString&, const TernaryString&) = default;
  friend auto operator<=>(const TernaryString& a, const TernaryString& b) {
    return a.ToString() <=> b.ToString();
  }
  template <typename H>
  friend H AbslHashValue(H h, const TernaryString& t) {
    return H::combine(std::move(h), t.care_, t.value_, t.width_);
  }

 private:
  TernaryString(uint64_t care, uint64_t value, int width)
      : care_(care & WidthMask(width)), value_(value & care_), width_(width) {}

  uint64_t care_;
  uint64_t value_;
  int width_;
};

// Overwrites the masked bit positions with the corresponding value bits.
class Rewrite {
 public:
  static Rewrite Identity(int width) { return Rewrite(0, 0, width); }
  static Rewrite FromMasks(uint64_t mask, uint64_t value, int width) {
    return Rewrite(mask, value, width);
  }
  // `mask_text` is over {0,1}; `value_text` has 0/1 at masked positions and
  // any of 0/1/x/_ elsewhere (ignored).
  static absl::StatusOr<Rewrite> Parse(absl::string_view mask_text,
                                       absl::string_view value_text);

  uint64_t mask() const { return mask_; }
  uint64_t value() const { return value_; }
  int width() const { return width_; }
  bool is_identity() const { return mask_ == 0; }

  uint64_t Apply(uint64_t bits) const { return (bits & ~mask_) | value_; }
  Header Apply(const Header& h) const { return Header(Apply(h.bits()), width_); }
  TernaryString Apply(const TernaryString& t) const {
    return TernaryString::FromMasks(t.care() | mask_, (t.value() & ~mask_) | value_,
                                    width_);
  }
  // Headers h with Apply(h) matched by `t`; nullopt if there are none.
  std::optional<TernaryString> Preimage(const TernaryString& t) const;
  // `this` followed by `next`.
  Rewrite Then(const Rewrite& next) const;

  // "<mask>/<value>" with unmasked value positions printed as '_'.
  std::string ToString() const;

  friend bool operator==(const Rewrite&, const Rewrite&) = default;
  template <typename H>
  friend H AbslHashValue(H h, const Rewrite& r) {
    return H::combine(std::move(h), r.mask_, r.value_, r.width_);
  }

 private:
  Rewrite(uint64_t mask, uint64_t value, int width)
      : mask_(mask & WidthMask(width)), value_(value & mask_), width_(width) {}

  uint64_t mask_;
  uint64_t value_;
  int width_;
};

// A set of headers represented as the union of its terms. No canonical form
// is maintained; two spaces are equal when they denote the same set, which
// callers check through membership.
class HeaderSpace {
 public:
  explicit HeaderSpace(int width) : width_(width) {}
  HeaderSpace(int width, std::vector<TernaryString> terms);

  static HeaderSpace Empty(int width) { return HeaderSpace(width); }
  static HeaderSpace Full(int width) {
    return HeaderSpace(width, {TernaryString::Wildcard(width)});
  }
  static HeaderSpace Of(const TernaryString& term) {
    return HeaderSpace(term.width(), {term});
  }
  // Comma separated terms; "" or "-" is the empty space.
  static absl::StatusOr<HeaderSpace> Parse(absl::string_view text, int width);

  int width() const { return width_; }
  bool empty() const { return terms_.empty(); }
  const std::vector<TernaryString>& terms() const { return terms_; }

  bool Contains(uint64_t bits) const;
  bool Contains(const Header& h) const { return Contains(h.bits()); }

  // The operations below require equal widths; the checked free functions
  // further down validate that first.
  HeaderSpace Union(const HeaderSpace& other) const;
  HeaderSpace Intersect(const HeaderSpace& other) const;
  HeaderSpace Intersect(const TernaryString& term) const;
  HeaderSpace Subtract(const HeaderSpace& other) const;
  HeaderSpace Subtract(const TernaryString& term) const;
  HeaderSpace Rewritten(const Rewrite& rewrite) const;
  // Origins whose image under `rewrite` lies in `target`, intersected with
  // this space.
  HeaderSpace PreimageWithin(const Rewrite& rewrite, const HeaderSpace& target) const;

  // Drops duplicate terms and terms covered by another term. Never changes
  // the denoted set.
  HeaderSpace& Compact();

  // Sorted, compacted, comma separated; "-" when empty.
  std::string ToString() const;

 private:
  int width_;
  std::vector<TernaryString> terms_;
};

absl::StatusOr<bool> HsMember(const Header& h, const HeaderSpace& s);
absl::StatusOr<HeaderSpace> HsUnion(const HeaderSpace& a, const HeaderSpace& b);
absl::StatusOr<HeaderSpace> HsIntersect(const HeaderSpace& a, const HeaderSpace& b);
absl::StatusOr<HeaderSpace> HsDifference(const HeaderSpace& a, const HeaderSpace& b);
absl::StatusOr<HeaderSpace> HsApplyRewrite(const HeaderSpace& s, const Rewrite& r);

}  // namespace rvaas

#endif  // RVAAS_HEADER_SPACE_H_
