#pragma once

#include <algorithm>
#include <charconv>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lss {

// Thrown for malformed user input (schemas, set strings, configs).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Minus routes through "x <= threshold", Plus through "x >= threshold".
enum class Sign : std::int8_t { Minus = -1, Plus = 1 };

constexpr Sign flip(Sign s) noexcept { return s == Sign::Minus ? Sign::Plus : Sign::Minus; }

constexpr char sign_char(Sign s) noexcept { return s == Sign::Minus ? '-' : '+'; }

// A (feature, direction) pair. Feature indices are 1-based.
struct SignedFeature {
  std::size_t index{1};
  Sign sign{Sign::Minus};

  friend constexpr auto operator<=>(const SignedFeature&, const SignedFeature&) = default;
};

inline SignedFeature minus(std::size_t index) { return {index, Sign::Minus}; }
inline SignedFeature plus(std::size_t index) { return {index, Sign::Plus}; }

// Sorted, duplicate-free collection of signed features. Both signs of one
// feature may coexist (such a set can never occur on a decision path).
class SignedSet {
 public:
  using value_type = SignedFeature;
  using const_iterator = std::vector<SignedFeature>::const_iterator;

  SignedSet() = default;
  SignedSet(std::initializer_list<SignedFeature> items) : SignedSet(std::vector<SignedFeature>(items)) {}
  explicit SignedSet(std::vector<SignedFeature> items) : members_(std::move(items)) {
    for (const auto& f : members_) {
      if (f.index < 1) throw ValidationError("signed feature index must be >= 1");
    }
    std::sort(members_.begin(), members_.end());
    members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  }

  [[nodiscard]] std::size_t size() const noexcept { return members_.size(); }
  [[nodiscard]] bool empty() const noexcept { return members_.empty(); }
  [[nodiscard]] const_iterator begin() const noexcept { return members_.begin(); }
  [[nodiscard]] const_iterator end() const noexcept { return members_.end(); }
  [[nodiscard]] const SignedFeature& operator[](std::size_t i) const { return members_[i]; }
  [[nodiscard]] const std::vector<SignedFeature>& members() const noexcept { return members_; }

  [[nodiscard]] bool contains(const SignedFeature& f) const {
    return std::binary_search(members_.begin(), members_.end(), f);
  }

  // True when every member of `sub` is in this set.
  [[nodiscard]] bool includes(const SignedSet& sub) const {
    return std::includes(members_.begin(), members_.end(), sub.members_.begin(), sub.members_.end());
  }

  // At most one sign per feature.
  [[nodiscard]] bool sign_consistent() const {
    for (std::size_t i = 1; i < members_.size(); ++i) {
      if (members_[i].index == members_[i - 1].index) return false;
    }
    return true;
  }

  [[nodiscard]] std::size_t max_index() const noexcept { return members_.empty() ? 0 : members_.back().index; }

  [[nodiscard]] SignedSet united(const SignedSet& other) const {
    std::vector<SignedFeature> out;
    std::set_union(members_.begin(), members_.end(), other.members_.begin(), other.members_.end(),
                   std::back_inserter(out));
    return SignedSet(std::move(out));
  }

  friend bool operator==(const SignedSet&, const SignedSet&) = default;
  friend auto operator<=>(const SignedSet& a, const SignedSet& b) {
    return std::lexicographical_compare_three_way(a.members_.begin(), a.members_.end(), b.members_.begin(),
                                                  b.members_.end());
  }

 private:
  std::vector<SignedFeature> members_;
};

inline SignedSet canonical_signed_set(std::vector<SignedFeature> items) { return SignedSet(std::move(items)); }

// "1-,2-,7+"; the empty set formats as "".
inline std::string to_string(const SignedSet& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i].index);
    out += sign_char(s[i].sign);
  }
  return out;
}

// Grammar: set := item ("," item)*; item := integer ("+"|"-"). Whitespace
// around items is tolerated; an empty or all-blank string is the empty set.
inline SignedSet parse_signed_set(std::string_view text) {
  auto trim = [](std::string_view v) {
    while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
    while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
    return v;
  };
  text = trim(text);
  std::vector<SignedFeature> items;
  if (text.empty()) return {};
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const auto item = trim(text.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos));
    if (item.size() < 2) throw ValidationError("malformed signed-set item '" + std::string(item) + "'");
    const char sc = item.back();
    if (sc != '+' && sc != '-') {
      throw ValidationError("signed-set item '" + std::string(item) + "' must end in '+' or '-'");
    }
    const auto digits = item.substr(0, item.size() - 1);
    std::size_t index = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), index);
    if (ec != std::errc{} || end != digits.data() + digits.size() || index < 1) {
      throw ValidationError("signed-set item '" + std::string(item) + "' needs a 1-based integer index");
    }
    items.push_back({index, sc == '+' ? Sign::Plus : Sign::Minus});
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return SignedSet(std::move(items));
}

}  // namespace lss
