#pragma once

#include <string>
#include <string_view>

namespace dtm {

inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";

constexpr bool is_canonical_aa(char c) noexcept {
  return kAminoAcids.find(c) != std::string_view::npos;
}

constexpr int aa_index(char c) noexcept {
  const auto at = kAminoAcids.find(c);
  return at == std::string_view::npos ? -1 : static_cast<int>(at);
}

// Single-point substitution. `position` is 1-based, as written in mutation
// codes; use index() for the 0-based sequence offset.
struct Mutation {
  int position = 0;
  char wild = 'A';
  char mutant = 'A';

  std::size_t index() const { return static_cast<std::size_t>(position - 1); }
  friend bool operator==(const Mutation&, const Mutation&) = default;
};

// "I4A" -> {4, 'I', 'A'}. Throws ParseError naming the code.
Mutation parse_mutation(std::string_view code);
std::string format_mutation(const Mutation& mu);

// Throws DataError on out-of-range position or wild-type mismatch.
std::string apply_mutation(std::string_view sequence, const Mutation& mu);

}  // namespace dtm
