#include "dtm/data/mutation.hpp"

#include <charconv>

#include "dtm/error.hpp"

namespace dtm {

Mutation parse_mutation(std::string_view code) {
  auto fail = [&](const std::string& why) -> ParseError {
    return ParseError("bad mutation code '" + std::string(code) + "': " + why);
  };
  if (code.size() < 3) throw fail("expected <wild><position><mutant>");
  const char wild = code.front();
  const char mutant = code.back();
  const std::string_view digits = code.substr(1, code.size() - 2);
  if (!is_canonical_aa(wild)) throw fail("non-canonical wild-type residue");
  if (!is_canonical_aa(mutant)) throw fail("non-canonical mutant residue");
  for (char c : digits) {
    if (c < '0' || c > '9') throw fail("position is not a number");
  }
  int position = 0;
  auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), position);
  if (ec != std::errc() || end != digits.data() + digits.size()) throw fail("position out of range");
  if (position < 1) throw fail("positions are 1-based");
  if (wild == mutant) throw fail("wild-type and mutant residues are identical");
  return {position, wild, mutant};
}

std::string format_mutation(const Mutation& mu) {
  return std::string(1, mu.wild) + std::to_string(mu.position) + std::string(1, mu.mutant);
}

std::string apply_mutation(std::string_view sequence, const Mutation& mu) {
  if (mu.position < 1 || static_cast<std::size_t>(mu.position) > sequence.size()) {
    throw DataError("mutation " + format_mutation(mu) + " out of range for sequence of length " +
                    std::to_string(sequence.size()));
  }
  const char found = sequence[mu.index()];
  if (found != mu.wild) {
    throw DataError("mutation " + format_mutation(mu) + ": expected '" + std::string(1, mu.wild) +
                    "' at position " + std::to_string(mu.position) + ", found '" +
                    std::string(1, found) + "'");
  }
  std::string out(sequence);
  out[mu.index()] = mu.mutant;
  return out;
}

}  // namespace dtm
