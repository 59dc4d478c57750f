#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtm/core/dense.hpp"
#include "dtm/data/mutation.hpp"

namespace dtm {

struct MutationRecord {
  std::string protein_id;
  std::string wt_sequence;
  Mutation mutation;
  real dtm = 0;  // degrees Celsius

  std::string mutant_sequence() const { return apply_mutation(wt_sequence, mutation); }
  // "<protein_id>:<code>", unique within a dataset
  std::string key() const { return protein_id + ":" + format_mutation(mutation); }
};

inline constexpr std::string_view kDatasetHeader = "protein_id,wt_sequence,mutation,dtm";

// Reads the comma-delimited dataset format. Errors carry the 1-based line
// number. Rejects duplicate (protein_id, mutation) pairs and proteins whose
// sequence differs between rows.
std::vector<MutationRecord> parse_dataset(std::istream& in, std::string_view source = "<stream>");
std::vector<MutationRecord> load_dataset(const std::string& path);

void write_dataset(std::ostream& out, std::span<const MutationRecord> records);
void save_dataset(const std::string& path, std::span<const MutationRecord> records);

// Throws DataError describing the first violated record invariant.
void validate_record(const MutationRecord& r);

struct SyntheticDatasetOptions {
  int proteins = 20;
  int mutations_per_protein = 5;
  int min_length = 60;
  int max_length = 160;
  // extra proteins derived from earlier ones by a few substitutions
  int homologs = 0;
  double homolog_divergence = 0.03;
  std::uint64_t seed = 0;
};

// Random proteins with hydrophobicity-driven labels plus noise; desk-scale
// stand-in for curated stability data.
std::vector<MutationRecord> make_synthetic_dataset(const SyntheticDatasetOptions& opts);

}  // namespace dtm
