#include "dtm/data/dataset.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "dtm/error.hpp"
#include "dtm/util/rng.hpp"

namespace dtm {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

real parse_real(std::string_view s) {
  real v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    throw DataError("dtm '" + std::string(s) + "' is not a number");
  }
  return v;
}

// Kyte-Doolittle hydropathy, indexed like kAminoAcids.
constexpr std::array<double, 20> kHydropathy = {
    1.8,  2.5,  -3.5, -3.5, 2.8,  -0.4, -3.2, 4.5,  -3.9, 3.8,
    1.9,  -3.5, -1.6, -3.5, -4.5, -0.8, -0.7, 4.2,  -0.9, -1.3};

}  // namespace

void validate_record(const MutationRecord& r) {
  if (r.protein_id.empty()) throw DataError("empty protein_id");
  if (r.protein_id.find_first_of(",\t\n\r") != std::string::npos) {
    throw DataError("protein_id '" + r.protein_id + "' contains a delimiter");
  }
  if (r.wt_sequence.empty()) throw DataError("protein " + r.protein_id + ": empty sequence");
  for (std::size_t i = 0; i < r.wt_sequence.size(); ++i) {
    if (!is_canonical_aa(r.wt_sequence[i])) {
      throw DataError("protein " + r.protein_id + ": non-canonical residue '" +
                      std::string(1, r.wt_sequence[i]) + "' at position " + std::to_string(i + 1));
    }
  }
  if (r.mutation.wild == r.mutation.mutant || r.mutation.position < 1) {
    throw DataError("protein " + r.protein_id + ": invalid mutation " + format_mutation(r.mutation));
  }
  (void)apply_mutation(r.wt_sequence, r.mutation);
  if (!std::isfinite(r.dtm)) throw DataError("protein " + r.protein_id + ": non-finite dtm");
}

std::vector<MutationRecord> parse_dataset(std::istream& in, std::string_view source) {
  std::vector<MutationRecord> records;
  std::set<std::string> seen;
  std::map<std::string, std::string> sequences;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto where = [&] { return std::string(source) + ":" + std::to_string(line_no) + ": "; };
    if (!header_seen) {
      if (line != kDatasetHeader) {
        throw DataError(where() + "expected header '" + std::string(kDatasetHeader) + "', got '" +
                        line + "'");
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 4) {
      throw DataError(where() + "expected 4 fields, got " + std::to_string(fields.size()));
    }
    try {
      MutationRecord r;
      r.protein_id = std::string(fields[0]);
      r.wt_sequence = std::string(fields[1]);
      r.mutation = parse_mutation(fields[2]);
      r.dtm = parse_real(fields[3]);
      validate_record(r);
      auto [it, inserted] = sequences.emplace(r.protein_id, r.wt_sequence);
      if (!inserted && it->second != r.wt_sequence) {
        throw DataError("protein " + r.protein_id + " listed with two different sequences");
      }
      if (!seen.insert(r.key()).second) throw DataError("duplicate record " + r.key());
      records.push_back(std::move(r));
    } catch (const Error& e) {
      throw DataError(where() + e.what());
    }
  }
  if (!header_seen) throw DataError(std::string(source) + ": empty file, missing header");
  return records;
}

std::vector<MutationRecord> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path);
  return parse_dataset(in, path);
}

void write_dataset(std::ostream& out, std::span<const MutationRecord> records) {
  out << kDatasetHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, r.dtm);
    out << r.protein_id << ',' << r.wt_sequence << ',' << format_mutation(r.mutation) << ','
        << std::string_view(buf, static_cast<std::size_t>(end - buf)) << '\n';
  }
}

void save_dataset(const std::string& path, std::span<const MutationRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  write_dataset(out, records);
}

std::vector<MutationRecord> make_synthetic_dataset(const SyntheticDatasetOptions& opts) {
  if (opts.proteins < 1 || opts.mutations_per_protein < 1 || opts.min_length < 2 ||
      opts.max_length < opts.min_length || opts.homologs < 0) {
    throw ConfigError("synthetic dataset: invalid size options");
  }
  Rng rng(opts.seed);
  auto random_residue = [&] { return kAminoAcids[rng.below(kAminoAcids.size())]; };

  std::vector<std::pair<std::string, std::string>> proteins;
  for (int p = 0; p < opts.proteins; ++p) {
    const auto span = static_cast<std::uint64_t>(opts.max_length - opts.min_length + 1);
    const auto len = static_cast<std::size_t>(opts.min_length) + rng.below(span);
    std::string seq(len, 'A');
    for (auto& c : seq) c = random_residue();
    char id[32];
    std::snprintf(id, sizeof id, "P%04d", p);
    proteins.emplace_back(id, std::move(seq));
  }
  for (int h = 0; h < opts.homologs; ++h) {
    const auto& [parent_id, parent] = proteins[rng.below(static_cast<std::uint64_t>(opts.proteins))];
    std::string seq = parent;
    for (auto& c : seq) {
      if (rng.uniform() < opts.homolog_divergence) c = random_residue();
    }
    proteins.emplace_back(parent_id + "_h" + std::to_string(h), std::move(seq));
  }

  std::vector<MutationRecord> records;
  for (const auto& [id, seq] : proteins) {
    const double protein_offset = rng.normal();
    std::set<std::size_t> used;
    const int n = std::min<int>(opts.mutations_per_protein, static_cast<int>(seq.size()));
    while (static_cast<int>(used.size()) < n) {
      const std::size_t at = rng.below(seq.size());
      if (!used.insert(at).second) continue;
      char mutant;
      do {
        mutant = random_residue();
      } while (mutant == seq[at]);
      MutationRecord r;
      r.protein_id = id;
      r.wt_sequence = seq;
      r.mutation = {static_cast<int>(at) + 1, seq[at], mutant};
      const double dh = kHydropathy[static_cast<std::size_t>(aa_index(mutant))] -
                        kHydropathy[static_cast<std::size_t>(aa_index(seq[at]))];
      const double label = -1.5 + 0.6 * dh + protein_offset + 1.5 * rng.normal();
      // round to 0.01 C like curated databases
      r.dtm = std::round(label * 100.0) / 100.0;
      records.push_back(std::move(r));
    }
  }
  return records;
}

}  // namespace dtm
