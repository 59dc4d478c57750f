#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dtm/data/dataset.hpp"

namespace dtm {

struct Protein {
  std::string id;
  std::string sequence;
  std::size_t mutations = 0;  // records carrying this protein
};

// Unique proteins of a dataset, sorted by id, with per-protein record counts.
std::vector<Protein> proteins_of(std::span<const MutationRecord> records);

// Alignment-free identity proxy: Jaccard similarity of the k-mer sets.
// Sequences shorter than k contribute themselves as a single k-mer.
real estimate_identity(std::string_view a, std::string_view b, int k = 5);

struct Cluster {
  std::string representative;
  std::vector<std::string> members;  // representative first, then join order
};

// Greedy clustering: proteins visited by descending length (ties by id);
// each joins the first cluster whose representative is at least `threshold`
// identical, otherwise founds a new cluster.
std::vector<Cluster> greedy_cluster(std::span<const Protein> proteins, real threshold, int k = 5);

// Reads an external "representative<TAB>member" cluster table (the MMseqs2
// createtsv layout). Every listed protein must exist in `proteins`; proteins
// missing from the table become singletons.
std::vector<Cluster> import_cluster_tsv(std::istream& in, std::span<const Protein> proteins);

enum class Side { Train, Val };
std::string_view side_name(Side s);

struct SplitAssignment {
  std::map<std::string, Side> side;                  // protein_id -> side
  std::map<std::string, std::string> representative;  // protein_id -> cluster rep
  std::uint64_t seed = 0;
  real threshold = 0;
  bool degenerate = false;  // single cluster: everything trains

  std::size_t count(Side s) const;
};

struct SplitRatio {
  int train = 8;
  int val = 2;
};

// Shuffles clusters with the seed, then fills validation greedily by
// mutation count: a cluster goes to val if it still fits under the target
// val share, else to train. If val ends up empty the smallest cluster is
// moved there. Clusters never straddle the split.
SplitAssignment split_clusters(std::span<const Cluster> clusters,
                               const std::map<std::string, std::size_t>& mutation_counts,
                               SplitRatio ratio, std::uint64_t seed);

// Manifest text: header line, then "protein_id<TAB>train|val<TAB>representative"
// sorted by protein_id.
std::string format_manifest(const SplitAssignment& split);
SplitAssignment parse_manifest(std::string_view text);

}  // namespace dtm
