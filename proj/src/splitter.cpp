#include "dtm/split/splitter.hpp"

#include <algorithm>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dtm/error.hpp"
#include "dtm/util/rng.hpp"

namespace dtm {

std::vector<Protein> proteins_of(std::span<const MutationRecord> records) {
  std::map<std::string, Protein> by_id;
  for (const auto& r : records) {
    auto& p = by_id[r.protein_id];
    p.id = r.protein_id;
    p.sequence = r.wt_sequence;
    ++p.mutations;
  }
  std::vector<Protein> out;
  for (auto& [id, p] : by_id) out.push_back(std::move(p));
  return out;
}

namespace {

std::unordered_set<std::string_view> kmers(std::string_view s, int k) {
  std::unordered_set<std::string_view> out;
  const auto kk = static_cast<std::size_t>(k);
  if (s.size() < kk) {
    out.insert(s);
    return out;
  }
  for (std::size_t i = 0; i + kk <= s.size(); ++i) out.insert(s.substr(i, kk));
  return out;
}

}  // namespace

real estimate_identity(std::string_view a, std::string_view b, int k) {
  if (a.empty() || b.empty()) throw DataError("estimate_identity: empty sequence");
  if (k < 1) throw ConfigError("estimate_identity: k must be >= 1");
  if (a == b) return 1.0;
  const auto ka = kmers(a, k);
  const auto kb = kmers(b, k);
  const auto& small = ka.size() <= kb.size() ? ka : kb;
  const auto& large = ka.size() <= kb.size() ? kb : ka;
  std::size_t shared = 0;
  for (auto km : small) shared += large.count(km);
  const std::size_t uni = ka.size() + kb.size() - shared;
  return static_cast<real>(shared) / static_cast<real>(uni);
}

std::vector<Cluster> greedy_cluster(std::span<const Protein> proteins, real threshold, int k) {
  if (!(threshold > 0 && threshold <= 1)) throw ConfigError("cluster threshold must be in (0, 1]");
  std::vector<const Protein*> order;
  std::set<std::string> ids;
  for (const auto& p : proteins) {
    if (p.sequence.empty()) throw DataError("protein " + p.id + " has an empty sequence");
    if (!ids.insert(p.id).second) throw DataError("duplicate protein id " + p.id);
    order.push_back(&p);
  }
  std::sort(order.begin(), order.end(), [](const Protein* x, const Protein* y) {
    if (x->sequence.size() != y->sequence.size()) return x->sequence.size() > y->sequence.size();
    return x->id < y->id;
  });

  std::vector<Cluster> clusters;
  std::vector<const Protein*> reps;
  for (const Protein* p : order) {
    bool placed = false;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      if (estimate_identity(reps[c]->sequence, p->sequence, k) >= threshold) {
        clusters[c].members.push_back(p->id);
        placed = true;
        break;
      }
    }
    if (!placed) {
      clusters.push_back({p->id, {p->id}});
      reps.push_back(p);
    }
  }
  return clusters;
}

std::vector<Cluster> import_cluster_tsv(std::istream& in, std::span<const Protein> proteins) {
  std::set<std::string> known;
  for (const auto& p : proteins) known.insert(p.id);
  std::map<std::string, Cluster> by_rep;
  std::map<std::string, std::string> member_of;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("cluster table line " + std::to_string(line_no) + ": expected two columns");
    }
    const std::string rep = line.substr(0, tab);
    const std::string member = line.substr(tab + 1);
    for (const auto* id : {&rep, &member}) {
      if (!known.count(*id)) {
        throw DataError("cluster table line " + std::to_string(line_no) + ": unknown protein " + *id);
      }
    }
    auto [it, fresh] = member_of.emplace(member, rep);
    if (!fresh && it->second != rep) {
      throw DataError("cluster table line " + std::to_string(line_no) + ": " + member +
                      " assigned to two clusters");
    }
    if (!fresh) continue;
    auto& c = by_rep[rep];
    if (c.members.empty()) {
      c.representative = rep;
      c.members.push_back(rep);
    }
    if (member != rep) c.members.push_back(member);
  }
  for (const auto& [rep, c] : by_rep) {
    if (member_of.count(rep) && member_of.at(rep) != rep) {
      throw DataError("cluster table: representative " + rep + " is a member of another cluster");
    }
  }
  std::vector<Cluster> out;
  std::set<std::string> covered;
  for (auto& [rep, c] : by_rep) {
    for (const auto& m : c.members) covered.insert(m);
    out.push_back(std::move(c));
  }
  for (const auto& p : proteins) {
    if (!covered.count(p.id)) out.push_back({p.id, {p.id}});
  }
  return out;
}

std::string_view side_name(Side s) { return s == Side::Train ? "train" : "val"; }

std::size_t SplitAssignment::count(Side s) const {
  return static_cast<std::size_t>(
      std::count_if(side.begin(), side.end(), [s](const auto& kv) { return kv.second == s; }));
}

SplitAssignment split_clusters(std::span<const Cluster> clusters,
                               const std::map<std::string, std::size_t>& mutation_counts,
                               SplitRatio ratio, std::uint64_t seed) {
  if (ratio.train < 0 || ratio.val < 0 || ratio.train + ratio.val == 0 || ratio.train == 0) {
    throw ConfigError("split ratio must have a positive train share");
  }
  if (clusters.empty()) throw DataError("nothing to split: no clusters");

  // Normalize order before shuffling so input order does not matter.
  std::vector<const Cluster*> order;
  for (const auto& c : clusters) order.push_back(&c);
  std::sort(order.begin(), order.end(),
            [](const Cluster* a, const Cluster* b) { return a->representative < b->representative; });

  auto weight = [&](const Cluster& c) {
    std::size_t w = 0;
    for (const auto& m : c.members) {
      auto it = mutation_counts.find(m);
      w += it == mutation_counts.end() ? 0 : it->second;
    }
    return w;
  };

  SplitAssignment out;
  out.seed = seed;
  auto assign = [&](const Cluster& c, Side s) {
    for (const auto& m : c.members) {
      out.side[m] = s;
      out.representative[m] = c.representative;
    }
  };

  if (order.size() == 1 || ratio.val == 0) {
    out.degenerate = order.size() == 1;
    for (const Cluster* c : order) assign(*c, Side::Train);
    return out;
  }

  Rng rng(seed);
  rng.shuffle(std::span<const Cluster*>(order));

  std::size_t total = 0;
  for (const Cluster* c : order) total += weight(*c);
  // val target = total * val / (train + val), compared without rounding
  const std::size_t parts = static_cast<std::size_t>(ratio.train + ratio.val);
  const std::size_t val_parts = static_cast<std::size_t>(ratio.val);
  std::size_t val_weight = 0;
  bool any_val = false;
  for (const Cluster* c : order) {
    const std::size_t w = weight(*c);
    if ((val_weight + w) * parts <= total * val_parts) {
      val_weight += w;
      assign(*c, Side::Val);
      any_val = true;
    } else {
      assign(*c, Side::Train);
    }
  }
  if (!any_val) {
    const Cluster* smallest = *std::min_element(order.begin(), order.end(), [&](auto* a, auto* b) {
      const auto wa = weight(*a), wb = weight(*b);
      return wa != wb ? wa < wb : a->representative < b->representative;
    });
    assign(*smallest, Side::Val);
  }
  return out;
}

std::string format_manifest(const SplitAssignment& split) {
  std::ostringstream out;
  out << "protein_id\tassignment\tcluster_representative\n";
  for (const auto& [id, side] : split.side) {
    out << id << '\t' << side_name(side) << '\t' << split.representative.at(id) << '\n';
  }
  return out.str();
}

SplitAssignment parse_manifest(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  SplitAssignment out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header) {
      if (line != "protein_id\tassignment\tcluster_representative") {
        throw DataError("split manifest line 1: unexpected header '" + line + "'");
      }
      header = true;
      continue;
    }
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id, side, rep;
    if (!std::getline(fields, id, '\t') || !std::getline(fields, side, '\t') ||
        !std::getline(fields, rep)) {
      throw DataError("split manifest line " + std::to_string(line_no) + ": expected 3 columns");
    }
    Side s;
    if (side == "train") {
      s = Side::Train;
    } else if (side == "val") {
      s = Side::Val;
    } else {
      throw DataError("split manifest line " + std::to_string(line_no) + ": bad assignment '" +
                      side + "'");
    }
    if (!out.side.emplace(id, s).second) {
      throw DataError("split manifest line " + std::to_string(line_no) + ": duplicate " + id);
    }
    out.representative[id] = rep;
  }
  if (!header) throw DataError("split manifest is empty");
  return out;
}

}  // namespace dtm
