#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ddi/errors.hpp"
#include "ddi/rng.hpp"

namespace ddi {

struct AtomRecord {
  int atom_number = 0;     // element Z, >= 1
  int hydrogen_count = 0;  // >= 0
  int charge = 0;          // elementary charge units
};

// Undirected bond; endpoints stored with i < j.
struct BondRecord {
  int i = 0;
  int j = 0;
  int bond_type = 0;
};

struct DrugGraph {
  std::string drug_id;
  std::vector<AtomRecord> atoms;
  std::vector<BondRecord> bonds;
  // Derived, symmetric: j in adjacency[i]  <=>  i in adjacency[j].
  std::vector<std::vector<int>> adjacency;
  // Each undirected bond expanded into two directed entries (src -> dst).
  std::vector<std::size_t> edge_src, edge_dst, edge_type;

  std::size_t atom_count() const { return atoms.size(); }
  // Populates adjacency and the directed edge arrays from `bonds`.
  void build_adjacency();
};

struct DrugTable {
  std::vector<DrugGraph> drugs;
  std::unordered_map<std::string, std::size_t> by_id;

  const DrugGraph& get(const std::string& id) const;
  const DrugGraph* find(const std::string& id) const;
  std::size_t size() const { return drugs.size(); }
};

struct InteractionRecord {
  std::string drug1;
  std::string drug2;
  int side_effect_id = 0;
  bool positive = true;
};

// Ordered (concept identifier, name) pairs; index order is load order and is
// persisted with checkpoints.
class SideEffectVocab {
 public:
  int add_or_get(const std::string& concept_id, const std::string& name);
  int lookup(const std::string& concept_id) const;  // -1 when absent
  const std::pair<std::string, std::string>& entry(int id) const;
  std::size_t size() const { return entries_.size(); }
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
  std::unordered_map<std::string, int> index_;
};

// Set of positive (drug, drug, side effect) triples under canonical pair
// ordering (lexicographically sorted ids), so (A,B,z) and (B,A,z) collide.
class PositiveIndex {
 public:
  // Returns true when the triple was new.
  bool insert(const std::string& d1, const std::string& d2, int z);
  bool contains(const std::string& d1, const std::string& d2, int z) const;
  std::size_t size() const { return keys_.size(); }
  std::size_t count_for(int z) const;

  static PositiveIndex build(const std::vector<InteractionRecord>& positives);

 private:
  std::unordered_set<std::string> keys_;
  std::unordered_map<int, std::size_t> per_side_effect_;
};

// --- file ingestion --------------------------------------------------------

// One drug per line: `id|Z,H,q Z,H,q ...|i-j:t i-j:t ...` (see docs/formats.md).
DrugTable parse_drugs(const std::string& path);
DrugTable parse_drugs_stream(std::istream& in, const std::string& origin);

// Canonical single-line form of one drug; parse(serialize(g)) == g.
std::string serialize_drug(const DrugGraph& g);
std::string serialize_drugs(const DrugTable& table);

// 4-column rows: drug1, drug2, side-effect concept id, side-effect name
// (tab separated; comma accepted). Every row becomes a positive record;
// unseen concept identifiers extend `vocab` in first-seen order; duplicate
// triples (under canonical pair ordering) are dropped.
std::vector<InteractionRecord> parse_interactions(const std::string& path,
                                                  const DrugTable& drugs,
                                                  SideEffectVocab& vocab);
std::vector<InteractionRecord> parse_interactions_stream(std::istream& in,
                                                         const std::string& origin,
                                                         const DrugTable& drugs,
                                                         SideEffectVocab& vocab);

// --- sampling and splitting ------------------------------------------------

// Corrupts the second drug of a positive: returns (drug1, ~d, z, negative)
// with ~d distinct from both endpoints and the triple absent from `index`.
InteractionRecord sample_negative_train(const InteractionRecord& pos, const DrugTable& drugs,
                                        const PositiveIndex& index, Rng& rng,
                                        int max_attempts = 100);

// Distinct non-positive pairs for one side effect, canonical order, exactly
// `count` of them; errors when fewer admissible pairs exist.
std::vector<InteractionRecord> sample_negatives_eval(int side_effect_id,
                                                     const DrugTable& drugs,
                                                     const PositiveIndex& index,
                                                     std::size_t count, Rng& rng);

// Stratified k-fold partition of positive records: per side effect, fold
// counts differ by at most one. Side effects with fewer than k records are
// distributed round-robin (best effort).
std::vector<std::vector<InteractionRecord>> stratified_kfold(
    const std::vector<InteractionRecord>& records, std::size_t k, Rng& rng);

// One epoch of shuffled minibatches; every record appears exactly once, the
// final partial batch is emitted.
std::vector<std::vector<InteractionRecord>> minibatches(
    const std::vector<InteractionRecord>& records, std::size_t batch_size, Rng& rng);

// --- multi-label view ------------------------------------------------------

// Unique canonical pairs with the set of side effects observed for the pair;
// unobserved side effects count as negatives.
struct PairExample {
  std::string drug1;
  std::string drug2;
  std::vector<int> observed;  // sorted side_effect_ids
};

std::vector<PairExample> build_pair_examples(const std::vector<InteractionRecord>& positives);

std::vector<std::vector<PairExample>> minibatches(const std::vector<PairExample>& pairs,
                                                  std::size_t batch_size, Rng& rng);

}  // namespace ddi
