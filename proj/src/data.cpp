#include "ddi/data.hpp"

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ddi {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep, bool keep_empty = false) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      if (keep_empty || !cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (keep_empty || !cur.empty()) out.push_back(cur);
  return out;
}

int parse_int(const std::string& tok, const std::string& where) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError(where + ": not an integer: '" + tok + "'");
  }
  if (pos != tok.size()) {
    throw ParseError(where + ": trailing characters in integer: '" + tok + "'");
  }
  return v;
}

std::string triple_key(const std::string& d1, const std::string& d2, int z) {
  const std::string& lo = d1 <= d2 ? d1 : d2;
  const std::string& hi = d1 <= d2 ? d2 : d1;
  std::string key;
  key.reserve(lo.size() + hi.size() + 14);
  key += lo;
  key += '\x1f';
  key += hi;
  key += '\x1f';
  key += std::to_string(z);
  return key;
}

}  // namespace

void DrugGraph::build_adjacency() {
  adjacency.assign(atoms.size(), {});
  edge_src.clear();
  edge_dst.clear();
  edge_type.clear();
  for (const auto& b : bonds) {
    adjacency[b.i].push_back(b.j);
    adjacency[b.j].push_back(b.i);
    // message j -> i and message i -> j share the bond's type
    edge_src.push_back(static_cast<std::size_t>(b.j));
    edge_dst.push_back(static_cast<std::size_t>(b.i));
    edge_type.push_back(static_cast<std::size_t>(b.bond_type));
    edge_src.push_back(static_cast<std::size_t>(b.i));
    edge_dst.push_back(static_cast<std::size_t>(b.j));
    edge_type.push_back(static_cast<std::size_t>(b.bond_type));
  }
}

const DrugGraph& DrugTable::get(const std::string& id) const {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw DataError("unknown drug id '" + id + "'");
  return drugs[it->second];
}

const DrugGraph* DrugTable::find(const std::string& id) const {
  auto it = by_id.find(id);
  return it == by_id.end() ? nullptr : &drugs[it->second];
}

int SideEffectVocab::add_or_get(const std::string& concept_id, const std::string& name) {
  auto it = index_.find(concept_id);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(entries_.size());
  entries_.emplace_back(concept_id, name);
  index_.emplace(concept_id, id);
  return id;
}

int SideEffectVocab::lookup(const std::string& concept_id) const {
  auto it = index_.find(concept_id);
  return it == index_.end() ? -1 : it->second;
}

const std::pair<std::string, std::string>& SideEffectVocab::entry(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= entries_.size()) {
    throw DataError("side effect id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(entries_.size()));
  }
  return entries_[id];
}

bool PositiveIndex::insert(const std::string& d1, const std::string& d2, int z) {
  const bool fresh = keys_.insert(triple_key(d1, d2, z)).second;
  if (fresh) ++per_side_effect_[z];
  return fresh;
}

bool PositiveIndex::contains(const std::string& d1, const std::string& d2, int z) const {
  return keys_.count(triple_key(d1, d2, z)) > 0;
}

std::size_t PositiveIndex::count_for(int z) const {
  auto it = per_side_effect_.find(z);
  return it == per_side_effect_.end() ? 0 : it->second;
}

PositiveIndex PositiveIndex::build(const std::vector<InteractionRecord>& positives) {
  PositiveIndex idx;
  for (const auto& r : positives) idx.insert(r.drug1, r.drug2, r.side_effect_id);
  return idx;
}

// ---------------------------------------------------------------------------
// Drug file parsing

DrugTable parse_drugs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open drug file: " + path);
  return parse_drugs_stream(in, path);
}

DrugTable parse_drugs_stream(std::istream& in, const std::string& origin) {
  DrugTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;

    auto fields = split(body, '|', /*keep_empty=*/true);
    if (fields.size() != 3) {
      throw ParseError(where + ": expected 'id|atoms|bonds', got " +
                       std::to_string(fields.size()) + " fields");
    }
    DrugGraph g;
    g.drug_id = trim(fields[0]);
    if (g.drug_id.empty()) throw ParseError(where + ": empty drug id");
    if (table.by_id.count(g.drug_id)) {
      throw ParseError(where + ": duplicate drug id '" + g.drug_id + "'");
    }

    for (const auto& tok : split(trim(fields[1]), ' ')) {
      auto parts = split(tok, ',', /*keep_empty=*/true);
      if (parts.size() != 3) {
        throw ParseError(where + ": atom must be 'Z,H,q', got '" + tok + "'");
      }
      AtomRecord a;
      a.atom_number = parse_int(parts[0], where);
      a.hydrogen_count = parse_int(parts[1], where);
      a.charge = parse_int(parts[2], where);
      if (a.atom_number < 1) {
        throw ParseError(where + ": atom number must be >= 1, got " +
                         std::to_string(a.atom_number));
      }
      if (a.hydrogen_count < 0) {
        throw ParseError(where + ": hydrogen count must be >= 0");
      }
      g.atoms.push_back(a);
    }
    if (g.atoms.empty()) {
      throw ParseError(where + ": drug '" + g.drug_id + "' has no atoms");
    }

    std::set<std::pair<int, int>> seen_pairs;
    for (const auto& tok : split(trim(fields[2]), ' ')) {
      const auto dash = tok.find('-');
      const auto colon = tok.find(':', dash == std::string::npos ? 0 : dash + 1);
      if (dash == std::string::npos || colon == std::string::npos) {
        throw ParseError(where + ": bond must be 'i-j:type', got '" + tok + "'");
      }
      BondRecord b;
      b.i = parse_int(tok.substr(0, dash), where);
      b.j = parse_int(tok.substr(dash + 1, colon - dash - 1), where);
      b.bond_type = parse_int(tok.substr(colon + 1), where);
      if (b.i == b.j) {
        throw ParseError(where + ": bond endpoints must be distinct, got " + tok);
      }
      const int n = static_cast<int>(g.atoms.size());
      if (b.i < 0 || b.j < 0 || b.i >= n || b.j >= n) {
        throw ParseError(where + ": bond endpoint out of range in drug '" + g.drug_id +
                         "' (" + std::to_string(n) + " atoms): " + tok);
      }
      if (b.bond_type < 0) {
        throw ParseError(where + ": bond type must be >= 0, got " + tok);
      }
      if (b.i > b.j) std::swap(b.i, b.j);
      if (!seen_pairs.emplace(b.i, b.j).second) {
        throw ParseError(where + ": duplicate bond between atoms " + std::to_string(b.i) +
                         " and " + std::to_string(b.j));
      }
      g.bonds.push_back(b);
    }

    g.build_adjacency();
    table.by_id.emplace(g.drug_id, table.drugs.size());
    table.drugs.push_back(std::move(g));
  }
  return table;
}

std::string serialize_drug(const DrugGraph& g) {
  std::ostringstream os;
  os << g.drug_id << '|';
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    if (i) os << ' ';
    os << g.atoms[i].atom_number << ',' << g.atoms[i].hydrogen_count << ','
       << g.atoms[i].charge;
  }
  os << '|';
  auto bonds = g.bonds;
  std::sort(bonds.begin(), bonds.end(), [](const BondRecord& a, const BondRecord& b) {
    return std::tie(a.i, a.j, a.bond_type) < std::tie(b.i, b.j, b.bond_type);
  });
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    if (i) os << ' ';
    os << bonds[i].i << '-' << bonds[i].j << ':' << bonds[i].bond_type;
  }
  return os.str();
}

std::string serialize_drugs(const DrugTable& table) {
  std::ostringstream os;
  for (const auto& g : table.drugs) os << serialize_drug(g) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Interaction file parsing

std::vector<InteractionRecord> parse_interactions(const std::string& path,
                                                  const DrugTable& drugs,
                                                  SideEffectVocab& vocab) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open interaction file: " + path);
  return parse_interactions_stream(in, path, drugs, vocab);
}

std::vector<InteractionRecord> parse_interactions_stream(std::istream& in,
                                                         const std::string& origin,
                                                         const DrugTable& drugs,
                                                         SideEffectVocab& vocab) {
  struct Row {
    std::string d1, d2, concept_id, name;
  };
  std::vector<Row> rows;
  std::set<std::string> missing;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = origin + ":" + std::to_string(lineno);
    std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;

    const char sep = body.find('\t') != std::string::npos ? '\t' : ',';
    auto fields = split(body, sep, /*keep_empty=*/true);
    if (fields.size() != 4) {
      throw ParseError(where + ": expected 4 columns (drug1, drug2, concept id, name), got " +
                       std::to_string(fields.size()));
    }
    Row r{trim(fields[0]), trim(fields[1]), trim(fields[2]), trim(fields[3])};
    if (r.d1.empty() || r.d2.empty() || r.concept_id.empty()) {
      throw ParseError(where + ": empty drug or concept identifier");
    }
    if (r.d1 == r.d2) {
      throw ParseError(where + ": self-interaction '" + r.d1 + "' paired with itself");
    }
    if (!drugs.find(r.d1)) missing.insert(r.d1);
    if (!drugs.find(r.d2)) missing.insert(r.d2);
    rows.push_back(std::move(r));
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) {
      if (!list.empty()) list += ", ";
      list += id;
    }
    throw DataError(origin + ": interactions reference unknown drug ids: " + list);
  }

  std::vector<InteractionRecord> records;
  PositiveIndex dedup;
  for (const auto& r : rows) {
    const int z = vocab.add_or_get(r.concept_id, r.name);
    if (dedup.insert(r.d1, r.d2, z)) {
      records.push_back(InteractionRecord{r.d1, r.d2, z, true});
    }
  }
  return records;
}

// ---------------------------------------------------------------------------
// Sampling

InteractionRecord sample_negative_train(const InteractionRecord& pos, const DrugTable& drugs,
                                        const PositiveIndex& index, Rng& rng,
                                        int max_attempts) {
  if (drugs.size() < 2) throw DataError("negative sampling needs at least two drugs");
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    const auto& candidate = drugs.drugs[rng.uniform_int(drugs.size())].drug_id;
    if (candidate == pos.drug1 || candidate == pos.drug2) continue;
    if (index.contains(pos.drug1, candidate, pos.side_effect_id)) continue;
    return InteractionRecord{pos.drug1, candidate, pos.side_effect_id, false};
  }
  throw DataError("negative sampling exhausted " + std::to_string(max_attempts) +
                  " attempts for positive (" + pos.drug1 + ", " + pos.drug2 +
                  ", z=" + std::to_string(pos.side_effect_id) + ")");
}

std::vector<InteractionRecord> sample_negatives_eval(int side_effect_id,
                                                     const DrugTable& drugs,
                                                     const PositiveIndex& index,
                                                     std::size_t count, Rng& rng) {
  const std::size_t n = drugs.size();
  const std::size_t total_pairs = n * (n - 1) / 2;
  const std::size_t positive_pairs = index.count_for(side_effect_id);
  const std::size_t admissible = total_pairs > positive_pairs ? total_pairs - positive_pairs : 0;
  if (count > admissible) {
    throw DataError("eval negative sampling: requested " + std::to_string(count) +
                    " pairs for side effect " + std::to_string(side_effect_id) +
                    " but only " + std::to_string(admissible) + " admissible pairs exist");
  }
  std::vector<InteractionRecord> out;
  out.reserve(count);
  if (count == 0) return out;

  auto make_record = [&](std::size_t i, std::size_t j) {
    const std::string& a = drugs.drugs[i].drug_id;
    const std::string& b = drugs.drugs[j].drug_id;
    const std::string& lo = a <= b ? a : b;
    const std::string& hi = a <= b ? b : a;
    return InteractionRecord{lo, hi, side_effect_id, false};
  };

  if (count * 3 >= admissible) {
    // Tight space: enumerate every admissible pair, shuffle, take the head.
    std::vector<std::pair<std::size_t, std::size_t>> pool;
    pool.reserve(admissible);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        if (!index.contains(drugs.drugs[i].drug_id, drugs.drugs[j].drug_id, side_effect_id)) {
          pool.emplace_back(i, j);
        }
      }
    }
    rng.shuffle(pool);
    for (std::size_t k = 0; k < count; ++k) out.push_back(make_record(pool[k].first, pool[k].second));
    return out;
  }

  std::unordered_set<std::uint64_t> seen;
  while (out.size() < count) {
    std::size_t a = rng.uniform_int(n);
    std::size_t b = rng.uniform_int(n);
    if (a == b) continue;
    const std::size_t i = std::min(a, b), j = std::max(a, b);
    if (!seen.insert(static_cast<std::uint64_t>(i) * n + j).second) continue;
    if (index.contains(drugs.drugs[i].drug_id, drugs.drugs[j].drug_id, side_effect_id)) continue;
    out.push_back(make_record(i, j));
  }
  return out;
}

std::vector<std::vector<InteractionRecord>> stratified_kfold(
    const std::vector<InteractionRecord>& records, std::size_t k, Rng& rng) {
  if (k < 2) throw ConfigError("stratified_kfold: k must be >= 2, got " + std::to_string(k));
  // Group record indices by side effect in first-seen order.
  std::vector<int> group_order;
  std::unordered_map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const int z = records[i].side_effect_id;
    auto [it, fresh] = groups.try_emplace(z);
    if (fresh) group_order.push_back(z);
    it->second.push_back(i);
  }
  std::vector<std::vector<InteractionRecord>> folds(k);
  std::size_t offset = 0;
  for (int z : group_order) {
    auto& idx = groups[z];
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      folds[(offset + i) % k].push_back(records[idx[i]]);
    }
    offset = (offset + idx.size()) % k;
  }
  return folds;
}

std::vector<std::vector<InteractionRecord>> minibatches(
    const std::vector<InteractionRecord>& records, std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ConfigError("minibatches: batch_size must be >= 1");
  std::vector<InteractionRecord> shuffled = records;
  rng.shuffle(shuffled);
  std::vector<std::vector<InteractionRecord>> out;
  for (std::size_t start = 0; start < shuffled.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, shuffled.size());
    out.emplace_back(shuffled.begin() + start, shuffled.begin() + end);
  }
  return out;
}

std::vector<PairExample> build_pair_examples(const std::vector<InteractionRecord>& positives) {
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::set<int>> observed;
  for (const auto& r : positives) {
    const std::string& lo = r.drug1 <= r.drug2 ? r.drug1 : r.drug2;
    const std::string& hi = r.drug1 <= r.drug2 ? r.drug2 : r.drug1;
    auto key = std::make_pair(lo, hi);
    auto [it, fresh] = observed.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.insert(r.side_effect_id);
  }
  std::vector<PairExample> out;
  out.reserve(order.size());
  for (const auto& key : order) {
    PairExample ex;
    ex.drug1 = key.first;
    ex.drug2 = key.second;
    const auto& zs = observed[key];
    ex.observed.assign(zs.begin(), zs.end());
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<std::vector<PairExample>> minibatches(const std::vector<PairExample>& pairs,
                                                  std::size_t batch_size, Rng& rng) {
  if (batch_size < 1) throw ConfigError("minibatches: batch_size must be >= 1");
  std::vector<PairExample> shuffled = pairs;
  rng.shuffle(shuffled);
  std::vector<std::vector<PairExample>> out;
  for (std::size_t start = 0; start < shuffled.size(); start += batch_size) {
    const std::size_t end = std::min(start + batch_size, shuffled.size());
    out.emplace_back(shuffled.begin() + start, shuffled.begin() + end);
  }
  return out;
}

}  // namespace ddi
