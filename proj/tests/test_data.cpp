#include <algorithm>
#include <set>
#include <sstream>

#include "ddi/data.hpp"
#include "doctest.h"

using namespace ddi;

namespace {

DrugTable parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_drugs_stream(in, "<test>");
}

std::vector<InteractionRecord> parse_inter_text(const std::string& text, const DrugTable& t,
                                                SideEffectVocab& vocab) {
  std::istringstream in(text);
  return parse_interactions_stream(in, "<test>", t, vocab);
}

DrugTable three_drugs() {
  return parse_text(
      "A|6,4,0|\n"
      "B|6,3,0 8,1,-1|0-1:1\n"
      "C|7,2,1 6,0,0 6,1,0|0-1:2 1-2:1\n");
}

}  // namespace

TEST_CASE("parse_drugs handles a single-atom record") {
  auto t = parse_text("D1|6,4,0|\n");
  REQUIRE(t.size() == 1);
  const auto& g = t.get("D1");
  CHECK(g.atoms.size() == 1);
  CHECK(g.bonds.empty());
  CHECK(g.atoms[0].atom_number == 6);
  CHECK(g.atoms[0].hydrogen_count == 4);
  CHECK(g.atoms[0].charge == 0);
}

TEST_CASE("parse_drugs builds symmetric adjacency") {
  auto t = parse_text("D2|6,3,0 8,1,-1|0-1:1\n");
  const auto& g = t.get("D2");
  REQUIRE(g.adjacency.size() == 2);
  CHECK(g.adjacency[0] == std::vector<int>{1});
  CHECK(g.adjacency[1] == std::vector<int>{0});
  CHECK(g.edge_src.size() == 2);  // one bond, two directed entries
}

TEST_CASE("parse_drugs rejects bad records with location") {
  // dangling endpoint
  CHECK_THROWS_WITH_AS(parse_text("D|6,4,0 6,4,0|0-5:1\n"),
                       doctest::Contains("<test>:1"), ParseError);
  // duplicate drug id
  CHECK_THROWS_WITH_AS(parse_text("D|6,4,0|\nD|6,4,0|\n"),
                       doctest::Contains("duplicate drug id"), ParseError);
  // self bond
  CHECK_THROWS_AS(parse_text("D|6,4,0 6,4,0|1-1:0\n"), ParseError);
  // duplicate unordered bond
  CHECK_THROWS_AS(parse_text("D|6,4,0 6,4,0|0-1:0 1-0:2\n"), ParseError);
  // malformed atom
  CHECK_THROWS_AS(parse_text("D|6,4|\n"), ParseError);
  // no atoms
  CHECK_THROWS_AS(parse_text("D||\n"), ParseError);
  // atom number below 1
  CHECK_THROWS_AS(parse_text("D|0,1,0|\n"), ParseError);
  // wrong field count
  CHECK_THROWS_AS(parse_text("D|6,4,0\n"), ParseError);
}

TEST_CASE("drug file round-trips through its canonical form") {
  const std::string canonical =
      "A|6,4,0|\n"
      "B|6,3,0 8,1,-1|0-1:1\n"
      "C|7,2,1 6,0,0 6,1,0|0-1:2 1-2:1\n";
  auto t = parse_text(canonical);
  CHECK(serialize_drugs(t) == canonical);

  // non-canonical input (reversed bond endpoints, unsorted bonds) normalizes
  auto t2 = parse_text("X|6,0,0 6,0,0 6,0,0|2-1:1 1-0:3\n");
  CHECK(serialize_drug(t2.get("X")) == "X|6,0,0 6,0,0 6,0,0|0-1:3 1-2:1");
  auto t3 = parse_text(serialize_drugs(t2));
  CHECK(serialize_drugs(t3) == serialize_drugs(t2));
}

TEST_CASE("adjacency symmetry holds for randomly generated drugs") {
  Rng rng(314);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(8));
    std::ostringstream os;
    os << "R" << trial << "|";
    for (int i = 0; i < n; ++i) {
      if (i) os << ' ';
      os << 1 + rng.uniform_int(10) << ',' << rng.uniform_int(4) << ','
         << static_cast<int>(rng.uniform_int(3)) - 1;
    }
    os << '|';
    std::set<std::pair<int, int>> used;
    std::string bonds;
    for (int e = 0; e + 1 < n * 2; ++e) {
      int i = static_cast<int>(rng.uniform_int(n));
      int j = static_cast<int>(rng.uniform_int(n));
      if (i == j) continue;
      if (i > j) std::swap(i, j);
      if (!used.emplace(i, j).second) continue;
      if (!bonds.empty()) bonds += ' ';
      bonds += std::to_string(i) + "-" + std::to_string(j) + ":" +
               std::to_string(rng.uniform_int(4));
    }
    os << bonds << '\n';
    auto t = parse_text(os.str());
    const auto& g = t.drugs[0];
    for (int i = 0; i < n; ++i) {
      for (int j : g.adjacency[i]) {
        const auto& back = g.adjacency[j];
        CHECK(std::count(back.begin(), back.end(), i) == 1);
      }
    }
    std::size_t degree_sum = 0;
    for (const auto& adj : g.adjacency) degree_sum += adj.size();
    CHECK(degree_sum == 2 * g.bonds.size());
    CHECK(g.edge_src.size() == 2 * g.bonds.size());
  }
}

TEST_CASE("parse_interactions builds vocabulary in first-seen order") {
  auto t = three_drugs();
  SideEffectVocab vocab;
  auto recs = parse_inter_text("A\tB\tC0001\theadache\n", t, vocab);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].side_effect_id == 0);
  CHECK(vocab.size() == 1);
  CHECK(vocab.entry(0).first == "C0001");
  CHECK(vocab.entry(0).second == "headache");
}

TEST_CASE("parse_interactions deduplicates canonical triples") {
  auto t = three_drugs();
  SideEffectVocab vocab;
  auto recs = parse_inter_text(
      "A\tB\tC0001\theadache\n"
      "A\tB\tC0001\theadache\n"
      "B\tA\tC0001\theadache\n"
      "A,B,C0002,nausea\n",
      t, vocab);
  CHECK(recs.size() == 2);
  CHECK(vocab.size() == 2);
}

TEST_CASE("parse_interactions errors") {
  auto t = three_drugs();
  SideEffectVocab vocab;
  CHECK_THROWS_WITH_AS(parse_inter_text("A\tZ9\tC1\tx\nZ8\tB\tC1\tx\n", t, vocab),
                       doctest::Contains("Z8, Z9"), DataError);
  CHECK_THROWS_AS(parse_inter_text("A\tB\tC1\n", t, vocab), ParseError);
  CHECK_THROWS_AS(parse_inter_text("A\tA\tC1\tx\n", t, vocab), ParseError);
}

TEST_CASE("train negative corrupts the second drug only") {
  auto t = three_drugs();
  std::vector<InteractionRecord> pos = {{"A", "B", 0, true}};
  auto index = PositiveIndex::build(pos);
  Rng rng(1);
  auto neg = sample_negative_train(pos[0], t, index, rng);
  CHECK(neg.drug1 == "A");
  CHECK(neg.drug2 == "C");  // the only admissible corruption
  CHECK(neg.side_effect_id == 0);
  CHECK_FALSE(neg.positive);
}

TEST_CASE("train negative sampling exhaustion") {
  auto t = parse_text("A|6,4,0|\nB|6,4,0|\n");
  std::vector<InteractionRecord> pos = {{"A", "B", 0, true}};
  auto index = PositiveIndex::build(pos);
  Rng rng(1);
  CHECK_THROWS_AS(sample_negative_train(pos[0], t, index, rng), DataError);
}

TEST_CASE("sampled negatives never collide with positives (exhaustive)") {
  Rng gen(77);
  auto t = parse_text("A|6,0,0|\nB|7,0,0|\nC|8,0,0|\nD|9,0,0|\nE|5,0,0|\n");
  std::vector<InteractionRecord> pos = {
      {"A", "B", 0, true}, {"A", "C", 0, true}, {"B", "D", 1, true}, {"D", "E", 0, true}};
  auto index = PositiveIndex::build(pos);
  for (int trial = 0; trial < 500; ++trial) {
    const auto& p = pos[gen.uniform_int(pos.size())];
    auto neg = sample_negative_train(p, t, index, gen);
    CHECK_FALSE(index.contains(neg.drug1, neg.drug2, neg.side_effect_id));
    CHECK(neg.drug1 != neg.drug2);
  }
}

TEST_CASE("eval negatives enumerate the complement on tiny universes") {
  auto t = three_drugs();
  std::vector<InteractionRecord> pos = {{"A", "B", 0, true}};
  auto index = PositiveIndex::build(pos);
  Rng rng(5);
  auto negs = sample_negatives_eval(0, t, index, 2, rng);
  REQUIRE(negs.size() == 2);
  std::set<std::pair<std::string, std::string>> got;
  for (const auto& r : negs) {
    CHECK_FALSE(index.contains(r.drug1, r.drug2, r.side_effect_id));
    got.emplace(r.drug1, r.drug2);
  }
  CHECK(got == std::set<std::pair<std::string, std::string>>{{"A", "C"}, {"B", "C"}});

  CHECK(sample_negatives_eval(0, t, index, 0, rng).empty());
  CHECK_THROWS_AS(sample_negatives_eval(0, t, index, 3, rng), DataError);
}

TEST_CASE("eval negative sampling is deterministic under seed") {
  Rng gen(9);
  std::ostringstream os;
  for (int i = 0; i < 30; ++i) os << "D" << i << "|6,0,0|\n";
  auto t = parse_text(os.str());
  std::vector<InteractionRecord> pos = {{"D0", "D1", 0, true}};
  auto index = PositiveIndex::build(pos);
  Rng r1(123), r2(123);
  auto a = sample_negatives_eval(0, t, index, 20, r1);
  auto b = sample_negatives_eval(0, t, index, 20, r2);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].drug1 == b[i].drug1);
    CHECK(a[i].drug2 == b[i].drug2);
  }
}

TEST_CASE("stratified folds balance each side effect") {
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 10; ++i) recs.push_back({"A" + std::to_string(i), "B", 0, true});
  Rng rng(3);
  auto folds = stratified_kfold(recs, 10, rng);
  for (const auto& f : folds) CHECK(f.size() == 1);

  recs.clear();
  for (int i = 0; i < 25; ++i) recs.push_back({"A" + std::to_string(i), "B", 0, true});
  auto folds2 = stratified_kfold(recs, 10, rng);
  for (const auto& f : folds2) CHECK((f.size() == 2 || f.size() == 3));

  CHECK_THROWS_AS(stratified_kfold(recs, 1, rng), ConfigError);
}

TEST_CASE("stratified folds partition the input") {
  Rng gen(21);
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 123; ++i) {
    recs.push_back({"L" + std::to_string(i), "R" + std::to_string(i),
                    static_cast<int>(gen.uniform_int(5)), true});
  }
  Rng rng(4);
  auto folds = stratified_kfold(recs, 4, rng);

  auto key = [](const InteractionRecord& r) {
    return r.drug1 + "|" + r.drug2 + "|" + std::to_string(r.side_effect_id);
  };
  std::set<std::string> seen;
  std::size_t total = 0;
  for (const auto& f : folds) {
    total += f.size();
    for (const auto& r : f) CHECK(seen.insert(key(r)).second);  // disjoint
  }
  CHECK(total == recs.size());  // union == input

  // per side effect, fold counts differ by at most 1
  for (int z = 0; z < 5; ++z) {
    std::size_t mn = recs.size(), mx = 0;
    for (const auto& f : folds) {
      std::size_t c = 0;
      for (const auto& r : f) c += r.side_effect_id == z;
      mn = std::min(mn, c);
      mx = std::max(mx, c);
    }
    CHECK(mx - mn <= 1);
  }
}

TEST_CASE("minibatches cover every record once with a final partial batch") {
  std::vector<InteractionRecord> recs;
  for (int i = 0; i < 401; ++i) recs.push_back({"P" + std::to_string(i), "Q", 0, true});
  Rng rng(5);
  Rng e1 = rng.derive("epoch", 0);
  Rng e2 = rng.derive("epoch", 1);
  auto epoch1 = minibatches(recs, 200, e1);
  REQUIRE(epoch1.size() == 3);
  CHECK(epoch1[0].size() == 200);
  CHECK(epoch1[1].size() == 200);
  CHECK(epoch1[2].size() == 1);

  auto epoch2 = minibatches(recs, 200, e2);
  auto flatten = [](const std::vector<std::vector<InteractionRecord>>& bs) {
    std::vector<std::string> ids;
    for (const auto& b : bs)
      for (const auto& r : b) ids.push_back(r.drug1);
    return ids;
  };
  auto f1 = flatten(epoch1), f2 = flatten(epoch2);
  CHECK(f1 != f2);  // different order under different derived seeds
  auto s1 = f1, s2 = f2;
  std::sort(s1.begin(), s1.end());
  std::sort(s2.begin(), s2.end());
  CHECK(s1 == s2);  // same multiset

  auto singles = minibatches(recs, 1, rng);
  CHECK(singles.size() == 401);

  CHECK_THROWS_AS(minibatches(recs, 0, rng), ConfigError);
}

TEST_CASE("pair examples collapse records into multi-hot targets") {
  std::vector<InteractionRecord> pos = {
      {"A", "B", 2, true}, {"B", "A", 0, true}, {"A", "C", 1, true}, {"A", "B", 2, true}};
  auto pairs = build_pair_examples(pos);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].drug1 == "A");
  CHECK(pairs[0].drug2 == "B");
  CHECK(pairs[0].observed == std::vector<int>{0, 2});
  CHECK(pairs[1].observed == std::vector<int>{1});
}
