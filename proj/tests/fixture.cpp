#include "fixture.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace ddi::testutil {

namespace {

struct DrugPlan {
  bool p[3] = {false, false, false};  // P_z: carries a bond of type 1+z
  bool q[3] = {false, false, false};  // Q_z: carries an atom with element 10+z
};

// one drug built to satisfy exactly the planned properties
std::string build_drug(const std::string& id, const DrugPlan& plan, Rng& rng) {
  std::size_t required_types = 0;
  for (bool b : plan.p) required_types += b ? 1 : 0;
  const std::size_t n_atoms = std::max<std::size_t>(3 + rng.uniform_int(3), required_types + 1);
  const std::size_t n_tree_edges = n_atoms - 1;

  // bond types: 0 is filler; type 1+z appears exactly when P_z holds
  std::vector<int> allowed_types{0};
  for (int z = 0; z < 3; ++z) {
    if (plan.p[z]) allowed_types.push_back(1 + z);
  }
  std::vector<int> bond_type(n_tree_edges);
  for (auto& t : bond_type) t = allowed_types[rng.uniform_int(allowed_types.size())];
  std::size_t slot = n_tree_edges;
  for (int z = 0; z < 3; ++z) {
    if (plan.p[z]) bond_type[--slot] = 1 + z;  // guarantee presence
  }

  // elements: filler pool; element 10+z appears exactly when Q_z holds
  const std::array<int, 3> z_pool{1, 6, 8};
  std::vector<int> atom_z(n_atoms);
  for (auto& z : atom_z) z = z_pool[rng.uniform_int(z_pool.size())];
  std::size_t marker = 0;
  for (int z = 0; z < 3; ++z) {
    if (plan.q[z]) atom_z[marker++] = 10 + z;  // distinct atoms carry the markers
  }

  // hydrogens and charges are free noise
  std::ostringstream os;
  os << id << '|';
  for (std::size_t i = 0; i < n_atoms; ++i) {
    if (i) os << ' ';
    const int charge = static_cast<int>(rng.uniform_int(3)) - 1;
    os << atom_z[i] << ',' << rng.uniform_int(4) << ',' << charge;
  }
  os << '|';
  for (std::size_t e = 0; e < n_tree_edges; ++e) {
    const std::size_t child = e + 1;
    const std::size_t parent = rng.uniform_int(child);
    if (e) os << ' ';
    os << parent << '-' << child << ':' << bond_type[e];
  }
  return os.str();
}

}  // namespace

EncoderConfig planted_fixture_encoder_config() {
  EncoderConfig cfg;
  cfg.atom_vocab = 16;  // filler elements plus markers 10..12
  cfg.bond_types = 4;
  return cfg;
}

SyntheticFixture make_planted_fixture(std::uint64_t seed, std::size_t n_drugs, double p_rate,
                                      double q_rate) {
  Rng rng(seed);
  Rng plan_rng = rng.derive("plans");
  Rng build_rng = rng.derive("drugs");

  std::vector<DrugPlan> plans(n_drugs);
  for (auto& plan : plans) {
    for (int z = 0; z < 3; ++z) {
      plan.p[z] = plan_rng.uniform() < p_rate;
      plan.q[z] = plan_rng.uniform() < q_rate;
    }
  }

  std::ostringstream drugs_os;
  for (std::size_t i = 0; i < n_drugs; ++i) {
    drugs_os << build_drug("S" + std::to_string(i), plans[i], build_rng) << '\n';
  }

  const std::array<std::pair<const char*, const char*>, 3> concepts{{
      {"CP01", "planted rule one"},
      {"CP02", "planted rule two"},
      {"CP03", "planted rule three"},
  }};
  std::ostringstream inter_os;
  for (std::size_t a = 0; a < n_drugs; ++a) {
    for (std::size_t b = a + 1; b < n_drugs; ++b) {
      for (int z = 0; z < 3; ++z) {
        const bool fires = (plans[a].p[z] && plans[b].q[z]) || (plans[b].p[z] && plans[a].q[z]);
        if (fires) {
          inter_os << 'S' << a << '\t' << 'S' << b << '\t' << concepts[z].first << '\t'
                   << concepts[z].second << '\n';
        }
      }
    }
  }

  SyntheticFixture fx;
  fx.drugs_text = drugs_os.str();
  fx.interactions_text = inter_os.str();
  {
    std::istringstream in(fx.drugs_text);
    fx.drugs = parse_drugs_stream(in, "<fixture-drugs>");
  }
  {
    std::istringstream in(fx.interactions_text);
    fx.positives = parse_interactions_stream(in, "<fixture-interactions>", fx.drugs, fx.vocab);
  }
  return fx;
}

}  // namespace ddi::testutil
