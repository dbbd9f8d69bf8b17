// Acceptance suite: runs every acceptance criterion at its stated tolerance
// and prints one PASS/FAIL line per criterion. Exit code is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <vector>

#include "ddi/commands.hpp"
#include "ddi/metrics.hpp"
#include "fixture.hpp"

using namespace ddi;
using testutil::make_planted_fixture;
using testutil::planted_fixture_encoder_config;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", criterion, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const clock::time_point start = clock::now();
  return std::chrono::duration<double>(clock::now() - start).count();
}

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

DrugGraph random_drug(const std::string& id, Rng& rng) {
  std::ostringstream os;
  const int n = 2 + static_cast<int>(rng.uniform_int(5));
  os << id << '|';
  for (int i = 0; i < n; ++i) {
    if (i) os << ' ';
    os << 1 + rng.uniform_int(12) << ',' << rng.uniform_int(4) << ','
       << static_cast<int>(rng.uniform_int(3)) - 1;
  }
  os << '|';
  for (int i = 1; i < n; ++i) {
    if (i > 1) os << ' ';
    os << rng.uniform_int(i) << '-' << i << ':' << rng.uniform_int(4);
  }
  std::istringstream in(os.str());
  return parse_drugs_stream(in, "<random>").drugs[0];
}

DrugGraph permute_atoms(const DrugGraph& g, const std::vector<int>& perm) {
  DrugGraph out;
  out.drug_id = g.drug_id;
  out.atoms.resize(g.atoms.size());
  for (std::size_t i = 0; i < g.atoms.size(); ++i) out.atoms[perm[i]] = g.atoms[i];
  for (const auto& b : g.bonds) {
    BondRecord nb;
    nb.i = std::min(perm[b.i], perm[b.j]);
    nb.j = std::max(perm[b.i], perm[b.j]);
    nb.bond_type = b.bond_type;
    out.bonds.push_back(nb);
  }
  out.build_adjacency();
  return out;
}

// ---------------------------------------------------------------------------

void criterion_1_gradient_check() {
  const double started = now_seconds();
  double worst = 0.0;
  std::string worst_param;
  for (Objective objective : {Objective::kBinaryMargin, Objective::kMultilabelBce}) {
    GradCheckConfig cfg;
    cfg.objective = objective;
    cfg.seed = 2;
    auto r = gradient_check(cfg);
    if (r.max_rel_error > worst) {
      worst = r.max_rel_error;
      worst_param = r.worst_param;
    }
  }
  const double elapsed = now_seconds() - started;
  report(1, worst < 1e-4 && elapsed < 60.0,
         "gradient check, both objectives: max rel error " + fmt(worst) + " (worst " +
             worst_param + "), " + fmt(elapsed, "%.1f") + "s");
}

void criterion_2_attention_rows() {
  Rng rng(1002);
  EncoderConfig cfg;  // d=32, T=3, K=8
  cfg.atom_vocab = 16;
  Model model = make_model(cfg, 3);
  Rng init = rng.derive("init");
  xavier_init(model, init);

  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_drug("A" + std::to_string(trial), rng);
    auto b = random_drug("B" + std::to_string(trial), rng);
    DrugTable table;
    table.drugs = {a, b};
    model.stats = compute_feature_stats(table);
    Tape tape;
    EncodeTrace trace;
    trace.want_alphas = true;
    encode_pair(tape, a, b, cfg, model.encoder, model.stats, Mode::kEval, nullptr, &trace);
    for (const auto* side : {&trace.alphas_x, &trace.alphas_y}) {
      for (const auto& alpha : *side) {
        for (std::size_t r = 0; r < alpha.rows(); ++r) {
          double sum = 0.0;
          for (std::size_t c = 0; c < alpha.cols(); ++c) {
            sum += alpha.values()[r * alpha.cols() + c];
          }
          worst = std::max(worst, std::abs(sum - 1.0));
        }
      }
    }
  }
  report(2, worst < 1e-9,
         "attention rows sum to 1 over 100 pairs, all steps/heads: worst |sum-1| = " +
             fmt(worst));
}

void criterion_3_permutation_invariance() {
  Rng rng(1003);
  EncoderConfig cfg;
  cfg.atom_vocab = 16;
  Model model = make_model(cfg, 3);
  Rng init = rng.derive("init");
  xavier_init(model, init);
  auto partner = random_drug("partner", rng);

  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    auto g = random_drug("D" + std::to_string(trial), rng);
    std::vector<int> perm(g.atoms.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto permuted = permute_atoms(g, perm);

    DrugTable table;
    table.drugs = {g, partner};
    model.stats = compute_feature_stats(table);

    Tape tape;
    auto e1 =
        encode_pair(tape, g, partner, cfg, model.encoder, model.stats, Mode::kEval, nullptr);
    auto e2 = encode_pair(tape, permuted, partner, cfg, model.encoder, model.stats,
                          Mode::kEval, nullptr);
    for (std::size_t j = 0; j < e1.drug_x.size(); ++j) {
      worst = std::max(worst, std::abs(e1.drug_x.values()[j] - e2.drug_x.values()[j]));
      worst = std::max(worst, std::abs(e1.drug_y.values()[j] - e2.drug_y.values()[j]));
    }
  }
  report(3, worst < 1e-9,
         "drug vectors invariant under atom relabeling, 50 drugs: worst delta = " + fmt(worst));
}

void criterion_4_cross_drug_flow() {
  Rng rng(1004);
  std::size_t nonzero_mhcaddi = 0, zero_mpnn = 0;
  for (int trial = 0; trial < 50; ++trial) {
    auto a = random_drug("A" + std::to_string(trial), rng);
    auto b = random_drug("B" + std::to_string(trial), rng);
    DrugTable table;
    table.drugs = {a, b};
    for (bool concat_variant : {false, true}) {
      EncoderConfig cfg;
      cfg.atom_vocab = 16;
      cfg.variant = concat_variant ? Variant::kMpnnConcat : Variant::kMhcaddi;
      Model model = make_model(cfg, 3);
      model.stats = compute_feature_stats(table);
      Rng init = rng.derive("init", trial * 2 + (concat_variant ? 1 : 0));
      xavier_init(model, init);

      Tape tape;
      EncodeTrace trace;
      trace.want_input_grads = true;
      auto enc = encode_pair(tape, a, b, cfg, model.encoder, model.stats, Mode::kEval,
                             nullptr, &trace);
      tape.backward(tape.sum_all(enc.drug_x));
      double norm = 0.0;
      for (double v : trace.y_inputs.grad()) norm += v * v;
      if (concat_variant) {
        zero_mpnn += norm == 0.0 ? 1 : 0;
      } else {
        nonzero_mhcaddi += norm > 0.0 ? 1 : 0;
      }
    }
  }
  report(4, nonzero_mhcaddi == 50 && zero_mpnn == 50,
         "cross-drug gradient: mhcaddi nonzero " + std::to_string(nonzero_mhcaddi) +
             "/50, mpnn-concat exactly zero " + std::to_string(zero_mpnn) + "/50");
}

void criterion_5_variant_equivalence() {
  Rng rng(1005);
  EncoderConfig caddi;
  caddi.variant = Variant::kCaddi;
  caddi.heads = 8;  // ignored: caddi is the single-head model
  caddi.atom_vocab = 16;
  Model model = make_model(caddi, 3);
  Rng init = rng.derive("init");
  xavier_init(model, init);

  EncoderConfig single = caddi;
  single.variant = Variant::kMhcaddi;
  single.heads = 1;

  auto a = random_drug("A", rng);
  auto b = random_drug("B", rng);
  DrugTable table;
  table.drugs = {a, b};
  model.stats = compute_feature_stats(table);

  Tape tape;
  auto e1 = encode_pair(tape, a, b, caddi, model.encoder, model.stats, Mode::kEval, nullptr);
  auto e2 = encode_pair(tape, a, b, single, model.encoder, model.stats, Mode::kEval, nullptr);
  const bool equal = e1.drug_x.values() == e2.drug_x.values() &&
                     e1.drug_y.values() == e2.drug_y.values() &&
                     e1.atoms_x.values() == e2.atoms_x.values();
  report(5, equal, "caddi forward output is bitwise identical to single-head mhcaddi");
}

void criterion_6_score_symmetry() {
  Rng rng(1006);
  BinaryHeadParams head;
  head.head_map = DiffArray::zeros({6, 6});
  head.tail_map = DiffArray::zeros({6, 6});
  head.se_embed = DiffArray::zeros({4, 6});
  for (auto* arr : {&head.head_map, &head.tail_map, &head.se_embed}) {
    for (auto& v : arr->values()) v = rng.uniform_pm(0.8);
  }
  std::size_t exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    DiffArray dx = DiffArray::zeros({1, 6});
    DiffArray dy = DiffArray::zeros({1, 6});
    for (auto& v : dx.values()) v = rng.uniform_pm(2.0);
    for (auto& v : dy.values()) v = rng.uniform_pm(2.0);
    const int z = static_cast<int>(rng.uniform_int(4));
    Tape tape;
    if (score_binary(tape, dx, dy, z, head).item() ==
        score_binary(tape, dy, dx, z, head).item()) {
      ++exact;
    }
  }
  report(6, exact == 1000,
         "score_binary(dx,dy,z) == score_binary(dy,dx,z) exactly: " + std::to_string(exact) +
             "/1000");
}

void criterion_7_auroc_oracle() {
  Rng rng(1007);
  std::size_t agree = 0, checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.uniform_int(199);
    std::vector<ScoredExample> ex;
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const bool positive = rng.uniform() < 0.5;
      pos += positive ? 1 : 0;
      // small integer grid forces ties
      ex.push_back(
          ScoredExample{"a", "b", 0, static_cast<double>(rng.uniform_int(10)), positive});
    }
    if (pos == 0 || pos == n) continue;
    ++checked;

    double num = 0.0;
    std::size_t pairs = 0;
    for (const auto& p : ex) {
      if (!p.positive) continue;
      for (const auto& q : ex) {
        if (q.positive) continue;
        ++pairs;
        num += p.score > q.score ? 1.0 : (p.score == q.score ? 0.5 : 0.0);
      }
    }
    const double brute = num / static_cast<double>(pairs);
    if (std::abs(auroc(ex) - brute) < 1e-12) ++agree;
  }
  report(7, agree == checked && checked > 900,
         "sort-based auroc matches brute-force counting on " + std::to_string(agree) + "/" +
             std::to_string(checked) + " tied random inputs");
}

void criterion_8_point_values() {
  TrainConfig cfg;  // paper defaults: 0.001 * 0.96^(t * 1e-6)
  const double lr0 = lr_schedule(cfg, 0);
  const double lr1m = lr_schedule(cfg, 1000000);
  const bool lr_ok = lr0 == 0.001 && std::abs(lr1m - 0.00096) < 1e-15;

  Tape tape;
  auto uniform = DiffArray::full({964}, 0.5);
  std::vector<double> targets(964, 0.0);
  for (std::size_t i = 0; i < 964; i += 7) targets[i] = 1.0;
  const double bce_val = bce_loss(tape, uniform, targets).item();
  const bool bce_ok = std::abs(bce_val - 964.0 * std::log(2.0)) < 1e-9;

  const bool margin_ok =
      margin_loss(tape, DiffArray::scalar(0), DiffArray::scalar(2), 1.0).item() == 0.0 &&
      margin_loss(tape, DiffArray::scalar(5), DiffArray::scalar(5), 1.0).item() == 1.0 &&
      margin_loss(tape, DiffArray::scalar(3), DiffArray::scalar(1), 1.0).item() == 3.0;

  report(8, lr_ok && bce_ok && margin_ok,
         "eta(0)=" + fmt(lr0) + ", eta(1e6)=" + fmt(lr1m) + ", bce(0.5;964)-964ln2=" +
             fmt(bce_val - 964.0 * std::log(2.0)) + ", margin examples exact");
}

void criterion_9_learnability() {
  auto fx = make_planted_fixture(24, 60);
  EncoderConfig cfg = planted_fixture_encoder_config();  // d=32, T=3, K=8
  TrainConfig tc;
  tc.epochs = 85;
  tc.batch_size = 5;
  tc.base_lr = 0.003;
  tc.lr_decay_scale = 0.003;
  const double margin = 3.0;

  const double started = now_seconds();
  auto mh =
      crossvalidate(fx.drugs, fx.positives, fx.vocab, cfg, tc, margin, 2, Rng(20240042), false);
  const double mh_seconds = now_seconds() - started;

  EncoderConfig ablation = cfg;
  ablation.variant = Variant::kMpnnConcat;
  auto mp = crossvalidate(fx.drugs, fx.positives, fx.vocab, ablation, tc, margin, 2,
                          Rng(20240042), false);

  const bool ok = mh.fold_mean >= 0.95 && mh_seconds < 600.0 && mp.fold_mean < mh.fold_mean;
  report(9, ok,
         "planted-rule fixture, 2-fold: mhcaddi mean AUROC " + fmt(mh.fold_mean, "%.4f") +
             " in " + fmt(mh_seconds, "%.0f") + "s; mpnn-concat " + fmt(mp.fold_mean, "%.4f") +
             " (must be strictly lower)");
}

void criterion_10_balanced_sampling() {
  bool ok = true;
  std::string detail;
  for (std::size_t n_drugs : {10, 17, 26}) {
    auto fx = make_planted_fixture(n_drugs, n_drugs);
    EncoderConfig cfg = planted_fixture_encoder_config();
    cfg.feature_dim = 8;
    cfg.steps = 1;
    cfg.heads = 1;
    Model model = make_model(cfg, fx.vocab.size());
    model.stats = compute_feature_stats(fx.drugs);
    Rng init(3);
    xavier_init(model, init);
    AdamState state = AdamState::for_model(model);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 7;
    auto result = train_model(model, state, fx.drugs, fx.positives, tc, Rng(5));
    ok = ok && result.trace[0].examples == 2 * fx.positives.size();
    detail += std::to_string(fx.positives.size()) + "->" +
              std::to_string(result.trace[0].examples) + " ";
  }
  report(10, ok, "balanced epochs consume exactly 2N examples: " + detail);
}

void criterion_11_reproducibility() {
  const fs::path dir = fs::temp_directory_path() / "ddi_acceptance_repro";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto fx = make_planted_fixture(5, 16);
  {
    std::ofstream(dir / "drugs.txt") << fx.drugs_text;
    std::ofstream(dir / "interactions.tsv") << fx.interactions_text;
    std::ofstream(dir / "run.cfg") << "seed = 41\n"
                                   << "data.drugs = " << (dir / "drugs.txt").string() << "\n"
                                   << "data.interactions = "
                                   << (dir / "interactions.tsv").string() << "\n"
                                   << "output.dir = " << (dir / "out1").string() << "\n"
                                   << "encoder.d = 8\nencoder.steps = 1\nencoder.heads = 2\n"
                                   << "encoder.atom_vocab = 16\n"
                                   << "train.epochs = 2\ntrain.batch_size = 8\n";
  }
  auto config = RunConfig::load((dir / "run.cfg").string());
  std::stringstream devnull;
  auto* saved = std::cout.rdbuf(devnull.rdbuf());
  const int rc1 = cmd_train(config);
  auto manifest_config = RunConfig::load((dir / "out1" / "manifest.cfg").string());
  manifest_config.set("output.dir", (dir / "out2").string());
  const int rc2 = cmd_train(manifest_config);
  std::cout.rdbuf(saved);

  auto read_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const bool bitwise = rc1 == 0 && rc2 == 0 &&
                       read_bytes(dir / "out1" / "checkpoint.bin") ==
                           read_bytes(dir / "out2" / "checkpoint.bin");

  // checkpoint round trip preserves every evaluation score exactly
  auto ckpt = load_checkpoint((dir / "out1" / "checkpoint.bin").string());
  save_checkpoint((dir / "resaved.bin").string(), ckpt.model, ckpt.vocab,
                  ckpt.optimizer ? &*ckpt.optimizer : nullptr);
  auto again = load_checkpoint((dir / "resaved.bin").string());
  auto index = PositiveIndex::build(fx.positives);
  Rng neg_rng(7);
  auto eval_set = build_eval_set(fx.positives, fx.drugs, index, neg_rng);
  auto s1 = score_examples(ckpt.model, fx.drugs, eval_set, Objective::kBinaryMargin);
  auto s2 = score_examples(again.model, fx.drugs, eval_set, Objective::kBinaryMargin);
  bool scores_equal = s1.size() == s2.size();
  for (std::size_t i = 0; scores_equal && i < s1.size(); ++i) {
    scores_equal = s1[i].score == s2[i].score;
  }
  fs::remove_all(dir);
  report(11, bitwise && scores_equal,
         std::string("manifest rerun checkpoints bitwise identical: ") +
             (bitwise ? "yes" : "no") + "; round-trip scores exact: " +
             (scores_equal ? "yes" : "no"));
}

}  // namespace

int main() {
  now_seconds();  // pin the clock
  criterion_1_gradient_check();
  criterion_2_attention_rows();
  criterion_3_permutation_invariance();
  criterion_4_cross_drug_flow();
  criterion_5_variant_equivalence();
  criterion_6_score_symmetry();
  criterion_7_auroc_oracle();
  criterion_8_point_values();
  criterion_9_learnability();
  criterion_10_balanced_sampling();
  criterion_11_reproducibility();
  std::printf("%s: %d of 11 criteria failed\n", g_failures == 0 ? "SUCCESS" : "FAILURE",
              g_failures);
  return g_failures;
}
