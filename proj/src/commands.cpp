#include "ddi/commands.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "ddi/checkpoint.hpp"
#include "ddi/metrics.hpp"

namespace ddi {

namespace fs = std::filesystem;

namespace {

// One run per output directory at a time.
class LockFile {
 public:
  explicit LockFile(const fs::path& dir) : path_(dir / ".ddi.lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw ConfigError("output directory is locked by another run: " + path_.string());
    }
  }
  ~LockFile() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  LockFile(const LockFile&) = delete;
  LockFile& operator=(const LockFile&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const ParseError*>(&e) ||
      dynamic_cast<const DataError*>(&e)) {
    return kExitConfig;
  }
  return kExitNumeric;
}

template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    const auto* as_error = dynamic_cast<const Error*>(&e);
    return as_error ? exit_code_for(e) : kExitNumeric;
  }
}

std::string require_path(const RunConfig& config, const std::string& key) {
  const std::string path = config.get_string(key);
  if (!fs::exists(path)) {
    throw ConfigError("config key '" + key + "' points to a missing path: " + path);
  }
  return path;
}

fs::path prepare_output_dir(const RunConfig& config) {
  const fs::path dir = config.output_dir();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory: " + dir.string());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("failed writing " + path.string());
}

struct LoadedData {
  DrugTable drugs;
  SideEffectVocab vocab;
  std::vector<InteractionRecord> positives;
};

LoadedData load_data(const RunConfig& config) {
  LoadedData data;
  data.drugs = parse_drugs(require_path(config, "data.drugs"));
  data.positives =
      parse_interactions(require_path(config, "data.interactions"), data.drugs, data.vocab);
  return data;
}

// Field-by-field comparison of a checkpoint against the configured shapes.
void check_checkpoint_matches(const Checkpoint& ckpt, const EncoderConfig& expected,
                              const SideEffectVocab& expected_vocab) {
  std::vector<std::string> diffs;
  const auto& actual = ckpt.model.config;
  auto diff_num = [&](const char* field, auto a, auto b) {
    if (a != b) {
      std::ostringstream os;
      os << field << ": checkpoint=" << a << " config=" << b;
      diffs.push_back(os.str());
    }
  };
  diff_num("encoder.d", actual.feature_dim, expected.feature_dim);
  diff_num("encoder.steps", actual.steps, expected.steps);
  diff_num("encoder.heads", actual.heads, expected.heads);
  if (actual.variant != expected.variant) {
    diffs.push_back("encoder.variant: checkpoint=" + variant_name(actual.variant) +
                    " config=" + variant_name(expected.variant));
  }
  diff_num("vocab size", ckpt.vocab.size(), expected_vocab.size());
  if (ckpt.vocab.size() == expected_vocab.size()) {
    for (std::size_t i = 0; i < expected_vocab.size(); ++i) {
      if (ckpt.vocab.entries()[i].first != expected_vocab.entries()[i].first) {
        diffs.push_back("vocab[" + std::to_string(i) + "]: checkpoint=" +
                        ckpt.vocab.entries()[i].first + " config=" +
                        expected_vocab.entries()[i].first);
        break;
      }
    }
  }
  if (!diffs.empty()) {
    std::string msg = "checkpoint does not match the configuration:";
    for (const auto& d : diffs) msg += "\n  " + d;
    throw ConfigError(msg);
  }
}

std::vector<std::string> split_columns(const std::string& line) {
  std::vector<std::string> out;
  const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

int cmd_train(const RunConfig& config) {
  return run_guarded([&]() {
    const auto encoder_config = config.encoder_config();
    const auto train_config = config.train_config();
    const std::uint64_t seed = config.seed();
    LoadedData data = load_data(config);
    if (data.vocab.size() == 0) throw DataError("interaction file holds no records");

    const fs::path out_dir = prepare_output_dir(config);
    LockFile lock(out_dir);
    write_text(out_dir / "manifest.cfg", config.manifest());

    Model model = make_model(encoder_config, data.vocab.size(), config.margin());
    model.stats = compute_feature_stats(data.drugs);
    Rng root(seed);
    Rng init_rng = root.derive("init");
    xavier_init(model, init_rng);
    AdamState state = AdamState::for_model(model);

    const TrainResult result = train_model(model, state, data.drugs, data.positives,
                                           train_config, root.derive("train"));

    std::ostringstream trace;
    trace << "epoch\tmean_loss\twall_seconds\n";
    char buf[96];
    for (const auto& row : result.trace) {
      std::snprintf(buf, sizeof buf, "%zu\t%.12g\t%.3f\n", row.epoch, row.mean_loss,
                    row.wall_seconds);
      trace << buf;
    }
    write_text(out_dir / "loss_trace.tsv", trace.str());
    save_checkpoint((out_dir / "checkpoint.bin").string(), model, data.vocab, &state);

    std::cout << "checkpoint: " << (out_dir / "checkpoint.bin").string() << "\n";
    std::cout << "loss_trace: " << (out_dir / "loss_trace.tsv").string() << "\n";
    std::cout << "manifest: " << (out_dir / "manifest.cfg").string() << "\n";
    return kExitOk;
  });
}

int cmd_eval(const RunConfig& config) {
  return run_guarded([&]() {
    const auto train_config = config.train_config();
    const std::uint64_t seed = config.seed();
    const std::string mode = config.get_string("eval.mode");
    const bool per_side_effect = config.get_bool("eval.per_side_effect");
    const fs::path out_dir = prepare_output_dir(config);
    LockFile lock(out_dir);

    EvalReport report;
    SideEffectVocab report_vocab;

    if (mode == "crossvalidate") {
      LoadedData data = load_data(config);
      const std::size_t k = config.get_u64("eval.folds");
      report = crossvalidate(data.drugs, data.positives, data.vocab, config.encoder_config(),
                             train_config, config.margin(), k, Rng(seed).derive("crossval"),
                             per_side_effect);
      report_vocab = data.vocab;
    } else if (mode == "single") {
      Checkpoint ckpt = load_checkpoint(require_path(config, "checkpoint"));
      DrugTable drugs = parse_drugs(require_path(config, "data.drugs"));
      SideEffectVocab vocab = ckpt.vocab;
      auto positives =
          parse_interactions(require_path(config, "data.interactions"), drugs, vocab);
      check_checkpoint_matches(ckpt, config.encoder_config(), vocab);

      const PositiveIndex index = PositiveIndex::build(positives);
      Rng neg_rng = Rng(seed).derive("eval-negatives");
      auto eval_set = build_eval_set(positives, drugs, index, neg_rng);
      auto scored = score_examples(ckpt.model, drugs, eval_set, train_config.objective);
      report.overall_auroc = auroc(scored);
      report.scored_examples = scored.size();
      for (const auto& e : scored) {
        auto& c = report.counts[e.side_effect_id];
        if (e.positive) {
          ++c.positives;
        } else {
          ++c.negatives;
        }
      }
      if (per_side_effect) {
        report.per_side_effect = per_side_effect_auroc(scored, &report.skipped_strata);
      }
      report_vocab = vocab;
    } else {
      throw ConfigError("eval.mode must be 'single' or 'crossvalidate', got '" + mode + "'");
    }

    for (int z : report.skipped_strata) {
      std::cerr << "warning: side effect " << report_vocab.entry(z).first
                << " lacks both classes, stratum skipped\n";
    }
    write_text(out_dir / "eval_report.txt", format_eval_report(report, report_vocab));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", report.overall_auroc);
    std::cout << buf << "\n";
    return kExitOk;
  });
}

int cmd_predict(const RunConfig& config) {
  return run_guarded([&]() {
    const auto objective = config.train_config().objective;
    Checkpoint ckpt = load_checkpoint(require_path(config, "checkpoint"));
    DrugTable drugs = parse_drugs(require_path(config, "data.drugs"));
    const std::string pairs_path = require_path(config, "pairs");
    const fs::path out_dir = prepare_output_dir(config);
    LockFile lock(out_dir);

    std::ifstream in(pairs_path);
    if (!in) throw ConfigError("cannot open pairs file: " + pairs_path);

    const std::size_t want_cols = objective == Objective::kBinaryMargin ? 3 : 2;
    struct Row {
      std::string d1, d2;
      int z = 0;
    };
    std::vector<Row> rows;
    std::set<std::string> unknown;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      auto cols = split_columns(line);
      if (cols.size() != want_cols) {
        throw ParseError(pairs_path + ":" + std::to_string(lineno) + ": expected " +
                         std::to_string(want_cols) + " columns, got " +
                         std::to_string(cols.size()));
      }
      Row r{cols[0], cols[1], 0};
      if (want_cols == 3) {
        r.z = ckpt.vocab.lookup(cols[2]);
        if (r.z < 0) {
          throw DataError(pairs_path + ":" + std::to_string(lineno) +
                          ": unknown side effect concept '" + cols[2] + "'");
        }
      }
      if (!drugs.find(r.d1)) unknown.insert(r.d1);
      if (!drugs.find(r.d2)) unknown.insert(r.d2);
      rows.push_back(std::move(r));
    }
    if (!unknown.empty()) {
      std::string list;
      for (const auto& id : unknown) {
        if (!list.empty()) list += ", ";
        list += id;
      }
      throw DataError("pairs file references unknown drug ids: " + list);
    }

    std::ostringstream out;
    char buf[64];
    if (objective == Objective::kBinaryMargin) {
      out << "drug1\tdrug2\tside_effect\tscore\n";
      for (const auto& r : rows) {
        Tape tape;
        auto enc = encode_pair(tape, drugs.get(r.d1), drugs.get(r.d2), ckpt.model.config,
                               ckpt.model.encoder, ckpt.model.stats, Mode::kEval, nullptr);
        const double score =
            -score_binary(tape, enc.drug_x, enc.drug_y, r.z, ckpt.model.binary).item();
        std::snprintf(buf, sizeof buf, "%.17g", score);
        out << r.d1 << '\t' << r.d2 << '\t' << ckpt.vocab.entry(r.z).first << '\t' << buf
            << "\n";
      }
    } else {
      out << "drug1\tdrug2";
      for (std::size_t z = 0; z < ckpt.vocab.size(); ++z) {
        out << '\t' << ckpt.vocab.entries()[z].first;
      }
      out << "\n";
      for (const auto& r : rows) {
        Tape tape;
        auto enc = encode_pair(tape, drugs.get(r.d1), drugs.get(r.d2), ckpt.model.config,
                               ckpt.model.encoder, ckpt.model.stats, Mode::kEval, nullptr);
        auto probs = predict_multilabel(tape, enc.drug_x, enc.drug_y, ckpt.model.multilabel);
        out << r.d1 << '\t' << r.d2;
        for (double v : probs.values()) {
          std::snprintf(buf, sizeof buf, "%.17g", v);
          out << '\t' << buf;
        }
        out << "\n";
      }
    }
    write_text(out_dir / "predictions.tsv", out.str());
    std::cout << (out_dir / "predictions.tsv").string() << "\n";
    return kExitOk;
  });
}

int cmd_export_embeddings(const RunConfig& config) {
  return run_guarded([&]() {
    Checkpoint ckpt = load_checkpoint(require_path(config, "checkpoint"));
    DrugTable drugs = parse_drugs(require_path(config, "data.drugs"));
    const std::string pairs_path = require_path(config, "pairs");
    const fs::path out_dir = prepare_output_dir(config);
    LockFile lock(out_dir);

    std::ifstream in(pairs_path);
    if (!in) throw ConfigError("cannot open pairs file: " + pairs_path);
    std::vector<InteractionRecord> records;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line[0] == '#') continue;
      auto cols = split_columns(line);
      if (cols.size() != 4) {
        throw ParseError(pairs_path + ":" + std::to_string(lineno) +
                         ": expected 4 columns (drug1, drug2, concept, label), got " +
                         std::to_string(cols.size()));
      }
      const int z = ckpt.vocab.lookup(cols[2]);
      if (z < 0) {
        throw DataError(pairs_path + ":" + std::to_string(lineno) +
                        ": unknown side effect concept '" + cols[2] + "'");
      }
      if (cols[3] != "0" && cols[3] != "1") {
        throw ParseError(pairs_path + ":" + std::to_string(lineno) +
                         ": label must be 0 or 1, got '" + cols[3] + "'");
      }
      records.push_back(InteractionRecord{cols[0], cols[1], z, cols[3] == "1"});
    }

    const fs::path out_path = out_dir / "embeddings.tsv";
    export_embeddings(ckpt.model, drugs, records, out_path.string());
    std::cout << out_path.string() << "\n";
    return kExitOk;
  });
}

}  // namespace ddi
