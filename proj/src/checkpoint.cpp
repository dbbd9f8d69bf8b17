#include "ddi/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace ddi {

namespace {

constexpr char kMagic[8] = {'D', 'D', 'I', 'C', 'K', 'P', 'T', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("truncated checkpoint: " + path);
  return v;
}

double read_f64(std::istream& in, const std::string& path) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw ParseError("truncated checkpoint: " + path);
  return v;
}

std::string read_str(std::istream& in, const std::string& path) {
  const std::uint64_t n = read_u64(in, path);
  if (n > (1ull << 32)) throw ParseError("corrupt string length in checkpoint: " + path);
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw ParseError("truncated checkpoint: " + path);
  return s;
}

void read_doubles(std::istream& in, std::vector<double>& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) throw ParseError("truncated checkpoint: " + path);
}

}  // namespace

AdamState AdamState::for_model(const Model& model) {
  AdamState s;
  for (const auto& [name, array] : named_params(model)) {
    s.names.push_back(name);
    s.first_moment.emplace_back(array.size(), 0.0);
    s.second_moment.emplace_back(array.size(), 0.0);
  }
  return s;
}

void save_checkpoint(const std::string& path, const Model& model,
                     const SideEffectVocab& vocab, const AdamState* optimizer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof kMagic);
  write_u64(out, 1);  // format version

  const auto& c = model.config;
  write_u64(out, c.feature_dim);
  write_u64(out, c.steps);
  write_u64(out, c.heads);
  write_f64(out, c.dropout_p);
  write_f64(out, c.leaky_slope);
  write_str(out, variant_name(c.variant));
  write_u64(out, c.attention_scaling ? 1 : 0);
  write_f64(out, c.layer_norm_eps);
  write_u64(out, c.atom_vocab);
  write_u64(out, c.bond_types);
  write_f64(out, model.binary.margin);

  for (double v : model.stats.mean) write_f64(out, v);
  for (double v : model.stats.stdev) write_f64(out, v);

  write_u64(out, vocab.size());
  for (const auto& [concept_id, name] : vocab.entries()) {
    write_str(out, concept_id);
    write_str(out, name);
  }

  const auto params = named_params(model);
  write_u64(out, params.size());
  for (const auto& [name, array] : params) {
    write_str(out, name);
    write_u64(out, array.rank());
    for (std::size_t dim : array.shape()) write_u64(out, dim);
    write_doubles(out, array.values());
  }

  write_u64(out, optimizer ? 1 : 0);
  if (optimizer) {
    write_f64(out, optimizer->beta1);
    write_f64(out, optimizer->beta2);
    write_f64(out, optimizer->epsilon);
    write_u64(out, optimizer->iteration);
    write_u64(out, optimizer->names.size());
    for (std::size_t i = 0; i < optimizer->names.size(); ++i) {
      write_str(out, optimizer->names[i]);
      write_u64(out, optimizer->first_moment[i].size());
      write_doubles(out, optimizer->first_moment[i]);
      write_doubles(out, optimizer->second_moment[i]);
    }
  }
  if (!out) throw ConfigError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError("not a checkpoint file: " + path);
  }
  const std::uint64_t version = read_u64(in, path);
  if (version != 1) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  }

  EncoderConfig c;
  c.feature_dim = read_u64(in, path);
  c.steps = read_u64(in, path);
  c.heads = read_u64(in, path);
  c.dropout_p = read_f64(in, path);
  c.leaky_slope = read_f64(in, path);
  c.variant = variant_from_name(read_str(in, path));
  c.attention_scaling = read_u64(in, path) != 0;
  c.layer_norm_eps = read_f64(in, path);
  c.atom_vocab = read_u64(in, path);
  c.bond_types = read_u64(in, path);
  const double margin = read_f64(in, path);

  FeatureStats stats;
  for (double& v : stats.mean) v = read_f64(in, path);
  for (double& v : stats.stdev) v = read_f64(in, path);

  SideEffectVocab vocab;
  const std::uint64_t vocab_size = read_u64(in, path);
  for (std::uint64_t i = 0; i < vocab_size; ++i) {
    const std::string concept_id = read_str(in, path);
    const std::string name = read_str(in, path);
    vocab.add_or_get(concept_id, name);
  }
  if (vocab.size() != vocab_size) {
    throw ParseError("duplicate concept identifiers in checkpoint vocabulary: " + path);
  }

  Checkpoint ckpt;
  ckpt.model = make_model(c, vocab_size, margin);
  ckpt.model.stats = stats;
  ckpt.vocab = std::move(vocab);

  auto params = named_params(ckpt.model);
  const std::uint64_t tensor_count = read_u64(in, path);
  if (tensor_count != params.size()) {
    throw ParseError("checkpoint holds " + std::to_string(tensor_count) + " tensors, model expects " +
                     std::to_string(params.size()) + ": " + path);
  }
  for (std::uint64_t i = 0; i < tensor_count; ++i) {
    const std::string name = read_str(in, path);
    if (name != params[i].first) {
      throw ParseError("checkpoint tensor '" + name + "' does not match expected '" +
                       params[i].first + "': " + path);
    }
    const std::uint64_t rank = read_u64(in, path);
    Shape shape(rank);
    for (auto& dim : shape) dim = read_u64(in, path);
    if (shape != params[i].second.shape()) {
      throw ParseError("checkpoint tensor '" + name + "' has shape " + shape_str(shape) +
                       ", model expects " + shape_str(params[i].second.shape()) + ": " + path);
    }
    read_doubles(in, params[i].second.values(), path);
  }

  if (read_u64(in, path) != 0) {
    AdamState opt;
    opt.beta1 = read_f64(in, path);
    opt.beta2 = read_f64(in, path);
    opt.epsilon = read_f64(in, path);
    opt.iteration = read_u64(in, path);
    const std::uint64_t n = read_u64(in, path);
    if (n != params.size()) {
      throw ParseError("optimizer state count mismatch in checkpoint: " + path);
    }
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::string name = read_str(in, path);
      if (name != params[i].first) {
        throw ParseError("optimizer state '" + name + "' out of order in checkpoint: " + path);
      }
      const std::uint64_t sz = read_u64(in, path);
      if (sz != params[i].second.size()) {
        throw ParseError("optimizer state '" + name + "' size mismatch in checkpoint: " + path);
      }
      opt.names.push_back(name);
      opt.first_moment.emplace_back(sz, 0.0);
      opt.second_moment.emplace_back(sz, 0.0);
      read_doubles(in, opt.first_moment.back(), path);
      read_doubles(in, opt.second_moment.back(), path);
    }
    ckpt.optimizer = std::move(opt);
  }
  return ckpt;
}

}  // namespace ddi
