#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "agcn/errors.hpp"
#include "agcn/model.hpp"

namespace agcn {

inline constexpr char kCheckpointMagic[8] = {'A', 'G', 'C', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// ---- config <-> key=value text (also the checkpoint's config echo)

inline std::string config_to_kv(const ModelConfig& c, GraphSource source) {
  std::ostringstream os;
  os << "alpha=" << fmt17(c.alpha) << '\n';
  os << "variant=" << to_string(c.variant) << '\n';
  os << "latent_dim=" << c.latent_dim << '\n';
  os << "lg_bias=" << (c.lg_bias ? 1 : 0) << '\n';
  os << "hidden=";
  if (!c.hidden_dims)
    os << "auto";
  else if (c.hidden_dims->empty())
    os << "none";
  else
    for (std::size_t i = 0; i < c.hidden_dims->size(); ++i)
      os << (i ? "," : "") << (*c.hidden_dims)[i];
  os << '\n';
  os << "leaky_slope=" << fmt17(c.leaky_slope) << '\n';
  os << "sparse_reduction=" << to_string(c.sparse_reduction) << '\n';
  os << "degree_floor=" << fmt17(c.degree_floor) << '\n';
  os << "lr=" << fmt17(c.optimizer.lr) << '\n';
  os << "momentum=" << fmt17(c.optimizer.momentum) << '\n';
  os << "weight_decay=" << fmt17(c.optimizer.weight_decay) << '\n';
  os << "decay_factor=" << fmt17(c.schedule.decay_factor) << '\n';
  os << "decay_every=" << c.schedule.decay_every << '\n';
  os << "total_epochs=" << c.schedule.total_epochs << '\n';
  os << "batch_size=" << c.batch_size << '\n';
  os << "seed=" << c.seed << '\n';
  os << "graph_source=" << (source == GraphSource::Fixed ? "fixed" : "adaptive") << '\n';
  return os.str();
}

struct ParsedConfig {
  ModelConfig config;
  GraphSource source = GraphSource::Adaptive;
};

inline ParsedConfig parse_config_kv(const std::string& text) {
  ParsedConfig out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  auto as_double = [&](const std::string& v) {
    try {
      std::size_t used;
      double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return d;
    } catch (const std::exception&) {
      throw input_error("config line " + std::to_string(lineno) + ": bad number '" + v + "'");
    }
  };
  auto as_size = [&](const std::string& v) {
    try {
      std::size_t used;
      unsigned long long n = std::stoull(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing");
      return static_cast<std::size_t>(n);
    } catch (const std::exception&) {
      throw input_error("config line " + std::to_string(lineno) + ": bad count '" + v + "'");
    }
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw input_error("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    ModelConfig& c = out.config;
    if (key == "alpha")
      c.alpha = as_double(val);
    else if (key == "variant")
      c.variant = parse_lg_variant(val);
    else if (key == "latent_dim")
      c.latent_dim = as_size(val);
    else if (key == "lg_bias")
      c.lg_bias = as_size(val) != 0;
    else if (key == "hidden") {
      if (val == "auto")
        c.hidden_dims.reset();
      else if (val == "none")
        c.hidden_dims = std::vector<std::size_t>{};
      else {
        std::vector<std::size_t> dims;
        std::size_t start = 0;
        while (start <= val.size()) {
          const std::size_t comma = val.find(',', start);
          const std::string tok =
              val.substr(start, comma == std::string::npos ? std::string::npos
                                                           : comma - start);
          dims.push_back(as_size(tok));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
        c.hidden_dims = std::move(dims);
      }
    } else if (key == "leaky_slope")
      c.leaky_slope = as_double(val);
    else if (key == "sparse_reduction")
      c.sparse_reduction = parse_sparse_reduction(val);
    else if (key == "degree_floor")
      c.degree_floor = as_double(val);
    else if (key == "lr")
      c.optimizer.lr = as_double(val);
    else if (key == "momentum")
      c.optimizer.momentum = as_double(val);
    else if (key == "weight_decay")
      c.optimizer.weight_decay = as_double(val);
    else if (key == "decay_factor")
      c.schedule.decay_factor = as_double(val);
    else if (key == "decay_every")
      c.schedule.decay_every = as_size(val);
    else if (key == "total_epochs")
      c.schedule.total_epochs = as_size(val);
    else if (key == "batch_size")
      c.batch_size = as_size(val);
    else if (key == "seed")
      c.seed = as_size(val);
    else if (key == "graph_source") {
      if (val == "fixed")
        out.source = GraphSource::Fixed;
      else if (val == "adaptive")
        out.source = GraphSource::Adaptive;
      else
        throw input_error("config line " + std::to_string(lineno) +
                          ": graph_source must be adaptive|fixed");
    } else
      throw input_error("config line " + std::to_string(lineno) + ": unknown key '" + key +
                        "'");
  }
  return out;
}

// ---- binary primitives (native byte order; see the layout notes in README)

namespace detail {

inline void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
inline void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}
inline void write_mat(std::ostream& os, const Matrix& m) {
  write_u64(os, m.rows());
  write_u64(os, m.cols());
  os.write(reinterpret_cast<const char*>(m.raw().data()),
           static_cast<std::streamsize>(m.size() * sizeof(double)));
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw input_error("checkpoint: truncated");
  return v;
}
inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v;
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v))
    throw input_error("checkpoint: truncated");
  return v;
}
inline std::string read_str(std::istream& is, std::uint64_t max = 1u << 20) {
  const std::uint64_t n = read_u64(is);
  if (n > max) throw input_error("checkpoint: implausible string length");
  std::string s(n, '\0');
  if (n && !is.read(s.data(), static_cast<std::streamsize>(n)))
    throw input_error("checkpoint: truncated");
  return s;
}
inline Matrix read_mat(std::istream& is) {
  const std::uint64_t r = read_u64(is);
  const std::uint64_t c = read_u64(is);
  if (r > (1u << 24) || c > (1u << 24) || (r != 0 && c > (1ull << 40) / r))
    throw input_error("checkpoint: implausible matrix shape");
  Matrix m(r, c);
  if (m.size() &&
      !is.read(reinterpret_cast<char*>(m.raw().data()),
               static_cast<std::streamsize>(m.size() * sizeof(double))))
    throw input_error("checkpoint: truncated");
  return m;
}

}  // namespace detail

// Layout: magic, version, config echo (length-prefixed key=value text),
// label names, feature dim, embedding matrix, the fixed graph when the
// source is fixed, named parameter matrices, velocity matrices (same
// order). Doubles are raw little-endian IEEE754, so save -> load -> save
// reproduces the bytes exactly.
inline void save_checkpoint(std::ostream& os, Model& m) {
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u32(os, kCheckpointVersion);
  detail::write_str(os, config_to_kv(m.config, m.graph_source));
  detail::write_u64(os, m.embeddings.count());
  for (const auto& l : m.embeddings.labels) detail::write_str(os, l);
  detail::write_u64(os, m.feature_dim);
  detail::write_mat(os, m.embeddings.values);
  if (m.graph_source == GraphSource::Fixed) detail::write_mat(os, m.fixed_graph);
  auto params = m.named_params();
  detail::write_u64(os, params.size());
  for (auto& np : params) {
    detail::write_str(os, np.name);
    detail::write_mat(os, np.param->value);
  }
  detail::write_u64(os, m.velocities.size());
  for (const auto& v : m.velocities) detail::write_mat(os, v);
  if (!os) throw input_error("checkpoint: write failed");
}

inline Model load_checkpoint(std::istream& is) {
  char magic[sizeof kCheckpointMagic];
  if (!is.read(magic, sizeof magic) ||
      std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0)
    throw input_error("checkpoint: bad magic");
  const std::uint32_t version = detail::read_u32(is);
  if (version != kCheckpointVersion)
    throw input_error("checkpoint: unsupported version " + std::to_string(version));
  const ParsedConfig pc = parse_config_kv(detail::read_str(is));
  const std::uint64_t n_labels = detail::read_u64(is);
  if (n_labels == 0 || n_labels > (1u << 24))
    throw input_error("checkpoint: implausible label count");
  EmbeddingMatrix emb;
  for (std::uint64_t i = 0; i < n_labels; ++i)
    emb.labels.push_back(detail::read_str(is));
  const std::uint64_t feature_dim = detail::read_u64(is);
  emb.values = detail::read_mat(is);
  Matrix fixed;
  if (pc.source == GraphSource::Fixed) fixed = detail::read_mat(is);

  Model m = pc.source == GraphSource::Fixed
                ? make_model_fixed(std::move(emb), feature_dim, pc.config, std::move(fixed))
                : make_model(std::move(emb), feature_dim, pc.config);

  auto params = m.named_params();
  const std::uint64_t n_params = detail::read_u64(is);
  if (n_params != params.size())
    throw input_error("checkpoint: holds " + std::to_string(n_params) +
                      " parameters, model expects " + std::to_string(params.size()));
  for (auto& np : params) {
    const std::string name = detail::read_str(is);
    if (name != np.name)
      throw input_error("checkpoint: parameter '" + name + "' where '" + np.name +
                        "' was expected");
    Matrix v = detail::read_mat(is);
    if (!v.same_shape(np.param->value))
      throw input_error("checkpoint: parameter '" + name + "' is " + v.shape_str() +
                        ", model expects " + np.param->value.shape_str());
    np.param->value = std::move(v);
    np.param->grad = Matrix(np.param->value.rows(), np.param->value.cols());
  }
  const std::uint64_t n_vel = detail::read_u64(is);
  if (n_vel != m.velocities.size())
    throw input_error("checkpoint: holds " + std::to_string(n_vel) +
                      " velocities, model expects " + std::to_string(m.velocities.size()));
  for (auto& vel : m.velocities) {
    Matrix v = detail::read_mat(is);
    if (!v.same_shape(vel))
      throw input_error("checkpoint: velocity is " + v.shape_str() + ", model expects " +
                        vel.shape_str());
    vel = std::move(v);
  }
  return m;
}

}  // namespace agcn
