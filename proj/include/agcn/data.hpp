#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "agcn/errors.hpp"
#include "agcn/labelgraph.hpp"
#include "agcn/matrix.hpp"
#include "agcn/rng.hpp"

namespace agcn {

struct LabeledSample {
  std::vector<double> feature;  // D reals
  std::vector<int> labels;      // C entries in {0,1}
};

// ---- embeddings: one line per label, "name v1 v2 ... v_de"

inline EmbeddingMatrix load_embeddings(std::istream& is) {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> rows;
  std::unordered_map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string name;
    if (!(ss >> name))
      throw input_error("embeddings line " + std::to_string(lineno) + ": no label token");
    if (!seen.emplace(name, lineno).second)
      throw input_error("embeddings line " + std::to_string(lineno) +
                        ": duplicate label '" + name + "'");
    std::vector<double> vals;
    double v;
    while (ss >> v) vals.push_back(v);
    if (!ss.eof())
      throw input_error("embeddings line " + std::to_string(lineno) +
                        ": unparsable value after " + std::to_string(vals.size()) +
                        " numbers");
    if (vals.empty())
      throw input_error("embeddings line " + std::to_string(lineno) + ": label '" + name +
                        "' has no values");
    if (!rows.empty() && vals.size() != rows.front().size())
      throw input_error("embeddings line " + std::to_string(lineno) + ": expected " +
                        std::to_string(rows.front().size()) + " values, got " +
                        std::to_string(vals.size()));
    labels.push_back(name);
    rows.push_back(std::move(vals));
  }
  if (labels.empty()) throw input_error("embeddings: empty input");
  EmbeddingMatrix emb;
  emb.labels = std::move(labels);
  emb.values = Matrix(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) emb.values(i, j) = rows[i][j];
  emb.validate();
  return emb;
}

inline void save_embeddings(std::ostream& os, const EmbeddingMatrix& emb) {
  char buf[40];
  for (std::size_t i = 0; i < emb.count(); ++i) {
    os << emb.labels[i];
    for (std::size_t j = 0; j < emb.dim(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", emb.values(i, j));
      os << ' ' << buf;
    }
    os << '\n';
  }
}

// ---- datasets: JSON lines, {"labels": ["cat", ...], "feature": [ ... ]}

struct RejectedRecord {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<LabeledSample> samples;
  std::vector<RejectedRecord> rejected;
  std::size_t lines_in = 0;  // non-empty records seen
};

// Training loads reject all-zero-label records (with a reason); evaluation
// loads keep them. Unknown labels and ragged features are hard errors.
inline LoadResult load_dataset(std::istream& is, const std::vector<std::string>& label_list,
                               bool reject_unlabeled) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < label_list.size(); ++i) index.emplace(label_list[i], i);
  LoadResult res;
  std::string line;
  std::size_t lineno = 0;
  std::size_t feature_dim = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    ++res.lines_in;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw input_error("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("labels") || !j.contains("feature"))
      throw input_error("dataset line " + std::to_string(lineno) +
                        ": record needs 'labels' and 'feature'");
    LabeledSample s;
    s.labels.assign(label_list.size(), 0);
    for (const auto& name : j.at("labels")) {
      if (!name.is_string())
        throw input_error("dataset line " + std::to_string(lineno) +
                          ": label entries must be strings");
      auto it = index.find(name.get<std::string>());
      if (it == index.end())
        throw input_error("dataset line " + std::to_string(lineno) + ": unknown label '" +
                          name.get<std::string>() + "'");
      s.labels[it->second] = 1;
    }
    const auto& feat = j.at("feature");
    if (!feat.is_array())
      throw input_error("dataset line " + std::to_string(lineno) + ": feature must be an array");
    for (const auto& v : feat) {
      if (!v.is_number())
        throw input_error("dataset line " + std::to_string(lineno) +
                          ": feature entries must be numbers");
      s.feature.push_back(v.get<double>());
    }
    if (s.feature.empty())
      throw input_error("dataset line " + std::to_string(lineno) + ": empty feature");
    if (feature_dim == 0)
      feature_dim = s.feature.size();
    else if (s.feature.size() != feature_dim)
      throw input_error("dataset line " + std::to_string(lineno) + ": feature has " +
                        std::to_string(s.feature.size()) + " dims, expected " +
                        std::to_string(feature_dim));
    for (double v : s.feature)
      if (!std::isfinite(v))
        throw input_error("dataset line " + std::to_string(lineno) +
                          ": non-finite feature value");
    bool any = false;
    for (int l : s.labels) any = any || (l != 0);
    if (!any && reject_unlabeled) {
      res.rejected.push_back({lineno, "no active labels"});
      continue;
    }
    res.samples.push_back(std::move(s));
  }
  return res;
}

inline void save_dataset(std::ostream& os, const std::vector<LabeledSample>& samples,
                         const std::vector<std::string>& label_list) {
  for (const auto& s : samples) {
    nlohmann::json j;
    j["labels"] = nlohmann::json::array();
    for (std::size_t i = 0; i < s.labels.size(); ++i)
      if (s.labels[i]) j["labels"].push_back(label_list[i]);
    j["feature"] = s.feature;
    os << j.dump() << '\n';
  }
}

// Stacks samples into dense X (N x D) and Y (N x C).
inline Matrix features_matrix(const std::vector<LabeledSample>& samples) {
  if (samples.empty()) throw input_error("features_matrix: no samples");
  Matrix x(samples.size(), samples.front().feature.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].feature.size() != x.cols())
      throw input_error("features_matrix: sample " + std::to_string(i) + " has " +
                        std::to_string(samples[i].feature.size()) + " dims, expected " +
                        std::to_string(x.cols()));
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) = samples[i].feature[j];
  }
  return x;
}

inline Matrix labels_matrix(const std::vector<LabeledSample>& samples, std::size_t n_labels) {
  if (samples.empty()) throw input_error("labels_matrix: no samples");
  Matrix y(samples.size(), n_labels);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].labels.size() != n_labels)
      throw input_error("labels_matrix: sample " + std::to_string(i) + " has " +
                        std::to_string(samples[i].labels.size()) + " labels, expected " +
                        std::to_string(n_labels));
    for (std::size_t j = 0; j < n_labels; ++j) y(i, j) = samples[i].labels[j] ? 1.0 : 0.0;
  }
  return y;
}

// ---- synthetic block-co-occurrence generator

struct SyntheticSpec {
  std::size_t num_labels = 12;
  std::vector<std::vector<std::size_t>> blocks;  // partition of 0..C-1
  std::size_t embed_dim = 8;
  std::size_t feature_dim = 16;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  double p_in = 0.7;
  double p_out = 0.05;
  double noise = 0.1;
  std::uint64_t seed = 1;

  // Near-equal contiguous blocks; the trailing labels pad the last block.
  static std::vector<std::vector<std::size_t>> contiguous_blocks(std::size_t c,
                                                                 std::size_t n_blocks) {
    if (n_blocks == 0 || n_blocks > c)
      throw config_error("synthetic spec: need 1.." + std::to_string(c) + " blocks, got " +
                         std::to_string(n_blocks));
    std::vector<std::vector<std::size_t>> blocks(n_blocks);
    for (std::size_t j = 0; j < c; ++j) blocks[std::min(j * n_blocks / c, n_blocks - 1)].push_back(j);
    return blocks;
  }

  void validate() const {
    if (num_labels == 0) throw config_error("synthetic spec: zero labels");
    if (embed_dim == 0 || feature_dim == 0)
      throw config_error("synthetic spec: zero embedding or feature dimension");
    if (blocks.empty()) throw config_error("synthetic spec: no blocks");
    std::vector<int> seen(num_labels, 0);
    for (const auto& b : blocks) {
      if (b.empty()) throw config_error("synthetic spec: empty block");
      for (std::size_t j : b) {
        if (j >= num_labels)
          throw config_error("synthetic spec: block label " + std::to_string(j) +
                             " out of range");
        if (seen[j]++)
          throw config_error("synthetic spec: label " + std::to_string(j) +
                             " appears in two blocks");
      }
    }
    for (std::size_t j = 0; j < num_labels; ++j)
      if (!seen[j])
        throw config_error("synthetic spec: label " + std::to_string(j) +
                           " missing from blocks");
    if (!(p_in >= 0.0 && p_in <= 1.0 && p_out >= 0.0 && p_out <= 1.0))
      throw config_error("synthetic spec: probabilities must lie in [0,1]");
    if (!(p_in > p_out)) throw config_error("synthetic spec: p_in must exceed p_out");
    if (noise < 0.0) throw config_error("synthetic spec: negative noise scale");
  }
};

struct SynthData {
  EmbeddingMatrix embeddings;
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> test;
  Matrix block_matrix;                    // C x C binary co-membership
  std::vector<std::size_t> block_of_label;
};

// Each label gets its own random prototype in feature space, so the labels
// carry distinct evidence; co-occurrence is injected only through the block
// draw. Prototype magnitudes alternate by label parity (strong 2.0, faint
// 0.3): faint labels are hard to detect from their own evidence alone, so a
// model only gains on them by exploiting co-occurrence with their strong
// block-mates — the sharing effect the label graph exists to capture.
// Embeddings are noisy linear projections of the prototypes plus a shared
// per-block anchor, so embedding similarity correlates with block membership
// without revealing it outright. Per sample: one block is drawn, in-block
// labels activate with p_in and out-of-block with p_out; a sample that comes
// up empty gets one uniformly chosen in-block label. The feature is the sum
// of active prototypes plus N(0, noise^2) jitter.
//
// Draw order (single seeded stream): block anchors, prototypes, projection,
// embedding noise, then per sample: block, C activation draws, the rescue
// draw if needed, D noise draws.
inline SynthData synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t c = spec.num_labels, d = spec.feature_dim, de = spec.embed_dim;
  Rng rng(spec.seed);
  SynthData out;

  out.block_of_label.assign(c, 0);
  for (std::size_t b = 0; b < spec.blocks.size(); ++b)
    for (std::size_t j : spec.blocks[b]) out.block_of_label[j] = b;

  Matrix anchors(spec.blocks.size(), de);
  for (double& v : anchors.raw()) v = rng.normal();
  Matrix prototypes(c, d);
  for (std::size_t j = 0; j < c; ++j) {
    const double scale = j % 2 == 0 ? 2.0 : 0.3;
    for (std::size_t k = 0; k < d; ++k) prototypes(j, k) = scale * rng.normal();
  }

  Matrix projection(de, d);
  const double pscale = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : projection.raw()) v = rng.normal() * pscale;

  out.embeddings.values = Matrix(c, de);
  int width = 1;
  for (std::size_t t = c > 0 ? c - 1 : 0; t >= 10; t /= 10) ++width;
  if (width > 20) width = 20;  // size_t never needs more digits
  for (std::size_t j = 0; j < c; ++j) {
    char name[32];
    std::snprintf(name, sizeof name, "L%0*zu", width, j);
    out.embeddings.labels.push_back(name);
    for (std::size_t k = 0; k < de; ++k) {
      double v = 0.5 * anchors(out.block_of_label[j], k);
      for (std::size_t m = 0; m < d; ++m) v += projection(k, m) * prototypes(j, m);
      out.embeddings.values(j, k) = v + 0.05 * rng.normal();
    }
  }
  out.embeddings.validate();

  out.block_matrix = Matrix(c, c);
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j)
      out.block_matrix(i, j) = out.block_of_label[i] == out.block_of_label[j] ? 1.0 : 0.0;

  auto draw_sample = [&]() {
    const std::size_t b = static_cast<std::size_t>(rng.index(spec.blocks.size()));
    LabeledSample s;
    s.labels.assign(c, 0);
    std::size_t active = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = out.block_of_label[j] == b ? spec.p_in : spec.p_out;
      if (rng.uniform() < p) {
        s.labels[j] = 1;
        ++active;
      }
    }
    if (active == 0) {
      const auto& blk = spec.blocks[b];
      s.labels[blk[static_cast<std::size_t>(rng.index(blk.size()))]] = 1;
    }
    s.feature.assign(d, 0.0);
    for (std::size_t j = 0; j < c; ++j)
      if (s.labels[j])
        for (std::size_t k = 0; k < d; ++k) s.feature[k] += prototypes(j, k);
    for (std::size_t k = 0; k < d; ++k) s.feature[k] += spec.noise * rng.normal();
    return s;
  };
  out.train.reserve(spec.n_train);
  for (std::size_t i = 0; i < spec.n_train; ++i) out.train.push_back(draw_sample());
  out.test.reserve(spec.n_test);
  for (std::size_t i = 0; i < spec.n_test; ++i) out.test.push_back(draw_sample());
  return out;
}

}  // namespace agcn
