// Command-line harness: synthetic data generation, training, evaluation,
// alpha sweeps, graph export, SVG plots, and a finite-difference gradient
// audit. Exit codes: 0 success, 1 internal failure or failed audit,
// 2 configuration/usage error, 3 input error, 4 training divergence.
//
// Every output is written without timestamps, so re-running a subcommand
// with the same inputs reproduces each file byte for byte.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "agcn/agcn.hpp"

namespace fs = std::filesystem;
using namespace agcn;

namespace {

std::string g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) throw input_error("cannot open '" + path + "' for reading");
  return is;
}

std::ofstream open_output(const fs::path& path, bool binary = false) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw input_error("cannot open '" + path.string() + "' for writing");
  return os;
}

void finish_output(std::ofstream& os, const fs::path& path) {
  os.close();
  if (!os) throw input_error("write to '" + path.string() + "' failed");
}

// --out is overridable through the environment; nothing else is.
void apply_out_override(std::string& out) {
  if (const char* env = std::getenv("AGCN_OUT"))
    if (*env) out = env;
}

fs::path prepare_out_dir(std::string& out) {
  apply_out_override(out);
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw input_error("cannot create output directory '" + out + "': " + ec.message());
  return dir;
}

std::optional<std::vector<std::size_t>> parse_hidden(const std::string& s) {
  if (s == "auto") return std::nullopt;
  if (s == "none") return std::vector<std::size_t>{};
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string tok =
        s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used;
      dims.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw config_error("bad hidden layer list '" + s + "' (expected auto, none, or " +
                         "comma-separated widths)");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return dims;
}

std::vector<double> parse_double_list(const std::string& s, const std::string& what) {
  std::vector<double> vals;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string tok =
        s.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    try {
      std::size_t used;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw config_error("bad " + what + " list '" + s + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return vals;
}

// ---- shared model options

struct ModelOpts {
  double alpha = 1.0;
  std::string variant = "default";
  std::size_t latent_dim = 0;
  bool lg_bias = false;
  std::string hidden = "auto";
  double leaky_slope = 0.2;
  std::string sparse_reduction = "sum";
  double degree_floor = 1e-6;
  double lr = 1e-2;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  double decay_factor = 10.0;
  std::size_t decay_every = 30;
  std::size_t epochs = 65;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  ModelConfig to_config() const {
    ModelConfig c;
    c.alpha = alpha;
    c.variant = parse_lg_variant(variant);
    c.latent_dim = latent_dim;
    c.lg_bias = lg_bias;
    c.hidden_dims = parse_hidden(hidden);
    c.leaky_slope = leaky_slope;
    c.sparse_reduction = parse_sparse_reduction(sparse_reduction);
    c.degree_floor = degree_floor;
    c.optimizer = {lr, momentum, weight_decay};
    c.schedule = {decay_factor, decay_every, epochs};
    c.batch_size = batch_size;
    c.seed = seed;
    c.validate();
    return c;
  }
};

CLI::Option* add_model_options(CLI::App* sub, ModelOpts& o, bool with_alpha = true) {
  CLI::Option* variant = sub->add_option("--variant", o.variant,
                                         "graph builder: default|cos|fc|dot");
  if (with_alpha)
    sub->add_option("--alpha", o.alpha, "weight of the graph-sparsity loss term");
  sub->add_option("--latent-dim", o.latent_dim,
                  "projection width of the graph builder (0 = embedding dim)");
  sub->add_flag("--lg-bias", o.lg_bias, "add row biases to the default graph builder");
  sub->add_option("--hidden", o.hidden,
                  "GCN hidden widths: auto, none, or comma list (e.g. 16,8)");
  sub->add_option("--leaky-slope", o.leaky_slope, "LeakyReLU negative slope");
  sub->add_option("--sparse-reduction", o.sparse_reduction,
                  "graph-sparsity reduction: sum|mean");
  sub->add_option("--degree-floor", o.degree_floor,
                  "lower bound on node degree before inverse sqrt");
  sub->add_option("--lr", o.lr, "initial learning rate");
  sub->add_option("--momentum", o.momentum, "SGD momentum");
  sub->add_option("--weight-decay", o.weight_decay, "L2 coefficient added to gradients");
  sub->add_option("--decay-factor", o.decay_factor, "learning-rate division factor");
  sub->add_option("--decay-every", o.decay_every, "epochs between learning-rate divisions");
  sub->add_option("--epochs", o.epochs, "total training epochs");
  sub->add_option("--batch-size", o.batch_size, "minibatch size");
  sub->add_option("--seed", o.seed, "seed for initialization and shuffling");
  return variant;
}

// ---- SVG rendering (hand-rolled; values clamped to [0,1])

std::string heat_color(double v) {
  v = std::min(1.0, std::max(0.0, v));
  const int r = static_cast<int>(255.0 + (8.0 - 255.0) * v);
  const int g = static_cast<int>(255.0 + (48.0 - 255.0) * v);
  const int b = static_cast<int>(255.0 + (107.0 - 255.0) * v);
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string svg_heatmap(const std::vector<std::string>& labels, const Matrix& m,
                        const std::string& title) {
  const std::size_t c = m.rows();
  const int cell = 24, left = 90, top = 90, pad = 16;
  const int w = left + cell * static_cast<int>(c) + pad;
  const int h = top + cell * static_cast<int>(c) + pad;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"monospace\" font-size=\"10\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"16\" font-size=\"13\">" << title << "</text>\n";
  for (std::size_t i = 0; i < c; ++i) {
    const int y = top + static_cast<int>(i) * cell;
    os << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4
       << "\" text-anchor=\"end\">" << labels[i] << "</text>\n";
    const int x = left + static_cast<int>(i) * cell;
    os << "<text x=\"" << x + cell / 2 << "\" y=\"" << top - 6
       << "\" text-anchor=\"start\" transform=\"rotate(-60 " << x + cell / 2 << " "
       << top - 6 << ")\">" << labels[i] << "</text>\n";
  }
  for (std::size_t i = 0; i < c; ++i)
    for (std::size_t j = 0; j < c; ++j) {
      const int x = left + static_cast<int>(j) * cell;
      const int y = top + static_cast<int>(i) * cell;
      os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\""
         << cell << "\" fill=\"" << heat_color(m(i, j))
         << "\" stroke=\"#dddddd\"><title>" << labels[i] << "," << labels[j] << "="
         << g6(m(i, j)) << "</title></rect>\n";
    }
  os << "</svg>\n";
  return os.str();
}

struct SweepRow {
  double alpha = 0.0;
  bool ok = true;
  double map = 0.0;
  std::size_t epoch = 0, step = 0;  // divergence site when !ok
};

std::string svg_sweep(std::vector<SweepRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const SweepRow& a, const SweepRow& b) { return a.alpha < b.alpha; });
  const int w = 480, h = 320, x0 = 60, y0 = 30, x1 = 440, y1 = 260;
  double amin = rows.front().alpha, amax = rows.back().alpha;
  if (amax <= amin) amax = amin + 1.0;
  auto px = [&](double a) { return x0 + (a - amin) / (amax - amin) * (x1 - x0); };
  auto py = [&](double v) { return y1 - v * (y1 - y0); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" font-family=\"monospace\" font-size=\"11\">\n";
  os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << x0 << "\" y=\"18\" font-size=\"13\">test mAP vs alpha</text>\n";
  for (int t = 0; t <= 4; ++t) {
    const double v = t / 4.0;
    os << "<line x1=\"" << x0 << "\" y1=\"" << g6(py(v)) << "\" x2=\"" << x1 << "\" y2=\""
       << g6(py(v)) << "\" stroke=\"#eeeeee\"/>\n";
    os << "<text x=\"" << x0 - 8 << "\" y=\"" << g6(py(v) + 4)
       << "\" text-anchor=\"end\">" << g6(v) << "</text>\n";
  }
  os << "<line x1=\"" << x0 << "\" y1=\"" << y1 << "\" x2=\"" << x1 << "\" y2=\"" << y1
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << h - 8
     << "\" text-anchor=\"middle\">alpha</text>\n";
  std::string points;
  for (const auto& r : rows) {
    os << "<text x=\"" << g6(px(r.alpha)) << "\" y=\"" << y1 + 16
       << "\" text-anchor=\"middle\">" << g6(r.alpha) << "</text>\n";
    if (r.ok) {
      points += g6(px(r.alpha)) + "," + g6(py(r.map)) + " ";
      os << "<circle cx=\"" << g6(px(r.alpha)) << "\" cy=\"" << g6(py(r.map))
         << "\" r=\"4\" fill=\"#08306b\"/>\n";
      os << "<text x=\"" << g6(px(r.alpha)) << "\" y=\"" << g6(py(r.map) - 10)
         << "\" text-anchor=\"middle\">" << g6(r.map) << "</text>\n";
    } else {
      os << "<text x=\"" << g6(px(r.alpha)) << "\" y=\"" << g6(py(0.02))
         << "\" text-anchor=\"middle\" fill=\"#b30000\">diverged</text>\n";
    }
  }
  if (!points.empty())
    os << "<polyline points=\"" << points
       << "\" fill=\"none\" stroke=\"#08306b\" stroke-width=\"1.5\"/>\n";
  os << "</svg>\n";
  return os.str();
}

void write_history_csv(const fs::path& path, const TrainResult& tr) {
  std::ofstream os = open_output(path);
  os << "epoch,lr,l_cls,l_a,l_total\n";
  for (const auto& e : tr.history)
    os << e.epoch << ',' << fmt17(e.lr) << ',' << fmt17(e.l_cls) << ',' << fmt17(e.l_a)
       << ',' << fmt17(e.l_total) << '\n';
  finish_output(os, path);
}

void export_graphs(const fs::path& dir, Model& model) {
  {
    std::ofstream os = open_output(dir / "graph_raw.csv");
    write_graph_csv(os, model.embeddings.labels, raw_graph(model));
    finish_output(os, dir / "graph_raw.csv");
  }
  {
    std::ofstream os = open_output(dir / "graph_norm.csv");
    write_graph_csv(os, model.embeddings.labels, current_graph(model));
    finish_output(os, dir / "graph_norm.csv");
  }
}

// ---- subcommands

struct SynthOpts {
  std::string out;
  std::size_t labels = 12, blocks = 3;
  std::size_t embed_dim = 8, feature_dim = 16;
  std::size_t n_train = 2000, n_test = 500;
  double p_in = 0.7, p_out = 0.05, noise = 0.1;
  std::uint64_t seed = 1;
};

int run_synth(SynthOpts& o) {
  SyntheticSpec spec;
  spec.num_labels = o.labels;
  spec.blocks = SyntheticSpec::contiguous_blocks(o.labels, o.blocks);
  spec.embed_dim = o.embed_dim;
  spec.feature_dim = o.feature_dim;
  spec.n_train = o.n_train;
  spec.n_test = o.n_test;
  spec.p_in = o.p_in;
  spec.p_out = o.p_out;
  spec.noise = o.noise;
  spec.seed = o.seed;
  spec.validate();
  const SynthData data = synth_generate(spec);
  const fs::path dir = prepare_out_dir(o.out);
  {
    std::ofstream os = open_output(dir / "embeddings.txt");
    save_embeddings(os, data.embeddings);
    finish_output(os, dir / "embeddings.txt");
  }
  {
    std::ofstream os = open_output(dir / "train.jsonl");
    save_dataset(os, data.train, data.embeddings.labels);
    finish_output(os, dir / "train.jsonl");
  }
  {
    std::ofstream os = open_output(dir / "test.jsonl");
    save_dataset(os, data.test, data.embeddings.labels);
    finish_output(os, dir / "test.jsonl");
  }
  {
    std::ofstream os = open_output(dir / "blocks.csv");
    write_graph_csv(os, data.embeddings.labels, data.block_matrix);
    finish_output(os, dir / "blocks.csv");
  }
  std::cout << "synthetic set: " << spec.num_labels << " labels in " << spec.blocks.size()
            << " blocks, " << data.train.size() << " train / " << data.test.size()
            << " test samples\n";
  std::cout << "wrote " << (dir / "embeddings.txt").string() << ", "
            << (dir / "train.jsonl").string() << ", " << (dir / "test.jsonl").string()
            << ", " << (dir / "blocks.csv").string() << '\n';
  return 0;
}

struct TrainOpts {
  std::string embeddings, train_path, fixed_graph, out = "out";
  ModelOpts model;
};

Model build_model_from(const TrainOpts& o, const EmbeddingMatrix& emb,
                       std::size_t feature_dim) {
  const ModelConfig cfg = o.model.to_config();
  if (o.fixed_graph.empty()) return make_model(emb, feature_dim, cfg);
  std::ifstream is = open_input(o.fixed_graph);
  NamedGraph g = read_graph_csv(is);
  if (g.labels != emb.labels)
    throw input_error("fixed graph labels do not match embedding labels (order matters)");
  return make_model_fixed(emb, feature_dim, cfg, std::move(g.values));
}

int run_train(TrainOpts& o) {
  std::ifstream eis = open_input(o.embeddings);
  const EmbeddingMatrix emb = load_embeddings(eis);
  std::ifstream dis = open_input(o.train_path);
  const LoadResult loaded = load_dataset(dis, emb.labels, /*reject_unlabeled=*/true);
  for (const auto& r : loaded.rejected)
    std::cout << "skipped record at line " << r.line << ": " << r.reason << '\n';
  if (loaded.samples.empty()) throw input_error("training set '" + o.train_path + "' is empty");
  const std::size_t feature_dim = loaded.samples.front().feature.size();

  Model model = build_model_from(o, emb, feature_dim);
  const TrainResult tr = train(model, loaded.samples);
  for (const auto& e : tr.history)
    std::cout << "epoch " << e.epoch << " lr " << g6(e.lr) << " l_cls " << g6(e.l_cls)
              << " l_a " << g6(e.l_a) << " total " << g6(e.l_total) << '\n';

  const fs::path dir = prepare_out_dir(o.out);
  {
    std::ofstream os = open_output(dir / "checkpoint.bin", /*binary=*/true);
    save_checkpoint(os, model);
    finish_output(os, dir / "checkpoint.bin");
  }
  write_history_csv(dir / "history.csv", tr);
  export_graphs(dir, model);
  std::cout << "wrote " << (dir / "checkpoint.bin").string() << '\n';
  return 0;
}

struct EvalOpts {
  std::string checkpoint, data, out;
  double threshold = 0.5;
  std::size_t top_k = 3;
};

int run_eval(EvalOpts& o) {
  std::ifstream cis = open_input(o.checkpoint, /*binary=*/true);
  Model model = load_checkpoint(cis);
  std::ifstream dis = open_input(o.data);
  const LoadResult loaded = load_dataset(dis, model.embeddings.labels,
                                         /*reject_unlabeled=*/false);
  const MetricReport rep = evaluate(model, loaded.samples, o.threshold, o.top_k);
  write_report_table(std::cout, rep);
  if (!o.out.empty()) {
    const fs::path dir = prepare_out_dir(o.out);
    {
      std::ofstream os = open_output(dir / "metrics.txt");
      write_report_table(os, rep);
      finish_output(os, dir / "metrics.txt");
    }
    {
      std::ofstream os = open_output(dir / "metrics.kv");
      write_report_kv(os, rep);
      finish_output(os, dir / "metrics.kv");
    }
    std::cout << "wrote " << (dir / "metrics.txt").string() << " and "
              << (dir / "metrics.kv").string() << '\n';
  }
  return 0;
}

struct SweepOpts {
  std::string embeddings, train_path, eval_path, out = "out";
  std::string alphas = "0,0.5,1";
  bool parallel = false;
  double threshold = 0.5;
  std::size_t top_k = 3;
  ModelOpts model;
};

int run_sweep(SweepOpts& o) {
  const std::vector<double> alphas = parse_double_list(o.alphas, "alpha");
  if (alphas.size() < 2)
    throw config_error("sweep needs at least two alpha values, got " +
                       std::to_string(alphas.size()));
  for (double a : alphas)
    if (a < 0.0) throw config_error("alpha must be >= 0, got " + g6(a));
  std::ifstream eis = open_input(o.embeddings);
  const EmbeddingMatrix emb = load_embeddings(eis);
  std::ifstream tis = open_input(o.train_path);
  const LoadResult train_set = load_dataset(tis, emb.labels, /*reject_unlabeled=*/true);
  if (train_set.samples.empty())
    throw input_error("training set '" + o.train_path + "' is empty");
  std::ifstream vis = open_input(o.eval_path);
  const LoadResult eval_set = load_dataset(vis, emb.labels, /*reject_unlabeled=*/false);
  if (eval_set.samples.empty())
    throw input_error("evaluation set '" + o.eval_path + "' is empty");
  const std::size_t feature_dim = train_set.samples.front().feature.size();
  const ModelConfig base = o.model.to_config();

  auto run_one = [&](double a) {
    ModelConfig cfg = base;
    cfg.alpha = a;
    SweepRow row;
    row.alpha = a;
    Model model = make_model(emb, feature_dim, cfg);
    try {
      train(model, train_set.samples);
      row.map = evaluate(model, eval_set.samples, o.threshold, o.top_k).all.map;
    } catch (const divergence_error& e) {
      row.ok = false;
      row.epoch = e.epoch;
      row.step = e.step;
    }
    return row;
  };

  std::vector<SweepRow> rows;
  if (o.parallel) {
    std::vector<std::future<SweepRow>> futures;
    futures.reserve(alphas.size());
    for (double a : alphas)
      futures.push_back(std::async(std::launch::async, run_one, a));
    for (auto& f : futures) rows.push_back(f.get());
  } else {
    for (double a : alphas) rows.push_back(run_one(a));
  }

  char line[96];
  std::snprintf(line, sizeof line, "%-8s %-10s %s\n", "alpha", "status", "mAP");
  std::cout << line;
  for (const auto& r : rows) {
    if (r.ok)
      std::snprintf(line, sizeof line, "%-8g %-10s %.4f\n", r.alpha, "ok", r.map);
    else
      std::snprintf(line, sizeof line, "%-8g diverged at epoch %zu step %zu\n", r.alpha,
                    r.epoch, r.step);
    std::cout << line;
  }

  const fs::path dir = prepare_out_dir(o.out);
  {
    std::ofstream os = open_output(dir / "sweep.csv");
    os << "alpha,status,mAP\n";
    for (const auto& r : rows) {
      os << fmt17(r.alpha) << ',' << (r.ok ? "ok" : "diverged") << ',';
      if (r.ok) os << fmt17(r.map);
      os << '\n';
    }
    finish_output(os, dir / "sweep.csv");
  }
  {
    std::ofstream os = open_output(dir / "sweep.svg");
    os << svg_sweep(rows);
    finish_output(os, dir / "sweep.svg");
  }
  std::cout << "wrote " << (dir / "sweep.csv").string() << " and "
            << (dir / "sweep.svg").string() << '\n';
  return 0;
}

struct ExportOpts {
  std::string checkpoint, out = "out";
};

int run_export(ExportOpts& o) {
  std::ifstream cis = open_input(o.checkpoint, /*binary=*/true);
  Model model = load_checkpoint(cis);
  const fs::path dir = prepare_out_dir(o.out);
  export_graphs(dir, model);
  std::cout << "wrote " << (dir / "graph_raw.csv").string() << " and "
            << (dir / "graph_norm.csv").string() << '\n';
  return 0;
}

struct PlotOpts {
  std::string checkpoint, out = "out", blocks;
};

// Groups labels block-contiguously using a comembership matrix, so block
// structure shows up as diagonal squares in the heatmap.
std::vector<std::size_t> block_order(const NamedGraph& blocks,
                                     const std::vector<std::string>& labels) {
  if (blocks.labels != labels)
    throw input_error("block matrix labels do not match checkpoint labels");
  const std::size_t c = labels.size();
  std::vector<bool> placed(c, false);
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < c; ++i) {
    if (placed[i]) continue;
    for (std::size_t j = i; j < c; ++j)
      if (!placed[j] && blocks.values(i, j) != 0.0) {
        order.push_back(j);
        placed[j] = true;
      }
  }
  return order;
}

int run_plot(PlotOpts& o) {
  std::ifstream cis = open_input(o.checkpoint, /*binary=*/true);
  Model model = load_checkpoint(cis);
  Matrix a_hat = current_graph(model);
  std::vector<std::string> labels = model.embeddings.labels;
  if (!o.blocks.empty()) {
    std::ifstream bis = open_input(o.blocks);
    const NamedGraph blocks = read_graph_csv(bis);
    const std::vector<std::size_t> order = block_order(blocks, labels);
    Matrix perm(a_hat.rows(), a_hat.cols());
    std::vector<std::string> plabels(labels.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      plabels[i] = labels[order[i]];
      for (std::size_t j = 0; j < order.size(); ++j)
        perm(i, j) = a_hat(order[i], order[j]);
    }
    a_hat = std::move(perm);
    labels = std::move(plabels);
  }
  const fs::path dir = prepare_out_dir(o.out);
  std::ofstream os = open_output(dir / "heatmap.svg");
  os << svg_heatmap(labels, a_hat, "normalized label graph");
  finish_output(os, dir / "heatmap.svg");
  std::cout << "wrote " << (dir / "heatmap.svg").string() << '\n';
  return 0;
}

struct GradCheckOpts {
  std::size_t labels = 4, embed_dim = 3, feature_dim = 5, batch = 3;
  double h = 1e-5, tol = 1e-4;
  ModelOpts model;
};

int run_gradcheck(GradCheckOpts& o) {
  ModelConfig cfg = o.model.to_config();
  Rng rng(cfg.seed + 1);  // instance data; +1 keeps it apart from model init
  EmbeddingMatrix emb;
  emb.values = Matrix(o.labels, o.embed_dim);
  for (double& v : emb.values.raw()) v = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < o.labels; ++i) emb.labels.push_back("L" + std::to_string(i));
  Matrix x(o.batch, o.feature_dim), y(o.batch, o.labels);
  for (double& v : x.raw()) v = rng.uniform(-1.0, 1.0);
  for (std::size_t i = 0; i < o.batch; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < o.labels; ++j) {
      y(i, j) = rng.uniform() < 0.5 ? 1.0 : 0.0;
      any = any || y(i, j) != 0.0;
    }
    if (!any) y(i, static_cast<std::size_t>(rng.index(o.labels))) = 1.0;
  }
  Model model = make_model(emb, o.feature_dim, cfg);
  auto builder = [&](Tape& tape) { return build_step(tape, model, x, y).total; };
  const GradCheckReport rep = grad_check(builder, model.named_params(), o.h, o.tol);

  std::string name;
  double worst = 0.0;
  std::size_t coords = 0;
  auto flush = [&]() {
    if (coords)
      std::cout << "param " << name << ": max rel err " << g6(worst) << " over " << coords
                << " coords\n";
    worst = 0.0;
    coords = 0;
  };
  for (const auto& e : rep.entries) {
    if (e.name != name) {
      flush();
      name = e.name;
    }
    worst = std::max(worst, e.rel_err);
    ++coords;
  }
  flush();
  std::cout << "checked " << rep.entries.size() << " coordinates, max rel err "
            << g6(rep.max_rel_err) << ", tolerance " << g6(rep.tolerance) << ": "
            << (rep.ok() ? "PASS" : "FAIL") << '\n';
  if (!rep.ok()) {
    const auto& w = rep.worst();
    std::cout << "worst: " << w.name << "[" << w.row << "," << w.col << "] analytic "
              << g6(w.analytic) << " vs numeric " << g6(w.numeric) << '\n';
  }
  return rep.ok() ? 0 : 1;
}

// Expands --config FILE (or --config=FILE) into the file's key=value pairs as
// --key=value tokens placed just after the subcommand name, so explicit
// command-line flags always win. One key=value per line; blank lines and
// #-comments are allowed.
std::vector<std::string> expand_config_args(int argc, char** argv) {
  std::vector<std::string> kept, injected;
  for (int i = 1; i < argc; ++i) {
    const std::string tok = argv[i];
    std::string path;
    if (tok == "--config" && i + 1 < argc) {
      path = argv[++i];
    } else if (tok.rfind("--config=", 0) == 0) {
      path = tok.substr(9);
    } else {
      kept.push_back(tok);
      continue;
    }
    std::ifstream is(path);
    if (!is) throw config_error("cannot open config file '" + path + "'");
    const auto strip = [](const std::string& s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
      ++n;
      const std::string body = strip(line);
      if (body.empty() || body[0] == '#') continue;
      const auto eq = body.find('=');
      const std::string key = eq == std::string::npos ? "" : strip(body.substr(0, eq));
      if (key.empty())
        throw config_error(path + " line " + std::to_string(n) + ": expected key=value");
      injected.push_back("--" + key + "=" + strip(body.substr(eq + 1)));
    }
  }
  if (injected.empty()) return kept;
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < kept.size() && !kept[pos].empty() && kept[pos][0] == '-')
    out.push_back(kept[pos++]);
  if (pos < kept.size()) out.push_back(kept[pos++]);  // the subcommand name
  out.insert(out.end(), injected.begin(), injected.end());
  out.insert(out.end(), kept.begin() + static_cast<std::ptrdiff_t>(pos), kept.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive label-graph classifier over precomputed features"};
  // config-file values are injected ahead of explicit flags; last one wins
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  SynthOpts synth_opts;
  auto* synth = app.add_subcommand("synth", "generate a block-structured synthetic dataset");
  synth->set_config("--config", "", "key=value config file");
  synth->add_option("--out", synth_opts.out, "output directory")->required();
  synth->add_option("--labels", synth_opts.labels, "number of labels");
  synth->add_option("--blocks", synth_opts.blocks, "number of co-occurrence blocks");
  synth->add_option("--embed-dim", synth_opts.embed_dim, "embedding dimension");
  synth->add_option("--feature-dim", synth_opts.feature_dim, "feature dimension");
  synth->add_option("--n-train", synth_opts.n_train, "training samples");
  synth->add_option("--n-test", synth_opts.n_test, "test samples");
  synth->add_option("--p-in", synth_opts.p_in, "in-block activation probability");
  synth->add_option("--p-out", synth_opts.p_out, "out-of-block activation probability");
  synth->add_option("--noise", synth_opts.noise, "feature noise scale");
  synth->add_option("--seed", synth_opts.seed, "generator seed");
  int rc = 0;
  synth->callback([&] { rc = run_synth(synth_opts); });

  TrainOpts train_opts;
  auto* tr = app.add_subcommand("train", "train a model and write a checkpoint");
  tr->set_config("--config", "", "key=value config file");
  tr->add_option("--embeddings", train_opts.embeddings, "label embedding file")->required();
  tr->add_option("--train", train_opts.train_path, "training set (json lines)")->required();
  tr->add_option("--out", train_opts.out, "output directory");
  CLI::Option* tr_variant = add_model_options(tr, train_opts.model);
  CLI::Option* tr_fixed = tr->add_option("--fixed-graph", train_opts.fixed_graph,
                                         "CSV graph used verbatim instead of the builder");
  tr_fixed->excludes(tr_variant);
  tr_variant->excludes(tr_fixed);
  tr->callback([&] { rc = run_train(train_opts); });

  EvalOpts eval_opts;
  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  ev->set_config("--config", "", "key=value config file");
  ev->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file")->required();
  ev->add_option("--data", eval_opts.data, "evaluation set (json lines)")->required();
  ev->add_option("--out", eval_opts.out, "output directory for report files");
  ev->add_option("--threshold", eval_opts.threshold, "decision threshold");
  ev->add_option("--top-k", eval_opts.top_k, "top-k for the second report section");
  ev->callback([&] { rc = run_eval(eval_opts); });

  SweepOpts sweep_opts;
  auto* sw = app.add_subcommand("sweep-alpha", "train at several alpha values");
  sw->set_config("--config", "", "key=value config file");
  sw->add_option("--embeddings", sweep_opts.embeddings, "label embedding file")->required();
  sw->add_option("--train", sweep_opts.train_path, "training set")->required();
  sw->add_option("--eval", sweep_opts.eval_path, "evaluation set")->required();
  sw->add_option("--alphas", sweep_opts.alphas, "comma-separated alpha values (>= 2)");
  sw->add_option("--out", sweep_opts.out, "output directory");
  sw->add_flag("--parallel", sweep_opts.parallel, "run the sweep points concurrently");
  sw->add_option("--threshold", sweep_opts.threshold, "decision threshold");
  sw->add_option("--top-k", sweep_opts.top_k, "top-k report size");
  add_model_options(sw, sweep_opts.model, /*with_alpha=*/false);
  sw->callback([&] { rc = run_sweep(sweep_opts); });

  ExportOpts export_opts;
  auto* ex = app.add_subcommand("export-graph", "write raw and normalized graph CSVs");
  ex->set_config("--config", "", "key=value config file");
  ex->add_option("--checkpoint", export_opts.checkpoint, "checkpoint file")->required();
  ex->add_option("--out", export_opts.out, "output directory");
  ex->callback([&] { rc = run_export(export_opts); });

  PlotOpts plot_opts;
  auto* pl = app.add_subcommand("plot", "render the normalized graph as an SVG heatmap");
  pl->set_config("--config", "", "key=value config file");
  pl->add_option("--checkpoint", plot_opts.checkpoint, "checkpoint file")->required();
  pl->add_option("--out", plot_opts.out, "output directory");
  pl->add_option("--blocks", plot_opts.blocks,
                 "block comembership CSV used to order labels");
  pl->callback([&] { rc = run_plot(plot_opts); });

  GradCheckOpts gc_opts;
  gc_opts.model.hidden = "5";
  auto* gc = app.add_subcommand("grad-check",
                                "compare backpropagated gradients with finite differences");
  gc->set_config("--config", "", "key=value config file");
  gc->add_option("--labels", gc_opts.labels, "number of labels");
  gc->add_option("--embed-dim", gc_opts.embed_dim, "embedding dimension");
  gc->add_option("--feature-dim", gc_opts.feature_dim, "feature dimension");
  gc->add_option("--batch", gc_opts.batch, "probe batch size");
  gc->add_option("--step", gc_opts.h, "finite-difference step");
  gc->add_option("--tol", gc_opts.tol, "relative error tolerance");
  add_model_options(gc, gc_opts.model);
  gc->callback([&] { rc = run_gradcheck(gc_opts); });

  try {
    const std::vector<std::string> args = expand_config_args(argc, argv);
    std::vector<const char*> ptrs{argv[0]};
    for (const std::string& a : args) ptrs.push_back(a.c_str());
    app.parse(static_cast<int>(ptrs.size()), ptrs.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const divergence_error& e) {
    std::cerr << "training diverged: " << e.what() << '\n';
    return 4;
  } catch (const input_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return rc;
}
