#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "agcn/agcn.hpp"

namespace fs = std::filesystem;
using namespace agcn;

namespace {

const std::string kBin = AGCN_CLI_BIN;

fs::path work_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "agcn_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

struct CmdResult {
  int code = -1;
  std::string output;
};

// Runs the CLI through the shell, capturing exit code and combined output.
CmdResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  static int counter = 0;
  const fs::path log = work_root() / ("cmd" + std::to_string(counter++) + ".log");
  const std::string cmd = (env_prefix.empty() ? "" : env_prefix + " ") + kBin + " " + args +
                          " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CmdResult r;
  if (status != -1 && WIFEXITED(status)) r.code = WEXITSTATUS(status);
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) {
  std::size_t n = 0;
  for (char ch : s)
    if (ch == '\n') ++n;
  return n;
}

struct SharedRuns {
  fs::path data, run1;
  CmdResult synth, train;
};

// One dataset and one trained run reused by most cases below.
const SharedRuns& shared() {
  static const SharedRuns s = [] {
    SharedRuns v;
    v.data = work_root() / "data";
    v.run1 = work_root() / "run1";
    v.synth = run_cli("synth --out " + v.data.string() +
                      " --labels 6 --blocks 2 --embed-dim 4 --feature-dim 8"
                      " --n-train 80 --n-test 40 --seed 5");
    v.train = run_cli("train --embeddings " + (v.data / "embeddings.txt").string() +
                      " --train " + (v.data / "train.jsonl").string() + " --out " +
                      v.run1.string() + " --epochs 3 --batch-size 16 --seed 7");
    return v;
  }();
  return s;
}

std::string train_args(const std::string& out, const std::string& extra = "") {
  return "train --embeddings " + (shared().data / "embeddings.txt").string() + " --train " +
         (shared().data / "train.jsonl").string() + " --out " + (work_root() / out).string() +
         (extra.empty() ? "" : " " + extra);
}

}  // namespace

TEST_CASE("synth writes the dataset bundle") {
  const auto& s = shared();
  INFO(s.synth.output);
  REQUIRE(s.synth.code == 0);
  REQUIRE(fs::exists(s.data / "embeddings.txt"));
  REQUIRE(fs::exists(s.data / "train.jsonl"));
  REQUIRE(fs::exists(s.data / "test.jsonl"));
  REQUIRE(fs::exists(s.data / "blocks.csv"));
  REQUIRE_THAT(s.synth.output, Catch::Matchers::ContainsSubstring("6 labels in 2 blocks"));
  std::ifstream is(s.data / "embeddings.txt");
  const EmbeddingMatrix emb = load_embeddings(is);
  REQUIRE(emb.count() == 6);
  REQUIRE(emb.dim() == 4);
}

TEST_CASE("train writes checkpoint, history, and both graph files") {
  const auto& s = shared();
  INFO(s.train.output);
  REQUIRE(s.train.code == 0);
  REQUIRE(fs::exists(s.run1 / "checkpoint.bin"));
  REQUIRE(fs::exists(s.run1 / "graph_raw.csv"));
  REQUIRE(fs::exists(s.run1 / "graph_norm.csv"));
  REQUIRE_THAT(s.train.output, Catch::Matchers::ContainsSubstring("epoch 0"));
  const std::string hist = slurp(s.run1 / "history.csv");
  REQUIRE(count_lines(hist) == 4);  // header + one row per epoch
  REQUIRE(hist.rfind("epoch,lr,l_cls,l_a,l_total\n", 0) == 0);
}

TEST_CASE("eval prints the metric table and writes report files") {
  const auto& s = shared();
  const fs::path out = work_root() / "evalout";
  const CmdResult r = run_cli("eval --checkpoint " + (s.run1 / "checkpoint.bin").string() +
                              " --data " + (s.data / "test.jsonl").string() + " --out " +
                              out.string());
  INFO(r.output);
  REQUIRE(r.code == 0);
  REQUIRE_THAT(r.output, Catch::Matchers::ContainsSubstring("mAP"));
  REQUIRE(fs::exists(out / "metrics.txt"));
  const std::string kv = slurp(out / "metrics.kv");
  REQUIRE_THAT(kv, Catch::Matchers::ContainsSubstring("all.mAP="));
  REQUIRE_THAT(kv, Catch::Matchers::ContainsSubstring("top3.OF1="));
  REQUIRE_THAT(kv, Catch::Matchers::ContainsSubstring("AP_all="));
}

TEST_CASE("export-graph reproduces the graphs written at training time") {
  const auto& s = shared();
  const fs::path out = work_root() / "exported";
  const CmdResult r = run_cli("export-graph --checkpoint " +
                              (s.run1 / "checkpoint.bin").string() + " --out " + out.string());
  INFO(r.output);
  REQUIRE(r.code == 0);
  REQUIRE(slurp(out / "graph_raw.csv") == slurp(s.run1 / "graph_raw.csv"));
  REQUIRE(slurp(out / "graph_norm.csv") == slurp(s.run1 / "graph_norm.csv"));
}

TEST_CASE("plot renders an SVG heatmap, optionally block-ordered") {
  const auto& s = shared();
  const fs::path out = work_root() / "plotted";
  const CmdResult r = run_cli("plot --checkpoint " + (s.run1 / "checkpoint.bin").string() +
                              " --blocks " + (s.data / "blocks.csv").string() + " --out " +
                              out.string());
  INFO(r.output);
  REQUIRE(r.code == 0);
  const std::string svg = slurp(out / "heatmap.svg");
  REQUIRE_THAT(svg, Catch::Matchers::ContainsSubstring("<svg"));
  REQUIRE_THAT(svg, Catch::Matchers::ContainsSubstring("</svg>"));
}

TEST_CASE("grad-check passes at its default settings") {
  const CmdResult r = run_cli("grad-check");
  INFO(r.output);
  REQUIRE(r.code == 0);
  REQUIRE_THAT(r.output, Catch::Matchers::ContainsSubstring("PASS"));
}

TEST_CASE("repeating a training run reproduces every output byte") {
  const auto& s = shared();
  const CmdResult r = run_cli(train_args("run2", "--epochs 3 --batch-size 16 --seed 7"));
  INFO(r.output);
  REQUIRE(r.code == 0);
  const fs::path run2 = work_root() / "run2";
  REQUIRE(slurp(run2 / "checkpoint.bin") == slurp(s.run1 / "checkpoint.bin"));
  REQUIRE(slurp(run2 / "history.csv") == slurp(s.run1 / "history.csv"));
  REQUIRE(slurp(run2 / "graph_norm.csv") == slurp(s.run1 / "graph_norm.csv"));
}

TEST_CASE("a config file supplies options and the command line overrides it") {
  const fs::path cfg = work_root() / "train.cfg";
  {
    std::ofstream os(cfg);
    os << "epochs=2\nseed=7\nbatch-size=16\n";
  }
  const CmdResult a = run_cli(train_args("cfg_a", "--config " + cfg.string()));
  INFO(a.output);
  REQUIRE(a.code == 0);
  REQUIRE(count_lines(slurp(work_root() / "cfg_a" / "history.csv")) == 3);

  const CmdResult b = run_cli(train_args("cfg_b", "--config " + cfg.string() + " --epochs 1"));
  INFO(b.output);
  REQUIRE(b.code == 0);
  REQUIRE(count_lines(slurp(work_root() / "cfg_b" / "history.csv")) == 2);
}

TEST_CASE("AGCN_OUT redirects output instead of --out") {
  const auto& s = shared();
  const fs::path envdir = work_root() / "env_out";
  const fs::path ignored = work_root() / "ignored_out";
  const CmdResult r =
      run_cli("export-graph --checkpoint " + (s.run1 / "checkpoint.bin").string() +
                  " --out " + ignored.string(),
              "AGCN_OUT=" + envdir.string());
  INFO(r.output);
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(envdir / "graph_norm.csv"));
  REQUIRE_FALSE(fs::exists(ignored));
}

TEST_CASE("a fixed graph file replaces the builder verbatim") {
  const auto& s = shared();
  const CmdResult r = run_cli(
      train_args("fixed_run", "--epochs 2 --seed 7 --fixed-graph " +
                                  (s.data / "blocks.csv").string()));
  INFO(r.output);
  REQUIRE(r.code == 0);
  REQUIRE(slurp(work_root() / "fixed_run" / "graph_norm.csv") == slurp(s.data / "blocks.csv"));
}

TEST_CASE("builder variants are selectable from the command line") {
  const CmdResult r = run_cli(train_args("variant_run", "--epochs 1 --variant dot --seed 2"));
  INFO(r.output);
  REQUIRE(r.code == 0);
}

TEST_CASE("sweep-alpha writes a table, a CSV, and an SVG") {
  const auto& s = shared();
  const fs::path out = work_root() / "sweep";
  const CmdResult r = run_cli(
      "sweep-alpha --embeddings " + (s.data / "embeddings.txt").string() + " --train " +
      (s.data / "train.jsonl").string() + " --eval " + (s.data / "test.jsonl").string() +
      " --alphas 0,1 --epochs 2 --seed 3 --parallel --out " + out.string());
  INFO(r.output);
  REQUIRE(r.code == 0);
  const std::string csv = slurp(out / "sweep.csv");
  REQUIRE(csv.rfind("alpha,status,mAP\n", 0) == 0);
  REQUIRE(count_lines(csv) == 3);
  REQUIRE_THAT(csv, Catch::Matchers::ContainsSubstring("ok"));
  REQUIRE_THAT(slurp(out / "sweep.svg"), Catch::Matchers::ContainsSubstring("<svg"));
}

TEST_CASE("exit codes separate usage, input, and divergence failures") {
  SECTION("no subcommand is a usage error") {
    REQUIRE(run_cli("").code == 2);
  }
  SECTION("help exits cleanly") {
    const CmdResult r = run_cli("--help");
    REQUIRE(r.code == 0);
    REQUIRE_THAT(r.output, Catch::Matchers::ContainsSubstring("train"));
  }
  SECTION("unknown option") {
    REQUIRE(run_cli("train --embeddings x --train y --wat").code == 2);
  }
  SECTION("fixed graph and builder variant are mutually exclusive") {
    REQUIRE(run_cli(train_args("never", "--variant cos --fixed-graph " +
                                            (shared().data / "blocks.csv").string()))
                .code == 2);
  }
  SECTION("a one-point sweep is refused") {
    const auto& s = shared();
    const CmdResult r = run_cli(
        "sweep-alpha --embeddings " + (s.data / "embeddings.txt").string() + " --train " +
        (s.data / "train.jsonl").string() + " --eval " + (s.data / "test.jsonl").string() +
        " --alphas 1 --out " + (work_root() / "never2").string());
    REQUIRE(r.code == 2);
    REQUIRE_THAT(r.output, Catch::Matchers::ContainsSubstring("two alpha values"));
  }
  SECTION("missing input files") {
    REQUIRE(run_cli("train --embeddings nope.txt --train nope.jsonl --out " +
                    (work_root() / "never3").string())
                .code == 3);
    REQUIRE(run_cli("eval --checkpoint nope.bin --data nope.jsonl").code == 3);
  }
  SECTION("an absurd learning rate reports divergence") {
    const CmdResult r = run_cli(train_args("diverged", "--epochs 3 --lr 1e160 --seed 3"));
    INFO(r.output);
    REQUIRE(r.code == 4);
    REQUIRE_THAT(r.output, Catch::Matchers::ContainsSubstring("diverged"));
  }
}

TEST_CASE("a zeroed builder exports exactly the identity graph") {
  ModelConfig cfg;
  cfg.seed = 2;
  EmbeddingMatrix emb;
  emb.labels = {"a", "b", "c"};
  emb.values = Matrix(3, 4, 0.5);
  Model m = make_model(emb, 6, cfg);
  m.lg.w_phi.value.fill(0.0);
  m.lg.w_theta.value.fill(0.0);
  const fs::path ckpt = work_root() / "zeroed.bin";
  {
    std::ofstream os(ckpt, std::ios::binary);
    save_checkpoint(os, m);
  }
  const fs::path out = work_root() / "zeroed_out";
  const CmdResult r =
      run_cli("export-graph --checkpoint " + ckpt.string() + " --out " + out.string());
  INFO(r.output);
  REQUIRE(r.code == 0);
  std::ifstream is(out / "graph_norm.csv");
  const NamedGraph g = read_graph_csv(is);
  REQUIRE(g.values == Matrix::identity(3));
}
