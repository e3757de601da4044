#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "gcl/data.hpp"

using namespace gcl;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

fs::path scratch_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "gcl_cli_tests";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

CliResult run_cli(const std::string& args) {
  const fs::path log = scratch_root() / "last_output.txt";
  const std::string cmd = std::string(GCL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult result;
  result.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::ostringstream buf;
  buf << in.rdbuf();
  result.output = buf.str();
  return result;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_config(const fs::path& path, const fs::path& data_dir, int iters1, int iters2,
                  std::uint64_t seed) {
  std::ofstream out(path);
  out << "[data]\n";
  out << "train = " << (data_dir / "train.csv").string() << "\n";
  out << "test = " << (data_dir / "test.csv").string() << "\n";
  out << "[model]\nhidden_dims = 16\nembed_dim = 8\n";
  out << "[train]\n";
  out << "iters_stage1 = " << iters1 << "\n";
  out << "iters_stage2 = " << iters2 << "\n";
  out << "batch_size = 16\nseed = " << seed << "\n";
}

fs::path data_dir() { return scratch_root() / "data"; }

void ensure_data() {
  if (fs::exists(data_dir() / "train.csv")) return;
  const CliResult r = run_cli("gen-data --classes 4 --head 80 --gamma 20 --dim 6 --test-per-class 25 --seed 7 --out " +
                              data_dir().string());
  REQUIRE(r.exit_code == 0);
}

}  // namespace

TEST_CASE("gen-data histogram matches the counts oracle") {
  ensure_data();
  const Dataset train = load_csv((data_dir() / "train.csv").string());
  const auto expected = longtail_counts(LongTailSpec{80, 4, 20.0});
  CHECK(train.counts == expected);
  const Dataset test = load_csv((data_dir() / "test.csv").string());
  for (auto c : test.counts) CHECK(c == 25);
}

TEST_CASE("gen-data with gamma 1 is balanced") {
  const fs::path dir = scratch_root() / "balanced";
  const CliResult r =
      run_cli("gen-data --classes 3 --head 50 --gamma 1 --dim 4 --test-per-class 10 --seed 3 --out " +
              dir.string());
  CHECK(r.exit_code == 0);
  const Dataset train = load_csv((dir / "train.csv").string());
  for (auto c : train.counts) CHECK(c == 50);
}

TEST_CASE("gen-data is byte-deterministic and refuses to overwrite") {
  const fs::path a = scratch_root() / "det_a";
  const fs::path b = scratch_root() / "det_b";
  const std::string flags = "gen-data --classes 3 --head 40 --gamma 10 --dim 5 --test-per-class 8 --seed 21 --out ";
  CHECK(run_cli(flags + a.string()).exit_code == 0);
  CHECK(run_cli(flags + b.string()).exit_code == 0);
  CHECK(slurp(a / "train.csv") == slurp(b / "train.csv"));
  CHECK(slurp(a / "test.csv") == slurp(b / "test.csv"));

  const CliResult refuse = run_cli(flags + a.string());
  CHECK(refuse.exit_code == 2);
  CHECK(refuse.output.find("--force") != std::string::npos);
  CHECK(run_cli(flags + a.string() + " --force").exit_code == 0);
}

TEST_CASE("train fails with exit 2 and names a missing dataset") {
  const fs::path cfg = scratch_root() / "missing.cfg";
  write_config(cfg, scratch_root() / "nowhere", 5, 0, 1);
  const CliResult r = run_cli("train --config " + cfg.string() + " --out " +
                              (scratch_root() / "run_missing").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("nowhere") != std::string::npos);
}

TEST_CASE("train fails with exit 2 on an unknown config key") {
  const fs::path cfg = scratch_root() / "badkey.cfg";
  {
    std::ofstream out(cfg);
    out << "[train]\nlerning_rate = 0.1\n";
  }
  const CliResult r = run_cli("train --config " + cfg.string() + " --out " +
                              (scratch_root() / "run_badkey").string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("lerning_rate") != std::string::npos);
}

TEST_CASE("minimal train run produces the artifact set and a 10-row trace") {
  ensure_data();
  const fs::path cfg = scratch_root() / "mini.cfg";
  write_config(cfg, data_dir(), 10, 0, 5);
  const fs::path run = scratch_root() / "run_mini";
  const CliResult r = run_cli("train --config " + cfg.string() + " --out " + run.string());
  CHECK(r.exit_code == 0);
  for (const char* name : {"config.snapshot", "trace_stage1.csv", "report.csv", "report.txt",
                           "cloud_sizes.csv", "sampler.csv", "embeddings.csv", "checkpoint.ckpt"}) {
    CHECK(fs::exists(run / name));
  }
  std::ifstream trace(run / "trace_stage1.csv");
  int lines = 0;
  std::string line;
  while (std::getline(trace, line)) ++lines;
  CHECK(lines == 11);  // header + 10 iterations
}

TEST_CASE("train reruns are byte-identical and refuse a dirty run directory") {
  ensure_data();
  const fs::path cfg = scratch_root() / "rerun.cfg";
  write_config(cfg, data_dir(), 25, 10, 9);
  const fs::path run_a = scratch_root() / "run_a";
  const fs::path run_b = scratch_root() / "run_b";
  CHECK(run_cli("train --config " + cfg.string() + " --out " + run_a.string()).exit_code == 0);
  CHECK(run_cli("train --config " + cfg.string() + " --out " + run_b.string()).exit_code == 0);
  CHECK(slurp(run_a / "report.csv") == slurp(run_b / "report.csv"));
  CHECK(slurp(run_a / "trace_stage1.csv") == slurp(run_b / "trace_stage1.csv"));
  CHECK(slurp(run_a / "checkpoint.ckpt") == slurp(run_b / "checkpoint.ckpt"));

  CHECK(run_cli("train --config " + cfg.string() + " --out " + run_a.string()).exit_code == 2);
  CHECK(run_cli("train --config " + cfg.string() + " --out " + run_a.string() + " --force").exit_code ==
        0);
}

TEST_CASE("eval on a trained checkpoint reproduces the training report") {
  ensure_data();
  const fs::path run = scratch_root() / "run_a";
  REQUIRE(fs::exists(run / "checkpoint.ckpt"));
  const fs::path out = scratch_root() / "eval_out";
  const CliResult r = run_cli("eval --checkpoint " + (run / "checkpoint.ckpt").string() +
                              " --data " + (data_dir() / "test.csv").string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(slurp(out / "report.csv") == slurp(run / "report.csv"));
}

TEST_CASE("grad-check passes at the default tolerance") {
  const CliResult r = run_cli("grad-check --seeds 6");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("PASS") != std::string::npos);
}

TEST_CASE("grad-check detects an injected sign flip") {
  const CliResult r = run_cli("grad-check --seeds 3 --inject-sign-flip");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("FAIL") != std::string::npos);
}

TEST_CASE("grad-check documents its tolerance floor") {
  const CliResult r = run_cli("grad-check --seeds 3 --tolerance 1e-12");
  CHECK(r.exit_code == 1);
}

TEST_CASE("sampler-check is deterministic and passes its tolerance") {
  const CliResult a = run_cli("sampler-check --draws 200000 --seed 5");
  CHECK(a.exit_code == 0);
  CHECK(a.output.find("IB") != std::string::npos);
  const CliResult b = run_cli("sampler-check --draws 200000 --seed 5");
  CHECK(a.output == b.output);
}

TEST_CASE("report writes summary, cloud sizes and sampler table") {
  ensure_data();
  const fs::path out = scratch_root() / "report_out";
  const CliResult r =
      run_cli("report --data " + (data_dir() / "train.csv").string() + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(out / "summary.txt"));
  CHECK(fs::exists(out / "cloud_sizes.csv"));
  CHECK(fs::exists(out / "sampler.csv"));
  CHECK(r.output.find("imbalance ratio") != std::string::npos);
}

TEST_CASE("unknown flags exit with code 2") {
  const CliResult r = run_cli("train --nonsense");
  CHECK(r.exit_code == 2);
}

TEST_SUITE_END();
