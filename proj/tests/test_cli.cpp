#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// scratch directory per test case; everything the binary writes lands here
struct Scratch {
  fs::path dir;
  Scratch() : dir("cli_scratch") {
    fs::remove_all(dir);
    fs::create_directory(dir);
  }
  ~Scratch() { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }
};

CmdResult run_cli(const Scratch& s, const std::string& args) {
  const std::string out = s.path("stdout.txt"), err = s.path("stderr.txt");
  const std::string cmd =
      std::string(CWNET_CLI_PATH) + " " + args + " >" + out + " 2>" + err;
  int status = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

bool same_bytes(const std::string& a, const std::string& b) {
  return slurp(a) == slurp(b);
}

const char* kTriangleFile =
    "CWDS 1\n"
    "config 1 2 3 3 1 7\n"
    "item 0 7\n"
    "sizes 3 3 1\n"
    "B 1\n"
    "-1 0 -1\n"
    "1 -1 0\n"
    "0 1 1\n"
    "B 2\n"
    "1\n"
    "1\n"
    "-1\n"
    "mask 3 3 1\n";

std::string line_value(const std::string& text, const std::string& key) {
  size_t pos = text.find(key + "=");
  if (pos != 0 && (pos == std::string::npos || text[pos - 1] != '\n')) return "";
  size_t start = pos + key.size() + 1;
  size_t end = text.find('\n', start);
  return text.substr(start, end - start);
}

} // namespace

TEST_CASE("generate writes a parsable dataset deterministically") {
  Scratch s;
  CmdResult r = run_cli(s, "generate --n 20 --seed 5 --out " + s.path("a.cwds"));
  REQUIRE(r.code == 0);
  CHECK(line_value(r.out, "items") == "20");
  CHECK(r.out.find("target_std=") != std::string::npos);
  CHECK(fs::exists(s.path("a.cwds")));
  CHECK(fs::exists(s.path("a.cwds.manifest")));
  CmdResult r2 = run_cli(s, "generate --n 20 --seed 5 --out " + s.path("b.cwds"));
  REQUIRE(r2.code == 0);
  CHECK(same_bytes(s.path("a.cwds"), s.path("b.cwds")));
  CmdResult r3 = run_cli(s, "generate --n 20 --seed 6 --out " + s.path("c.cwds"));
  REQUIRE(r3.code == 0);
  CHECK(!same_bytes(s.path("a.cwds"), s.path("c.cwds")));
}

TEST_CASE("validate accepts generated data and rejects corrupted files") {
  Scratch s;
  REQUIRE(run_cli(s, "generate --n 8 --seed 3 --out " + s.path("d.cwds")).code == 0);
  CmdResult ok = run_cli(s, "validate --data " + s.path("d.cwds"));
  CHECK(ok.code == 0);
  CHECK(ok.out.find("all 8 items checked") != std::string::npos);

  std::string text = slurp(s.path("d.cwds"));
  size_t pos = text.find("\n1", text.find("B 1"));
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 2, "\n2"); // incidence entry outside {-1,0,1}
  std::ofstream(s.path("bad.cwds")) << text;
  CmdResult bad = run_cli(s, "validate --data " + s.path("bad.cwds"));
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line") != std::string::npos);

  CmdResult missing = run_cli(s, "validate --data " + s.path("nowhere.cwds"));
  CHECK(missing.code == 2);
  CHECK(missing.err.find("cannot open") != std::string::npos);
}

TEST_CASE("train and eval close the loop on a small dataset") {
  Scratch s;
  REQUIRE(run_cli(s, "generate --n 20 --seed 5 --out " + s.path("d.cwds")).code == 0);
  const std::string train_args =
      "train --data " + s.path("d.cwds") + " --model cwcnn --steps 5 --lr 1e-5" +
      " --params-out " + s.path("p.cwpm") + " --history-out " + s.path("h.csv");
  CmdResult tr = run_cli(s, train_args);
  REQUIRE(tr.code == 0);
  CHECK(line_value(tr.out, "model") == "cwcnn");
  CHECK(line_value(tr.out, "lr") == "1e-05");
  CHECK(line_value(tr.out, "steps") == "5");
  CHECK(line_value(tr.out, "split_seed") == "5"); // defaults to the dataset seed
  CHECK(line_value(tr.out, "train_items") == "16");
  CHECK(line_value(tr.out, "parameters") == "35");
  const std::string rmse = line_value(tr.out, "test_rmse");
  CHECK(!rmse.empty());
  CHECK(fs::exists(s.path("p.cwpm.manifest")));

  std::stringstream hist(slurp(s.path("h.csv")));
  std::string line;
  int lines = 0;
  while (std::getline(hist, line)) ++lines;
  CHECK(lines == 1 + 5 + 2); // header, one per step, rmse and count trailers

  CmdResult ev = run_cli(s, "eval --data " + s.path("d.cwds") + " --params " +
                                s.path("p.cwpm") + " --model cwcnn --split 0.8");
  REQUIRE(ev.code == 0);
  CHECK(line_value(ev.out, "test_items") == "4");
  CHECK(line_value(ev.out, "rmse") == rmse);

  CmdResult whole = run_cli(s, "eval --data " + s.path("d.cwds") + " --params " +
                                   s.path("p.cwpm") + " --model cwcnn");
  REQUIRE(whole.code == 0);
  CHECK(line_value(whole.out, "items") == "20");
  CHECK(line_value(whole.out, "rmse") != rmse);

  // a second identical run reproduces the parameter file byte for byte
  const std::string rerun_args =
      "train --data " + s.path("d.cwds") + " --model cwcnn --steps 5 --lr 1e-5" +
      " --params-out " + s.path("p2.cwpm") + " --history-out " + s.path("h2.csv");
  REQUIRE(run_cli(s, rerun_args).code == 0);
  CHECK(same_bytes(s.path("p.cwpm"), s.path("p2.cwpm")));
  CHECK(same_bytes(s.path("h.csv"), s.path("h2.csv")));
}

TEST_CASE("attention training echoes its extra knobs") {
  Scratch s;
  REQUIRE(run_cli(s, "generate --n 10 --seed 4 --out " + s.path("d.cwds")).code == 0);
  CmdResult tr = run_cli(s, "train --data " + s.path("d.cwds") +
                                " --model cwat --steps 2 --params-out " +
                                s.path("p.cwpm") + " --history-out " +
                                s.path("h.csv"));
  REQUIRE(tr.code == 0);
  CHECK(line_value(tr.out, "model") == "cwat");
  CHECK(line_value(tr.out, "dropout") == "0.1");
  CHECK(line_value(tr.out, "momentum") == "0.7");
  CHECK(line_value(tr.out, "weight_decay") == "0.02");
  CHECK(line_value(tr.out, "parameters") == "4511");
}

TEST_CASE("eval rejects parameters from the other architecture") {
  Scratch s;
  REQUIRE(run_cli(s, "generate --n 10 --seed 4 --out " + s.path("d.cwds")).code == 0);
  REQUIRE(run_cli(s, "train --data " + s.path("d.cwds") +
                         " --model cwcnn --steps 1 --lr 1e-6 --params-out " +
                         s.path("p.cwpm") + " --history-out " + s.path("h.csv"))
              .code == 0);
  CmdResult ev = run_cli(s, "eval --data " + s.path("d.cwds") + " --params " +
                                s.path("p.cwpm") + " --model cwat");
  CHECK(ev.code == 2);
  CHECK(ev.err.find("expected tensors") != std::string::npos);
}

TEST_CASE("gradcheck passes on a live sample") {
  Scratch s;
  REQUIRE(run_cli(s, "generate --n 2 --seed 42 --out " + s.path("d.cwds")).code == 0);
  CmdResult gc = run_cli(s, "gradcheck --model cwcnn --data " + s.path("d.cwds") +
                                " --index 1");
  CHECK(gc.code == 0);
  CHECK(gc.out.find("\npass tol=") != std::string::npos);
  CHECK(line_value(gc.out, "coords") == "35");
}

TEST_CASE("inspect prints the triangle spectra") {
  Scratch s;
  std::ofstream(s.path("tri.cwds")) << kTriangleFile;
  CmdResult in = run_cli(s, "inspect --data " + s.path("tri.cwds"));
  REQUIRE(in.code == 0);
  CHECK(line_value(in.out, "target") == "7");
  CHECK(in.out.find("delta_1 spectrum: 3 3 3") != std::string::npos);
  CHECK(in.out.find("delta_2 spectrum: 3") != std::string::npos);
  CmdResult oob = run_cli(s, "inspect --data " + s.path("tri.cwds") + " --index 9");
  CHECK(oob.code == 2);
}

TEST_CASE("usage problems exit with code one") {
  Scratch s;
  CHECK(run_cli(s, "discombobulate").code == 1);
  CHECK(run_cli(s, "generate --n 5").code == 1); // --out is required
  REQUIRE(run_cli(s, "generate --n 5 --seed 1 --out " + s.path("d.cwds")).code == 0);
  CHECK(run_cli(s, "train --data " + s.path("d.cwds") +
                       " --model perceptron --params-out " + s.path("p.cwpm") +
                       " --history-out " + s.path("h.csv"))
            .code == 1);
  CHECK(run_cli(s, "train --data " + s.path("d.cwds") +
                       " --model cwcnn --split 1.5 --params-out " +
                       s.path("p.cwpm") + " --history-out " + s.path("h.csv"))
            .code == 1);
  CHECK(run_cli(s, "--help").code == 0);
}
