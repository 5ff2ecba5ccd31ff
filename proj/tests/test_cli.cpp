#include "samkit/cli.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "test_support.hpp"

namespace fs = std::filesystem;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "samkit");
  std::vector<const char*> argv;
  for (const auto& arg : args) argv.push_back(arg.c_str());
  return samkit::run_cli(static_cast<int>(argv.size()), argv.data());
}

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << content;
}

void tiny_corpus(const fs::path& root) {
  write_text(root / "c/hw1/description.txt",
             "Implement a queue with two stacks and discuss its amortized cost in detail.\n"
             "Rubric: correctness 70, analysis 30.");
  write_text(root / "c/hw1/submissions/s1.txt",
             "I keep an inbox stack and an outbox stack, moving elements lazily on demand.");
  write_text(root / "c/hw1/submissions/s2.txt",
             "Two stacks, one reversed transfer when the outbox drains; each element moves "
             "twice at most, so the amortized cost per operation is constant.");
}

}  // namespace

TEST_CASE("cli requires a subcommand and a run dir") {
  CHECK(cli({}) != 0);
  CHECK(cli({"synthesize"}) != 0);            // missing --run-dir
  CHECK(cli({"--run-dir", "/tmp/x"}) != 0);   // missing subcommand
}

TEST_CASE("cli rejects an unknown mode") {
  TempDir dir;
  CHECK(cli({"--run-dir", (dir.path() / "run").string(), "--mode", "offline", "synthesize"}) !=
        0);
}

TEST_CASE("cli help exits cleanly") { CHECK(cli({"--help"}) == 0); }

TEST_CASE("cli runs ingest and synthesize end to end") {
  TempDir dir;
  tiny_corpus(dir.path() / "corpus");
  std::string run = (dir.path() / "run").string();
  CHECK(cli({"--run-dir", run, "--mode", "record", "ingest", "--corpus",
             (dir.path() / "corpus").string()}) == 0);
  CHECK(fs::exists(dir.path() / "run" / "manifest.jsonl"));
  CHECK(cli({"--run-dir", run, "--mode", "record", "synthesize"}) == 0);
  CHECK(fs::exists(dir.path() / "run" / "pairs.jsonl"));
}

TEST_CASE("cli surfaces pipeline errors as a nonzero exit") {
  TempDir dir;
  std::string run = (dir.path() / "run").string();
  // report before any evaluation has run
  CHECK(cli({"--run-dir", run, "report"}) == 1);
  // ingest without a corpus root
  CHECK(cli({"--run-dir", run, "ingest"}) == 1);
}

TEST_CASE("cli seed flag participates in the config snapshot") {
  TempDir dir;
  tiny_corpus(dir.path() / "corpus");
  std::string run = (dir.path() / "run").string();
  REQUIRE(cli({"--run-dir", run, "--mode", "record", "--seed", "21", "ingest", "--corpus",
               (dir.path() / "corpus").string()}) == 0);
  // same seed resumes, a different seed is refused
  CHECK(cli({"--run-dir", run, "--mode", "record", "--seed", "21", "synthesize"}) == 0);
  CHECK(cli({"--run-dir", run, "--mode", "record", "--seed", "22", "synthesize"}) == 1);
}
