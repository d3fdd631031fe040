#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "doctest.h"
#include "json.hpp"
#include "rulechain/dj.hpp"
#include "support/fixtures.hpp"

#ifndef RULECHAIN_CLI_PATH
#error "RULECHAIN_CLI_PATH must name the built command-line tool"
#endif

namespace fs = std::filesystem;
using namespace rulechain;

namespace {

const fs::path kWork = fs::temp_directory_path() / "rulechain_cli";

struct Outcome {
  int code;
  std::string out;
};

Outcome run(const std::string& args) {
  const fs::path out = kWork / "stdout.txt";
  const std::string cmd = std::string(RULECHAIN_CLI_PATH) + " " + args + " > " + out.string() + " 2> " +
                          (kWork / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::trunc) << text; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("exit codes and subcommands") {
  fs::remove_all(kWork);
  fs::create_directories(kWork);

  // gen-dj writes JSONL plus a sidecar
  auto gen = run("gen-dj --level 1 --n 6 --seed 3 --out " + (kWork / "dj1.jsonl").string() +
                 " --sidecar " + (kWork / "dj1.side.json").string());
  CHECK(gen.code == 0);
  CHECK(fs::exists(kWork / "dj1.jsonl"));
  std::ifstream side(kWork / "dj1.side.json");
  CHECK(nlohmann::json::parse(side)["samples"].size() == 6);

  // a scripted run where every prompt has a response
  const std::string trace = testing::dj_trace_text(dj::DjVerdict{false, false, false, {}});
  write(kWork / "script.json", nlohmann::json{{"default", trace}}.dump());
  auto ok = run("eval --task " + (kWork / "dj1.jsonl").string() + " --method chain_of_logic --script " +
                (kWork / "script.json").string() + " --out " + (kWork / "out").string() +
                " --format json");
  CHECK(ok.code == 0);
  CHECK(nlohmann::json::parse(ok.out)["method"] == "chain_of_logic");
  CHECK(fs::exists(kWork / "out" / "report.json"));

  // report rendering of the saved file
  auto rep = run("report " + (kWork / "out" / "report.json").string() + " --merge");
  CHECK(rep.code == 0);
  CHECK(rep.out.find("Chain of Logic") != std::string::npos);

  // replay with an empty cache: every sample skipped -> exit 2
  auto partial = run("eval --task " + (kWork / "dj1.jsonl").string() + " --method chain_of_logic --script " +
                     (kWork / "script.json").string() + " --replay --cache-dir " +
                     (kWork / "empty-cache").string());
  CHECK(partial.code == 2);

  // configuration errors -> exit 1
  CHECK(run("eval --task /nonexistent.jsonl --script " + (kWork / "script.json").string()).code == 1);
  CHECK(run("eval --task dj:1:2 --method bogus").code == 1);
  CHECK(run("ablate --task dj:1:2 --step 9 --script " + (kWork / "script.json").string()).code == 1);
  CHECK(run("frobnicate").code == 1);

  // verify-trace
  write(kWork / "trace.txt", trace);
  auto v = run("verify-trace " + (kWork / "trace.txt").string());
  CHECK(v.code == 0);
  CHECK(nlohmann::json::parse(v.out)["error_class"] == "None");
  write(kWork / "junk.txt", "no structure here");
  auto junk = run("verify-trace " + (kWork / "junk.txt").string());
  CHECK(nlohmann::json::parse(junk.out)["error_class"] == "ParseFailure");
}

}
