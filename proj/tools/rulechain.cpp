// Command-line front end: eval, ablate, gen-dj, report, verify-trace.
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

#include "CLI11.hpp"
#include "rulechain/datasets.hpp"
#include "rulechain/dj.hpp"
#include "rulechain/harness.hpp"
#include "rulechain/trace.hpp"

namespace {

using namespace rulechain;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitPartial = 2;

struct RunFlags {
  std::string config;
  std::vector<std::string> tasks;
  std::string method;
  std::string backend;
  std::string script;
  std::string model;
  std::string demo;
  std::string demo_file;
  std::size_t limit = 0;
  std::uint64_t seed = 0;
  bool shuffle = false;
  std::string cache_dir;
  bool replay = false;
  std::string out;
  int jobs = 1;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string format = "text";
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

void add_run_flags(CLI::App* app, RunFlags& f) {
  f.opts["config"] = app->add_option("--config", f.config, "JSON run config (flags override it)");
  f.opts["task"] = app->add_option("--task", f.tasks, "Sample file, or dj:<level>:<n>[:<seed>]");
  f.opts["method"] = app->add_option("--method", f.method, "Prompting method id");
  f.opts["backend"] = app->add_option("--backend", f.backend, "scripted | openai | offline");
  f.opts["script"] = app->add_option("--script", f.script, "Response table for the scripted backend");
  f.opts["model"] = app->add_option("--model", f.model, "Model name sent to the backend");
  f.opts["demo"] = app->add_option("--demo", f.demo, "Demonstration id, or auto");
  f.opts["demo-file"] = app->add_option("--demo-file", f.demo_file, "Extra demonstration JSON");
  f.opts["limit"] = app->add_option("--limit", f.limit, "Samples per task");
  f.opts["seed"] = app->add_option("--seed", f.seed, "Shuffle seed");
  f.opts["shuffle"] = app->add_flag("--shuffle", f.shuffle, "Shuffle samples before --limit");
  f.opts["cache-dir"] = app->add_option("--cache-dir", f.cache_dir, "Response cache directory");
  f.opts["replay"] = app->add_flag("--replay", f.replay, "Serve from the cache only");
  f.opts["out"] = app->add_option("--out", f.out, "Directory for report.{json,csv,txt}");
  f.opts["jobs"] = app->add_option("--jobs", f.jobs, "Concurrent requests");
  f.opts["temperature"] = app->add_option("--temperature", f.temperature, "Sampling temperature");
  f.opts["max-tokens"] = app->add_option("--max-tokens", f.max_tokens, "Completion token limit");
  app->add_option("--format", f.format, "Printed report format: text | json | csv");
}

harness::RunConfig build_config(const RunFlags& f) {
  harness::RunConfig c;
  if (f.given("config")) c = harness::RunConfig::load_file(f.config);
  if (f.given("task")) {
    c.tasks.clear();
    for (const auto& t : f.tasks) c.tasks.push_back(harness::TaskSpec::parse(t));
  }
  if (f.given("method")) {
    c.method = prompt::MethodConfig::make(prompt::method_from_string(f.method), c.method.ablate);
  }
  if (f.given("backend")) c.backend = f.backend;
  if (f.given("script")) c.script = f.script;
  if (f.given("model")) c.model = f.model;
  if (f.given("demo")) c.demo = f.demo;
  if (f.given("demo-file")) c.demo_file = f.demo_file;
  if (f.given("limit")) c.limit = f.limit;
  if (f.given("seed")) c.seed = f.seed;
  if (f.given("shuffle")) c.shuffle = f.shuffle;
  if (f.given("cache-dir")) c.cache_dir = f.cache_dir;
  if (f.given("replay")) c.replay = f.replay;
  if (f.given("out")) c.out_dir = f.out;
  if (f.given("jobs")) c.jobs = f.jobs;
  if (f.given("temperature")) c.temperature = f.temperature;
  if (f.given("max-tokens")) c.max_tokens = f.max_tokens;
  return c;
}

std::string read_all(std::istream& in) {
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int cmd_eval(const RunFlags& f) {
  const auto config = build_config(f);
  const auto report = harness::run_eval(config);
  std::cout << harness::render_report(report, harness::report_format_from_string(f.format));
  return report.skipped() > 0 ? kExitPartial : kExitOk;
}

int cmd_ablate(const RunFlags& f, int step) {
  const auto config = build_config(f);
  const auto result = harness::run_ablation(config, step);
  std::cout << harness::render_report(result.ablated, harness::report_format_from_string(f.format));
  return result.full.skipped() + result.ablated.skipped() > 0 ? kExitPartial : kExitOk;
}

int cmd_gen_dj(int level, std::size_t n, std::uint64_t seed, const std::string& policy_name,
               const std::string& out, const std::string& sidecar_path) {
  const auto policy = dj::aic_policy_from_string(policy_name);
  const auto generated = dj::generate(level, n, seed, policy);
  std::vector<Sample> samples;
  for (const auto& g : generated) samples.push_back(g.sample);
  if (out.empty() || out == "-") {
    for (const auto& s : samples) std::cout << datasets::to_record(s).dump() << '\n';
  } else {
    datasets::write_jsonl(out, samples);
  }
  if (!sidecar_path.empty()) {
    std::ofstream side(sidecar_path, std::ios::trunc);
    if (!side) throw ConfigError("cannot write " + sidecar_path);
    side << dj::sidecar(generated, policy).dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& files, bool merge, const std::string& format) {
  std::vector<harness::EvalReport> reports;
  for (const auto& f : files) reports.push_back(harness::read_report(f));
  if (merge) {
    std::cout << harness::render_merged_table(reports);
    return kExitOk;
  }
  const auto fmt = harness::report_format_from_string(format);
  for (const auto& r : reports) std::cout << harness::render_report(r, fmt);
  return kExitOk;
}

int cmd_verify_trace(const std::string& file, bool with_trace) {
  std::string text;
  if (file.empty() || file == "-") {
    text = read_all(std::cin);
  } else {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open " + file);
    text = read_all(in);
  }
  nlohmann::json out;
  try {
    const auto t = trace::parse_trace(text);
    const auto v = trace::verify(t);
    out = v.to_json();
    if (with_trace) out = {{"verdict", v.to_json()}, {"trace", t.to_json()}};
  } catch (const trace::ParseFailure& e) {
    out = trace::parse_failure_verdict(e).to_json();
    if (with_trace) out = {{"verdict", out}, {"trace", nullptr}};
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule-reasoning evaluation harness"};
  app.require_subcommand(1);

  RunFlags eval_flags;
  auto* eval = app.add_subcommand("eval", "Evaluate a method on one or more tasks");
  add_run_flags(eval, eval_flags);

  RunFlags ablate_flags;
  int step = 0;
  auto* ablate = app.add_subcommand("ablate", "Compare chain of logic with one step removed");
  add_run_flags(ablate, ablate_flags);
  ablate->add_option("--step", step, "Reasoning step to remove (1-6)")->required();

  int level = 1;
  std::size_t n = 100;
  std::uint64_t gen_seed = 0;
  std::string policy = "every_pair_exceeds";
  std::string gen_out;
  std::string sidecar;
  auto* gen = app.add_subcommand("gen-dj", "Generate diversity-jurisdiction samples");
  gen->add_option("--level", level, "Complexity level 1-6")->required();
  gen->add_option("--n", n, "Number of samples");
  gen->add_option("--seed", gen_seed, "Generator seed");
  gen->add_option("--policy", policy,
                  "every_pair_exceeds | any_pair_exceeds | per_plaintiff_aggregate");
  gen->add_option("--out", gen_out, "JSONL output file (default stdout)");
  gen->add_option("--sidecar", sidecar, "Write structured facts and verdicts here");

  std::vector<std::string> report_files;
  bool merge = false;
  std::string report_format = "text";
  auto* report = app.add_subcommand("report", "Render or merge saved reports");
  report->add_option("files", report_files, "report.json files")->required();
  report->add_flag("--merge", merge, "Methods x models table of macro averages");
  report->add_option("--format", report_format, "text | json | csv");

  std::string trace_file;
  bool with_trace = false;
  auto* verify = app.add_subcommand("verify-trace", "Parse and verify a chain-of-logic trace");
  verify->add_option("file", trace_file, "Trace text file (default stdin)");
  verify->add_flag("--with-trace", with_trace, "Include the parsed trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (eval->parsed()) return cmd_eval(eval_flags);
    if (ablate->parsed()) return cmd_ablate(ablate_flags, step);
    if (gen->parsed()) return cmd_gen_dj(level, n, gen_seed, policy, gen_out, sidecar);
    if (report->parsed()) return cmd_report(report_files, merge, report_format);
    if (verify->parsed()) return cmd_verify_trace(trace_file, with_trace);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitOk;
}
