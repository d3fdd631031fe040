#include "rulechain/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <thread>

#include "text_util.hpp"

namespace rulechain::harness {

namespace fs = std::filesystem;

namespace {

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                         const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_as(const nlohmann::json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("'" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Tasks

TaskSpec TaskSpec::parse(const std::string& text, const fs::path& base_dir) {
  TaskSpec t;
  if (text.rfind("dj:", 0) == 0) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
      const auto colon = text.find(':', start);
      parts.push_back(text.substr(start, colon - start));
      if (colon == std::string::npos) break;
      start = colon + 1;
    }
    if (parts.size() < 3 || parts.size() > 5) {
      throw ConfigError("generated task must look like dj:<level>:<n>[:<seed>[:<policy>]], got '" +
                        text + "'");
    }
    try {
      t.dj_level = std::stoi(parts[1]);
      t.dj_n = std::stoul(parts[2]);
      if (parts.size() > 3) t.dj_seed = std::stoull(parts[3]);
    } catch (const std::exception&) {
      throw ConfigError("bad number in task '" + text + "'");
    }
    if (parts.size() > 4) t.aic_policy = dj::aic_policy_from_string(parts[4]);
    dj::level_shape(t.dj_level);
    t.name = "dj" + std::to_string(t.dj_level);
    return t;
  }
  t.path = resolve(text, base_dir);
  t.name = t.path->stem().string();
  t.load.format = datasets::format_from_path(*t.path);
  return t;
}

TaskSpec TaskSpec::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (j.is_string()) return parse(j.get<std::string>(), base_dir);
  if (!j.is_object()) throw ConfigError("task entry must be a string or an object");
  const std::string where = "task " + j.value("name", j.value("path", std::string("entry")));
  reject_unknown_keys(j,
                      {"name", "path", "format", "mapping", "rule", "issue", "family",
                       "require_gold", "dj_level", "n", "seed", "aic_policy"},
                      where);
  TaskSpec t;
  if (j.contains("path")) {
    t = parse(get_as<std::string>(j, "path", where), base_dir);
    if (j.contains("format")) {
      t.load.format = datasets::format_from_string(get_as<std::string>(j, "format", where));
    }
    if (j.contains("mapping")) t.load.mapping = datasets::FieldMapping::from_json(j.at("mapping"));
    if (j.contains("rule")) t.load.default_rule = get_as<std::string>(j, "rule", where);
    if (j.contains("issue")) t.load.default_issue = get_as<std::string>(j, "issue", where);
    if (j.contains("family")) {
      t.load.family = RuleFamily::parse(get_as<std::string>(j, "family", where));
    }
    if (j.contains("require_gold")) t.load.require_gold = get_as<bool>(j, "require_gold", where);
  } else if (j.contains("dj_level")) {
    t.dj_level = get_as<int>(j, "dj_level", where);
    dj::level_shape(t.dj_level);
    t.dj_n = get_as<std::size_t>(j, "n", where);
    t.dj_seed = j.contains("seed") ? get_as<std::uint64_t>(j, "seed", where) : 0;
    if (j.contains("aic_policy")) {
      t.aic_policy = dj::aic_policy_from_string(get_as<std::string>(j, "aic_policy", where));
    }
    t.name = "dj" + std::to_string(t.dj_level);
  } else {
    throw ConfigError(where + " needs either 'path' or 'dj_level'");
  }
  if (j.contains("name")) t.name = get_as<std::string>(j, "name", where);
  return t;
}

nlohmann::json TaskSpec::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  if (path) {
    j["path"] = path->string();
    j["format"] = load.format == datasets::FileFormat::kTsv ? "tsv" : "jsonl";
    if (load.default_rule) j["rule"] = *load.default_rule;
    if (load.default_issue) j["issue"] = *load.default_issue;
    if (load.family) j["family"] = load.family->to_string();
    j["require_gold"] = load.require_gold;
  } else {
    j["dj_level"] = dj_level;
    j["n"] = dj_n;
    j["seed"] = dj_seed;
    j["aic_policy"] = std::string(dj::to_string(aic_policy));
  }
  return j;
}

std::vector<TaskSample> load_task(const TaskSpec& spec) {
  std::vector<TaskSample> out;
  if (spec.generated()) {
    for (auto& g : dj::generate(spec.dj_level, spec.dj_n, spec.dj_seed, spec.aic_policy)) {
      out.push_back({std::move(g.sample), std::move(g.facts), std::move(g.verdict)});
    }
    return out;
  }
  for (auto& s : datasets::load_samples(*spec.path, spec.load)) {
    TaskSample ts{std::move(s), std::nullopt, std::nullopt};
    if (ts.sample.family.kind == RuleFamily::Kind::kDiversityJurisdiction) {
      try {
        auto fp = dj::parse_facts(ts.sample.facts);
        auto verdict = dj::oracle(fp, spec.aic_policy);
        // Element-level gold is only trusted when the oracle agrees with the label.
        if (!ts.sample.gold || verdict.answer == *ts.sample.gold) {
          ts.facts = std::move(fp);
          ts.oracle = std::move(verdict);
        }
      } catch (const ConfigError&) {
      }
    }
    out.push_back(std::move(ts));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Config

void RunConfig::validate() const {
  method.validate();
  static const std::set<std::string> backends = {"scripted", "openai", "offline"};
  if (!backends.contains(backend)) throw ConfigError("unknown backend '" + backend + "'");
  if (model.empty()) throw ConfigError("model name is empty");
  if (tasks.empty()) throw ConfigError("no tasks configured");
  std::set<std::string> names;
  for (const auto& t : tasks) {
    if (!names.insert(t.name).second) {
      throw ConfigError("two tasks share the name '" + t.name + "'; set 'name' to tell them apart");
    }
  }
  if (limit && *limit == 0) throw ConfigError("limit must be positive");
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  if (temperature < 0.0) throw ConfigError("temperature must be non-negative");
  if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
  if (replay && !cache_dir) throw ConfigError("replay mode needs a cache directory");
  if (prompt::is_zero_shot(method.method) && demo != "auto") {
    throw ConfigError("zero-shot methods take no demonstration");
  }
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const std::string where = "config";
  reject_unknown_keys(j,
                      {"method", "ablate", "backend", "script", "model", "tasks", "demo",
                       "demo_file", "templates_dir", "limit", "seed", "shuffle", "cache_dir",
                       "replay", "out", "jobs", "temperature", "max_tokens"},
                      where);
  RunConfig c;
  std::optional<int> ablate;
  if (j.contains("ablate") && !j.at("ablate").is_null()) ablate = get_as<int>(j, "ablate", where);
  const auto method = j.contains("method")
                          ? prompt::method_from_string(get_as<std::string>(j, "method", where))
                          : prompt::Method::kChainOfLogic;
  c.method = prompt::MethodConfig::make(method, ablate);
  if (j.contains("backend")) c.backend = get_as<std::string>(j, "backend", where);
  if (j.contains("script")) c.script = resolve(get_as<std::string>(j, "script", where), base_dir);
  if (j.contains("model")) c.model = get_as<std::string>(j, "model", where);
  if (j.contains("tasks")) {
    if (!j.at("tasks").is_array()) throw ConfigError("'tasks' must be an array");
    for (const auto& t : j.at("tasks")) c.tasks.push_back(TaskSpec::from_json(t, base_dir));
  }
  if (j.contains("demo")) c.demo = get_as<std::string>(j, "demo", where);
  if (j.contains("demo_file")) {
    c.demo_file = resolve(get_as<std::string>(j, "demo_file", where), base_dir);
  }
  if (j.contains("templates_dir")) {
    c.templates_dir = resolve(get_as<std::string>(j, "templates_dir", where), base_dir);
  }
  if (j.contains("limit") && !j.at("limit").is_null()) {
    c.limit = get_as<std::size_t>(j, "limit", where);
  }
  if (j.contains("seed")) c.seed = get_as<std::uint64_t>(j, "seed", where);
  if (j.contains("shuffle")) c.shuffle = get_as<bool>(j, "shuffle", where);
  if (j.contains("cache_dir")) {
    c.cache_dir = resolve(get_as<std::string>(j, "cache_dir", where), base_dir);
  }
  if (j.contains("replay")) c.replay = get_as<bool>(j, "replay", where);
  if (j.contains("out")) c.out_dir = resolve(get_as<std::string>(j, "out", where), base_dir);
  if (j.contains("jobs")) c.jobs = get_as<int>(j, "jobs", where);
  if (j.contains("temperature")) c.temperature = get_as<double>(j, "temperature", where);
  if (j.contains("max_tokens")) c.max_tokens = get_as<int>(j, "max_tokens", where);
  return c;
}

RunConfig RunConfig::load_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, path.parent_path());
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["method"] = std::string(prompt::to_string(method.method));
  j["ablate"] = method.ablate ? nlohmann::json(*method.ablate) : nlohmann::json();
  j["backend"] = backend;
  if (script) j["script"] = script->string();
  j["model"] = model;
  j["tasks"] = nlohmann::json::array();
  for (const auto& t : tasks) j["tasks"].push_back(t.to_json());
  j["demo"] = demo;
  if (demo_file) j["demo_file"] = demo_file->string();
  if (templates_dir) j["templates_dir"] = templates_dir->string();
  j["limit"] = limit ? nlohmann::json(*limit) : nlohmann::json();
  j["seed"] = seed;
  j["shuffle"] = shuffle;
  if (cache_dir) j["cache_dir"] = cache_dir->string();
  j["replay"] = replay;
  if (out_dir) j["out"] = out_dir->string();
  j["jobs"] = jobs;
  j["temperature"] = temperature;
  j["max_tokens"] = max_tokens;
  return j;
}

std::unique_ptr<backend::Backend> make_backend(const RunConfig& config) {
  std::string live_id;
  if (config.backend == "openai") {
    const auto http_config = backend::HttpConfig::from_env();
    if (http_config.api_key.empty() && !config.replay) {
      throw ConfigError("the openai backend needs OPENAI_API_KEY");
    }
    auto http = std::make_unique<backend::HttpChatBackend>(http_config);
    if (!config.replay) return http;
    live_id = http->id();
  } else if (config.backend == "scripted") {
    if (!config.script) {
      if (config.replay) return std::make_unique<backend::OfflineBackend>("scripted");
      throw ConfigError("the scripted backend needs a script file");
    }
    std::ifstream in(*config.script);
    if (!in) throw ConfigError("cannot open script " + config.script->string());
    try {
      auto scripted = backend::ScriptedBackend::from_json(nlohmann::json::parse(in));
      if (!config.replay) return scripted;
      live_id = scripted->id();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("script " + config.script->string() + " is malformed: " + e.what());
    }
  } else if (config.backend == "offline") {
    live_id = "offline";
  } else {
    throw ConfigError("unknown backend '" + config.backend + "'");
  }
  return std::make_unique<backend::OfflineBackend>(live_id);
}

// ---------------------------------------------------------------------------
// Evaluation

logic::Assignment dj_element_gold(const trace::ReasoningTrace& t, const dj::DjVerdict& oracle) {
  logic::Assignment gold;
  for (const auto& e : t.elements) {
    const std::string text = text::to_lower(e.text);
    if (text.find("divers") != std::string::npos) {
      gold[e.variable] = oracle.complete_diversity;
    } else if (text.find("amount") != std::string::npos || text.find("aic") != std::string::npos ||
               text.find("75") != std::string::npos) {
      gold[e.variable] = oracle.aic_satisfied;
    } else {
      return {};
    }
  }
  return gold;
}

namespace {

struct Job {
  std::string task;
  const TaskSample* item;
  std::string prompt;
};

struct Environment {
  prompt::DemoLibrary demos;
  prompt::TemplateSet templates;
};

Environment make_environment(const RunConfig& config) {
  Environment env{prompt::DemoLibrary::builtin(),
                  config.templates_dir ? prompt::TemplateSet::load_dir(*config.templates_dir)
                                       : prompt::TemplateSet::builtin()};
  if (config.demo_file) env.demos.load_file(*config.demo_file);
  return env;
}

// With "auto", the first library demonstration (in library order) whose rule
// differs from every sample in the task.
std::optional<prompt::Demonstration> choose_demo(const RunConfig& config, const Environment& env,
                                                 const std::string& task,
                                                 const std::vector<TaskSample>& samples) {
  if (prompt::is_zero_shot(config.method.method)) return std::nullopt;
  auto differs = [&](const prompt::Demonstration& d) {
    return std::none_of(samples.begin(), samples.end(), [&](const TaskSample& s) {
      return s.sample.family.same_rule(d.sample.family);
    });
  };
  if (config.demo != "auto") {
    const auto& d = env.demos.get(config.demo);
    if (!differs(d)) {
      throw ConfigError("demonstration '" + d.id + "' applies the same rule as task '" + task +
                        "'");
    }
    return d;
  }
  for (const auto& d : env.demos.all()) {
    if (d.solutions.contains(config.method.method) && differs(d)) return d;
  }
  throw ConfigError("no demonstration of a different rule is available for task '" + task + "'");
}

using Generate = std::function<std::string(const backend::GenerationRequest&)>;

SampleRecord evaluate_one(const Job& job, const RunConfig& config, const Generate& generate) {
  const Sample& s = job.item->sample;
  SampleRecord rec;
  rec.task = job.task;
  rec.id = s.id;
  rec.gold = s.gold;
  rec.prompt_digest = backend::sha256_hex(job.prompt);
  const auto format = config.method.answer_format;
  const bool chain = config.method.method == prompt::Method::kChainOfLogic;

  backend::GenerationRequest req;
  req.prompt = job.prompt;
  req.model_name = config.model;
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  try {
    rec.raw_output = generate(req);

    std::optional<trace::ReasoningTrace> parsed;
    if (chain) {
      try {
        parsed = trace::parse_trace(rec.raw_output);
      } catch (const trace::ParseFailure& f) {
        rec.verdict = trace::parse_failure_verdict(f);
      }
    }
    rec.model_answer = parsed ? parsed->model_final : trace::extract_answer(rec.raw_output, format);

    if (!rec.model_answer) {
      backend::GenerationRequest follow = req;
      follow.prompt = job.prompt + "\n" + text::trim(rec.raw_output) + "\n" +
                      prompt::build_followup(format);
      rec.followup_output = generate(follow);
      rec.model_answer = trace::extract_answer(*rec.followup_output, format);
      if (parsed) parsed->model_final = rec.model_answer;
    }

    if (parsed) {
      logic::Assignment element_gold;
      if (job.item->oracle) element_gold = dj_element_gold(*parsed, *job.item->oracle);
      rec.verdict = element_gold.empty() ? trace::verify(*parsed) : trace::verify(*parsed, element_gold);
      rec.trace = parsed->to_json();
    }
    if (!rec.model_answer && rec.verdict.error_class == trace::ErrorClass::kNone) {
      rec.verdict.error_class = trace::ErrorClass::kAmbiguousAnswer;
    }
  } catch (const backend::BackendError& e) {
    rec.skipped = true;
    rec.skip_reason = std::string(backend::to_string(e.kind())) + ": " + e.what();
    rec.verdict = {};
    rec.trace = nullptr;
    return rec;
  }

  if (rec.gold) rec.correct = rec.model_answer.has_value() && *rec.model_answer == *rec.gold;
  rec.verdict.correct = rec.correct;
  return rec;
}

}  // namespace

EvalReport run_eval(const RunConfig& config, backend::Backend& backend, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_now();
  config.validate();
  auto log = options.log ? options.log : [](const std::string& m) { std::cerr << m << '\n'; };

  // Everything that can fail on configuration or data happens here, before
  // the first backend call.
  const Environment env = make_environment(config);
  std::vector<std::vector<TaskSample>> loaded;
  for (const auto& spec : config.tasks) {
    auto samples = load_task(spec);
    if (config.shuffle) {
      std::mt19937_64 rng(config.seed);
      for (std::size_t i = samples.size(); i > 1; --i) {
        std::swap(samples[i - 1], samples[rng() % i]);
      }
    }
    if (config.limit && samples.size() > *config.limit) samples.resize(*config.limit);
    loaded.push_back(std::move(samples));
  }
  std::vector<Job> jobs;
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    const auto demo = choose_demo(config, env, config.tasks[t].name, loaded[t]);
    for (const auto& item : loaded[t]) {
      jobs.push_back({config.tasks[t].name, &item,
                      prompt::build_prompt(config.method, demo, item.sample, env.templates)});
    }
  }

  std::optional<backend::ResponseCache> cache;
  if (config.cache_dir) {
    cache.emplace(backend, *config.cache_dir,
                  config.replay ? backend::CacheMode::kReplay : backend::CacheMode::kReadWrite);
    cache->set_warning_sink(log);
  }
  std::atomic<std::size_t> direct_calls{0};
  Generate generate = [&](const backend::GenerationRequest& req) -> std::string {
    if (cache) return cache->cached_generate(req).text;
    direct_calls.fetch_add(1);
    return backend.generate(req).text;
  };

  std::vector<SampleRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
      records[i] = evaluate_one(jobs[i], config, generate);
    }
  };
  const int workers = std::min<int>(config.jobs, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& r : records) {
    if (r.skipped) log("skipped " + r.task + "/" + r.id + ": " + r.skip_reason);
  }

  EvalReport report;
  report.method = std::string(prompt::to_string(config.method.method));
  report.ablate = config.method.ablate;
  report.model = config.model;
  report.backend = backend.id();
  report.records = std::move(records);
  // Task order follows the config; records within a task are sorted by id.
  std::map<std::string, std::size_t> task_order;
  for (std::size_t t = 0; t < config.tasks.size(); ++t) task_order.emplace(config.tasks[t].name, t);
  std::stable_sort(report.records.begin(), report.records.end(),
                   [&](const SampleRecord& a, const SampleRecord& b) {
                     const auto ta = task_order.at(a.task);
                     const auto tb = task_order.at(b.task);
                     if (ta != tb) return ta < tb;
                     return a.id < b.id;
                   });
  for (std::size_t t = 0; t < config.tasks.size(); ++t) {
    TaskResult tr;
    tr.name = config.tasks[t].name;
    if (!loaded[t].empty()) tr.rule = loaded[t].front().sample.family.rule_key();
    report.tasks.push_back(std::move(tr));
  }
  aggregate(report);

  const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - started);
  report.run_info = {
      {"started_at", started_at},
      {"finished_at", utc_now()},
      {"elapsed_ms", elapsed.count()},
      {"jobs", config.jobs},
      {"backend_calls", cache ? cache->backend_calls() : direct_calls.load()},
      {"cache_hits", cache ? cache->hits() : 0},
      {"config", config.to_json()},
  };
  if (config.out_dir) write_report(report, *config.out_dir);
  return report;
}

EvalReport run_eval(const RunConfig& config, const RunOptions& options) {
  config.validate();
  auto backend = make_backend(config);
  return run_eval(config, *backend, options);
}

AblationResult run_ablation(const RunConfig& base, int step, backend::Backend& backend,
                            const RunOptions& options) {
  if (base.method.method != prompt::Method::kChainOfLogic) {
    throw ConfigError("ablation applies to chain of logic only");
  }
  if (step < 1 || step > 6) {
    throw ConfigError("ablation step must be in 1..6, got " + std::to_string(step));
  }
  RunConfig full = base;
  full.method.ablate.reset();
  RunConfig ablated = base;
  ablated.method.ablate = step;
  if (base.out_dir) {
    full.out_dir = *base.out_dir / "full";
    ablated.out_dir = *base.out_dir / ("step" + std::to_string(step));
  }
  ablated.validate();

  AblationResult result;
  result.full = run_eval(full, backend, options);
  result.ablated = run_eval(ablated, backend, options);
  if (!result.full.macro_average || !result.ablated.macro_average) {
    throw std::runtime_error("ablation needs labeled, non-skipped samples in both runs");
  }
  const double full_acc = *result.full.macro_average;
  const double ablated_acc = *result.ablated.macro_average;
  // Rounded to a millionth of a point so identical runs give exactly 0.
  result.delta = std::round((ablated_acc - full_acc) * 100.0 * 1e6) / 1e6;
  result.ablated.ablation = AblationInfo{step, full_acc, ablated_acc, result.delta};
  if (ablated.out_dir) write_report(result.ablated, *ablated.out_dir);
  return result;
}

AblationResult run_ablation(const RunConfig& base, int step, const RunOptions& options) {
  base.validate();
  auto backend = make_backend(base);
  return run_ablation(base, step, *backend, options);
}

}  // namespace rulechain::harness
