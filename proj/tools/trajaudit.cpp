// SPDX-License-Identifier: Apache-2.0
// trajaudit: one entry point for synthesis, evaluation, runtime monitoring
// and human review. Exit codes: 0 success, 1 domain error, 2 usage error.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "trajaudit/cli/config.hpp"
#include "trajaudit/gateway/roles.hpp"
#include "trajaudit/metrics/metrics.hpp"
#include "trajaudit/monitor/monitor.hpp"
#include "trajaudit/review/server.hpp"
#include "trajaudit/scriptenv/session.hpp"
#include "trajaudit/synth/split.hpp"
#include "trajaudit/verifier/oracle.hpp"
#include "trajaudit/verifier/rules.hpp"

namespace fs = std::filesystem;
using namespace trajaudit;
using cli::CliConfig;
using cli::UsageError;

namespace {

const std::map<std::string, std::string>& flag_help() {
  static const std::map<std::string, std::string> h = {
      {"seeds", "seed trajectories (JSONL)"},
      {"dataset", "labeled dataset (JSONL)"},
      {"anomalies", "synthesized anomalies to pair with --seeds (JSONL)"},
      {"predictions", "predictions file (JSONL); omit to run --verifier"},
      {"metrics", "comma list of [name=]summary.json files"},
      {"out", "output directory"},
      {"seed", "root RNG seed"},
      {"tau", "content similarity threshold for JEM"},
      {"interval", "monitor check interval k"},
      {"retry_budget", "rollbacks allowed per step index"},
      {"max_steps", "environment step budget per run"},
      {"test_fraction", "test share per task, in (0, 1)"},
      {"generator", "scripted | replay | live"},
      {"verifier", "oracle | rule | remote"},
      {"validator_marker", "reject seeds whose observations contain this text"},
      {"anomaly_mix", "'even' or a comma list of I.a,I.b,II,III.a,III.b"},
      {"tasks", "extra scriptenv task file (JSON)"},
      {"task", "scriptenv task name"},
      {"inject_type", "anomaly the scripted agent acts out: I.a | I.b | II"},
      {"inject_step", "step the injection applies to"},
      {"template", "audit prompt template file"},
      {"recording", "gateway recording (JSONL) for replay or record"},
      {"base_url", "chat-completions base URL"},
      {"model", "model name sent to the endpoint"},
      {"per_domain", "review samples per domain"},
      {"host", "review service bind address"},
      {"port", "review service port"},
      {"log", "review verdict log (JSONL)"},
  };
  return h;
}

// ---------------------------------------------------------------------------
// Shared wiring

fs::path out_dir(const CliConfig& cfg) {
  const fs::path p = cfg.required("out");
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw Error("IoError", "cannot create output directory '" + p.string() + "': " + ec.message());
  return p;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", "cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_json(const fs::path& p, const ojson& j) { write_text_file(p.string(), j.dump(2, ' ', false, json::error_handler_t::replace) + "\n"); }

scriptenv::TaskRegistry task_registry(const CliConfig& cfg) {
  scriptenv::TaskRegistry r = scriptenv::TaskRegistry::builtin();
  if (!cfg.str("tasks").empty()) r.load_file(cfg.str("tasks"));
  return r;
}

gateway::GatewayConfig gateway_config(const CliConfig& cfg, bool live) {
  gateway::GatewayConfig g;
  g.base_url = cfg.str("base_url");
  g.model_name = cfg.str("model");
  g.auth_token_env_var = cfg.str("token_env");
  g.max_retries = static_cast<int>(cfg.integer("max_retries"));
  g.backoff_base = std::chrono::milliseconds(cfg.integer("backoff_ms"));
  g.timeout = std::chrono::milliseconds(cfg.integer("timeout_ms"));
  g.concurrency_budget = static_cast<int>(cfg.integer("concurrency"));
  g.recording_path = cfg.str("recording");
  g.mode = live ? (g.recording_path.empty() ? gateway::GatewayMode::Live : gateway::GatewayMode::Record)
                : gateway::GatewayMode::Replay;
  try {
    g.validate();
  } catch (const gateway::GatewayError& e) {
    throw UsageError(e.what());
  }
  return g;
}

verifier::PromptTemplate prompt_template(const CliConfig& cfg) {
  return cfg.str("template").empty() ? verifier::default_template() : verifier::load_template(cfg.str("template"));
}

std::vector<AnomalyType> anomaly_mix(const CliConfig& cfg) {
  if (cfg.str("anomaly_mix") == "even") return {};
  std::vector<AnomalyType> out;
  for (const std::string& name : cli::split_list(cfg.str("anomaly_mix"))) {
    const auto t = anomaly_type_from_string(name);
    if (!t) throw UsageError("anomaly_mix: unknown anomaly type '" + name + "'");
    out.push_back(*t);
  }
  if (out.empty()) throw UsageError("anomaly_mix: no anomaly types given");
  return out;
}

synth::Validator seed_validator(const CliConfig& cfg) {
  const std::string& marker = cfg.str("validator_marker");
  return marker.empty() ? synth::accept_all_validator() : synth::observation_rule_validator(marker);
}

std::string trajectory_line(const Trajectory& t) {
  return trajectory_fields_json(t).dump(-1, ' ', false, json::error_handler_t::replace);
}

// Owns whatever a --verifier choice needs to stay alive.
struct VerifierHandle {
  std::unique_ptr<gateway::ChatGateway> gw;
  std::unique_ptr<Verifier> verifier;
};

VerifierHandle make_verifier(const CliConfig& cfg, const std::string& kind, const scriptenv::TaskRegistry& registry,
                             const Trajectory* reference) {
  VerifierHandle h;
  if (kind == "rule") {
    h.verifier = std::make_unique<verifier::RuleVerifier>(verifier::scriptenv_rules(registry));
  } else if (kind == "remote") {
    // A recording alone replays; with a base URL it records.
    const bool live = cfg.str("recording").empty() || !cfg.str("base_url").empty();
    h.gw = std::make_unique<gateway::ChatGateway>(gateway_config(cfg, live));
    h.verifier = std::make_unique<gateway::RemoteVerifier>(*h.gw, prompt_template(cfg));
  } else if (reference != nullptr) {
    h.verifier = std::make_unique<verifier::ReferenceOracle>(*reference);
  } else {
    throw UsageError("the oracle verifier needs labels; use evaluate --verifier oracle");
  }
  return h;
}

// ---------------------------------------------------------------------------
// Subcommands

ojson cmd_validate_seeds(const CliConfig& cfg) {
  const auto seeds = cli::read_trajectories_jsonl(cfg.required("seeds"));
  const synth::FilterResult r = synth::filter_seeds(seeds, seed_validator(cfg));
  const fs::path out = out_dir(cfg);
  std::string buf;
  for (const Trajectory& t : r.accepted) buf += trajectory_line(t) + "\n";
  write_text_file((out / "accepted_seeds.jsonl").string(), buf);
  ojson rejected = ojson::array();
  for (const auto& rej : r.rejected) rejected.push_back({{"id", rej.trajectory.id}, {"reason", rej.reason}});
  return {{"pipeline_report", r.report.to_json()}, {"rejected", rejected}, {"accepted_path", (out / "accepted_seeds.jsonl").string()}};
}

ojson cmd_synthesize(const CliConfig& cfg) {
  const auto seeds = cli::read_trajectories_jsonl(cfg.required("seeds"));
  const std::string gen_kind = cfg.choice("generator", {"scripted", "replay", "live"});
  synth::PipelineConfig pc;
  pc.root_seed = cfg.unsigned_integer("seed");
  pc.band.lower_fraction = cfg.real("band_lower_fraction");
  pc.band.min_step = static_cast<int>(cfg.integer("band_min_step"));
  if (!(pc.band.lower_fraction > 0.0 && pc.band.lower_fraction <= 1.0) || pc.band.min_step < 1) {
    throw UsageError("band parameters out of range");
  }
  if (!cfg.str("refusal_phrases").empty()) pc.refusal_phrases = cli::split_list(cfg.str("refusal_phrases"));
  pc.types = anomaly_mix(cfg);

  const scriptenv::TaskRegistry registry = task_registry(cfg);
  const bool all_scriptenv = std::all_of(seeds.begin(), seeds.end(), [&](const Trajectory& t) { return registry.contains(t.task); });
  synth::PayloadFactory payloads = synth::generic_payload;
  if (all_scriptenv) {
    payloads = [&registry](const Trajectory& g, AnomalyType type, int t, Rng& rng) {
      return scriptenv::scriptenv_payload(registry, g, type, t, rng);
    };
  }

  std::unique_ptr<gateway::ChatGateway> gw;
  std::unique_ptr<synth::Generator> gen;
  std::string gen_detail;
  if (gen_kind == "scripted") {
    if (all_scriptenv) {
      gen = std::make_unique<scriptenv::ScriptEnvGenerator>(registry);
      gen_detail = "scriptenv";
    } else {
      gen = std::make_unique<synth::CopyTailGenerator>();
      gen_detail = "copy-tail";
    }
  } else {
    gw = std::make_unique<gateway::ChatGateway>(gateway_config(cfg, gen_kind == "live"));
    gen = std::make_unique<gateway::GatewayGenerator>(*gw, 0.7, pc.refusal_phrases);
    gen_detail = std::string(gateway::to_string(gw->config().mode));
  }

  const synth::PipelineResult r = synth::run_pipeline(seeds, seed_validator(cfg), *gen, pc, payloads);
  const fs::path out = out_dir(cfg);
  save_dataset((out / "dataset.jsonl").string(), r.dataset);
  write_json(out / "manifest.json", r.dataset.manifest().to_json());
  write_json(out / "pipeline_report.json", r.report.to_json());
  ojson failures = ojson::array();
  for (const auto& [id, f] : r.failures) {
    failures.push_back({{"id", id},
                        {"kind", synth::to_string(f.kind)},
                        {"detail", f.detail}});
  }
  return {{"generator", gen_detail},
          {"pipeline_report", r.report.to_json()},
          {"manifest", r.dataset.manifest().to_json()},
          {"manifest_digest", r.dataset.manifest().digest()},
          {"items", r.dataset.size()},
          {"too_short", r.too_short},
          {"failures", failures},
          {"dataset_path", (out / "dataset.jsonl").string()}};
}

ojson cmd_assemble(const CliConfig& cfg) {
  const auto goldens = cli::read_trajectories_jsonl(cfg.required("seeds"));
  const auto anomalies = read_labeled_jsonl(cfg.required("anomalies"));
  std::map<std::string, const Trajectory*> by_id;
  for (const Trajectory& g : goldens) by_id[g.id] = &g;
  std::vector<std::pair<Trajectory, LabeledTrajectory>> pairs;
  for (const LabeledTrajectory& a : anomalies) {
    const std::string src = a.label.source_id.value_or("");
    auto it = by_id.find(src);
    if (it == by_id.end()) throw PairingError("anomaly '" + a.trajectory.id + "' names unknown source '" + src + "'");
    pairs.emplace_back(*it->second, a);
  }
  const Dataset ds = synth::assemble_balanced(pairs);
  const fs::path out = out_dir(cfg);
  save_dataset((out / "dataset.jsonl").string(), ds);
  write_json(out / "manifest.json", ds.manifest().to_json());
  return {{"pairs", pairs.size()}, {"items", ds.size()}, {"manifest", ds.manifest().to_json()}};
}

ojson cmd_split(const CliConfig& cfg) {
  const double f = cfg.real("test_fraction");
  if (!(f > 0.0 && f < 1.0)) throw UsageError("test_fraction must be in (0, 1), got " + cfg.str("test_fraction"));
  const Dataset ds = load_dataset(cfg.required("dataset"));
  const synth::Split s = synth::stratified_split(ds, f, cfg.unsigned_integer("seed"));
  const fs::path out = out_dir(cfg);
  save_dataset((out / "train.jsonl").string(), s.train);
  save_dataset((out / "test.jsonl").string(), s.test);
  return {{"train", s.train.size()},
          {"test", s.test.size()},
          {"train_manifest", s.train.manifest().to_json()},
          {"test_manifest", s.test.manifest().to_json()}};
}

ojson cmd_evaluate(const CliConfig& cfg) {
  const Dataset ds = load_dataset(cfg.required("dataset"));
  const double tau = cfg.real("tau");
  if (!(tau >= 0.0 && tau <= 1.0)) throw UsageError("tau must be in [0, 1]");
  PredictionMap preds;
  std::string source;
  if (!cfg.str("predictions").empty()) {
    preds = read_predictions(cfg.str("predictions"));
    source = cfg.str("predictions");
  } else {
    source = cfg.choice("verifier", {"oracle", "rule", "remote"});
    if (source == "oracle") {
      preds = verifier::oracle_predictions(ds);
    } else {
      const scriptenv::TaskRegistry registry = task_registry(cfg);
      VerifierHandle h = make_verifier(cfg, source, registry, nullptr);
      for (const auto& item : ds.items()) preds[item.trajectory.id] = h.verifier->audit(item.trajectory);
    }
  }
  metrics::EvaluateOptions opts;
  opts.tau = tau;
  const metrics::MetricsReport m = metrics::evaluate(ds, preds, opts);
  const fs::path out = out_dir(cfg);
  std::vector<std::pair<std::string, DiagnosticReport>> ordered;
  for (const auto& item : ds.items()) {
    if (auto it = preds.find(item.trajectory.id); it != preds.end()) ordered.emplace_back(it->first, it->second);
  }
  write_predictions((out / "predictions.jsonl").string(), ordered);
  return {{"prediction_source", source}, {"metrics", metrics::metrics_to_json(m)}};
}

struct MonitorSetup {
  scriptenv::TaskRegistry registry;
  scriptenv::TaskSpec task;
  scriptenv::ScriptedAgentSpec agent;
  monitor::MonitorConfig config;
  monitor::RunContext ctx;
};

MonitorSetup monitor_setup(const CliConfig& cfg) {
  MonitorSetup s{task_registry(cfg), {}, {}, {}, {}};
  s.task = s.registry.get(cfg.required("task"));
  s.agent = scriptenv::golden_agent_spec(s.task);
  if (!cfg.str("inject_type").empty()) {
    const auto type = anomaly_type_from_string(cfg.str("inject_type"));
    if (!type || !(*type == AnomalyType::ReasoningError || *type == AnomalyType::ExecutionError || *type == AnomalyType::Inefficiency)) {
      throw UsageError("inject_type must be I.a, I.b or II");
    }
    const int t = static_cast<int>(cfg.integer("inject_step"));
    const int n = static_cast<int>(s.task.golden.size());
    if (t < 1 || t > (*type == AnomalyType::Inefficiency ? n - 1 : n)) {
      throw UsageError("inject_step " + std::to_string(t) + " is outside the " + std::to_string(n) + "-step script");
    }
    Rng rng = derive_rng(cfg.unsigned_integer("seed"), "inject");
    const Trajectory gold = scriptenv::golden_run(s.task);
    s.agent.injection = synth::PerturbationSpec{*type, t, scriptenv::scriptenv_payload(s.registry, gold, *type, t, rng)};
  }
  s.config.check_interval = static_cast<int>(cfg.integer("interval"));
  s.config.retry_budget = static_cast<int>(cfg.integer("retry_budget"));
  s.config.max_steps = static_cast<int>(cfg.integer("max_steps"));
  s.config.tau = cfg.real("tau");
  if (s.config.check_interval < 1 || s.config.retry_budget < 0 || s.config.max_steps < 1) {
    throw UsageError("interval and max_steps must be >= 1, retry_budget >= 0");
  }
  s.ctx = {s.task.name + "-monitored", s.task.name, s.task.domain};
  return s;
}

ojson outcome_summary(const monitor::RunOutcome& o) {
  return {{"status", monitor::to_string(o.status)},
          {"env_steps_executed", o.env_steps_executed},
          {"rollbacks", o.rollbacks.size()},
          {"steps_saved_vs_restart", o.steps_saved_vs_restart},
          {"final_steps", o.final_trajectory.size()}};
}

void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::string buf;
  for (const auto& l : lines) buf += l + "\n";
  write_text_file(p.string(), buf);
}

ojson cmd_monitor_run(const CliConfig& cfg) {
  MonitorSetup s = monitor_setup(cfg);
  const Trajectory gold = scriptenv::golden_run(s.task);
  VerifierHandle h = make_verifier(cfg, cfg.choice("verifier", {"oracle", "rule", "remote"}), s.registry, &gold);
  scriptenv::ScriptedAgent agent(s.agent);
  scriptenv::Session env(s.task);
  const monitor::RunOutcome o = monitor::run_with_monitor(agent, env, *h.verifier, s.config, s.ctx);
  const fs::path out = out_dir(cfg);
  write_lines(out / "run_report.jsonl", monitor::outcome_lines(o));
  ojson events = ojson::array();
  for (const auto& e : o.rollbacks) events.push_back({{"detected_at_step", e.detected_at_step}, {"rolled_back_to", e.rolled_back_to}});
  ojson r = outcome_summary(o);
  r["rollback_events"] = events;
  return r;
}

ojson cmd_compare_restart(const CliConfig& cfg) {
  MonitorSetup s = monitor_setup(cfg);
  const Trajectory gold = scriptenv::golden_run(s.task);
  VerifierHandle h = make_verifier(cfg, cfg.choice("verifier", {"oracle", "rule", "remote"}), s.registry, &gold);
  const monitor::Comparison c = monitor::compare_with_restart(
      [&] { return std::make_unique<scriptenv::ScriptedAgent>(s.agent); },
      [&] { return std::make_unique<scriptenv::Session>(s.task); }, *h.verifier, s.config, s.ctx);
  const fs::path out = out_dir(cfg);
  write_lines(out / "monitored_report.jsonl", monitor::outcome_lines(c.monitored));
  write_lines(out / "restart_report.jsonl", monitor::outcome_lines(c.restart_baseline));
  return {{"monitored", outcome_summary(c.monitored)},
          {"restart_baseline", outcome_summary(c.restart_baseline)},
          {"extra_steps", c.extra_steps()}};
}

std::atomic<bool> g_stop{false};

extern "C" void request_stop(int) { g_stop = true; }

ojson cmd_review_serve(const CliConfig& cfg, const std::function<void(const ojson&)>& announce) {
  const fs::path out = out_dir(cfg);
  const std::string log = cfg.str("log").empty() ? (out / "verdicts.jsonl").string() : cfg.str("log");
  review::ReviewStore store(load_dataset(cfg.required("dataset")), log);
  const char* token = std::getenv(cfg.str("review_token_env").c_str());
  const long long port = cfg.integer("port");
  if (port < 0 || port > 65535) throw UsageError("port out of range");
  review::ReviewServer server(store, {cfg.str("host"), static_cast<int>(port), token != nullptr ? token : ""});
  std::signal(SIGINT, request_stop);
  std::signal(SIGTERM, request_stop);
  const int bound = server.start();
  ojson r = {{"host", cfg.str("host")}, {"port", bound}, {"log", log}, {"token_required", token != nullptr && *token != '\0'}};
  announce(r);
  std::cerr << "review service listening on " << cfg.str("host") << ":" << bound << "\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  r["sets"] = store.set_ids();
  return r;
}

ojson cmd_report(const CliConfig& cfg) {
  std::vector<std::pair<std::string, ojson>> rows;
  for (const std::string& entry : cli::split_list(cfg.required("metrics"))) {
    const auto eq = entry.find('=');
    const std::string path = eq == std::string::npos ? entry : entry.substr(eq + 1);
    const std::string name = eq == std::string::npos ? fs::path(path).parent_path().filename().string() : entry.substr(0, eq);
    const ojson j = ojson::parse(read_text(path));
    const ojson* m = &j;
    if (j.contains("results") && j["results"].contains("metrics")) m = &j["results"]["metrics"];
    if (!m->contains("precision")) throw SchemaError(path + ": no metrics found");
    rows.emplace_back(name.empty() ? path : name, *m);
  }
  const std::string table = metrics::render_table(rows);
  std::cout << table;
  const fs::path out = out_dir(cfg);
  write_text_file((out / "report.txt").string(), table);
  return {{"rows", rows.size()}, {"table", table}};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajaudit: synthesize, evaluate and monitor agent trajectories"};
  app.require_subcommand(1);
  std::string config_path;

  struct Sub {
    CLI::App* app;
    std::vector<std::string> keys;
  };
  std::map<std::string, std::string> flag_values;
  std::vector<Sub> subs;
  auto add = [&](const std::string& name, const std::string& about, std::vector<std::string> keys) {
    CLI::App* s = app.add_subcommand(name, about);
    s->add_option("--config", config_path, "key = value config file");
    for (const std::string& k : keys) {
      std::string flag = k;
      std::replace(flag.begin(), flag.end(), '_', '-');
      const auto help = flag_help().find(k);
      s->add_option("--" + flag, flag_values[name + "/" + k], help == flag_help().end() ? k : help->second);
    }
    subs.push_back({s, std::move(keys)});
  };
  add("validate-seeds", "filter seed trajectories with the validator", {"seeds", "out", "validator_marker"});
  add("synthesize", "inject anomalies into seeds and build a balanced dataset",
      {"seeds", "out", "seed", "generator", "validator_marker", "anomaly_mix", "tasks", "recording", "base_url", "model"});
  add("assemble", "pair synthesized anomalies with their goldens", {"seeds", "anomalies", "out"});
  add("split", "per-task train/test split", {"dataset", "out", "seed", "test_fraction"});
  add("evaluate", "score predictions or a verifier against a dataset",
      {"dataset", "predictions", "out", "tau", "verifier", "tasks", "template", "recording", "base_url", "model"});
  add("monitor-run", "run a scripted agent under the rollback monitor",
      {"task", "out", "seed", "verifier", "interval", "retry_budget", "max_steps", "inject_type", "inject_step", "tasks",
       "template", "recording", "base_url", "model"});
  add("compare-restart", "compare rollback with restart-from-scratch",
      {"task", "out", "seed", "verifier", "interval", "retry_budget", "max_steps", "inject_type", "inject_step", "tasks",
       "template", "recording", "base_url", "model"});
  add("review-serve", "serve the human review API", {"dataset", "out", "host", "port", "log"});
  add("report", "render metrics summaries as a table", {"metrics", "out"});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const Sub* chosen = nullptr;
  for (const Sub& s : subs) {
    if (s.app->parsed()) chosen = &s;
  }
  const std::string command = chosen->app->get_name();

  auto fail = [&](int rc, const Error& e) {
    std::cerr << ojson{{"code", e.code()}, {"message", e.what()}}.dump() << "\n";
    return rc;
  };

  try {
    CliConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    for (const std::string& k : chosen->keys) {
      std::string flag = k;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (chosen->app->count("--" + flag) > 0) cfg.set(k, flag_values[command + "/" + k], "--" + flag);
    }
    auto summary = [&](const ojson& results, const std::string& status) {
      ojson s = ojson::object();
      s["command"] = command;
      s["status"] = status;
      s["config"] = cfg.to_json();
      s["results"] = results;
      write_json(out_dir(cfg) / "summary.json", s);
    };

    ojson results;
    if (command == "validate-seeds") results = cmd_validate_seeds(cfg);
    else if (command == "synthesize") results = cmd_synthesize(cfg);
    else if (command == "assemble") results = cmd_assemble(cfg);
    else if (command == "split") results = cmd_split(cfg);
    else if (command == "evaluate") results = cmd_evaluate(cfg);
    else if (command == "monitor-run") results = cmd_monitor_run(cfg);
    else if (command == "compare-restart") results = cmd_compare_restart(cfg);
    else if (command == "review-serve") results = cmd_review_serve(cfg, [&](const ojson& r) { summary(r, "serving"); });
    else if (command == "report") results = cmd_report(cfg);
    summary(results, "ok");
    if (command != "report") std::cout << results.dump(2, ' ', false, json::error_handler_t::replace) << "\n";
    return 0;
  } catch (const UsageError& e) {
    return fail(2, e);
  } catch (const Error& e) {
    return fail(1, e);
  } catch (const std::exception& e) {
    return fail(1, Error("InternalError", e.what()));
  }
}
