// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "trajaudit/core/runtime.hpp"
#include "trajaudit/gateway/gateway.hpp"
#include "trajaudit/synth/generator.hpp"
#include "trajaudit/verifier/parse.hpp"
#include "trajaudit/verifier/prompt.hpp"

namespace trajaudit::gateway {

// ---------------------------------------------------------------------------
// Verifier role

inline ChatRequest audit_request(const Trajectory& t, const verifier::PromptTemplate& tpl) {
  const verifier::AuditPrompt p = verifier::build_audit_prompt(t, tpl);
  ChatRequest r;
  r.messages = {{"system", p.system_instruction}, {"user", p.rendered_trajectory}};
  r.temperature = 0.0;
  r.max_tokens = 512;
  return r;
}

// GatewayError propagates; only the model's text goes through the parser.
inline DiagnosticReport remote_verify(const Trajectory& t, ChatGateway& gw, const verifier::PromptTemplate& tpl) {
  return verifier::parse_report(gw.complete(audit_request(t, tpl)));
}

class RemoteVerifier : public Verifier {
public:
  RemoteVerifier(ChatGateway& gw, verifier::PromptTemplate tpl) : gw_(gw), tpl_(std::move(tpl)) {}
  DiagnosticReport audit(const Trajectory& t) override { return remote_verify(t, gw_, tpl_); }

private:
  ChatGateway& gw_;
  verifier::PromptTemplate tpl_;
};

// ---------------------------------------------------------------------------
// Generator role

inline constexpr const char* kContinuationSystem =
    R"sys(You continue the execution trajectory of a tool-using agent. You are given the task, the tools and the steps taken so far. Write the remaining steps until the agent finishes, staying consistent with everything above.
Answer with one JSON object and nothing else:
{"steps": [{"thought": "...", "action": "Tool(arg, ...)", "observation": "..."}]})sys";

inline ChatRequest continuation_request(const synth::PerturbedPrefix& p, double temperature = 0.7) {
  Trajectory view;
  view.id = p.source.id;
  view.instruction = p.instruction;
  view.available_tools = p.available_tools;
  view.steps = p.prefix;
  std::string user = verifier::build_audit_prompt(view, verifier::default_template()).rendered_trajectory;
  if (!p.completion_directive.empty()) user += "\nDirective: " + p.completion_directive + "\n";
  user += "\nContinue from step " + std::to_string(p.prefix.size() + 1) + ".";
  ChatRequest r;
  r.messages = {{"system", kContinuationSystem}, {"user", user}};
  r.temperature = temperature;
  r.max_tokens = 2048;
  return r;
}

// Accepts {"steps": [...]} or a bare array, optionally wrapped in prose.
inline synth::Continuation parse_continuation(const std::string& text, const std::vector<std::string>& refusal_phrases) {
  using synth::GenerationFailure;
  auto attempt = [](const std::string& s) { return json::parse(s, nullptr, false); };
  json j = attempt(text);
  if (j.is_discarded()) {
    const auto open = text.find_first_of("{[");
    const auto close = text.find_last_of("}]");
    if (open != std::string::npos && close != std::string::npos && close > open) j = attempt(text.substr(open, close - open + 1));
  }
  if (j.is_discarded()) {
    if (synth::is_refusal(text, refusal_phrases)) return GenerationFailure{GenerationFailure::Kind::Refusal, text.substr(0, 200)};
    return GenerationFailure{GenerationFailure::Kind::ParseFailure, "response is not JSON"};
  }
  const json& steps = j.is_object() ? j.value("steps", json()) : j;
  if (!steps.is_array() || steps.empty()) return GenerationFailure{GenerationFailure::Kind::ParseFailure, "no steps array"};
  std::vector<synth::StepDraft> out;
  for (const json& s : steps) {
    if (!s.is_object() || !s.value("action", json()).is_string() || s["action"].get<std::string>().empty()) {
      return GenerationFailure{GenerationFailure::Kind::ParseFailure, "step without an action"};
    }
    out.push_back({s.value("thought", std::string()), s["action"].get<std::string>(), s.value("observation", std::string())});
  }
  return out;
}

class GatewayGenerator : public synth::Generator {
public:
  explicit GatewayGenerator(ChatGateway& gw, double temperature = 0.7,
                            std::vector<std::string> refusal_phrases = synth::default_refusal_phrases())
      : gw_(gw), temperature_(temperature), refusal_phrases_(std::move(refusal_phrases)) {}

  synth::Continuation continue_from(const synth::PerturbedPrefix& p) override {
    return parse_continuation(gw_.complete(continuation_request(p, temperature_)), refusal_phrases_);
  }

private:
  ChatGateway& gw_;
  double temperature_;
  std::vector<std::string> refusal_phrases_;
};

} // namespace trajaudit::gateway
