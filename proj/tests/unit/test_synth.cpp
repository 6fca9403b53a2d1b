// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "support/generators.hpp"
#include "trajaudit/synth/pipeline.hpp"
#include "trajaudit/synth/split.hpp"

using namespace trajaudit;
using namespace trajaudit::synth;
using trajaudit::testkit::linear_trajectory;

namespace {

PerturbationSpec spec_for(AnomalyType type, int t, const Trajectory& gold) {
  Rng rng(1);
  return {type, t, generic_payload(gold, type, t, rng)};
}

std::vector<StepDraft> three_steps() {
  return {{"next", "go(a)", "ok a"}, {"then", "go(b)", "ok b"}, {"done", "finish()", "finished"}};
}

// Seeds spread over 13 tasks and 5 domains with lengths 3..20.
std::vector<Trajectory> scripted_seeds(int count) {
  std::vector<Trajectory> out;
  for (int i = 0; i < count; ++i) {
    const Domain d = kAllDomains[static_cast<std::size_t>(i % 5)];
    Trajectory t = linear_trajectory("seed-" + std::to_string(i), 3 + (i * 7) % 18, d, "task-" + std::to_string(i % 13));
    t.available_tools = {{"act1", "act1(x)"}, {"act2", "act2(x)"}};
    out.push_back(std::move(t));
  }
  return out;
}

} // namespace

TEST(TargetBand, Arithmetic) {
  EXPECT_EQ(target_band(16).lo, 5);
  EXPECT_EQ(target_band(16).hi, 15);
  EXPECT_EQ(target_band(10).lo, 3);  // ceil(0.3 * 10) is exactly 3
  EXPECT_EQ(target_band(3).lo, 2);
  EXPECT_EQ(target_band(3).hi, 2);
  EXPECT_THROW(target_band(2), TooShort);
  Rng rng(0);
  EXPECT_THROW(sample_target_step(2, rng), TooShort);
}

TEST(TargetBand, UniformOverBandForSixteenSteps) {
  Rng rng = derive_rng(7, "band");
  std::map<int, int> freq;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) ++freq[sample_target_step(16, rng)];
  ASSERT_EQ(freq.size(), 11u);
  EXPECT_EQ(freq.begin()->first, 5);
  EXPECT_EQ(freq.rbegin()->first, 15);
  double chi2 = 0;
  const double expected = draws / 11.0;
  for (const auto& [t, n] : freq) chi2 += (n - expected) * (n - expected) / expected;
  EXPECT_LT(chi2, 29.59);  // df = 10, p = 0.001
}

TEST(TargetBand, DegenerateBandAndDeterminism) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_target_step(3, rng), 2);
  Rng a = derive_rng(42, "seed-1"), b = derive_rng(42, "seed-1");
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_target_step(30, a), sample_target_step(30, b));
}

TEST(InjectPerturbation, FlawedReasoningReplacesOnlyTheThought) {
  const Trajectory gold = linear_trajectory("g", 10);
  const PerturbedPrefix p = inject_perturbation(gold, {AnomalyType::ReasoningError, 5, FlawedReasoning{"wrong idea"}});
  ASSERT_EQ(p.prefix.size(), 5u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(p.prefix[i], gold.steps[i]);
  EXPECT_EQ(p.prefix[4].thought, "wrong idea");
  EXPECT_EQ(p.prefix[4].action, gold.steps[4].action);
  EXPECT_EQ(p.prefix[4].observation, gold.steps[4].observation);
}

TEST(InjectPerturbation, CompletionSignalOverwritesObservation) {
  const Trajectory gold = linear_trajectory("g", 10);
  const PerturbedPrefix p = inject_perturbation(gold, {AnomalyType::RedundantContinuation, 6, CompletionSignal{"Task Completed"}});
  EXPECT_EQ(p.prefix[5].observation, "Task Completed");
  EXPECT_EQ(p.completion_directive, "ignore completion and continue");
}

TEST(InjectPerturbation, InvalidActionSetsActionAndException) {
  const Trajectory gold = linear_trajectory("g", 6);
  const PerturbedPrefix p = inject_perturbation(gold, {AnomalyType::ExecutionError, 3, InvalidAction{"act3(nope)", "Error: boom"}});
  EXPECT_EQ(p.prefix[2].action.raw, "act3(nope)");
  EXPECT_EQ(p.prefix[2].action.args.at("0"), "nope");
  EXPECT_EQ(p.prefix[2].observation, "Error: boom");
}

TEST(InjectPerturbation, RedundantStepsAreAppendedAfterTarget) {
  const Trajectory gold = linear_trajectory("g", 10);
  RedundantSteps loop{{{"again", "act4(x)", "observation 4"}, {"again", "act4(x)", "observation 4"}}, RedundancyPattern::Loop};
  const PerturbedPrefix p = inject_perturbation(gold, {AnomalyType::Inefficiency, 4, loop});
  ASSERT_EQ(p.prefix.size(), 6u);
  EXPECT_EQ(p.prefix[4].index, 5);
  EXPECT_EQ(p.prefix[5].action.raw, "act4(x)");
  EXPECT_THROW(inject_perturbation(gold, {AnomalyType::Inefficiency, 10, loop}), IndexError);
  EXPECT_THROW(inject_perturbation(gold, {AnomalyType::Inefficiency, 4, RedundantSteps{}}), PayloadMismatch);
}

TEST(InjectPerturbation, ImpossibleConstraintRewritesContext) {
  Trajectory gold = linear_trajectory("g", 5);
  gold.available_tools = {{"act2", "act2(x)"}, {"act3", "act3(x)"}};
  const PerturbedPrefix p = inject_perturbation(gold, {AnomalyType::FailureToRefuse, 2, ImpossibleConstraint{{"act2"}, "Never use act2."}});
  ASSERT_EQ(p.available_tools.size(), 1u);
  EXPECT_EQ(p.available_tools[0].name, "act3");
  EXPECT_NE(p.instruction.find("Never use act2."), std::string::npos);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(p.prefix[i], gold.steps[i]);
}

TEST(InjectPerturbation, Preconditions) {
  const Trajectory gold = linear_trajectory("g", 5);
  EXPECT_THROW(inject_perturbation(gold, {AnomalyType::ReasoningError, 0, FlawedReasoning{"x"}}), IndexError);
  EXPECT_THROW(inject_perturbation(gold, {AnomalyType::ReasoningError, 6, FlawedReasoning{"x"}}), IndexError);
  EXPECT_THROW(inject_perturbation(gold, {AnomalyType::ReasoningError, 2, CompletionSignal{}}), PayloadMismatch);
}

TEST(CompleteTrajectory, LengthArithmetic) {
  const Trajectory gold = linear_trajectory("g", 10);
  ScriptedGenerator gen(three_steps());
  const auto ia = complete_trajectory(inject_perturbation(gold, spec_for(AnomalyType::ReasoningError, 5, gold)), gen);
  ASSERT_TRUE(std::holds_alternative<Trajectory>(ia));
  EXPECT_EQ(std::get<Trajectory>(ia).size(), 8u);

  RedundantSteps loop{{{"a", "act5(x)", "o"}, {"b", "act5(x)", "o"}}, RedundancyPattern::Loop};
  const auto ii = complete_trajectory(inject_perturbation(gold, {AnomalyType::Inefficiency, 5, loop}), gen);
  ASSERT_TRUE(std::holds_alternative<Trajectory>(ii));
  const Trajectory& t = std::get<Trajectory>(ii);
  EXPECT_EQ(t.size(), 10u);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.steps[i].index, static_cast<int>(i) + 1);
  EXPECT_NO_THROW(validate(t));
}

TEST(CompleteTrajectory, RefusalAndParseFailure) {
  const Trajectory gold = linear_trajectory("g", 10);
  const PerturbedPrefix p = inject_perturbation(gold, spec_for(AnomalyType::FailureToRefuse, 5, gold));
  ScriptedGenerator refusing({{"I cannot continue with this task.", "stop()", ""}});
  const auto r = complete_trajectory(p, refusing);
  ASSERT_TRUE(std::holds_alternative<GenerationFailure>(r));
  EXPECT_EQ(std::get<GenerationFailure>(r).kind, GenerationFailure::Kind::Refusal);

  ScriptedGenerator broken({{"fine", "", ""}});  // empty action is not a step
  const auto b = complete_trajectory(p, broken);
  ASSERT_TRUE(std::holds_alternative<GenerationFailure>(b));
  EXPECT_EQ(std::get<GenerationFailure>(b).kind, GenerationFailure::Kind::ParseFailure);

  // Refusal phrases are configurable.
  ScriptedGenerator polite({{"Regrettably no.", "stop()", ""}});
  EXPECT_TRUE(std::holds_alternative<Trajectory>(complete_trajectory(p, polite)));
  EXPECT_TRUE(std::holds_alternative<GenerationFailure>(complete_trajectory(p, polite, {"regrettably"})));
}

TEST(Annotate, LocationRule) {
  const Trajectory t = linear_trajectory("x", 12);
  RedundantSteps loop{{{"a", "b()", "c"}}, RedundancyPattern::Loop};
  EXPECT_EQ(annotate(t, {AnomalyType::Inefficiency, 7, loop}, "c", "g").label.first_error_step, 8);
  EXPECT_EQ(annotate(t, {AnomalyType::ReasoningError, 5, FlawedReasoning{"x"}}, "c", "g").label.first_error_step, 5);
  const auto iiib = annotate(t, {AnomalyType::RedundantContinuation, 6, CompletionSignal{}}, "c", "g");
  EXPECT_EQ(iiib.label.first_error_step, 6);
  EXPECT_EQ(iiib.label.verdict, Verdict::Anomaly);
  EXPECT_EQ(iiib.label.source_id, "g");
}

TEST(PipelineProperties, PrefixPreservationAndAnnotationOverAllSubtypes) {
  Rng rng(2024);
  CopyTailGenerator gen;
  for (int iter = 0; iter < 300; ++iter) {
    Trajectory gold = testkit::random_trajectory(rng, "gold-" + std::to_string(iter), 3, 25);
    for (Step& s : gold.steps) s.action = parse_action("tool" + std::to_string(s.index) + "(x)");
    const AnomalyType type = kAllAnomalyTypes[static_cast<std::size_t>(iter % 5)];
    const int t = sample_target_step(static_cast<int>(gold.size()), rng);
    const PerturbationSpec spec{type, t, generic_payload(gold, type, t, rng)};
    const auto c = complete_trajectory(inject_perturbation(gold, spec), gen, {});
    ASSERT_TRUE(std::holds_alternative<Trajectory>(c));
    const Trajectory& out = std::get<Trajectory>(c);
    for (int i = 0; i < t - 1; ++i) ASSERT_EQ(out.steps[static_cast<std::size_t>(i)], gold.steps[static_cast<std::size_t>(i)]);
    const LabeledTrajectory item = annotate(out, spec, default_error_content(spec, gold), gold.id);
    ASSERT_EQ(item.label.first_error_step, type == AnomalyType::Inefficiency ? t + 1 : t);
    ASSERT_NO_THROW(validate(item));
  }
}

TEST(FilterSeeds, RuleValidator) {
  std::vector<Trajectory> seeds;
  for (int i = 0; i < 10; ++i) {
    Trajectory t = linear_trajectory("s" + std::to_string(i), 4);
    if (i % 3 == 1) t.steps[2].observation = "ERROR";
    seeds.push_back(t);
  }
  const FilterResult r = filter_seeds(seeds, observation_rule_validator("ERROR"));
  EXPECT_EQ(r.rejected.size(), 3u);
  EXPECT_EQ(r.report.pass_rate(), (Ratio{7, 10}));
  EXPECT_DOUBLE_EQ(r.report.pass_rate().value(), 0.7);
  EXPECT_EQ(r.accepted.front().id, "s0");
  EXPECT_EQ(r.accepted.back().id, "s9");

  const FilterResult all = filter_seeds(seeds, accept_all_validator());
  EXPECT_TRUE(all.rejected.empty());
  EXPECT_EQ(all.report.pass_rate().value(), 1.0);
  EXPECT_EQ(filter_seeds({}, accept_all_validator()).report.pass_rate().value(), 0.0);
}

TEST(PipelineReportTest, PublishedCountsRenderAtOneDecimal) {
  PipelineReport r;
  r.raw_seed_count = 37625;
  r.accepted_seed_count = 34436;
  r.synthesis_attempts = 34436;
  r.synthesis_successes = 31742;
  r.refusals = 1000;
  r.parse_failures = 34436 - 31742 - 1000;
  EXPECT_EQ(r.pass_rate().percent(), "91.5%");
  EXPECT_EQ(r.success_rate().percent(), "92.2%");
  EXPECT_TRUE(r.conserved());
  EXPECT_EQ(r.to_json()["pass_rate_pct"], "91.5%");
}

TEST(AnomalyMix, QuotasWithinOne) {
  const MixPlan nine = anomaly_mix_plan(9);
  EXPECT_EQ(nine.category_total(1), 3u);
  EXPECT_EQ(nine.category_total(2), 3u);
  EXPECT_EQ(nine.category_total(3), 3u);
  for (std::size_t total = 3; total <= 600; ++total) {
    const MixPlan p = anomaly_mix_plan(total);
    ASSERT_EQ(p.total(), total);
    const std::size_t c[3] = {p.category_total(1), p.category_total(2), p.category_total(3)};
    ASSERT_LE(*std::max_element(c, c + 3) - *std::min_element(c, c + 3), 1u);
    const auto ia = p.quotas.at(AnomalyType::ReasoningError), ib = p.quotas.at(AnomalyType::ExecutionError);
    const auto iiia = p.quotas.at(AnomalyType::FailureToRefuse), iiib = p.quotas.at(AnomalyType::RedundantContinuation);
    ASSERT_LE(std::max(ia, ib) - std::min(ia, ib), 1u);
    ASSERT_LE(std::max(iiia, iiib) - std::min(iiia, iiib), 1u);
  }
  const MixPlan big = anomaly_mix_plan(31742);
  for (int c = 1; c <= 3; ++c) EXPECT_LE(std::abs(static_cast<double>(big.category_total(c)) - 31742.0 / 3), 1.0);
}

TEST(AssembleBalanced, PairsAndErrors) {
  EXPECT_TRUE(assemble_balanced({}).empty());
  std::vector<std::pair<Trajectory, LabeledTrajectory>> pairs;
  for (int i = 0; i < 5; ++i) {
    const Trajectory g = linear_trajectory("g" + std::to_string(i), 5, Domain::Web, "task-" + std::to_string(i % 2));
    Trajectory a = g;
    a.id = "a" + std::to_string(i);
    pairs.emplace_back(g, LabeledTrajectory{a, AnomalyLabel::anomaly(AnomalyType::ReasoningError, 2, "c", g.id)});
  }
  const Dataset ds = assemble_balanced(pairs);
  EXPECT_EQ(ds.size(), 10u);
  EXPECT_EQ(ds.manifest().verdict_count(Verdict::Normal), ds.manifest().verdict_count(Verdict::Anomaly));
  EXPECT_EQ(ds.manifest().conventions.at("type_ii_first_error_step"), "first inserted step (t+1)");

  pairs[3].second.label.source_id = "g0";
  try {
    assemble_balanced(pairs);
    FAIL() << "expected PairingError";
  } catch (const PairingError& e) {
    EXPECT_NE(std::string(e.what()).find("pair 3"), std::string::npos);
  }
}

TEST(RunPipeline, ScriptedSeedsBalancedAndDeterministic) {
  const std::vector<Trajectory> seeds = scripted_seeds(120);
  CopyTailGenerator gen;
  PipelineConfig cfg;
  cfg.root_seed = 42;
  const PipelineResult a = run_pipeline(seeds, accept_all_validator(), gen, cfg);
  const PipelineResult b = run_pipeline(seeds, accept_all_validator(), gen, cfg);
  EXPECT_EQ(a.dataset.size(), 240u);
  EXPECT_TRUE(a.report.conserved());
  EXPECT_EQ(a.report.synthesis_successes, 120u);
  EXPECT_EQ(a.dataset.manifest().digest(), b.dataset.manifest().digest());
  ASSERT_EQ(a.dataset.size(), b.dataset.size());
  for (std::size_t i = 0; i < a.dataset.size(); ++i) ASSERT_EQ(a.dataset.items()[i], b.dataset.items()[i]);
  for (const auto& [task, n] : a.dataset.manifest().by_task) EXPECT_EQ(n % 2, 0u) << task;

  cfg.root_seed = 43;
  const PipelineResult c = run_pipeline(seeds, accept_all_validator(), gen, cfg);
  EXPECT_NE(serialize_trajectory(a.dataset.items()[1]), serialize_trajectory(c.dataset.items()[1]));
}

TEST(RunPipeline, FailuresAreCountedNotPaired) {
  std::vector<Trajectory> seeds = scripted_seeds(9);
  seeds.push_back(linear_trajectory("short", 2));
  ScriptedGenerator refusing({{"I'm sorry, I can't help with that.", "stop()", ""}});
  const PipelineResult r = run_pipeline(seeds, accept_all_validator(), refusing, {});
  EXPECT_EQ(r.report.synthesis_attempts, 9u);
  EXPECT_EQ(r.report.refusals, 9u);
  EXPECT_TRUE(r.report.conserved());
  EXPECT_TRUE(r.dataset.empty());
  EXPECT_EQ(r.too_short, std::vector<std::string>{"short"});
}

TEST(RunPipeline, RestrictedMix) {
  PipelineConfig cfg;
  cfg.types = {AnomalyType::Inefficiency};
  CopyTailGenerator gen;
  const PipelineResult r = run_pipeline(scripted_seeds(20), accept_all_validator(), gen, cfg);
  EXPECT_EQ(r.dataset.manifest().by_anomaly_type.at("II"), 20u);
}

TEST(StratifiedSplit, TenPercentOfPairsPerTask) {
  std::vector<LabeledTrajectory> items;
  for (int i = 0; i < 100; ++i) {
    const std::string g = "g" + std::to_string(i);
    items.push_back({linear_trajectory(g, 4), AnomalyLabel::normal()});
    items.push_back({linear_trajectory("a" + std::to_string(i), 4), AnomalyLabel::anomaly(AnomalyType::Inefficiency, 2, "c", g)});
  }
  const Dataset ds(items);
  const Split s = stratified_split(ds, 0.1, 9);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_EQ(s.train.size(), 180u);
  std::set<std::string> test_keys, train_keys;
  for (const auto& it : s.test.items()) test_keys.insert(pair_key(it));
  for (const auto& it : s.train.items()) train_keys.insert(pair_key(it));
  for (const auto& k : test_keys) EXPECT_EQ(train_keys.count(k), 0u);

  const Split again = stratified_split(ds, 0.1, 9);
  ASSERT_EQ(again.test.size(), s.test.size());
  for (std::size_t i = 0; i < s.test.size(); ++i) EXPECT_EQ(again.test.items()[i].trajectory.id, s.test.items()[i].trajectory.id);

  EXPECT_THROW(stratified_split(ds, 1.5, 1), std::invalid_argument);
  EXPECT_THROW(stratified_split(ds, 0.0, 1), std::invalid_argument);
}
