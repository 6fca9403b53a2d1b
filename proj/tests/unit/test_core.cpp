// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "support/generators.hpp"
#include "trajaudit/core/dataset.hpp"
#include "trajaudit/core/jsonl.hpp"
#include "trajaudit/core/ratio.hpp"
#include "trajaudit/core/report.hpp"

using namespace trajaudit;
using trajaudit::testkit::linear_trajectory;

namespace {

std::string record_with_label(const Trajectory& t, const std::string& label_json) {
  auto j = json::parse(serialize_trajectory({t, AnomalyLabel::normal()}));
  j["label"] = json::parse(label_json);
  return j.dump();
}

} // namespace

TEST(ParseTrajectoryLine, NormalRecordHasNoErrorStep) {
  const auto line = record_with_label(linear_trajectory("seed-1", 4), R"({"verdict":"normal"})");
  const LabeledTrajectory item = parse_trajectory_line(line);
  EXPECT_EQ(item.label.verdict, Verdict::Normal);
  EXPECT_FALSE(item.label.first_error_step.has_value());
  EXPECT_FALSE(item.label.anomaly_type.has_value());
  EXPECT_EQ(item.trajectory.size(), 4u);
}

TEST(ParseTrajectoryLine, InefficiencyLabelAtStepEight) {
  const auto line = record_with_label(
      linear_trajectory("fig5", 16),
      R"({"verdict":"anomaly","anomaly_type":"II","first_error_step":8,"error_content":"redundant faucet toggle"})");
  const LabeledTrajectory item = parse_trajectory_line(line);
  EXPECT_EQ(item.label.verdict, Verdict::Anomaly);
  EXPECT_EQ(item.label.anomaly_type, AnomalyType::Inefficiency);
  EXPECT_EQ(item.label.first_error_step, 8);
  EXPECT_EQ(item.label.error_content, "redundant faucet toggle");
}

TEST(ParseTrajectoryLine, ErrorStepBeyondLengthIsInvariantError) {
  const auto line = record_with_label(
      linear_trajectory("fig5", 16),
      R"({"verdict":"anomaly","anomaly_type":"II","first_error_step":20,"error_content":"x"})");
  try {
    parse_trajectory_line(line);
    FAIL() << "expected InvariantError";
  } catch (const InvariantError& e) {
    EXPECT_NE(std::string(e.what()).find("first_error_step"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("fig5"), std::string::npos);
  }
}

TEST(ParseTrajectoryLine, ErrorStepZeroIsInvariantError) {
  const auto line = record_with_label(
      linear_trajectory("t", 3), R"({"verdict":"anomaly","anomaly_type":"I.a","first_error_step":0,"error_content":"x"})");
  EXPECT_THROW(parse_trajectory_line(line), InvariantError);
}

TEST(ParseTrajectoryLine, NormalWithAnomalyFieldsIsInvariantError) {
  const auto line = record_with_label(linear_trajectory("t", 3), R"({"verdict":"normal","first_error_step":2})");
  EXPECT_THROW(parse_trajectory_line(line), InvariantError);
}

TEST(ParseTrajectoryLine, AnomalyMissingContentIsInvariantError) {
  const auto line =
      record_with_label(linear_trajectory("t", 3), R"({"verdict":"anomaly","anomaly_type":"II","first_error_step":2})");
  EXPECT_THROW(parse_trajectory_line(line), InvariantError);
}

TEST(ParseTrajectoryLine, MissingFieldNamesFieldAndRecord) {
  auto j = json::parse(serialize_trajectory({linear_trajectory("rec-7", 2), AnomalyLabel::normal()}));
  j["steps"][1].erase("observation");
  try {
    parse_trajectory_line(j.dump());
    FAIL() << "expected SchemaError";
  } catch (const SchemaError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("steps[1].observation"), std::string::npos) << msg;
    EXPECT_NE(msg.find("rec-7"), std::string::npos) << msg;
  }
}

TEST(ParseTrajectoryLine, WrongTypeIsSchemaError) {
  auto j = json::parse(serialize_trajectory({linear_trajectory("rec-8", 2), AnomalyLabel::normal()}));
  j["steps"][0]["index"] = "one";
  EXPECT_THROW(parse_trajectory_line(j.dump()), SchemaError);
  j = json::parse(serialize_trajectory({linear_trajectory("rec-8", 2), AnomalyLabel::normal()}));
  j["domain"] = "gardening";
  EXPECT_THROW(parse_trajectory_line(j.dump()), SchemaError);
  j = json::parse(serialize_trajectory({linear_trajectory("rec-8", 2), AnomalyLabel::normal()}));
  j["label"]["anomaly_type"] = "IV";
  EXPECT_THROW(parse_trajectory_line(j.dump()), SchemaError);
  EXPECT_THROW(parse_trajectory_line("{not json"), SchemaError);
}

TEST(ParseTrajectoryLine, NonContiguousIndicesRejected) {
  auto j = json::parse(serialize_trajectory({linear_trajectory("gap", 3), AnomalyLabel::normal()}));
  j["steps"][2]["index"] = 4;
  EXPECT_THROW(parse_trajectory_line(j.dump()), InvariantError);
}

TEST(ParseTrajectoryLine, EmptyThoughtNeedsNoReasoningFlag) {
  Trajectory t = linear_trajectory("nothought", 2);
  t.steps[0].thought.clear();
  const std::string line = serialize_trajectory({t, AnomalyLabel::normal()});
  EXPECT_THROW(parse_trajectory_line(line), InvariantError);
  t.metadata["no_reasoning"] = "true";
  EXPECT_NO_THROW(parse_trajectory_line(serialize_trajectory({t, AnomalyLabel::normal()})));
}

TEST(ParseTrajectoryLine, ZeroStepTrajectoryParses) {
  const LabeledTrajectory item =
      parse_trajectory_line(serialize_trajectory({linear_trajectory("empty", 0), AnomalyLabel::normal()}));
  EXPECT_EQ(item.trajectory.size(), 0u);
}

TEST(SerializeTrajectory, MinimalRoundTrip) {
  const LabeledTrajectory x{linear_trajectory("one", 1), AnomalyLabel::normal()};
  EXPECT_EQ(parse_trajectory_line(serialize_trajectory(x)), x);
}

TEST(SerializeTrajectory, UnicodeObservationRoundTrip) {
  LabeledTrajectory x{linear_trajectory("uni", 2), AnomalyLabel::normal()};
  x.trajectory.steps[1].observation = "Température 23 °C · 東京 ✓ 🍽️ \"quoted\"\n\ttab";
  const std::string line = serialize_trajectory(x);
  EXPECT_NE(line.find("東京"), std::string::npos) << "serializer must not escape non-ASCII";
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(parse_trajectory_line(line), x);
}

TEST(SerializeTrajectory, KeysInCanonicalOrder) {
  LabeledTrajectory x{linear_trajectory("order", 1), AnomalyLabel::anomaly(AnomalyType::ExecutionError, 1, "boom", "s")};
  x.trajectory.metadata["k"] = "v";
  x.trajectory.available_tools.push_back({"search", "search(query)"});
  const std::string line = serialize_trajectory(x);
  std::vector<std::string> keys = {"\"id\"", "\"domain\"", "\"task\"", "\"instruction\"", "\"tools\"",
                                   "\"steps\"", "\"label\"", "\"metadata\""};
  std::size_t pos = 0;
  for (const auto& k : keys) {
    const auto at = line.find(k, pos);
    ASSERT_NE(at, std::string::npos) << k;
    pos = at;
  }
  EXPECT_NE(line.find(R"("label":{"verdict":"anomaly","anomaly_type":"I.b","first_error_step":1,"error_content":"boom","source_id":"s"})"),
            std::string::npos);
  EXPECT_NE(line.find(R"j({"index":1,"thought":"thought 1","action":{"tool":"act1","args":{"0":"x"},"raw":"act1(x)"},"observation":"observation 1"})j"),
            std::string::npos);
}

TEST(SerializeTrajectory, RoundTripProperty) {
  Rng rng(20240611);
  for (int i = 0; i < 500; ++i) {
    const LabeledTrajectory x = trajaudit::testkit::random_labeled(rng, "r" + std::to_string(i));
    ASSERT_NO_THROW(validate(x));
    const std::string line = serialize_trajectory(x);
    ASSERT_EQ(line.find('\n'), std::string::npos);
    const LabeledTrajectory y = parse_trajectory_line(line);
    ASSERT_EQ(y, x) << line;
    ASSERT_EQ(serialize_trajectory(y), line);
  }
}

TEST(ParseAction, CallSyntax) {
  const Action a = parse_action("Put(Plate, Cabinet)");
  EXPECT_EQ(a.tool, "Put");
  EXPECT_EQ(a.args.at("0"), "Plate");
  EXPECT_EQ(a.args.at("1"), "Cabinet");
  EXPECT_EQ(a.raw, "Put(Plate, Cabinet)");

  const Action b = parse_action("search[best pizza, nyc]");
  EXPECT_EQ(b.tool, "search");
  EXPECT_EQ(b.args.at("0"), "best pizza");

  const Action c = parse_action("python(code=\"f(1, 2)\", timeout=3)");
  EXPECT_EQ(c.tool, "python");
  EXPECT_EQ(c.args.at("code"), "\"f(1, 2)\"");
  EXPECT_EQ(c.args.at("timeout"), "3");

  const Action d = parse_action("Look()");
  EXPECT_EQ(d.tool, "Look");
  EXPECT_TRUE(d.args.empty());

  const Action e = parse_action("go north");
  EXPECT_EQ(e.tool, "go");
  EXPECT_TRUE(e.args.empty());
  EXPECT_EQ(e.raw, "go north");
}

TEST(DatasetManifest, TracksMutations) {
  Rng rng(7);
  Dataset ds;
  for (int i = 0; i < 60; ++i) {
    ds.add(trajaudit::testkit::random_labeled(rng, "m" + std::to_string(i), 10));
    ASSERT_TRUE(ds.manifest().same_counts(ds.recount()));
  }
  EXPECT_EQ(ds.manifest().total, 60u);
  EXPECT_EQ(ds.manifest().verdict_count(Verdict::Normal) + ds.manifest().verdict_count(Verdict::Anomaly), 60u);
}

TEST(DatasetManifest, DuplicateIdRejected) {
  Dataset ds;
  ds.add({linear_trajectory("dup", 2), AnomalyLabel::normal()});
  EXPECT_THROW(ds.add({linear_trajectory("dup", 3), AnomalyLabel::normal()}), DatasetError);
  EXPECT_EQ(ds.size(), 1u);
}

TEST(Ratio, RendersOneDecimalHalfUp) {
  EXPECT_EQ((Ratio{34436, 37625}).percent(), "91.5%");
  EXPECT_EQ((Ratio{31742, 34436}).percent(), "92.2%");
  EXPECT_EQ((Ratio{481, 500}).percent(), "96.2%");
  EXPECT_EQ((Ratio{189, 200}).percent(), "94.5%");
  EXPECT_EQ((Ratio{1, 2000}).percent(), "0.1%");   // 0.05% rounds up
  EXPECT_EQ((Ratio{1, 2001}).percent(), "0.0%");
  EXPECT_EQ((Ratio{0, 0}).percent(), "0.0%");
  EXPECT_EQ((Ratio{3, 3}).percent(), "100.0%");
}

TEST(Predictions, LineRoundTrip) {
  const auto rep = DiagnosticReport::anomaly(8, "redundant toggle");
  const auto [id, back] = parse_prediction_line(serialize_prediction("x1", rep));
  EXPECT_EQ(id, "x1");
  EXPECT_TRUE(back.same_diagnosis(rep));
  const auto [id2, normal] = parse_prediction_line(R"({"id":"x2","verdict":"normal"})");
  EXPECT_EQ(normal.verdict, Verdict::Normal);
  EXPECT_FALSE(normal.error_step);
  EXPECT_THROW(parse_prediction_line(R"({"id":"x3","verdict":"maybe"})"), SchemaError);
}
