// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "trajaudit/core/agentbank.hpp"

using namespace trajaudit;

namespace {

const char* kThreeTurn = R"({
  "id": "ab-webshop-0042",
  "domain": "web",
  "task": "webshop",
  "conversations": [
    {"from": "human", "value": "Buy a pair of red running shoes under $60."},
    {"from": "gpt", "value": "Thought: I should search for the shoes first.\nAction: search[red running shoes]"},
    {"from": "human", "value": "Observation: [B01] Red Runner $45 [B02] Sprint Red $75"},
    {"from": "gpt", "value": "Thought: B01 is under budget.\nAction: click[B01]"},
    {"from": "human", "value": "Observation: Red Runner, $45. Sizes: 8 9 10"},
    {"from": "gpt", "value": "Thought: Buy it.\nAction: click[Buy Now]"},
    {"from": "human", "value": "Observation: Thank you for your purchase."}
  ]
})";

// The same record converted by hand.
Trajectory hand_converted() {
  Trajectory t;
  t.id = "ab-webshop-0042";
  t.domain = Domain::Web;
  t.task = "webshop";
  t.instruction = "Buy a pair of red running shoes under $60.";
  t.steps.push_back({1, "I should search for the shoes first.", {"search", {{"0", "red running shoes"}}, "search[red running shoes]"},
                     "[B01] Red Runner $45 [B02] Sprint Red $75"});
  t.steps.push_back({2, "B01 is under budget.", {"click", {{"0", "B01"}}, "click[B01]"}, "Red Runner, $45. Sizes: 8 9 10"});
  t.steps.push_back({3, "Buy it.", {"click", {{"0", "Buy Now"}}, "click[Buy Now]"}, "Thank you for your purchase."});
  t.metadata = {{"source", "agentbank"}, {"source_record", "ab-webshop-0042"}, {"mapping", "agentbank-conversation"}};
  return t;
}

} // namespace

TEST(ImportAgentbank, ConversationLayoutMatchesHandConversion) {
  const Trajectory t = import_agentbank_record(kThreeTurn);
  EXPECT_EQ(t, hand_converted());
}

TEST(ImportAgentbank, MissingObservationUnderStrictMapping) {
  const char* rec = R"({"id":"x","domain":"math","task":"gsm8k","conversations":[
    {"from":"human","value":"What is 2+2?"},
    {"from":"gpt","value":"Thought: add.\nAction: calculate[2+2]"}]})";
  EXPECT_THROW(import_agentbank_record(rec), MappingError);

  FieldMapping lenient;
  lenient.strict = false;
  const Trajectory t = import_agentbank_record(rec, lenient);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.steps[0].observation, "");
}

TEST(ImportAgentbank, MissingObservationFieldInStepRecords) {
  FieldMapping m;
  m.layout = FieldMapping::Layout::StepRecords;
  const char* rec = R"j({"id":"y","domain":"coding","task":"mbpp","instruction":"write f",
    "steps":[{"thought":"t","action":"python(print(1))"}]})j";
  EXPECT_THROW(import_agentbank_record(rec, m), MappingError);
  m.strict = false;
  EXPECT_EQ(import_agentbank_record(rec, m).size(), 1u);
}

TEST(ImportAgentbank, EmptyConversationIsDegenerate) {
  const Trajectory t = import_agentbank_record(R"({"id":"e","domain":"reasoning","task":"hotpotqa","conversations":[]})");
  EXPECT_EQ(t.size(), 0u);
  EXPECT_EQ(t.metadata.at("degenerate"), "true");
}

TEST(ImportAgentbank, DeclaredFieldsMustExist) {
  EXPECT_THROW(import_agentbank_record(R"({"domain":"web","task":"w","conversations":[]})"), MappingError);
  EXPECT_THROW(import_agentbank_record(R"({"id":"a","task":"w","conversations":[]})"), MappingError);
  EXPECT_THROW(import_agentbank_record(R"({"id":"a","domain":"web","task":"w"})"), MappingError);

  FieldMapping defaults;
  defaults.default_domain = Domain::Embodied;
  defaults.default_task = "alfworld";
  const Trajectory t = import_agentbank_record(R"({"id":7,"conversations":[]})", defaults);
  EXPECT_EQ(t.id, "7");
  EXPECT_EQ(t.task, "alfworld");
}

TEST(ImportAgentbank, TurnWithoutThoughtFlagsMetadata) {
  const char* rec = R"({"id":"nt","domain":"web","task":"mind2web","conversations":[
    {"from":"human","value":"Open the page"},
    {"from":"gpt","value":"Action: click[Home]"},
    {"from":"human","value":"Observation: ok"}]})";
  const Trajectory t = import_agentbank_record(rec);
  ASSERT_EQ(t.size(), 1u);
  EXPECT_EQ(t.steps[0].thought, "");
  EXPECT_EQ(t.metadata.at("no_reasoning"), "true");
}
