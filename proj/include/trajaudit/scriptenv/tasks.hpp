// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "trajaudit/scriptenv/world.hpp"

namespace trajaudit::scriptenv {

// Built-in task data. The clean-plate golden script is 14 steps, so a
// two-step loop inserted after the step-7 toggle gives a 16-step run.
inline constexpr const char* kBuiltinTasks = R"json([
{
  "name": "clean-plate",
  "instruction": "Clean a plate and put it in the cabinet.",
  "domain": "embodied",
  "start": "Start",
  "places": ["Start", "Counter", "Sink", "Cabinet"],
  "objects": {
    "Plate": {"location": "Counter", "portable": true, "attributes": {"Cleaned": false}},
    "Faucet": {"location": "Sink"},
    "Cabinet": {"location": "Cabinet", "attributes": {"Open": false}}
  },
  "toggles": [{"object": "Faucet", "target": "Plate", "place": "Sink", "attribute": "Cleaned"}],
  "goal": {"object": "Plate", "location": "Cabinet", "attributes": {"Cleaned": true}},
  "golden": [
    {"thought": "I need to find the plate first. Let me look around.", "action": "Look()"},
    {"thought": "Plates are usually kept on the counter. I will go there.", "action": "GoTo(Counter)"},
    {"thought": "Let me check whether the plate needs cleaning.", "action": "Examine(Plate)"},
    {"thought": "The plate is dirty. I will pick it up.", "action": "PickUp(Plate)"},
    {"thought": "I should carry the plate to the sink to wash it.", "action": "GoTo(Sink)"},
    {"thought": "I will put the plate in the sink under the faucet.", "action": "Put(Plate, Sink)"},
    {"thought": "Running the faucet will wash the plate.", "action": "ToggleObject(Faucet)"},
    {"thought": "The plate is clean now. I will pick it up again.", "action": "PickUp(Plate)"},
    {"thought": "Next the plate goes into the cabinet.", "action": "GoTo(Cabinet)"},
    {"thought": "The cabinet is closed, so I have to open it.", "action": "Open(Cabinet)"},
    {"thought": "I will place the clean plate inside.", "action": "Put(Plate, Cabinet)"},
    {"thought": "I should close the cabinet again.", "action": "Close(Cabinet)"},
    {"thought": "Let me make sure the cabinet is shut.", "action": "Examine(Cabinet)"},
    {"thought": "The clean plate is stored in the cabinet. I am finished.", "action": "Done()"}
  ]
},
{
  "name": "heat-mug",
  "instruction": "Heat the mug in the microwave and put it on the desk.",
  "domain": "embodied",
  "start": "Start",
  "places": ["Start", "Table", "Microwave", "Desk"],
  "objects": {
    "Mug": {"location": "Table", "portable": true, "attributes": {"Heated": false}},
    "Microwave": {"location": "Microwave", "attributes": {"Open": false}}
  },
  "toggles": [{"object": "Microwave", "target": "Mug", "place": "Microwave", "attribute": "Heated"}],
  "goal": {"object": "Mug", "location": "Desk", "attributes": {"Heated": true}},
  "golden": [
    {"thought": "First I need to find the mug.", "action": "Look()"},
    {"thought": "The mug should be on the table.", "action": "GoTo(Table)"},
    {"thought": "I will take the mug.", "action": "PickUp(Mug)"},
    {"thought": "Now I bring it to the microwave.", "action": "GoTo(Microwave)"},
    {"thought": "The microwave door is shut. I will open it.", "action": "Open(Microwave)"},
    {"thought": "I will put the mug inside.", "action": "Put(Mug, Microwave)"},
    {"thought": "The door has to be closed before heating.", "action": "Close(Microwave)"},
    {"thought": "Now I run the microwave.", "action": "ToggleObject(Microwave)"},
    {"thought": "The mug is warm. I will open the door to get it.", "action": "Open(Microwave)"},
    {"thought": "I take the hot mug out.", "action": "PickUp(Mug)"},
    {"thought": "The mug goes to the desk.", "action": "GoTo(Desk)"},
    {"thought": "I will set it down on the desk.", "action": "Put(Mug, Desk)"},
    {"thought": "The heated mug is on the desk.", "action": "Done()"}
  ]
},
{
  "name": "store-book",
  "instruction": "Put the book from the desk into the bookcase.",
  "domain": "embodied",
  "start": "Start",
  "places": ["Start", "Desk", "Bookcase"],
  "objects": {
    "Book": {"location": "Desk", "portable": true},
    "Bookcase": {"location": "Bookcase", "attributes": {"Open": false}}
  },
  "goal": {"object": "Book", "location": "Bookcase"},
  "golden": [
    {"thought": "Let me see where things are.", "action": "Look()"},
    {"thought": "The book is on the desk.", "action": "GoTo(Desk)"},
    {"thought": "I will check that this is the right book.", "action": "Examine(Book)"},
    {"thought": "It is. I will take it.", "action": "PickUp(Book)"},
    {"thought": "Now to the bookcase.", "action": "GoTo(Bookcase)"},
    {"thought": "The bookcase doors are closed. I will open them.", "action": "Open(Bookcase)"},
    {"thought": "I will shelve the book.", "action": "Put(Book, Bookcase)"},
    {"thought": "Closing the bookcase again.", "action": "Close(Bookcase)"},
    {"thought": "The book is in the bookcase.", "action": "Done()"}
  ]
}
])json";

class TaskRegistry {
public:
  static TaskRegistry builtin() {
    TaskRegistry r;
    for (const auto& j : json::parse(kBuiltinTasks)) r.add(task_from_json(j));
    return r;
  }

  void add(TaskSpec task) {
    const std::string name = task.name;
    tasks_[name] = std::move(task);
  }

  // A JSON file holding one task object or an array of them.
  void load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open task file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
      j = json::parse(buf.str());
    } catch (const json::exception& e) {
      throw SchemaError(path + ": " + e.what());
    }
    if (j.is_array()) {
      for (const auto& t : j) add(task_from_json(t));
    } else {
      add(task_from_json(j));
    }
  }

  const TaskSpec& get(const std::string& name) const {
    auto it = tasks_.find(name);
    if (it == tasks_.end()) throw UnknownTask("unknown task '" + name + "'");
    return it->second;
  }

  bool contains(const std::string& name) const { return tasks_.count(name) > 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : tasks_) out.push_back(k);
    return out;
  }

private:
  std::map<std::string, TaskSpec> tasks_;
};

inline WorldState reset(const TaskRegistry& registry, const std::string& task) { return reset(registry.get(task)); }

} // namespace trajaudit::scriptenv
