// SPDX-License-Identifier: Apache-2.0
#pragma once

// Interfaces shared by the monitor loop, the toy environment and verifiers.

#include <string>
#include <vector>

#include "trajaudit/core/report.hpp"
#include "trajaudit/core/types.hpp"

namespace trajaudit {

struct Checkpoint {
  int step_index = 0;  // 0 is the initial state
  std::string state_blob;
};

struct EnvStep {
  std::string observation;
  bool terminal = false;
};

class Environment {
public:
  virtual ~Environment() = default;
  virtual std::string instruction() const = 0;
  virtual std::vector<ToolDescriptor> tools() const = 0;
  virtual void reset() = 0;
  virtual EnvStep execute(const std::string& action) = 0;
  // Opaque, restorable serialization of the full environment state.
  virtual std::string snapshot() const = 0;
  virtual void load(const std::string& blob) = 0;
};

struct AgentTurn {
  std::string thought;
  std::string action;
};

struct RejectionNote {
  int step = 0;
  std::string content;
};

class AgentPolicy {
public:
  virtual ~AgentPolicy() = default;
  virtual AgentTurn act(const std::string& instruction, const std::vector<Step>& history) = 0;
  virtual void on_rejection(const RejectionNote&) {}
};

class Verifier {
public:
  virtual ~Verifier() = default;
  virtual DiagnosticReport audit(const Trajectory& trajectory) = 0;
};

} // namespace trajaudit
