#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coopdock/docking_sim.hpp"

namespace coopdock {

// r1 aligns the docking axis with the current, r2 turns it by +60 degrees.
enum class ReferenceChoice { CurrentAligned, Offset60 };

std::string_view to_string(ReferenceChoice choice);
std::optional<ReferenceChoice> reference_choice_from_string(std::string_view text);

// Stern-to-stern target centred on `centre`: USV1 faces `heading` and sits
// d_min/2 ahead of the centre, USV2 faces the opposite way behind it.
ReferencePose docking_reference(const Vec2& centre, double heading, double d_min);

// Target centred on the midpoint of the initial positions.
ReferencePose scenario_reference(const JointState& q_init, double current_heading,
                                 ReferenceChoice choice, double d_min);

// Everything needed for one closed-loop run.
struct ScenarioConfig {
  Scenario scenario;
  MpcConfig mpc;
  // Set when the reference is derived from the current instead of given explicitly.
  std::optional<ReferenceChoice> reference_choice = ReferenceChoice::CurrentAligned;

  void set_reference(ReferenceChoice choice);
  void validate() const;
};

std::vector<std::string> builtin_scenario_ids();

// Bundled fixtures: s1 (0.15 m/s current towards pi) and s2 (0.25 m/s towards pi/3).
ScenarioConfig builtin_scenario(std::string_view id,
                                ControllerMode mode = ControllerMode::Cooperative,
                                ReferenceChoice choice = ReferenceChoice::CurrentAligned);

// The four evaluations per fixture: baseline, cooperative with r1 and r2, and
// cooperative with r1 but without the bias estimate.
std::vector<ScenarioConfig> evaluation_sweep(const ScenarioConfig& base);

// Directory name of a run inside a comparison: <id>_<mode>[_<ref>].
std::string run_label(const ScenarioConfig& cfg);

}  // namespace coopdock
