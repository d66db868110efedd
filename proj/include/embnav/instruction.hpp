#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "embnav/sim.hpp"

namespace embnav::instruction {

enum class SpatialCue : std::uint8_t { Left = 0, Right = 1, StraightAhead = 2 };

inline constexpr std::size_t kNumCues = 3;

/// Half-width of the "straight ahead" cone (15 degrees), inclusive.
inline constexpr double kStraightHalfWidth = deg_to_rad(15.0);

struct Instruction {
    std::string text;
    sim::TargetColor color = sim::TargetColor::Red;
    SpatialCue cue = SpatialCue::StraightAhead;
};

std::string_view cue_name(SpatialCue cue);

/// Cue for a relative bearing (counterclockwise positive).
SpatialCue cue_for_bearing(double bearing);

SpatialCue spatial_cue(const sim::Pose& pose, sim::Vec2 target);

Instruction render_instruction(sim::TargetColor color, SpatialCue cue);

/// Exact template match; nullopt for any text the renderer could not have produced.
std::optional<Instruction> parse_instruction(std::string_view text);

/// Instruction issued at episode start for the given spawn and goal.
Instruction instruction_for(const sim::Pose& spawn, sim::TargetColor goal, const sim::Arena& arena);

}  // namespace embnav::instruction
