#include "embnav/instruction.hpp"

#include <cmath>

namespace embnav::instruction {

namespace {

std::string_view cue_phrase(SpatialCue cue) {
    switch (cue) {
        case SpatialCue::Left: return "which is to your left";
        case SpatialCue::Right: return "which is to your right";
        case SpatialCue::StraightAhead: return "which is straight ahead";
    }
    return "";
}

}  // namespace

std::string_view cue_name(SpatialCue cue) {
    switch (cue) {
        case SpatialCue::Left: return "left";
        case SpatialCue::Right: return "right";
        case SpatialCue::StraightAhead: return "straight ahead";
    }
    return "";
}

SpatialCue cue_for_bearing(double bearing) {
    if (std::abs(bearing) <= kStraightHalfWidth) return SpatialCue::StraightAhead;
    return bearing > 0.0 ? SpatialCue::Left : SpatialCue::Right;
}

SpatialCue spatial_cue(const sim::Pose& pose, sim::Vec2 target) {
    return cue_for_bearing(wrap_angle(std::atan2(target.y - pose.y, target.x - pose.x) - pose.heading));
}

Instruction render_instruction(sim::TargetColor color, SpatialCue cue) {
    Instruction out;
    out.color = color;
    out.cue = cue;
    out.text = "The target is the ";
    out.text += sim::color_name(color);
    out.text += " ball ";
    out.text += cue_phrase(cue);
    out.text += ". Move toward the ball.";
    return out;
}

std::optional<Instruction> parse_instruction(std::string_view text) {
    for (auto color : sim::kAllColors) {
        for (auto cue : {SpatialCue::Left, SpatialCue::Right, SpatialCue::StraightAhead}) {
            Instruction candidate = render_instruction(color, cue);
            if (candidate.text == text) return candidate;
        }
    }
    return std::nullopt;
}

Instruction instruction_for(const sim::Pose& spawn, sim::TargetColor goal, const sim::Arena& arena) {
    return render_instruction(goal, spatial_cue(spawn, arena.target(goal)));
}

}  // namespace embnav::instruction
