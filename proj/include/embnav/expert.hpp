#pragma once

#include <cstdint>
#include <vector>

#include "embnav/sim.hpp"

namespace embnav::expert {

/// Gains of the privileged go-to-goal controller.
struct ExpertParams {
    double turn_threshold = 0.2;  // rad; beyond this the robot rotates in place
    double k_heading = 2.0;
    double k_approach = 1.0;
    double slow_radius = 0.3;  // m

    void validate(const sim::Arena& arena) const;
};

/// Privileged action from full state: the controller knows the goal's position.
sim::Action expert_action(const sim::EpisodeState& state, const sim::Arena& arena, const ExpertParams& params);

/// One recorded transition: state before acting, what the camera saw, the action and its reward.
struct TrajectoryStep {
    sim::EpisodeState state;
    sim::Observation observation;
    sim::Action action;
    double reward = 0.0;
};

struct ExpertEpisode {
    sim::Pose spawn;
    sim::TargetColor goal = sim::TargetColor::Red;
    std::vector<TrajectoryStep> steps;
    sim::EpisodeState final_state;

    bool succeeded() const { return final_state.status == sim::Status::Success; }
};

/// Rolls the expert from an explicit spawn until Success or Timeout.
ExpertEpisode run_expert_episode(const sim::Pose& spawn, sim::TargetColor goal, const sim::World& world,
                                 const ExpertParams& params);

/// Same, with the spawn drawn from the standard spawn rule seeded by `seed`.
ExpertEpisode run_expert_episode(std::uint64_t seed, sim::TargetColor goal, const sim::World& world,
                                 const ExpertParams& params);

}  // namespace embnav::expert
