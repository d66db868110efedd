#include "embnav/expert.hpp"

#include <algorithm>
#include <cmath>

namespace embnav::expert {

void ExpertParams::validate(const sim::Arena& arena) const {
    if (!(turn_threshold > 0.0 && turn_threshold < kPi)) throw ConfigError("expert turn_threshold must be in (0, pi)");
    if (!(k_heading > 0.0 && k_approach > 0.0)) throw ConfigError("expert gains must be positive");
    if (!(slow_radius > arena.success_radius)) throw ConfigError("expert slow_radius must exceed success_radius");
}

sim::Action expert_action(const sim::EpisodeState& state, const sim::Arena& arena, const ExpertParams& params) {
    if (state.status != sim::Status::Running) throw ContractViolation("expert_action() on a terminated episode");

    const sim::Vec2 goal = arena.target(state.goal);
    const double d = sim::distance(state.pose.position(), goal);
    const double alpha = wrap_angle(std::atan2(goal.y - state.pose.y, goal.x - state.pose.x) - state.pose.heading);

    if (std::abs(alpha) > params.turn_threshold) {
        const double turn = std::clamp(params.k_heading * std::abs(alpha), 0.3, 1.0);
        const double sign = alpha > 0.0 ? 1.0 : -1.0;
        return sim::Action::clamped(-sign * turn, sign * turn);
    }
    const double v = std::clamp(params.k_approach * d / params.slow_radius, 0.2, 1.0);
    const double correction = params.k_heading * alpha;
    return sim::Action::clamped(v - correction, v + correction);
}

ExpertEpisode run_expert_episode(const sim::Pose& spawn, sim::TargetColor goal, const sim::World& world,
                                 const ExpertParams& params) {
    ExpertEpisode episode;
    episode.spawn = spawn;
    episode.goal = goal;
    sim::EpisodeState state = sim::initial_state(spawn, goal, world.arena);
    while (state.status == sim::Status::Running) {
        TrajectoryStep rec;
        rec.state = state;
        rec.observation = sim::observe(state, world.arena, world.fov);
        rec.action = expert_action(state, world.arena, params);
        const sim::EpisodeState next = sim::step(state, rec.action, world.arena, world.robot);
        rec.reward = sim::reward(next, world.arena);
        episode.steps.push_back(std::move(rec));
        state = next;
    }
    episode.final_state = state;
    return episode;
}

ExpertEpisode run_expert_episode(std::uint64_t seed, sim::TargetColor goal, const sim::World& world,
                                 const ExpertParams& params) {
    Rng rng(seed);
    return run_expert_episode(sim::sample_spawn(world.arena, rng), goal, world, params);
}

}  // namespace embnav::expert
