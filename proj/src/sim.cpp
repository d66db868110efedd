#include "embnav/sim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace embnav::sim {

namespace {

constexpr std::array<std::string_view, kNumColors> kColorNames = {"red", "green", "blue", "yellow",
                                                                  "pink"};
constexpr double kSpawnHalfExtent = 1.2;
constexpr double kSpawnClearance = 0.3;
constexpr double kMinTargetSeparation = 0.5;

}  // namespace

std::string_view color_name(TargetColor color) { return kColorNames[color_index(color)]; }

std::optional<TargetColor> parse_color(std::string_view name) {
    for (auto c : kAllColors) {
        if (color_name(c) == name) return c;
    }
    return std::nullopt;
}

std::string_view status_name(Status s) {
    switch (s) {
        case Status::Running: return "running";
        case Status::Success: return "success";
        case Status::Timeout: return "timeout";
    }
    return "unknown";
}

double distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

void Arena::validate() const {
    if (!(side > 0.0)) throw ConfigError("arena side must be positive");
    if (!(target_radius > 0.0) || !(success_radius > 0.0)) throw ConfigError("arena radii must be positive");
    if (max_steps < 1) throw ConfigError("arena max_steps must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("arena dt must be positive");
    const double h = half_extent();
    for (std::size_t i = 0; i < kNumColors; ++i) {
        const Vec2 t = targets[i];
        if (!(std::abs(t.x) <= h && std::abs(t.y) <= h)) {
            throw ConfigError("target " + std::string(kColorNames[i]) + " lies outside the arena");
        }
        for (std::size_t j = i + 1; j < kNumColors; ++j) {
            if (distance(t, targets[j]) < kMinTargetSeparation) {
                throw ConfigError("targets " + std::string(kColorNames[i]) + " and " +
                                  std::string(kColorNames[j]) + " are closer than 0.5 m");
            }
        }
    }
}

Action Action::clamped(double left, double right) {
    if (!std::isfinite(left) || !std::isfinite(right)) throw ContractViolation("non-finite action component");
    return {std::clamp(left, -1.0, 1.0), std::clamp(right, -1.0, 1.0)};
}

void RobotModel::validate() const {
    if (!(wheel_radius > 0.0 && wheel_separation > 0.0 && max_wheel_speed > 0.0)) {
        throw ConfigError("robot geometry must be strictly positive");
    }
}

void World::validate() const {
    arena.validate();
    robot.validate();
    if (!(fov > 0.0 && fov <= 2.0 * kPi)) throw ConfigError("camera fov must be in (0, 2pi]");
}

EpisodeState initial_state(const Pose& spawn, TargetColor goal, const Arena& arena) {
    EpisodeState s;
    s.pose = spawn;
    s.pose.heading = wrap_angle(spawn.heading);
    s.goal = goal;
    s.status = check_termination(s, arena);
    return s;
}

Pose sample_spawn(const Arena& arena, Rng& rng) {
    std::uniform_real_distribution<double> coord(-kSpawnHalfExtent, kSpawnHalfExtent);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    for (;;) {
        Pose p;
        p.x = coord(rng);
        p.y = coord(rng);
        p.heading = wrap_angle(angle(rng));
        const bool clear = std::all_of(arena.targets.begin(), arena.targets.end(),
                                       [&](Vec2 t) { return distance(p.position(), t) >= kSpawnClearance; });
        if (clear) return p;
    }
}

Pose integrate_euler(const Pose& pose, const Action& action, const RobotModel& robot, double dt) {
    const double wl = action.left * robot.max_wheel_speed;
    const double wr = action.right * robot.max_wheel_speed;
    const double v = robot.wheel_radius * (wl + wr) / 2.0;
    const double omega = robot.wheel_radius * (wr - wl) / robot.wheel_separation;
    Pose next;
    next.x = pose.x + v * std::cos(pose.heading) * dt;
    next.y = pose.y + v * std::sin(pose.heading) * dt;
    next.heading = omega == 0.0 ? pose.heading : wrap_angle(pose.heading + omega * dt);
    return next;
}

EpisodeState step(const EpisodeState& state, const Action& action, const Arena& arena,
                  const RobotModel& robot) {
    if (state.status != Status::Running) {
        throw ContractViolation("step() called on a terminated episode (status " +
                                std::string(status_name(state.status)) + ")");
    }
    const Action a = Action::clamped(action.left, action.right);
    EpisodeState next = state;
    next.pose = integrate_euler(state.pose, a, robot, arena.dt);
    const double h = arena.half_extent();
    next.pose.x = std::clamp(next.pose.x, -h, h);
    next.pose.y = std::clamp(next.pose.y, -h, h);
    next.step = state.step + 1;
    next.cumulative_reward += reward(next, arena);
    next.status = check_termination(next, arena);
    return next;
}

GridCell cell_for(double bearing, double distance, double fov) {
    GridCell cell;
    const double third = fov / 6.0;
    cell.col = bearing > third ? 0 : (bearing < -third ? 2 : 1);
    cell.row = distance < kNearRowLimit ? 0 : (distance <= kFarRowLimit ? 1 : 2);
    return cell;
}

Observation observe(const Pose& pose, const Arena& arena, double fov) {
    Observation obs;
    obs.fov = fov;
    for (auto c : kAllColors) {
        const Vec2 t = arena.target(c);
        const double bearing = wrap_angle(std::atan2(t.y - pose.y, t.x - pose.x) - pose.heading);
        if (std::abs(bearing) > fov / 2.0) continue;
        const double d = distance(pose.position(), t);
        VisibleTarget v;
        v.color = c;
        v.bearing = bearing;
        v.distance = d;
        v.cell = cell_for(bearing, d, fov);
        v.apparent_size = d > 0.0 ? std::min(1.0, kApparentSizeScale / d) : 1.0;
        obs.visible.push_back(v);
    }
    std::stable_sort(obs.visible.begin(), obs.visible.end(),
                     [](const VisibleTarget& a, const VisibleTarget& b) { return a.distance < b.distance; });
    return obs;
}

Observation observe(const EpisodeState& state, const Arena& arena, double fov) {
    return observe(state.pose, arena, fov);
}

double goal_distance(const EpisodeState& state, const Arena& arena) {
    return distance(state.pose.position(), arena.target(state.goal));
}

double reward(const EpisodeState& state, const Arena& arena) { return -goal_distance(state, arena) * arena.dt; }

Status check_termination(const EpisodeState& state, const Arena& arena) {
    if (goal_distance(state, arena) <= arena.success_radius) return Status::Success;
    if (state.step >= arena.max_steps) return Status::Timeout;
    return Status::Running;
}

}  // namespace embnav::sim
