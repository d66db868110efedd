#pragma once

// Deterministic 2D differential-drive arena.
//
// Conventions: x/y in meters, angles in radians, heading counterclockwise from +x.
// Positive bearing means the target is to the robot's left.

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "embnav/common.hpp"
#include "embnav/seed.hpp"

namespace embnav::sim {

enum class TargetColor : std::uint8_t { Red = 0, Green = 1, Blue = 2, Yellow = 3, Pink = 4 };

inline constexpr std::size_t kNumColors = 5;
inline constexpr std::array<TargetColor, kNumColors> kAllColors = {
    TargetColor::Red, TargetColor::Green, TargetColor::Blue, TargetColor::Yellow, TargetColor::Pink};

/// Lowercase color word ("red", "green", ...).
std::string_view color_name(TargetColor color);
std::optional<TargetColor> parse_color(std::string_view name);
inline constexpr std::size_t color_index(TargetColor c) { return static_cast<std::size_t>(c); }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

double distance(Vec2 a, Vec2 b);

struct Pose {
    double x = 0.0;
    double y = 0.0;
    double heading = 0.0;  // (-pi, pi]

    Vec2 position() const { return {x, y}; }
};

struct Arena {
    double side = 3.0;
    std::array<Vec2, kNumColors> targets{{{1.0, 1.0}, {-1.0, 1.0}, {1.0, -1.0}, {-1.0, -1.0}, {0.0, 1.2}}};
    double target_radius = 0.05;
    double success_radius = 0.1;
    int max_steps = 1000;
    double dt = 1.0 / 60.0;

    double half_extent() const { return side / 2.0; }
    Vec2 target(TargetColor c) const { return targets[color_index(c)]; }

    /// Throws ConfigError if any invariant fails.
    void validate() const;
};

/// Normalized wheel commands, each in [-1, 1].
struct Action {
    double left = 0.0;
    double right = 0.0;

    /// Clamps both components to [-1, 1]; non-finite components are rejected.
    static Action clamped(double left, double right);
    bool operator==(const Action&) const = default;
};

struct RobotModel {
    double wheel_radius = 0.03;
    double wheel_separation = 0.12;
    double max_wheel_speed = 20.0;  // rad/s

    double max_linear_speed() const { return wheel_radius * max_wheel_speed; }
    void validate() const;
};

enum class Status : std::uint8_t { Running, Success, Timeout };
std::string_view status_name(Status s);

struct EpisodeState {
    Pose pose;
    TargetColor goal = TargetColor::Red;
    int step = 0;
    double cumulative_reward = 0.0;
    Status status = Status::Running;
};

/// Cell of the virtual camera's 3x3 grid. Row 0 = near, 2 = far; col 0 = left, 2 = right.
struct GridCell {
    int row = 0;
    int col = 0;

    int index() const { return row * 3 + col; }
    static GridCell from_index(int index) { return {index / 3, index % 3}; }
    bool operator==(const GridCell&) const = default;
};

struct VisibleTarget {
    TargetColor color = TargetColor::Red;
    double bearing = 0.0;
    double distance = 0.0;
    GridCell cell;
    double apparent_size = 0.0;
};

struct Observation {
    std::vector<VisibleTarget> visible;  // sorted by distance ascending
    double fov = kPi / 2.0;
};

inline constexpr double kNearRowLimit = 0.7;
inline constexpr double kFarRowLimit = 1.6;
inline constexpr double kApparentSizeScale = 0.5;

/// Full simulated world: arena, robot and camera field of view.
struct World {
    Arena arena;
    RobotModel robot;
    double fov = kPi / 2.0;

    void validate() const;
};

/// Episode start state; status is already Success if the spawn lies inside the success radius.
EpisodeState initial_state(const Pose& spawn, TargetColor goal, const Arena& arena);

/// Uniform spawn over [-1.2, 1.2]^2 with uniform heading, resampled within 0.3 m of any target.
Pose sample_spawn(const Arena& arena, Rng& rng);

/// One forward-Euler step of unicycle kinematics, without clamping.
Pose integrate_euler(const Pose& pose, const Action& action, const RobotModel& robot, double dt);

/// Advances a running episode by one step. Throws ContractViolation on a terminated episode.
EpisodeState step(const EpisodeState& state, const Action& action, const Arena& arena,
                  const RobotModel& robot);

Observation observe(const EpisodeState& state, const Arena& arena, double fov);
Observation observe(const Pose& pose, const Arena& arena, double fov);

/// Image-grid cell for a target at the given bearing/distance.
GridCell cell_for(double bearing, double distance, double fov);

double goal_distance(const EpisodeState& state, const Arena& arena);

/// Per-step reward: -d * dt.
double reward(const EpisodeState& state, const Arena& arena);

Status check_termination(const EpisodeState& state, const Arena& arena);

}  // namespace embnav::sim
