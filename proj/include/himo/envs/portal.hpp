#pragma once

// Two-phase portal navigation task on a 7x23 RGB canvas.
//
// Phase 1 (selection room): the agent spawns at one of 3 center cells. Two
// portal slots are active — one leading to the green goal room, one to the
// red — drawn uniformly from the 21 green-destined and 21 red-destined
// positions fixed by the layout. Both render cyan, so the destination must
// be learned from position. A 5x5 context block shows N ~ U{1..10} white
// pixels in a random arrangement. Stepping onto an active portal starts
// phase 2; inactive slots are plain floor.
//
// Phase 2 (goal room): the room's identity is shown by a single green or red
// pixel; the context is no longer rendered (it must be remembered). Reaching
// the blue goal cell ends the episode with
//     R = 2 * (f(N) * G + (1 - f(N)) * (1 - G)),
// where G = 1 iff the room is green and f is a fixed map {1..10} -> {0, 1}
// chosen at construction. The default is the balanced step f(N) = [N >= 6];
// any table works as long as it is fixed across episodes. All other steps
// pay 0; hitting the time limit ends the episode with 0.
//
// Rendering palette: floor/void black, walls gray 0.5, agent orange
// (1, 0.5, 0), active portals cyan (0, 1, 1), goal blue (0, 0, 1), room id
// green (0, 1, 0) / red (1, 0, 0), context pixels white. The agent is drawn
// last. Observations are [rows x cols x rgb] in [0, 1], flattened row-major.

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace himo {

struct GridPos {
  int row = 0;
  int col = 0;
  bool operator==(const GridPos&) const = default;
};

enum class RoomColor { green, red };

// Static task geometry parsed from the two-grid layout text.
struct PortalLayout {
  int rows = 0;
  int cols = 0;
  std::vector<GridPos> green_slots;   // portal positions leading to the green room
  std::vector<GridPos> red_slots;     // portal positions leading to the red room
  std::vector<GridPos> spawns;
  std::vector<GridPos> context_cells;  // 5x5 display block, row-major order
  std::vector<std::uint8_t> selection_walkable;  // [rows*cols]
  std::vector<std::uint8_t> goal_walkable;       // [rows*cols]
  std::vector<std::uint8_t> goal_wall;           // [rows*cols]
  GridPos entry;
  GridPos goal;
  GridPos id_pixel;

  static PortalLayout parse(const std::string& text);
  static PortalLayout load(const std::string& path);
  static const PortalLayout& builtin();      // compiled-in copy of the data file
  static const char* builtin_text();

  std::size_t cell(GridPos p) const {
    return static_cast<std::size_t>(p.row) * static_cast<std::size_t>(cols) +
           static_cast<std::size_t>(p.col);
  }
};

enum class PortalPhase { selection_room, goal_room };

struct PortalStepResult {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;
};

class PortalEnv {
 public:
  static constexpr int kActionUp = 0;
  static constexpr int kActionDown = 1;
  static constexpr int kActionLeft = 2;
  static constexpr int kActionRight = 3;

  // Which context counts pay off in the green room: index N-1 holds f(N).
  using ContextMap = std::array<std::uint8_t, 10>;
  static constexpr ContextMap kDefaultContextMap{0, 0, 0, 0, 0, 1, 1, 1, 1, 1};

  PortalEnv(const PortalLayout& layout, std::uint64_t seed, int time_limit = 60,
            const ContextMap& context_map = kDefaultContextMap);

  std::vector<double> reset();
  PortalStepResult step(int action);

  std::size_t obs_dim() const { return static_cast<std::size_t>(rows_ * cols_ * 3); }
  static constexpr std::size_t n_actions() { return 4; }

  // episode state (read-only views for policies and tests)
  PortalPhase phase() const { return phase_; }
  GridPos agent() const { return agent_; }
  GridPos green_portal() const { return green_portal_; }
  GridPos red_portal() const { return red_portal_; }
  int context_count() const { return context_count_; }
  const std::vector<std::uint8_t>& context_on() const { return context_on_; }
  // f(n): 1 when a count of n pixels is rewarded in the green room.
  int context_bit(int n) const { return context_map_[static_cast<std::size_t>(n - 1)]; }
  RoomColor room_color() const { return room_color_; }
  int steps_elapsed() const { return steps_elapsed_; }
  bool done() const { return done_; }
  const PortalLayout& layout() const { return layout_; }

  std::vector<double> render() const;

  // checkpoint support: full dynamic state including the rng stream
  struct Snapshot {
    int phase = 0;
    GridPos agent;
    GridPos green_portal;
    GridPos red_portal;
    int context_count = 0;
    std::vector<std::uint8_t> context_on;
    int room_color = 0;
    int steps_elapsed = 0;
    bool done = true;
    std::string rng;
  };
  Snapshot snapshot() const;
  void restore(const Snapshot& s);

 private:
  bool walkable(GridPos p) const;

  PortalLayout layout_;
  int rows_, cols_, time_limit_;
  ContextMap context_map_;
  std::mt19937_64 rng_;

  PortalPhase phase_ = PortalPhase::selection_room;
  GridPos agent_;
  GridPos green_portal_;
  GridPos red_portal_;
  int context_count_ = 0;
  std::vector<std::uint8_t> context_on_;  // aligned with layout.context_cells
  RoomColor room_color_ = RoomColor::green;
  int steps_elapsed_ = 0;
  bool done_ = true;  // step() before the first reset() is an error
};

// Scripted reference policy: walk to a uniformly chosen active portal, then
// to the goal. Returns one action per call given the current env state.
class RandomPortalPolicy {
 public:
  explicit RandomPortalPolicy(std::uint64_t seed) : rng_(seed) {}
  void on_reset(const PortalEnv& env);
  int act(const PortalEnv& env);

 private:
  std::mt19937_64 rng_;
  bool target_green_ = false;
};

// Shortest-path first move from `from` toward `to` over walkable cells
// (portal cells count as walkable goals). Returns -1 if unreachable.
int first_move_toward(const std::vector<std::uint8_t>& walkable, int rows, int cols,
                      GridPos from, GridPos to);

}  // namespace himo
