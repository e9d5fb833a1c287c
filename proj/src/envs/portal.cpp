#include "himo/envs/portal.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "himo/rng.hpp"

namespace himo {

namespace {

// Compiled-in copy of data/portal_layout.txt (a test asserts they match).
constexpr const char* kLayoutText = R"(# Portal task layout: two 7x23 grids, one per phase.
# Legend:
#   G  portal slot whose destination is the green room
#   R  portal slot whose destination is the red room
#   S  spawn cell (also floor)
#   c  context display cell (5x5 block, not reachable)
#   .  floor
#   #  wall
#   E  goal-room entry cell
#   I  room-identity pixel cell (floor)
#   X  goal cell
#   _  void (renders black, blocks movement)
# The selection room's border ring holds all 42 portal slots, alternating
# green/red clockwise from the top-left corner (21 of each). Only the two
# slots drawn for an episode are shown and enterable; the others behave as
# plain floor.
[selection_room]
GRGRGRGRGRGRGRGR_______
R..............G_ccccc_
G.......S......R_ccccc_
R.......S......G_ccccc_
G.......S......R_ccccc_
R..............G_ccccc_
GRGRGRGRGRGRGRGR_______
[goal_room]
________#######________
________#E...I#________
________#.....#________
________#.....#________
________#.....#________
________#....X#________
________#######________
)";

struct Rgb {
  double r, g, b;
};

constexpr Rgb kBlack{0.0, 0.0, 0.0};
constexpr Rgb kGray{0.5, 0.5, 0.5};
constexpr Rgb kOrange{1.0, 0.5, 0.0};
constexpr Rgb kCyan{0.0, 1.0, 1.0};
constexpr Rgb kBlue{0.0, 0.0, 1.0};
constexpr Rgb kGreen{0.0, 1.0, 0.0};
constexpr Rgb kRed{1.0, 0.0, 0.0};
constexpr Rgb kWhite{1.0, 1.0, 1.0};

void put(std::vector<double>& img, int cols, GridPos p, Rgb c) {
  const std::size_t base = (static_cast<std::size_t>(p.row) * cols + p.col) * 3;
  img[base] = c.r;
  img[base + 1] = c.g;
  img[base + 2] = c.b;
}

}  // namespace

PortalLayout PortalLayout::parse(const std::string& text) {
  std::vector<std::string> selection, goal;
  std::vector<std::string>* current = nullptr;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line == "[selection_room]") {
      current = &selection;
    } else if (line == "[goal_room]") {
      current = &goal;
    } else {
      if (!current) throw std::runtime_error("portal layout: grid row before a section header");
      current->push_back(line);
    }
  }
  if (selection.empty() || goal.empty())
    throw std::runtime_error("portal layout: need [selection_room] and [goal_room] grids");
  if (selection.size() != goal.size())
    throw std::runtime_error("portal layout: grids must have the same number of rows");

  PortalLayout out;
  out.rows = static_cast<int>(selection.size());
  out.cols = static_cast<int>(selection[0].size());
  const std::size_t n = static_cast<std::size_t>(out.rows) * out.cols;
  out.selection_walkable.assign(n, 0);
  out.goal_walkable.assign(n, 0);
  out.goal_wall.assign(n, 0);

  int entries = 0, goals = 0, ids = 0;
  for (int r = 0; r < out.rows; ++r) {
    if (selection[r].size() != static_cast<std::size_t>(out.cols) ||
        goal[r].size() != static_cast<std::size_t>(out.cols))
      throw std::runtime_error("portal layout: ragged grid row");
    for (int c = 0; c < out.cols; ++c) {
      const GridPos p{r, c};
      switch (selection[r][c]) {
        case 'G':
          out.green_slots.push_back(p);
          out.selection_walkable[out.cell(p)] = 1;
          break;
        case 'R':
          out.red_slots.push_back(p);
          out.selection_walkable[out.cell(p)] = 1;
          break;
        case 'S':
          out.spawns.push_back(p);
          out.selection_walkable[out.cell(p)] = 1;
          break;
        case '.':
          out.selection_walkable[out.cell(p)] = 1;
          break;
        case 'c':
          out.context_cells.push_back(p);
          break;
        case '_':
          break;
        default:
          throw std::runtime_error("portal layout: bad selection-room cell");
      }
      switch (goal[r][c]) {
        case 'E':
          out.entry = p;
          entries += 1;
          out.goal_walkable[out.cell(p)] = 1;
          break;
        case 'X':
          out.goal = p;
          goals += 1;
          out.goal_walkable[out.cell(p)] = 1;
          break;
        case 'I':
          out.id_pixel = p;
          ids += 1;
          out.goal_walkable[out.cell(p)] = 1;
          break;
        case '.':
          out.goal_walkable[out.cell(p)] = 1;
          break;
        case '#':
          out.goal_wall[out.cell(p)] = 1;
          break;
        case '_':
          break;
        default:
          throw std::runtime_error("portal layout: bad goal-room cell");
      }
    }
  }

  if (out.green_slots.size() != out.red_slots.size())
    throw std::runtime_error("portal layout: green/red portal slot counts differ");
  if (out.green_slots.empty()) throw std::runtime_error("portal layout: no portal slots");
  if (out.spawns.empty()) throw std::runtime_error("portal layout: no spawn cells");
  if (entries != 1 || goals != 1 || ids != 1)
    throw std::runtime_error("portal layout: need exactly one entry, goal, and id cell");
  return out;
}

PortalLayout PortalLayout::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("portal layout: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const char* PortalLayout::builtin_text() { return kLayoutText; }

const PortalLayout& PortalLayout::builtin() {
  static const PortalLayout layout = parse(kLayoutText);
  return layout;
}

PortalEnv::PortalEnv(const PortalLayout& layout, std::uint64_t seed, int time_limit,
                     const ContextMap& context_map)
    : layout_(layout), rows_(layout.rows), cols_(layout.cols), time_limit_(time_limit),
      context_map_(context_map), rng_(seed) {}

std::vector<double> PortalEnv::reset() {
  phase_ = PortalPhase::selection_room;
  agent_ = layout_.spawns[sample_index(rng_, layout_.spawns.size())];
  green_portal_ = layout_.green_slots[sample_index(rng_, layout_.green_slots.size())];
  red_portal_ = layout_.red_slots[sample_index(rng_, layout_.red_slots.size())];
  context_count_ = 1 + static_cast<int>(sample_index(rng_, 10));

  // Random arrangement: N distinct display cells via partial Fisher-Yates.
  const std::size_t cells = layout_.context_cells.size();
  std::vector<std::size_t> order(cells);
  for (std::size_t i = 0; i < cells; ++i) order[i] = i;
  context_on_.assign(cells, 0);
  for (int i = 0; i < context_count_; ++i) {
    const std::size_t j = i + sample_index(rng_, cells - static_cast<std::size_t>(i));
    std::swap(order[static_cast<std::size_t>(i)], order[j]);
    context_on_[order[static_cast<std::size_t>(i)]] = 1;
  }

  steps_elapsed_ = 0;
  done_ = false;
  return render();
}

bool PortalEnv::walkable(GridPos p) const {
  if (p.row < 0 || p.row >= rows_ || p.col < 0 || p.col >= cols_) return false;
  if (phase_ == PortalPhase::selection_room) {
    if (layout_.selection_walkable[layout_.cell(p)] == 0) return false;
    // Inactive portal slots are plain floor; all slots stay walkable.
    return true;
  }
  return layout_.goal_walkable[layout_.cell(p)] != 0;
}

PortalStepResult PortalEnv::step(int action) {
  if (done_) throw std::logic_error("portal step: episode is finished");
  if (action < 0 || action >= static_cast<int>(n_actions()))
    throw std::out_of_range("portal step: bad action");

  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, -1, 1};
  GridPos next{agent_.row + dr[action], agent_.col + dc[action]};
  if (walkable(next)) agent_ = next;

  steps_elapsed_ += 1;
  PortalStepResult res;

  if (phase_ == PortalPhase::selection_room) {
    if (agent_ == green_portal_ || agent_ == red_portal_) {
      room_color_ = (agent_ == green_portal_) ? RoomColor::green : RoomColor::red;
      phase_ = PortalPhase::goal_room;
      agent_ = layout_.entry;
    }
  } else if (agent_ == layout_.goal) {
    const int f = context_bit(context_count_);
    const int g = room_color_ == RoomColor::green ? 1 : 0;
    res.reward = 2.0 * (f * g + (1 - f) * (1 - g));
    done_ = true;
  }

  if (!done_ && steps_elapsed_ >= time_limit_) done_ = true;
  res.done = done_;
  res.obs = render();
  return res;
}

std::vector<double> PortalEnv::render() const {
  std::vector<double> img(obs_dim(), 0.0);
  (void)kBlack;  // background is already zero-filled

  if (phase_ == PortalPhase::selection_room) {
    put(img, cols_, green_portal_, kCyan);
    put(img, cols_, red_portal_, kCyan);
    for (std::size_t i = 0; i < layout_.context_cells.size(); ++i)
      if (context_on_[i]) put(img, cols_, layout_.context_cells[i], kWhite);
  } else {
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c)
        if (layout_.goal_wall[layout_.cell({r, c})]) put(img, cols_, {r, c}, kGray);
    put(img, cols_, layout_.id_pixel, room_color_ == RoomColor::green ? kGreen : kRed);
    put(img, cols_, layout_.goal, kBlue);
  }
  put(img, cols_, agent_, kOrange);
  return img;
}

PortalEnv::Snapshot PortalEnv::snapshot() const {
  Snapshot s;
  s.phase = phase_ == PortalPhase::selection_room ? 0 : 1;
  s.agent = agent_;
  s.green_portal = green_portal_;
  s.red_portal = red_portal_;
  s.context_count = context_count_;
  s.context_on = context_on_;
  s.room_color = room_color_ == RoomColor::green ? 0 : 1;
  s.steps_elapsed = steps_elapsed_;
  s.done = done_;
  s.rng = rng_to_string(rng_);
  return s;
}

void PortalEnv::restore(const Snapshot& s) {
  phase_ = s.phase == 0 ? PortalPhase::selection_room : PortalPhase::goal_room;
  agent_ = s.agent;
  green_portal_ = s.green_portal;
  red_portal_ = s.red_portal;
  context_count_ = s.context_count;
  context_on_ = s.context_on;
  room_color_ = s.room_color == 0 ? RoomColor::green : RoomColor::red;
  steps_elapsed_ = s.steps_elapsed;
  done_ = s.done;
  rng_ = rng_from_string(s.rng);
}

int first_move_toward(const std::vector<std::uint8_t>& walkable, int rows, int cols,
                      GridPos from, GridPos to) {
  if (from == to) return -1;
  static constexpr int dr[4] = {-1, 1, 0, 0};
  static constexpr int dc[4] = {0, 0, -1, 1};

  auto idx = [cols](GridPos p) { return static_cast<std::size_t>(p.row) * cols + p.col; };
  std::vector<int> parent_action(static_cast<std::size_t>(rows) * cols, -1);
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(rows) * cols, 0);
  std::deque<GridPos> frontier{from};
  seen[idx(from)] = 1;

  while (!frontier.empty()) {
    const GridPos p = frontier.front();
    frontier.pop_front();
    for (int a = 0; a < 4; ++a) {
      const GridPos q{p.row + dr[a], p.col + dc[a]};
      if (q.row < 0 || q.row >= rows || q.col < 0 || q.col >= cols) continue;
      if (seen[idx(q)] || !walkable[idx(q)]) continue;
      seen[idx(q)] = 1;
      parent_action[idx(q)] = a;
      if (q == to) {
        // Walk back to the step taken out of `from`.
        GridPos cur = q;
        int act = parent_action[idx(cur)];
        while (true) {
          const GridPos prev{cur.row - dr[act], cur.col - dc[act]};
          if (prev == from) return act;
          cur = prev;
          act = parent_action[idx(cur)];
        }
      }
      frontier.push_back(q);
    }
  }
  return -1;
}

void RandomPortalPolicy::on_reset(const PortalEnv&) {
  target_green_ = sample_index(rng_, 2) == 0;
}

int RandomPortalPolicy::act(const PortalEnv& env) {
  const PortalLayout& lay = env.layout();
  if (env.phase() == PortalPhase::selection_room) {
    const GridPos target = target_green_ ? env.green_portal() : env.red_portal();
    const int a = first_move_toward(lay.selection_walkable, lay.rows, lay.cols, env.agent(),
                                    target);
    return a >= 0 ? a : PortalEnv::kActionUp;
  }
  const int a = first_move_toward(lay.goal_walkable, lay.rows, lay.cols, env.agent(), lay.goal);
  return a >= 0 ? a : PortalEnv::kActionUp;
}

}  // namespace himo
