#pragma once

// Fixed-length sequence batches. Slot t of stream b holds the observation
// o_t, the action taken there, the reward for that transition, the
// post-transition discount flag (0 exactly when the transition ended the
// episode, else 1), and an episode-start flag (1 when o_t is the first
// observation of a new episode).

#include <cstddef>
#include <cstdint>
#include <vector>

namespace himo {

struct UnrollBatch {
  std::size_t length = 0;   // T slots
  std::size_t batch = 0;    // B parallel streams
  std::size_t obs_dim = 0;

  std::vector<std::vector<double>> obs;                  // [T] x (B*obs_dim)
  std::vector<std::vector<int>> actions;                 // [T] x B
  std::vector<std::vector<double>> rewards;              // [T] x B
  std::vector<std::vector<double>> discounts;            // [T] x B
  std::vector<std::vector<std::uint8_t>> episode_start;  // [T] x B

  static UnrollBatch empty(std::size_t length, std::size_t batch, std::size_t obs_dim);
};

// valid[t][b] == 1 iff t+k is still inside the unroll and no episode starts
// in (t, t+k] for stream b, i.e. the pair (t, t+k) lies within one episode.
std::vector<std::vector<std::uint8_t>> hindsight_valid_mask(const UnrollBatch& u, std::size_t k);

}  // namespace himo
