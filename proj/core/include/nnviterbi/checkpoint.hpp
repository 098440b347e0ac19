#pragma once

#include <string>

#include "nnviterbi/trainer.hpp"

namespace nnviterbi {

// Binary snapshot of a TrainerState ("NNVIT1" format): network weights,
// class prior, length model, replay buffer, RNG, and iteration counter.
// Written atomically (temp file + rename), so a crash mid-write never
// leaves a truncated checkpoint behind. Loading restores the state bit for
// bit; resuming training from it reproduces the uninterrupted trajectory.
void save_checkpoint(const TrainerState& state, const std::string& path);
TrainerState load_checkpoint(const std::string& path);

}  // namespace nnviterbi
