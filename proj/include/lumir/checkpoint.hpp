#pragma once

#include <string>

#include "lumir/model.hpp"
#include "lumir/schedule.hpp"

namespace lumir {

// Versioned binary container: magic "LMRC", u32 format version, a key-value
// config blob (model.* and schedule.* keys) and the flat named-parameter
// table in registration order. Little-endian throughout.
void save_checkpoint(const std::string& path, const Model& model, const ScheduleSpec& schedule);

struct LoadedCheckpoint {
    Model model;
    ScheduleSpec schedule;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace lumir
