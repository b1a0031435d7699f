#pragma once

// Versioned binary checkpoints: "CSLM" magic, a textual key=value header,
// then the parameter arrays as little-endian f32 in a fixed order
// (E, W_ih, W_hh, b_ih, b_hh, W_out, b_out), each prefixed by row/col
// counts. The header carries a vocabulary content hash so a checkpoint
// cannot silently be evaluated with the wrong word<->id mapping.

#include <cstdint>
#include <string>

#include "cslm/model.hpp"

namespace cslm {

struct CheckpointMeta {
    ModelDims dims;
    std::string gate_order = "ifgo";
    uint64_t vocab_hash = 0;
    uint64_t seed = 0;
    std::string regime = "alternate";
    int epoch = 0;
};

void save_checkpoint(const std::string& path, const LstmParams& params, const CheckpointMeta& meta);

struct LoadedCheckpoint {
    LstmParams params;
    CheckpointMeta meta;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace cslm
