#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "groundchat/model/stack.hpp"

namespace groundchat::model {

// Container layout (all integers little-endian):
//   "GCHK" | u32 version | u64 header length | header JSON | f64 payload
// The header holds the model config, free-form metadata, a tensor table
// (name, rows, cols, offset in doubles) and the SHA-256 of the payload.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
    std::string stage;
    std::size_t step = 0;
};

struct HeadsCheckpoint {
    ModelConfig config;
    CheckpointMeta meta;
    std::map<std::string, Matrix> tensors;
};

/// Collects the Q-Former and projection parameters of both modalities.
HeadsCheckpoint capture_heads(const MultimodalModel& model, CheckpointMeta meta = {});

void write_checkpoint(std::ostream& out, const HeadsCheckpoint& checkpoint);
HeadsCheckpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::string& path, const HeadsCheckpoint& checkpoint);
HeadsCheckpoint load_checkpoint(const std::string& path);

/// Copies the head tensors into `model`; the configs must agree.
void apply_heads(const HeadsCheckpoint& checkpoint, MultimodalModel& model);

} // namespace groundchat::model
