#pragma once

// Plain-text parameter checkpoints.
//
//   macrpo-checkpoint v1
//   meta <key> <value...>            zero or more
//   block <name> <rows> <cols>       one per ParamBlock, followed by
//   weights <rows*cols values>
//   adam_m <rows*cols values>
//   adam_v <rows*cols values>
//   end
//
// Values are written in shortest round-trip form, so save followed by load
// reproduces every double bit-exactly.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>

#include "macrpo/nn/tensor.hpp"

namespace macrpo::nn {

inline constexpr const char* kCheckpointHeader = "macrpo-checkpoint v1";

using CheckpointMeta = std::map<std::string, std::string>;

void write_checkpoint(std::ostream& os, std::span<const ParamBlock* const> blocks, const CheckpointMeta& meta = {});

// Every block in `blocks` must appear in the stream with the same shape, and
// the stream may not contain blocks that are not in `blocks`. Returns metadata.
CheckpointMeta read_checkpoint(std::istream& is, std::span<ParamBlock* const> blocks);

void save_checkpoint(const std::filesystem::path& path, std::span<const ParamBlock* const> blocks,
                     const CheckpointMeta& meta = {});
CheckpointMeta load_checkpoint(const std::filesystem::path& path, std::span<ParamBlock* const> blocks);

std::string format_double(double v);

}  // namespace macrpo::nn
