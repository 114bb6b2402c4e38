#ifndef CROWDSR_CHECKPOINT_HPP
#define CROWDSR_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include "crowdsr/model.hpp"

namespace crowdsr {

// Named-tensor archive. Layout:
//   "CRSRCKPT 1\n"
//   one line of JSON: {"spec": {...}, "tensors": [{"name", "shape",
//                      "partition", "offset"}, ...]}
//   raw little-endian f64 buffers, offsets in bytes from the end of the
//   header line.
// A detached model simply has no "super_resolution" entries.

std::string serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& file, const Model& model);
Model load_checkpoint(const std::filesystem::path& file);

/// Throws ShapeError listing every parameter whose presence or shape differs
/// from what `expected` would produce.
void check_compatible(const Model& model, const ModelSpec& expected);

std::string spec_to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const std::string& text);

}  // namespace crowdsr

#endif  // CROWDSR_CHECKPOINT_HPP
