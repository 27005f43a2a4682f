#pragma once

// Binary checkpoint container. Layout (all integers little-endian):
//
//   "SUMMERCK"  u32 version  str kind  u64 epoch  u64 seed  str config
//   u64 count   { str name  u32 rank  u64 dims[rank]  f64 values[] } * count
//
// where str is a u32 byte length followed by UTF-8 bytes. See
// docs/checkpoint-format.md.

#include "summer/nn.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace summer {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct StoredTensor {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

struct Checkpoint {
    std::string kind; // "teacher" or "student"
    std::uint64_t epoch = 0;
    std::uint64_t seed = 0;
    std::string config; // resolved config text
    std::vector<StoredTensor> tensors;
};

Checkpoint make_checkpoint(std::string kind, std::uint64_t epoch, std::uint64_t seed, std::string config,
                           const ParamList& params);
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);
std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

// Copies stored values into `params`; names, order and shapes must match.
void restore_parameters(const ParamList& params, const Checkpoint& checkpoint);

} // namespace summer
