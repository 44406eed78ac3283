#pragma once

#include <string>

#include "loggas/sampler.hpp"

namespace loggas {

/// BELS layout (little endian): "BELS", u32 version = 1, u32 n, f64 beta,
/// u64 master_seed, u32 reps, then reps x n f64 sorted eigenvalues.
inline constexpr std::uint32_t kBelsVersion = 1;

void write_bels(const std::string& path, const SampleBatch& batch);

/// Per-replicate seeds are re-derived from the master seed; the sampler
/// method is not part of the format.
SampleBatch read_bels(const std::string& path);

} // namespace loggas
