#pragma once

#include "mcsp/config.hpp"
#include "mcsp/params.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mcsp {

// On-disk model state. Arrays are stored as float64 payloads in parameter
// creation order, so save/load round-trips bit-exactly.
struct Checkpoint {
    std::string config_text;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    std::string rng_state;
    std::vector<std::pair<std::string, Matrix>> arrays;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const ParamStore& ps, const RunConfig& cfg, std::uint64_t step,
                           const std::string& rng_state);

// Copies checkpoint arrays into an already-built store; every name and shape
// must match exactly.
void restore_params(const Checkpoint& ckpt, ParamStore& ps);

} // namespace mcsp
