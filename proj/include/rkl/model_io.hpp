#pragma once

#include <string>

#include "rkl/edmd.hpp"

namespace rkl {

// Binary model checkpoint. Doubles are stored verbatim (IEEE-754 little
// endian), so a save/load round trip is bit exact. config_echo carries the
// resolved run configuration for provenance; it is not interpreted on load.
void save_model(const std::string& path, const KoopmanModel& model,
                const std::string& config_echo = "");

struct LoadedModel {
    KoopmanModel model;
    std::string config_echo;
};

LoadedModel load_model(const std::string& path);

// Human-readable summary (dimensions, bases, sample count, spectral radius).
std::string model_info(const KoopmanModel& model);

} // namespace rkl
