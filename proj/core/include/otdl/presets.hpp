#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "otdl/network.hpp"

namespace otdl {

/// Version tag of the built-in tuple coordinate table. Bump it whenever a
/// coordinate changes, since saved networks depend on the exact cell lists.
inline constexpr std::string_view kPresetVersion = "presets-v1";

struct Preset {
  std::string name;
  std::vector<TupleDef> tuples;
  std::string source;
};

/// Names: yeh-4x6, jaskowski-5x6, matsuzaki-1x6 ... matsuzaki-8x6.
/// Aliases 4x6, 5x6, 8x6 (and Kx6) map to the same tuples.
const std::vector<Preset>& presets();

/// Throws std::invalid_argument for an unknown name.
const Preset& find_preset(std::string_view name);

/// Symmetric network built from a named preset (zero-initialised).
NTupleNetwork make_preset_network(std::string_view name);

}  // namespace otdl
