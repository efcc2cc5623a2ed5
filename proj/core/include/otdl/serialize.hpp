#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "otdl/network.hpp"

namespace otdl {

// Binary network file, all integers little-endian:
//
//   "NTNW" | u16 version | u8 flags | u8 stage count
//   per stage: u16 tuple count, per tuple (u8 n, n x u8 cell),
//              then each table as 16^n f32 in feature-index order
//   [ "STTH" | per stage: u8 count, count x u8 exponent ]   (stage count > 1)
//   [ "COHR" | per stage: u8 present, then E and A tables as f32 ]
//
// flags: bit 0 symmetric sampling, bit 1 2x3 geometry.

inline constexpr std::uint16_t kNetworkFormatVersion = 1;

enum class NetworkFileError { BadMagic, UnsupportedVersion, Truncated, ShapeMismatch, Io };

class NetworkFileException : public std::runtime_error {
 public:
  NetworkFileException(NetworkFileError code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  NetworkFileError code() const { return code_; }

 private:
  NetworkFileError code_;
};

void write_network(std::ostream& out, const MultistageNetwork& net, bool with_coherence = false);
/// Writes one network as a single-stage file without copying it.
void write_network(std::ostream& out, const NTupleNetwork& net);
MultistageNetwork read_network(std::istream& in);

std::vector<std::uint8_t> serialize(const MultistageNetwork& net, bool with_coherence = false);
MultistageNetwork deserialize(const std::vector<std::uint8_t>& bytes);

void save_network(const std::filesystem::path& path, const MultistageNetwork& net,
                  bool with_coherence = false);
void save_network(const std::filesystem::path& path, const NTupleNetwork& net);
MultistageNetwork load_network(const std::filesystem::path& path);

/// Loads a file that must hold exactly one stage.
NTupleNetwork load_single_network(const std::filesystem::path& path);

}  // namespace otdl
