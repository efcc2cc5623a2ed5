#include "otdl/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <span>
#include <sstream>

namespace otdl {

namespace {

static_assert(std::endian::native == std::endian::little, "network files assume a little-endian host");

constexpr std::array<char, 4> kMagic{'N', 'T', 'N', 'W'};
constexpr std::array<char, 4> kThresholdMagic{'S', 'T', 'T', 'H'};
constexpr std::array<char, 4> kCoherenceMagic{'C', 'O', 'H', 'R'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) { bytes(&v, 2); }
  void floats(std::span<const float> v) { bytes(v.data(), v.size() * sizeof(float)); }
  void magic(const std::array<char, 4>& m) { bytes(m.data(), m.size()); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw NetworkFileException(NetworkFileError::Truncated, "network file is truncated");
  }
  std::uint8_t u8() {
    std::uint8_t v;
    bytes(&v, 1);
    return v;
  }
  std::uint16_t u16() {
    std::uint16_t v;
    bytes(&v, 2);
    return v;
  }
  void floats(std::span<float> v) { bytes(v.data(), v.size() * sizeof(float)); }
  /// Reads a 4-byte block tag; returns false at a clean end of stream.
  bool tag(std::array<char, 4>& m) {
    if (in_.peek() == std::char_traits<char>::eof()) return false;
    bytes(m.data(), m.size());
    return true;
  }

 private:
  std::istream& in_;
};

}  // namespace

namespace {

void write_stages(std::ostream& out, std::span<const NTupleNetwork* const> stages,
                  const std::vector<TileMultiset>* thresholds, bool with_coherence) {
  Writer w(out);
  const NTupleNetwork& first = *stages[0];
  w.magic(kMagic);
  w.u16(kNetworkFormatVersion);
  std::uint8_t flags = 0;
  if (first.symmetric()) flags |= 1;
  if (!first.geometry().is_standard()) flags |= 2;
  w.u8(flags);
  w.u8(static_cast<std::uint8_t>(stages.size()));
  for (const NTupleNetwork* s : stages) {
    w.u16(static_cast<std::uint16_t>(s->tuples().size()));
    for (const auto& t : s->tuples()) {
      w.u8(static_cast<std::uint8_t>(t.cells.size()));
      for (int c : t.cells) w.u8(static_cast<std::uint8_t>(c));
    }
    w.floats(s->weights());
  }
  if (stages.size() > 1) {
    w.magic(kThresholdMagic);
    for (const auto& th : *thresholds) {
      w.u8(static_cast<std::uint8_t>(th.size()));
      for (int e = kMaxExponent; e >= 1; --e)
        for (int n = 0; n < th.count(e); ++n) w.u8(static_cast<std::uint8_t>(e));
    }
  }
  if (with_coherence) {
    w.magic(kCoherenceMagic);
    for (const NTupleNetwork* s : stages) {
      w.u8(s->has_coherence() ? 1 : 0);
      if (s->has_coherence()) {
        w.floats(s->coherence().error);
        w.floats(s->coherence().absolute);
      }
    }
  }
  if (!out) throw NetworkFileException(NetworkFileError::Io, "failed to write network");
}

}  // namespace

void write_network(std::ostream& out, const MultistageNetwork& net, bool with_coherence) {
  std::vector<const NTupleNetwork*> stages;
  for (std::size_t k = 0; k < net.stage_count(); ++k) stages.push_back(&net.stage(k));
  write_stages(out, stages, &net.thresholds(), with_coherence);
}

void write_network(std::ostream& out, const NTupleNetwork& net) {
  const NTupleNetwork* stages[] = {&net};
  write_stages(out, stages, nullptr, false);
}

MultistageNetwork read_network(std::istream& in) {
  Reader r(in);
  std::array<char, 4> magic{};
  r.bytes(magic.data(), magic.size());
  if (magic != kMagic) throw NetworkFileException(NetworkFileError::BadMagic, "not a network file (bad magic)");
  const std::uint16_t version = r.u16();
  if (version != kNetworkFormatVersion)
    throw NetworkFileException(NetworkFileError::UnsupportedVersion,
                               "unsupported network format version " + std::to_string(version));
  const std::uint8_t flags = r.u8();
  const bool symmetric = flags & 1;
  const Geometry& geometry = (flags & 2) ? Geometry::small() : Geometry::standard();
  const std::uint8_t stage_count = r.u8();
  if (stage_count == 0) throw NetworkFileException(NetworkFileError::ShapeMismatch, "network has no stages");

  std::vector<NTupleNetwork> stages;
  for (std::uint8_t k = 0; k < stage_count; ++k) {
    const std::uint16_t tuple_count = r.u16();
    std::vector<TupleDef> tuples(tuple_count);
    for (auto& t : tuples) {
      const std::uint8_t n = r.u8();
      t.cells.resize(n);
      for (auto& c : t.cells) c = r.u8();
    }
    std::optional<NTupleNetwork> net;
    try {
      net.emplace(std::move(tuples), symmetric, geometry);
    } catch (const std::invalid_argument& e) {
      throw NetworkFileException(NetworkFileError::ShapeMismatch, std::string("invalid tuple layout: ") + e.what());
    }
    if (!stages.empty() && !net->same_shape(stages.front()))
      throw NetworkFileException(NetworkFileError::ShapeMismatch, "stages have different tuple shapes");
    r.floats(net->weights());
    stages.push_back(std::move(*net));
  }

  std::vector<TileMultiset> thresholds(stage_count);
  std::array<char, 4> tag{};
  bool have_tag = r.tag(tag);
  if (stage_count > 1) {
    if (!have_tag || tag != kThresholdMagic)
      throw NetworkFileException(NetworkFileError::Truncated, "missing stage threshold block");
    for (auto& th : thresholds) {
      const std::uint8_t n = r.u8();
      for (std::uint8_t i = 0; i < n; ++i) {
        const std::uint8_t e = r.u8();
        if (e == 0 || e > kMaxExponent)
          throw NetworkFileException(NetworkFileError::ShapeMismatch, "invalid threshold tile");
        th.add(e);
      }
    }
    have_tag = r.tag(tag);
  }
  if (have_tag) {
    if (tag != kCoherenceMagic) throw NetworkFileException(NetworkFileError::BadMagic, "unknown trailing block");
    for (auto& s : stages) {
      if (r.u8() == 0) continue;
      s.enable_coherence();
      r.floats(s.coherence().error);
      r.floats(s.coherence().absolute);
    }
  }
  try {
    return MultistageNetwork(std::move(stages), std::move(thresholds));
  } catch (const std::invalid_argument& e) {
    throw NetworkFileException(NetworkFileError::ShapeMismatch, e.what());
  }
}

std::vector<std::uint8_t> serialize(const MultistageNetwork& net, bool with_coherence) {
  std::ostringstream os(std::ios::binary);
  write_network(os, net, with_coherence);
  const std::string s = std::move(os).str();
  return {s.begin(), s.end()};
}

MultistageNetwork deserialize(const std::vector<std::uint8_t>& bytes) {
  std::istringstream is(std::string(bytes.begin(), bytes.end()), std::ios::binary);
  return read_network(is);
}

void save_network(const std::filesystem::path& path, const MultistageNetwork& net, bool with_coherence) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NetworkFileException(NetworkFileError::Io, "cannot open " + path.string() + " for writing");
  write_network(out, net, with_coherence);
}

void save_network(const std::filesystem::path& path, const NTupleNetwork& net) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw NetworkFileException(NetworkFileError::Io, "cannot open " + path.string() + " for writing");
  write_network(out, net);
}

MultistageNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NetworkFileException(NetworkFileError::Io, "cannot open " + path.string());
  return read_network(in);
}

NTupleNetwork load_single_network(const std::filesystem::path& path) {
  MultistageNetwork msn = load_network(path);
  if (msn.stage_count() != 1)
    throw NetworkFileException(NetworkFileError::ShapeMismatch, path.string() + " holds a multistage network");
  return std::move(msn.stage(0));
}

}  // namespace otdl
