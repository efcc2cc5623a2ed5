#include "otdl/presets.hpp"

#include <stdexcept>

namespace otdl {

// Cell numbering is row-major:
//    0  1  2  3
//    4  5  6  7
//    8  9 10 11
//   12 13 14 15
//
// yeh-4x6: the four 6-tuples of Yeh et al., "Multistage temporal difference
//   learning for 2048-like games" (IEEE TCIAIG 2017), as published in the
//   moporgic/TDL2048-Demo reference code.
// jaskowski-5x6: the 4x6 set plus the fifth tuple of Jaskowski, "Mastering
//   2048 with delayed temporal coherence learning..." (IEEE TG 2018).
// matsuzaki-Kx6: the first K tuples of Matsuzaki, "Systematic selection of
//   N-tuple networks with consideration of interinfluence for game 2048"
//   (TAAI 2016). Tuple (c) is the 0-1-2-3-4-5 shape.
//
// The fifth Jaskowski tuple and the Matsuzaki list other than (c) are
// transcribed from the cited figures; see docs/presets.md.
const std::vector<Preset>& presets() {
  static const std::vector<Preset> table = [] {
    const std::vector<TupleDef> yeh = {
        {{0, 1, 2, 3, 4, 5}},
        {{4, 5, 6, 7, 8, 9}},
        {{0, 1, 2, 4, 5, 6}},
        {{4, 5, 6, 8, 9, 10}},
    };
    std::vector<TupleDef> jaskowski = {yeh[0], yeh[1], {{0, 1, 5, 6, 7, 10}}, yeh[2], yeh[3]};
    const std::vector<TupleDef> matsuzaki = {
        {{0, 1, 2, 4, 5, 6}},    // (a)
        {{1, 2, 5, 6, 9, 13}},   // (b)
        {{0, 1, 2, 3, 4, 5}},    // (c)
        {{0, 1, 5, 6, 7, 10}},   // (d)
        {{0, 1, 2, 5, 9, 10}},   // (e)
        {{0, 1, 5, 9, 13, 14}},  // (f)
        {{0, 1, 5, 8, 9, 13}},   // (g)
        {{0, 1, 2, 4, 6, 10}},   // (h)
    };
    std::vector<Preset> out;
    out.push_back({"yeh-4x6", yeh, "Yeh et al. 2017, TDL2048-Demo"});
    out.push_back({"jaskowski-5x6", jaskowski, "Jaskowski 2018"});
    for (std::size_t k = 1; k <= matsuzaki.size(); ++k)
      out.push_back({"matsuzaki-" + std::to_string(k) + "x6",
                     std::vector<TupleDef>(matsuzaki.begin(), matsuzaki.begin() + static_cast<long>(k)),
                     "Matsuzaki 2016"});
    return out;
  }();
  return table;
}

const Preset& find_preset(std::string_view name) {
  std::string key(name);
  if (key == "4x6") key = "yeh-4x6";
  else if (key == "5x6") key = "jaskowski-5x6";
  else if (key.size() == 3 && key.substr(1) == "x6") key = "matsuzaki-" + key;
  for (const auto& p : presets())
    if (p.name == key) return p;
  throw std::invalid_argument("unknown network preset '" + std::string(name) + "'");
}

NTupleNetwork make_preset_network(std::string_view name) {
  return NTupleNetwork(find_preset(name).tuples, true);
}

}  // namespace otdl
