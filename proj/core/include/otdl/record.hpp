#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "otdl/board.hpp"
#include "otdl/learning.hpp"

namespace otdl {

// Episode records: whitespace separated two-character moves.
//   "61"      environment places exponent 1 (a 2-tile) at cell 6; both
//             characters are hex digits
//   "#L"      player slides Left (U, R, D or L)
//   "(12)"    time spent on the preceding move in milliseconds
//   "[4]"     reward of the preceding move
// Moves may also be written back to back, as in "11D1".

struct RecordMove {
  enum class Kind : std::uint8_t { Place, Slide };

  Kind kind = Kind::Place;
  int cell = 0;      // Place
  int exponent = 0;  // Place
  Action action = Action::Up;  // Slide
  std::optional<std::uint64_t> millis;
  std::optional<std::uint64_t> reward;

  static RecordMove place(int cell, int exponent) { return {Kind::Place, cell, exponent, Action::Up, {}, {}}; }
  static RecordMove slide(Action a, std::optional<std::uint64_t> reward = {}) {
    return {Kind::Slide, 0, 0, a, {}, reward};
  }
  friend bool operator==(const RecordMove&, const RecordMove&) = default;
};

class RecordParseError : public std::runtime_error {
 public:
  RecordParseError(std::size_t position, const std::string& what)
      : std::runtime_error("record position " + std::to_string(position) + ": " + what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

struct EpisodeRecord {
  std::vector<RecordMove> moves;

  std::string to_string() const;
  /// Throws RecordParseError with the character offset of the bad token.
  static EpisodeRecord parse(std::string_view text);
  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

/// Builds the record of a played episode (needs a recorded trajectory). The
/// two initial tiles are listed in cell order.
EpisodeRecord make_record(const EpisodeResult& episode, bool with_rewards = true);

struct ReplayResult {
  std::vector<Board> states;  // board after each move, in order
  std::uint64_t score = 0;
  Board final_state;
  bool terminal = false;
};

/// Replays a record through the engine. Throws std::invalid_argument when a
/// placement hits an occupied cell, a slide is illegal, or an annotated
/// reward disagrees with the engine.
ReplayResult replay(const EpisodeRecord& record);

}  // namespace otdl
