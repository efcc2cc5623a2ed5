#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otdl/rng.hpp"

namespace otdl {

// Tile exponents are stored 4 bits per cell; 15 (the 32768-tile) saturates.
inline constexpr int kMaxExponent = 15;

enum class Action : std::uint8_t { Up = 0, Right = 1, Down = 2, Left = 3 };

inline constexpr std::array<Action, 4> kActions{Action::Up, Action::Right, Action::Down,
                                                Action::Left};

char action_letter(Action a);
std::optional<Action> action_from_letter(char c);

/// Packed grid of tile exponents. Cell i (row-major) occupies bits [4i, 4i+4).
/// A 2x3 board uses the low 24 bits.
class Board {
 public:
  constexpr Board() = default;
  constexpr explicit Board(std::uint64_t raw) : raw_(raw) {}

  /// Builds a board from row-major exponents (at most 16 cells).
  static Board from_exponents(std::span<const int> exponents);

  constexpr std::uint64_t raw() const { return raw_; }
  constexpr int at(int cell) const { return static_cast<int>((raw_ >> (4 * cell)) & 0xF); }
  constexpr void set(int cell, int exponent) {
    raw_ = (raw_ & ~(0xFULL << (4 * cell))) | (static_cast<std::uint64_t>(exponent & 0xF) << (4 * cell));
  }

  /// Largest exponent on the board (0 when empty).
  int max_exponent() const;

  friend constexpr bool operator==(Board, Board) = default;

 private:
  std::uint64_t raw_ = 0;
};

/// Tile value for an exponent (0 for an empty cell).
constexpr std::uint32_t tile_value(int exponent) { return exponent == 0 ? 0u : (1u << exponent); }

struct SlideOutcome {
  Board afterstate;
  std::uint32_t reward = 0;
  bool moved = false;
};

struct Successor {
  Board board;
  double probability = 0.0;
};

using SpawnDistribution = std::vector<Successor>;

/// Small set of actions, iterated in canonical order Up, Right, Down, Left.
class ActionSet {
 public:
  constexpr ActionSet() = default;
  constexpr void insert(Action a) { bits_ |= static_cast<std::uint8_t>(1u << static_cast<int>(a)); }
  constexpr bool contains(Action a) const { return (bits_ >> static_cast<int>(a)) & 1u; }
  constexpr bool empty() const { return bits_ == 0; }
  int size() const;
  std::vector<Action> to_vector() const;
  friend constexpr bool operator==(ActionSet, ActionSet) = default;

 private:
  std::uint8_t bits_ = 0;
};

/// Multiset of tiles, used for stage thresholds and downgrade activation.
class TileMultiset {
 public:
  TileMultiset() { counts_.fill(0); }

  static TileMultiset of_board(Board b, int cells = 16);
  /// Parses a comma separated list of tile values, e.g. "32768,8192".
  static TileMultiset parse(std::string_view text);
  static TileMultiset of_exponents(std::initializer_list<int> exponents);

  int count(int exponent) const { return counts_[static_cast<std::size_t>(exponent)]; }
  void add(int exponent) { ++counts_[static_cast<std::size_t>(exponent)]; }
  bool empty() const;
  int size() const;

  /// True when every tile of *this appears in `other` at least as often.
  bool contained_in(const TileMultiset& other) const;
  /// True when *this is contained in `other` and differs from it.
  bool strictly_contained_in(const TileMultiset& other) const;

  std::string to_string() const;
  friend bool operator==(const TileMultiset&, const TileMultiset&) = default;

 private:
  std::array<std::uint8_t, 16> counts_{};
};

/// Lookup table for sliding one line of cells toward index 0.
struct LineSlide {
  std::uint16_t result = 0;
  std::uint32_t reward = 0;
  bool moved = false;
};

/// Slides a single line (cell 0 is the destination edge). Used to build the
/// row tables; exposed for tests.
LineSlide slide_line(std::uint16_t line, int length);

/// Board shape with its precomputed line tables. Only 4x4 and 2x3 exist.
class Geometry {
 public:
  static const Geometry& standard();
  static const Geometry& small();
  /// Throws std::invalid_argument for unsupported shapes.
  static const Geometry& of(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int cells() const { return rows_ * cols_; }
  bool square() const { return rows_ == cols_; }
  bool is_standard() const { return rows_ == 4 && cols_ == 4; }

  SlideOutcome slide(Board b, Action a) const;
  ActionSet legal_actions(Board b) const;
  bool is_terminal(Board b) const { return legal_actions(b).empty(); }
  int empty_count(Board b) const;
  SpawnDistribution spawn_successors(Board afterstate) const;
  Board spawn_random(Board afterstate, Rng& rng) const;
  Board initial_state(Rng& rng) const;
  /// 8 boards for square geometry (4 rotations, then their mirror images);
  /// identity plus flips for 2x3. Input first.
  std::vector<Board> isomorphisms(Board b) const;
  std::string render(Board b) const;

 private:
  Geometry(int rows, int cols);

  std::uint16_t line(Board b, int index, bool column, bool reversed) const;
  void put_line(Board& b, int index, bool column, bool reversed, std::uint16_t value) const;

  int rows_;
  int cols_;
  std::vector<LineSlide> row_table_;  // lines of length cols_
  std::vector<LineSlide> col_table_;  // lines of length rows_
};

// Fast paths for the standard 4x4 game.
SlideOutcome slide(Board b, Action a);
ActionSet legal_actions(Board b);
bool is_terminal(Board b);
int empty_count(Board b);
SpawnDistribution spawn_successors(Board afterstate);
/// Throws std::invalid_argument("no empty cell") on a full board.
Board spawn_random(Board afterstate, Rng& rng);
/// Places exponent 1 (or 2 when `four`) at the k-th empty cell in index order.
Board spawn_at(Board afterstate, int empty_index, bool four, int cells = 16);
Board initial_state(Rng& rng);
std::array<Board, 8> isomorphisms(Board b);
std::string render(Board b);

Board transpose(Board b);
Board flip_horizontal(Board b);
Board flip_vertical(Board b);

/// Sum of tile values on the board.
std::uint64_t tile_sum(Board b);

}  // namespace otdl
