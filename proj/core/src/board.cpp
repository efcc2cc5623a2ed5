#include "otdl/board.hpp"

#include <bit>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace otdl {

char action_letter(Action a) {
  static constexpr char kLetters[] = {'U', 'R', 'D', 'L'};
  return kLetters[static_cast<int>(a)];
}

std::optional<Action> action_from_letter(char c) {
  switch (c) {
    case 'U': return Action::Up;
    case 'R': return Action::Right;
    case 'D': return Action::Down;
    case 'L': return Action::Left;
    default: return std::nullopt;
  }
}

Board Board::from_exponents(std::span<const int> exponents) {
  if (exponents.size() > 16) throw std::invalid_argument("board has at most 16 cells");
  Board b;
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    const int e = exponents[i];
    if (e < 0 || e > kMaxExponent) throw std::invalid_argument("tile exponent out of range");
    b.set(static_cast<int>(i), e);
  }
  return b;
}

int Board::max_exponent() const {
  int best = 0;
  for (std::uint64_t x = raw_; x != 0; x >>= 4) best = std::max(best, static_cast<int>(x & 0xF));
  return best;
}

int ActionSet::size() const { return std::popcount(bits_); }

std::vector<Action> ActionSet::to_vector() const {
  std::vector<Action> out;
  for (Action a : kActions)
    if (contains(a)) out.push_back(a);
  return out;
}

// ---------------------------------------------------------------------------
// Tile multisets

TileMultiset TileMultiset::of_board(Board b, int cells) {
  TileMultiset m;
  for (int i = 0; i < cells; ++i)
    if (int e = b.at(i); e != 0) m.add(e);
  return m;
}

TileMultiset TileMultiset::of_exponents(std::initializer_list<int> exponents) {
  TileMultiset m;
  for (int e : exponents) m.add(e);
  return m;
}

TileMultiset TileMultiset::parse(std::string_view text) {
  TileMultiset m;
  while (!text.empty()) {
    const auto comma = text.find_first_of(",+");
    std::string_view item = text.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      std::uint32_t value = 0;
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
      if (ec != std::errc{} || ptr != item.data() + item.size() || value < 2 ||
          !std::has_single_bit(value) || std::countr_zero(value) > kMaxExponent)
        throw std::invalid_argument("invalid tile value '" + std::string(item) + "'");
      m.add(std::countr_zero(value));
    }
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return m;
}

bool TileMultiset::empty() const { return size() == 0; }

int TileMultiset::size() const {
  int n = 0;
  for (auto c : counts_) n += c;
  return n;
}

bool TileMultiset::contained_in(const TileMultiset& other) const {
  for (std::size_t e = 1; e < counts_.size(); ++e)
    if (counts_[e] > other.counts_[e]) return false;
  return true;
}

bool TileMultiset::strictly_contained_in(const TileMultiset& other) const {
  return contained_in(other) && !(*this == other);
}

std::string TileMultiset::to_string() const {
  std::string out;
  for (int e = kMaxExponent; e >= 1; --e)
    for (int k = 0; k < counts_[static_cast<std::size_t>(e)]; ++k) {
      if (!out.empty()) out += ',';
      out += std::to_string(tile_value(e));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Line sliding

LineSlide slide_line(std::uint16_t line, int length) {
  int cells[4] = {0, 0, 0, 0};
  for (int i = 0; i < length; ++i) cells[i] = (line >> (4 * i)) & 0xF;

  int out[4] = {0, 0, 0, 0};
  int n = 0;
  bool merged_last = false;
  std::uint32_t reward = 0;
  for (int i = 0; i < length; ++i) {
    if (cells[i] == 0) continue;
    // Destination-side pairs merge first; a merged tile cannot merge again.
    if (n > 0 && !merged_last && out[n - 1] == cells[i] && cells[i] < kMaxExponent) {
      ++out[n - 1];
      reward += tile_value(out[n - 1]);
      merged_last = true;
    } else {
      out[n++] = cells[i];
      merged_last = false;
    }
  }

  LineSlide s;
  for (int i = 0; i < length; ++i) s.result |= static_cast<std::uint16_t>(out[i] << (4 * i));
  s.reward = reward;
  s.moved = s.result != line;
  return s;
}

namespace {

std::vector<LineSlide> build_table(int length) {
  std::vector<LineSlide> t(std::size_t{1} << (4 * length));
  for (std::size_t v = 0; v < t.size(); ++v) t[v] = slide_line(static_cast<std::uint16_t>(v), length);
  return t;
}

std::uint16_t reverse_row4(std::uint16_t r) {
  return static_cast<std::uint16_t>(((r & 0x000F) << 12) | ((r & 0x00F0) << 4) | ((r & 0x0F00) >> 4) |
                                    ((r & 0xF000) >> 12));
}

// Per-row results for the 4x4 fast path, both orientations.
struct RowTables {
  struct Entry {
    std::uint16_t left;
    std::uint16_t right;
    std::uint32_t left_reward;
    std::uint32_t right_reward;
  };
  std::vector<Entry> rows;

  RowTables() : rows(65536) {
    for (std::uint32_t v = 0; v < 65536; ++v) {
      const auto row = static_cast<std::uint16_t>(v);
      const LineSlide l = slide_line(row, 4);
      const LineSlide r = slide_line(reverse_row4(row), 4);
      rows[v] = {l.result, reverse_row4(r.result), l.reward, r.reward};
    }
  }
};

const RowTables& row_tables() {
  static const RowTables tables;
  return tables;
}

}  // namespace

// ---------------------------------------------------------------------------
// 4x4 bit manipulation

Board transpose(Board b) {
  const std::uint64_t x = b.raw();
  const std::uint64_t a1 = x & 0xF0F00F0FF0F00F0FULL;
  const std::uint64_t a2 = x & 0x0000F0F00000F0F0ULL;
  const std::uint64_t a3 = x & 0x0F0F00000F0F0000ULL;
  const std::uint64_t a = a1 | (a2 << 12) | (a3 >> 12);
  const std::uint64_t b1 = a & 0xFF00FF0000FF00FFULL;
  const std::uint64_t b2 = a & 0x00FF00FF00000000ULL;
  const std::uint64_t b3 = a & 0x00000000FF00FF00ULL;
  return Board(b1 | (b2 >> 24) | (b3 << 24));
}

Board flip_horizontal(Board b) {
  const std::uint64_t x = b.raw();
  return Board(((x & 0x000F000F000F000FULL) << 12) | ((x & 0x00F000F000F000F0ULL) << 4) |
               ((x & 0x0F000F000F000F00ULL) >> 4) | ((x & 0xF000F000F000F000ULL) >> 12));
}

Board flip_vertical(Board b) {
  const std::uint64_t x = b.raw();
  return Board((x << 48) | ((x & 0xFFFF0000ULL) << 16) | ((x >> 16) & 0xFFFF0000ULL) | (x >> 48));
}

std::array<Board, 8> isomorphisms(Board b) {
  // rot90 (clockwise) = flip_horizontal . transpose
  const Board r1 = flip_horizontal(transpose(b));
  const Board r2 = flip_horizontal(flip_vertical(b));
  const Board r3 = flip_vertical(transpose(b));
  return {b, r1, r2, r3, flip_horizontal(b), flip_horizontal(r1), flip_horizontal(r2),
          flip_horizontal(r3)};
}

namespace {

inline Board slide_rows(std::uint64_t x, bool left, std::uint32_t& reward) {
  const auto& t = row_tables().rows;
  std::uint64_t out = 0;
  reward = 0;
  for (int r = 0; r < 4; ++r) {
    const auto& e = t[(x >> (16 * r)) & 0xFFFF];
    out |= static_cast<std::uint64_t>(left ? e.left : e.right) << (16 * r);
    reward += left ? e.left_reward : e.right_reward;
  }
  return Board(out);
}

}  // namespace

SlideOutcome slide(Board b, Action a) {
  SlideOutcome o;
  switch (a) {
    case Action::Left: o.afterstate = slide_rows(b.raw(), true, o.reward); break;
    case Action::Right: o.afterstate = slide_rows(b.raw(), false, o.reward); break;
    case Action::Up: o.afterstate = transpose(slide_rows(transpose(b).raw(), true, o.reward)); break;
    case Action::Down: o.afterstate = transpose(slide_rows(transpose(b).raw(), false, o.reward)); break;
  }
  o.moved = o.afterstate != b;
  return o;
}

ActionSet legal_actions(Board b) {
  ActionSet s;
  for (Action a : kActions)
    if (slide(b, a).moved) s.insert(a);
  return s;
}

bool is_terminal(Board b) { return legal_actions(b).empty(); }

int empty_count(Board b) {
  std::uint64_t x = b.raw();
  x |= (x >> 2) & 0x3333333333333333ULL;
  x |= (x >> 1);
  x = ~x & 0x1111111111111111ULL;
  return std::popcount(x);
}

Board spawn_at(Board afterstate, int empty_index, bool four, int cells) {
  int seen = 0;
  for (int i = 0; i < cells; ++i) {
    if (afterstate.at(i) != 0) continue;
    if (seen++ == empty_index) {
      afterstate.set(i, four ? 2 : 1);
      return afterstate;
    }
  }
  throw std::invalid_argument("no empty cell");
}

SpawnDistribution spawn_successors(Board afterstate) {
  return Geometry::standard().spawn_successors(afterstate);
}

Board spawn_random(Board afterstate, Rng& rng) {
  const int k = empty_count(afterstate);
  if (k == 0) throw std::invalid_argument("no empty cell");
  const auto pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  const bool four = rng.uniform() < 0.1;
  return spawn_at(afterstate, pick, four);
}

Board initial_state(Rng& rng) { return spawn_random(spawn_random(Board{}, rng), rng); }

std::string render(Board b) { return Geometry::standard().render(b); }

std::uint64_t tile_sum(Board b) {
  std::uint64_t s = 0;
  for (int i = 0; i < 16; ++i) s += tile_value(b.at(i));
  return s;
}

// ---------------------------------------------------------------------------
// Geometry

Geometry::Geometry(int rows, int cols)
    : rows_(rows), cols_(cols), row_table_(build_table(cols)), col_table_(build_table(rows)) {}

const Geometry& Geometry::standard() {
  static const Geometry g(4, 4);
  return g;
}

const Geometry& Geometry::small() {
  static const Geometry g(2, 3);
  return g;
}

const Geometry& Geometry::of(int rows, int cols) {
  if (rows == 4 && cols == 4) return standard();
  if (rows == 2 && cols == 3) return small();
  throw std::invalid_argument("unsupported geometry " + std::to_string(rows) + "x" +
                              std::to_string(cols));
}

std::uint16_t Geometry::line(Board b, int index, bool column, bool reversed) const {
  const int length = column ? rows_ : cols_;
  std::uint16_t v = 0;
  for (int k = 0; k < length; ++k) {
    const int pos = reversed ? length - 1 - k : k;
    const int cell = column ? pos * cols_ + index : index * cols_ + pos;
    v |= static_cast<std::uint16_t>(b.at(cell) << (4 * k));
  }
  return v;
}

void Geometry::put_line(Board& b, int index, bool column, bool reversed, std::uint16_t value) const {
  const int length = column ? rows_ : cols_;
  for (int k = 0; k < length; ++k) {
    const int pos = reversed ? length - 1 - k : k;
    const int cell = column ? pos * cols_ + index : index * cols_ + pos;
    b.set(cell, (value >> (4 * k)) & 0xF);
  }
}

SlideOutcome Geometry::slide(Board b, Action a) const {
  if (is_standard()) return otdl::slide(b, a);
  const bool column = a == Action::Up || a == Action::Down;
  const bool reversed = a == Action::Right || a == Action::Down;
  const auto& table = column ? col_table_ : row_table_;
  const int lines = column ? cols_ : rows_;
  SlideOutcome o;
  o.afterstate = b;
  for (int i = 0; i < lines; ++i) {
    const LineSlide& s = table[line(b, i, column, reversed)];
    put_line(o.afterstate, i, column, reversed, s.result);
    o.reward += s.reward;
  }
  o.moved = o.afterstate != b;
  return o;
}

ActionSet Geometry::legal_actions(Board b) const {
  if (is_standard()) return otdl::legal_actions(b);
  ActionSet s;
  for (Action a : kActions)
    if (slide(b, a).moved) s.insert(a);
  return s;
}

int Geometry::empty_count(Board b) const {
  if (is_standard()) return otdl::empty_count(b);
  int n = 0;
  for (int i = 0; i < cells(); ++i) n += b.at(i) == 0;
  return n;
}

SpawnDistribution Geometry::spawn_successors(Board afterstate) const {
  SpawnDistribution out;
  const int k = empty_count(afterstate);
  if (k == 0) return out;
  out.reserve(static_cast<std::size_t>(2 * k));
  const double p2 = 0.9 / k;
  const double p4 = 0.1 / k;
  for (int i = 0; i < cells(); ++i) {
    if (afterstate.at(i) != 0) continue;
    Board two = afterstate;
    two.set(i, 1);
    Board four = afterstate;
    four.set(i, 2);
    out.push_back({two, p2});
    out.push_back({four, p4});
  }
  return out;
}

Board Geometry::spawn_random(Board afterstate, Rng& rng) const {
  const int k = empty_count(afterstate);
  if (k == 0) throw std::invalid_argument("no empty cell");
  const auto pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
  const bool four = rng.uniform() < 0.1;
  return spawn_at(afterstate, pick, four, cells());
}

Board Geometry::initial_state(Rng& rng) const {
  return spawn_random(spawn_random(Board{}, rng), rng);
}

std::vector<Board> Geometry::isomorphisms(Board b) const {
  if (is_standard()) {
    const auto all = otdl::isomorphisms(b);
    return {all.begin(), all.end()};
  }
  auto mirror = [&](Board x, bool horizontal) {
    Board out;
    for (int r = 0; r < rows_; ++r)
      for (int c = 0; c < cols_; ++c) {
        const int src = horizontal ? r * cols_ + (cols_ - 1 - c) : (rows_ - 1 - r) * cols_ + c;
        out.set(r * cols_ + c, x.at(src));
      }
    return out;
  };
  const Board h = mirror(b, true);
  const Board v = mirror(b, false);
  return {b, h, v, mirror(h, false)};
}

std::string Geometry::render(Board b) const {
  std::ostringstream os;
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) {
      if (c) os << ' ';
      os << tile_value(b.at(r * cols_ + c));
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace otdl
