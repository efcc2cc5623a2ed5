#include "otdl/record.hpp"

#include <cctype>

namespace otdl {

namespace {

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

char hex_digit(int v) { return "0123456789ABCDEF"[v & 0xF]; }

std::uint64_t read_number(std::string_view text, std::size_t& i, char close) {
  const std::size_t start = i;
  ++i;  // opening bracket
  std::uint64_t n = 0;
  bool digits = false;
  while (i < text.size() && std::isdigit(static_cast<unsigned char>(text[i]))) {
    n = n * 10 + static_cast<std::uint64_t>(text[i] - '0');
    digits = true;
    ++i;
  }
  if (!digits || i >= text.size() || text[i] != close)
    throw RecordParseError(start, std::string("malformed annotation, expected digits and '") + close + "'");
  ++i;
  return n;
}

}  // namespace

std::string EpisodeRecord::to_string() const {
  std::string out;
  for (const RecordMove& m : moves) {
    if (!out.empty()) out += ' ';
    if (m.kind == RecordMove::Kind::Place) {
      out += hex_digit(m.cell);
      out += hex_digit(m.exponent);
    } else {
      out += '#';
      out += action_letter(m.action);
    }
    if (m.millis) out += " (" + std::to_string(*m.millis) + ")";
    if (m.reward) out += " [" + std::to_string(*m.reward) + "]";
  }
  return out;
}

EpisodeRecord EpisodeRecord::parse(std::string_view text) {
  EpisodeRecord r;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '(' || c == '[') {
      if (r.moves.empty()) throw RecordParseError(i, "annotation before any move");
      const std::size_t at = i;
      const std::uint64_t n = read_number(text, i, c == '(' ? ')' : ']');
      auto& slot = c == '(' ? r.moves.back().millis : r.moves.back().reward;
      if (slot) throw RecordParseError(at, "duplicate annotation");
      slot = n;
      continue;
    }
    if (i + 1 >= text.size()) throw RecordParseError(i, "truncated move");
    const char d = text[i + 1];
    if (c == '#') {
      const auto a = action_from_letter(d);
      if (!a) throw RecordParseError(i + 1, std::string("unknown direction '") + d + "'");
      r.moves.push_back(RecordMove::slide(*a));
    } else {
      const int cell = hex_value(c);
      const int exponent = hex_value(d);
      if (cell < 0) throw RecordParseError(i, std::string("bad position character '") + c + "'");
      if (exponent <= 0) throw RecordParseError(i + 1, std::string("bad tile character '") + d + "'");
      r.moves.push_back(RecordMove::place(cell, exponent));
    }
    i += 2;
  }
  return r;
}

namespace {

// Appends the placement that turns `before` into `after` (exactly one cell
// changes from empty).
void add_placement(EpisodeRecord& r, Board before, Board after) {
  for (int cell = 0; cell < 16; ++cell) {
    if (before.at(cell) != after.at(cell)) {
      r.moves.push_back(RecordMove::place(cell, after.at(cell)));
      return;
    }
  }
  throw std::invalid_argument("no placement between boards");
}

}  // namespace

EpisodeRecord make_record(const EpisodeResult& episode, bool with_rewards) {
  EpisodeRecord r;
  for (int cell = 0; cell < 16; ++cell)
    if (episode.initial.at(cell) != 0) r.moves.push_back(RecordMove::place(cell, episode.initial.at(cell)));
  for (const Transition& t : episode.trajectory) {
    r.moves.push_back(RecordMove::slide(t.action, with_rewards ? std::optional<std::uint64_t>(t.reward) : std::nullopt));
    add_placement(r, t.afterstate, t.next_state);
  }
  return r;
}

ReplayResult replay(const EpisodeRecord& record) {
  ReplayResult out;
  Board b;
  std::size_t index = 0;
  for (const RecordMove& m : record.moves) {
    const std::string where = "move " + std::to_string(index++) + ": ";
    if (m.kind == RecordMove::Kind::Place) {
      if (m.cell < 0 || m.cell >= 16 || b.at(m.cell) != 0)
        throw std::invalid_argument(where + "placement on an occupied cell");
      b.set(m.cell, m.exponent);
    } else {
      const SlideOutcome o = slide(b, m.action);
      if (!o.moved) throw std::invalid_argument(where + "illegal slide");
      if (m.reward && *m.reward != o.reward)
        throw std::invalid_argument(where + "reward " + std::to_string(*m.reward) + " recorded, engine gives " +
                                    std::to_string(o.reward));
      out.score += o.reward;
      b = o.afterstate;
    }
    out.states.push_back(b);
  }
  out.final_state = b;
  out.terminal = is_terminal(b);
  return out;
}

}  // namespace otdl
