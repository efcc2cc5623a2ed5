#include <doctest.h>

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <sstream>

#include "oracles.hpp"
#include "otdl/network.hpp"
#include "otdl/presets.hpp"
#include "otdl/serialize.hpp"

using namespace otdl;

namespace {

NTupleNetwork small_net(bool symmetric = true) {
  return NTupleNetwork({TupleDef{{0, 1, 2}}, TupleDef{{0, 4, 5, 1}}, TupleDef{{5, 6}}}, symmetric);
}

void fill_random(NTupleNetwork& net, Rng& rng, double scale = 1.0) {
  for (float& w : net.weights()) w = static_cast<float>((rng.uniform() - 0.5) * scale);
}

// Direct sum over images and tuples.
double reference_value(const NTupleNetwork& net, Board b) {
  std::vector<Board> views;
  if (net.symmetric()) {
    for (Board v : isomorphisms(b)) views.push_back(v);
  } else {
    views.push_back(b);
  }
  double sum = 0.0;
  for (Board v : views) {
    for (std::size_t t = 0; t < net.tuples().size(); ++t) {
      std::uint64_t index = 0, radix = 1;
      for (int c : net.tuples()[t].cells) {
        index += radix * static_cast<std::uint64_t>(v.at(c));
        radix *= 16;
      }
      sum += net.weight(net.table_offset(t) + index);
    }
  }
  return sum;
}

}  // namespace

TEST_SUITE("network") {

TEST_CASE("feature index puts the first cell in the lowest digit") {
  Board b;
  b.set(0, 3);
  b.set(1, 5);
  b.set(2, 15);
  CHECK(extract(TupleDef{{0, 1, 2}}, b) == 3u + 5u * 16u + 15u * 256u);
  CHECK(extract(TupleDef{{2, 1, 0}}, b) == 15u + 5u * 16u + 3u * 256u);
  CHECK(decode_feature(3u + 5u * 16u + 15u * 256u, 3) == std::vector<int>{3, 5, 15});
}

TEST_CASE("tuple validation") {
  const TupleDef repeated{{0, 0}}, outside{{0, 16}}, empty{}, six{{0, 1, 2, 3, 4, 5}};
  CHECK_THROWS_AS(repeated.validate(16), std::invalid_argument);
  CHECK_THROWS_AS(outside.validate(16), std::invalid_argument);
  CHECK_THROWS_AS(empty.validate(16), std::invalid_argument);
  CHECK_NOTHROW(six.validate(16));
}

TEST_CASE("value is the sum of the active weights") {
  Rng rng(2);
  for (bool symmetric : {true, false}) {
    NTupleNetwork net = small_net(symmetric);
    CHECK(net.lookups_per_eval() == (symmetric ? 24 : 3));
    fill_random(net, rng, 10.0);
    for (int i = 0; i < 500; ++i) {
      const Board b = oracle::random_board(rng, 1 + static_cast<int>(rng.below(16)), 15);
      REQUIRE(net.value(b) == doctest::Approx(reference_value(net, b)).epsilon(1e-12));
    }
  }
}

TEST_CASE("symmetric values are invariant under the eight isomorphisms") {
  Rng rng(4);
  NTupleNetwork net = small_net();
  fill_random(net, rng);
  for (int i = 0; i < 200; ++i) {
    const Board b = oracle::random_board(rng, 8, 12);
    for (Board v : isomorphisms(b)) REQUIRE(net.value(v) == doctest::Approx(net.value(b)).epsilon(1e-9));
  }
}

TEST_CASE("update spreads the adjustment over the active weights") {
  Rng rng(6);
  NTupleNetwork net = small_net();
  std::array<NTupleNetwork::FeatureSlot, NTupleNetwork::kMaxLookups> slots;
  int distinct_boards = 0;
  for (int i = 0; i < 200; ++i) {
    const Board b = oracle::random_board(rng, 2 + static_cast<int>(rng.below(14)), 10);
    const double before = net.value(b);
    const double adj = std::ldexp(static_cast<double>(rng.below(64)) - 32.0, -1);
    // a slot hit k times moves by k * adj / F and is counted k times
    const int n = net.active_slots(b, slots);
    std::map<NTupleNetwork::FeatureSlot, int> hits;
    for (int k = 0; k < n; ++k) ++hits[slots[static_cast<std::size_t>(k)]];
    double gain = 0.0;
    for (const auto& [slot, k] : hits) gain += static_cast<double>(k * k);
    gain /= n;
    distinct_boards += hits.size() == static_cast<std::size_t>(n);
    net.update(b, adj);
    REQUIRE(std::abs(net.value(b) - (before + gain * adj)) < 1e-4);  // float weights
  }
  CHECK(distinct_boards > 0);
  // each active weight gets adj / F
  NTupleNetwork fresh = small_net(false);
  const Board b = Board::from_exponents(std::vector<int>{1, 2, 3, 0, 4, 5, 6});
  fresh.update(b, 3.0);
  const int n = fresh.active_slots(b, slots);
  CHECK(n == 3);
  for (int i = 0; i < n; ++i) CHECK(fresh.weight(slots[static_cast<std::size_t>(i)]) == doctest::Approx(1.0));
}

TEST_CASE("optimistic initialisation gives every board the initial value") {
  NTupleNetwork net = make_preset_network("2x6");
  net.init_optimistic(320000.0);
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const Board b = oracle::random_board(rng, 1 + static_cast<int>(rng.below(16)), 15);
    REQUIRE(std::abs(net.value(b) - 320000.0) <= 320000.0 * 1e-9);
  }
  CHECK_THROWS_AS(net.init_optimistic(-1.0), std::invalid_argument);
}

TEST_CASE("temporal coherence step uses the accumulators from before the step") {
  NTupleNetwork net({TupleDef{{0}}}, false);
  net.enable_coherence();
  const Board b = Board::from_exponents(std::vector<int>{1});
  std::array<NTupleNetwork::FeatureSlot, NTupleNetwork::kMaxLookups> slots;
  net.active_slots(b, slots);
  const auto s = slots[0];

  net.tc_update(b, 4.0, 0.5);  // fresh store: beta = 1
  CHECK(net.weight(s) == doctest::Approx(2.0));
  CHECK(net.coherence().error[s] == 4.0f);
  CHECK(net.coherence().absolute[s] == 4.0f);
  net.tc_update(b, -4.0, 0.5);  // beta = 4/4
  CHECK(net.weight(s) == doctest::Approx(0.0));
  CHECK(net.coherence().coherence(s) == 0.0);
  net.tc_update(b, 10.0, 0.5);  // E = 0 -> beta = 0, weight unchanged
  CHECK(net.weight(s) == doctest::Approx(0.0));

  net.reset_coherence();
  CHECK(net.coherence().error[s] == 0.0f);
  CHECK(net.coherence().coherence(s) == 1.0);
}

TEST_CASE("coherence damping after alternating and constant histories") {
  for (int len = 1; len <= 100; ++len) {
    CoherenceStore alt(1), same(1);
    for (int k = 0; k < len; ++k) {
      const float d = 3.0f;
      alt.error[0] += (k % 2 == 0) ? d : -d;
      alt.absolute[0] += d;
      same.error[0] += -d;
      same.absolute[0] += d;
    }
    if (len % 2 == 0) REQUIRE(alt.coherence(0) == 0.0);
    REQUIRE(same.coherence(0) == 1.0);
  }
}

TEST_CASE("averaging is linear in the value") {
  Rng rng(10);
  std::vector<NTupleNetwork> nets;
  for (int k = 0; k < 5; ++k) {
    nets.push_back(small_net());
    // integer multiples of the snapshot count average without rounding
    for (float& w : nets.back().weights()) w = static_cast<float>(5 * (static_cast<int>(rng.below(2001)) - 1000));
  }
  std::vector<const NTupleNetwork*> ptrs;
  for (const auto& n : nets) ptrs.push_back(&n);
  const NTupleNetwork avg = swa_average(ptrs);
  for (int i = 0; i < 100; ++i) {
    const Board b = oracle::random_board(rng, 1 + static_cast<int>(rng.below(16)), 15);
    double mean = 0.0;
    for (const auto& n : nets) mean += n.value(b) / 5.0;
    REQUIRE(std::abs(avg.value(b) - mean) <= 1e-9 * std::max(1.0, std::abs(mean)));
  }
  // single snapshot and identical snapshots are no-ops
  const NTupleNetwork* same[] = {&nets[0], &nets[0], &nets[0]};
  const NTupleNetwork avg_same = swa_average(same);
  for (std::size_t i = 0; i < avg_same.weight_count(); ++i) REQUIRE(avg_same.weight(i) == nets[0].weight(i));

  NTupleNetwork other({TupleDef{{0, 1}}}, true);
  const NTupleNetwork* mixed[] = {&nets[0], &other};
  CHECK_THROWS_AS(swa_average(mixed), std::invalid_argument);
  CHECK_THROWS_AS(swa_average(std::span<const NTupleNetwork* const>{}), std::invalid_argument);
}

TEST_CASE("multistage routing picks the highest stage whose tiles are present") {
  std::vector<NTupleNetwork> stages{small_net(), small_net(), small_net()};
  stages[0].init_optimistic(1.0);
  stages[1].init_optimistic(2.0);
  stages[2].init_optimistic(3.0);
  MultistageNetwork msn(std::move(stages), {TileMultiset{}, TileMultiset::parse("16384"),
                                            TileMultiset::parse("16384,8192")});
  auto board = [](std::initializer_list<int> e) {
    std::vector<int> v(e);
    return Board::from_exponents(v);
  };
  CHECK(msn.stage_select(board({1, 2, 13})) == 0);
  CHECK(msn.stage_select(board({14, 2})) == 1);
  CHECK(msn.stage_select(board({14, 13, 1})) == 2);
  CHECK(msn.value(board({14, 13, 1})) == doctest::Approx(3.0));
  auto flat_thresholds = [] {
    return MultistageNetwork({small_net(), small_net()}, {TileMultiset{}, TileMultiset{}});
  };
  CHECK_THROWS_AS(flat_thresholds(), std::invalid_argument);
}

TEST_CASE("presets have six distinct cells and cover the board across images") {
  for (const Preset& p : presets()) {
    CAPTURE(p.name);
    CHECK_FALSE(p.source.empty());
    std::set<int> covered;
    for (const TupleDef& t : p.tuples) {
      CHECK(t.cells.size() == 6);
      CHECK(std::set<int>(t.cells.begin(), t.cells.end()).size() == 6);
      CHECK_NOTHROW(t.validate(16));
      CHECK(t.table_size() == 16777216u);
      // mark the cells every image of the tuple touches
      std::vector<int> e(16, 0);
      for (int c : t.cells) e[static_cast<std::size_t>(c)] = 1;
      for (Board v : isomorphisms(Board::from_exponents(e)))
        for (int c = 0; c < 16; ++c)
          if (v.at(c)) covered.insert(c);
    }
    CHECK(covered.size() == 16);
  }
  CHECK(find_preset("4x6").tuples == find_preset("yeh-4x6").tuples);
  CHECK(find_preset("8x6").tuples.size() == 8);
  CHECK_THROWS_AS(find_preset("nope"), std::invalid_argument);
}

TEST_CASE("network files round-trip") {
  Rng rng(12);
  std::vector<NTupleNetwork> stages{small_net(), small_net()};
  for (auto& s : stages) fill_random(s, rng);
  stages[1].enable_coherence();
  stages[1].tc_update(Board(0x1234), 2.0, 1.0);
  const MultistageNetwork msn(std::move(stages), {TileMultiset{}, TileMultiset::parse("8192,2048")});
  for (bool coh : {false, true}) {
    const auto bytes = serialize(msn, coh);
    const MultistageNetwork back = deserialize(bytes);
    REQUIRE(back.stage_count() == 2);
    CHECK(back.threshold(1) == msn.threshold(1));
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(back.stage(k).same_shape(msn.stage(k)));
      for (std::size_t i = 0; i < msn.stage(k).weight_count(); ++i)
        REQUIRE(back.stage(k).weight(i) == msn.stage(k).weight(i));
    }
    CHECK(back.stage(1).has_coherence() == coh);
    if (coh) CHECK(back.stage(1).coherence().absolute == msn.stage(1).coherence().absolute);
  }

  // single-network writer matches the one-stage multistage layout
  std::ostringstream a, b;
  write_network(a, msn.stage(0));
  write_network(b, MultistageNetwork(NTupleNetwork(msn.stage(0))));
  CHECK(a.str() == b.str());

  NTupleNetwork small({TupleDef{{0, 1, 2}}}, true, Geometry::small());
  const auto sb = serialize(MultistageNetwork(NTupleNetwork(small)));
  CHECK_FALSE(deserialize(sb).stage(0).geometry().is_standard());
}

TEST_CASE("damaged network files are rejected with a reason") {
  const auto bytes = serialize(MultistageNetwork(small_net()));
  auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      deserialize(b);
    } catch (const NetworkFileException& e) {
      return e.code();
    }
    FAIL("no exception");
    return NetworkFileError::Io;
  };
  auto bad = bytes;
  bad[0] = 'X';
  CHECK(code_of(bad) == NetworkFileError::BadMagic);
  bad = bytes;
  bad[4] = 99;
  CHECK(code_of(bad) == NetworkFileError::UnsupportedVersion);
  bad = bytes;
  bad.resize(bytes.size() - 10);
  CHECK(code_of(bad) == NetworkFileError::Truncated);
  CHECK_THROWS_AS(load_network("/nonexistent/x.ntnw"), NetworkFileException);
}

}  // TEST_SUITE
