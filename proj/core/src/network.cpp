#include "otdl/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace otdl {

namespace {

inline float load_relaxed(float& cell) {
  return std::atomic_ref<float>(cell).load(std::memory_order_relaxed);
}

inline void store_relaxed(float& cell, float v) {
  std::atomic_ref<float>(cell).store(v, std::memory_order_relaxed);
}

}  // namespace

void TupleDef::validate(int board_cells) const {
  if (cells.empty() || cells.size() > 8) throw std::invalid_argument("tuple length must be in [1, 8]");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i] < 0 || cells[i] >= board_cells)
      throw std::invalid_argument("tuple cell " + std::to_string(cells[i]) + " outside the board");
    for (std::size_t j = 0; j < i; ++j)
      if (cells[i] == cells[j]) throw std::invalid_argument("tuple cells must be distinct");
  }
}

std::uint32_t extract(const TupleDef& tuple, Board board) {
  std::uint32_t index = 0;
  for (std::size_t j = 0; j < tuple.cells.size(); ++j)
    index |= static_cast<std::uint32_t>(board.at(tuple.cells[j])) << (4 * j);
  return index;
}

std::vector<int> decode_feature(std::uint32_t index, std::size_t n) {
  std::vector<int> out(n);
  for (std::size_t j = 0; j < n; ++j) out[j] = static_cast<int>((index >> (4 * j)) & 0xF);
  return out;
}

// ---------------------------------------------------------------------------
// CoherenceStore

void CoherenceStore::reset() {
  std::fill(error.begin(), error.end(), 0.0f);
  std::fill(absolute.begin(), absolute.end(), 0.0f);
}

double CoherenceStore::coherence(std::size_t cell) const {
  const double a = absolute[cell];
  if (a == 0.0) return 1.0;
  return std::min(1.0, std::abs(static_cast<double>(error[cell])) / a);
}

// ---------------------------------------------------------------------------
// NTupleNetwork

NTupleNetwork::NTupleNetwork(std::vector<TupleDef> tuples, bool symmetric, const Geometry& geometry)
    : tuples_(std::move(tuples)),
      symmetric_(symmetric),
      geometry_(&geometry),
      isomorphism_count_(symmetric ? static_cast<int>(geometry.isomorphisms(Board{}).size()) : 1) {
  if (tuples_.empty()) throw std::invalid_argument("network needs at least one tuple");
  lookups_ = isomorphism_count_ * static_cast<int>(tuples_.size());
  if (lookups_ > kMaxLookups) throw std::invalid_argument("too many tuples for one network");
  offsets_.reserve(tuples_.size());
  for (const auto& t : tuples_) {
    t.validate(geometry.cells());
    offsets_.push_back(weight_count_);
    weight_count_ += t.table_size();
  }
  weights_ = std::make_unique<float[]>(weight_count_);
}

NTupleNetwork::NTupleNetwork(const NTupleNetwork& other)
    : tuples_(other.tuples_),
      symmetric_(other.symmetric_),
      geometry_(other.geometry_),
      isomorphism_count_(other.isomorphism_count_),
      lookups_(other.lookups_),
      offsets_(other.offsets_),
      weight_count_(other.weight_count_),
      weights_(std::make_unique_for_overwrite<float[]>(other.weight_count_)) {
  std::copy_n(other.weights_.get(), weight_count_, weights_.get());
  if (other.coherence_) coherence_ = std::make_unique<CoherenceStore>(*other.coherence_);
}

NTupleNetwork& NTupleNetwork::operator=(const NTupleNetwork& other) {
  if (this != &other) *this = NTupleNetwork(other);
  return *this;
}

int NTupleNetwork::active_slots(Board b, std::span<FeatureSlot, kMaxLookups> out) const {
  int n = 0;
  auto emit = [&](Board view) {
    for (std::size_t i = 0; i < tuples_.size(); ++i) out[n++] = offsets_[i] + extract(tuples_[i], view);
  };
  if (!symmetric_) {
    emit(b);
  } else if (geometry_->is_standard()) {
    for (Board view : isomorphisms(b)) emit(view);
  } else {
    for (Board view : geometry_->isomorphisms(b)) emit(view);
  }
  return n;
}

double NTupleNetwork::value(Board afterstate) const {
  std::array<FeatureSlot, kMaxLookups> slots;
  const int n = active_slots(afterstate, slots);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) sum += load_relaxed(weights_[slots[static_cast<std::size_t>(i)]]);
  return sum;
}

float NTupleNetwork::weight(std::size_t slot) const { return load_relaxed(weights_[slot]); }

void NTupleNetwork::update(Board afterstate, double adjustment) {
  if (adjustment == 0.0) return;
  std::array<FeatureSlot, kMaxLookups> slots;
  const int n = active_slots(afterstate, slots);
  const double share = adjustment / lookups_;
  for (int i = 0; i < n; ++i) {
    float& w = weights_[slots[static_cast<std::size_t>(i)]];
    store_relaxed(w, static_cast<float>(load_relaxed(w) + share));
  }
}

void NTupleNetwork::tc_update(Board afterstate, double delta, double alpha) {
  if (!coherence_) throw std::logic_error("coherence store not enabled");
  std::array<FeatureSlot, kMaxLookups> slots;
  std::array<double, kMaxLookups> beta;
  const int n = active_slots(afterstate, slots);
  auto& e = coherence_->error;
  auto& a = coherence_->absolute;
  for (int i = 0; i < n; ++i) {
    const std::size_t s = slots[static_cast<std::size_t>(i)];
    const double abs_acc = load_relaxed(a[s]);
    beta[static_cast<std::size_t>(i)] =
        abs_acc == 0.0 ? 1.0 : std::min(1.0, std::abs(static_cast<double>(load_relaxed(e[s]))) / abs_acc);
  }
  const double step = alpha / lookups_ * delta;
  for (int i = 0; i < n; ++i) {
    const std::size_t s = slots[static_cast<std::size_t>(i)];
    float& w = weights_[s];
    store_relaxed(w, static_cast<float>(load_relaxed(w) + step * beta[static_cast<std::size_t>(i)]));
  }
  for (int i = 0; i < n; ++i) {
    const std::size_t s = slots[static_cast<std::size_t>(i)];
    store_relaxed(e[s], static_cast<float>(load_relaxed(e[s]) + delta));
    store_relaxed(a[s], static_cast<float>(load_relaxed(a[s]) + std::abs(delta)));
  }
}

void NTupleNetwork::init_optimistic(double v_init) {
  if (!(v_init >= 0.0)) throw std::invalid_argument("initial value must be nonnegative");
  std::fill_n(weights_.get(), weight_count_, static_cast<float>(v_init / lookups_));
}

bool NTupleNetwork::same_shape(const NTupleNetwork& other) const {
  return tuples_ == other.tuples_ && symmetric_ == other.symmetric_ && geometry_ == other.geometry_;
}

void NTupleNetwork::enable_coherence() {
  if (!coherence_) coherence_ = std::make_unique<CoherenceStore>(weight_count_);
}

CoherenceStore& NTupleNetwork::coherence() {
  if (!coherence_) throw std::logic_error("coherence store not enabled");
  return *coherence_;
}

const CoherenceStore& NTupleNetwork::coherence() const {
  if (!coherence_) throw std::logic_error("coherence store not enabled");
  return *coherence_;
}

void NTupleNetwork::reset_coherence() {
  if (coherence_) coherence_->reset();
}

// ---------------------------------------------------------------------------
// SWA

void SwaAccumulator::add(const NTupleNetwork& net) {
  if (!shape_) {
    shape_ = std::make_unique<NTupleNetwork>(net.tuples(), net.symmetric(), net.geometry());
    sum_.assign(net.weight_count(), 0.0);
  } else if (!shape_->same_shape(net)) {
    throw std::invalid_argument("cannot average networks with different shapes");
  }
  const auto w = net.weights();
  for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += w[i];
  ++count_;
}

NTupleNetwork SwaAccumulator::result() const {
  if (count_ == 0) throw std::invalid_argument("no networks to average");
  NTupleNetwork out(shape_->tuples(), shape_->symmetric(), shape_->geometry());
  auto w = out.weights();
  const double k = static_cast<double>(count_);
  for (std::size_t i = 0; i < sum_.size(); ++i) w[i] = static_cast<float>(sum_[i] / k);
  return out;
}

NTupleNetwork swa_average(std::span<const NTupleNetwork* const> nets) {
  SwaAccumulator acc;
  for (const NTupleNetwork* n : nets) acc.add(*n);
  return acc.result();
}

// ---------------------------------------------------------------------------
// MultistageNetwork

MultistageNetwork::MultistageNetwork(std::vector<NTupleNetwork> stages,
                                     std::vector<TileMultiset> thresholds)
    : stages_(std::move(stages)), thresholds_(std::move(thresholds)) {
  if (stages_.empty()) throw std::invalid_argument("multistage network needs a stage");
  if (stages_.size() != thresholds_.size())
    throw std::invalid_argument("one threshold per stage is required");
  if (!thresholds_.front().empty()) throw std::invalid_argument("first stage threshold must be empty");
  for (std::size_t k = 1; k < stages_.size(); ++k) {
    if (!stages_[k].same_shape(stages_[0]))
      throw std::invalid_argument("all stages must share one tuple shape");
    if (!thresholds_[k - 1].strictly_contained_in(thresholds_[k]))
      throw std::invalid_argument("stage thresholds must strictly increase");
  }
}

MultistageNetwork::MultistageNetwork(NTupleNetwork single) {
  stages_.push_back(std::move(single));
  thresholds_.emplace_back();
}

int MultistageNetwork::stage_select(Board b) const {
  if (stages_.size() == 1) return 0;
  const TileMultiset tiles = TileMultiset::of_board(b, stages_[0].geometry().cells());
  for (std::size_t k = stages_.size(); k-- > 1;)
    if (thresholds_[k].contained_in(tiles)) return static_cast<int>(k);
  return 0;
}

double MultistageNetwork::value(Board afterstate) const {
  return stages_[static_cast<std::size_t>(stage_select(afterstate))].value(afterstate);
}

}  // namespace otdl
