#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "otdl/board.hpp"

namespace otdl {

/// Anything that can estimate the value of an afterstate.
class AfterstateEvaluator {
 public:
  virtual ~AfterstateEvaluator() = default;
  virtual double value(Board afterstate) const = 0;
};

/// Ordered cell locations of one n-tuple. The first listed cell is the least
/// significant radix-16 digit of the feature index.
struct TupleDef {
  std::vector<int> cells;

  /// Throws std::invalid_argument unless 1 <= n <= 8 and cells are distinct
  /// and below `board_cells`.
  void validate(int board_cells) const;
  std::size_t table_size() const { return std::size_t{1} << (4 * cells.size()); }
  friend bool operator==(const TupleDef&, const TupleDef&) = default;
};

/// Radix-16 feature index of `tuple` on `board`.
std::uint32_t extract(const TupleDef& tuple, Board board);
/// Inverse of extract: the exponent at each tuple location.
std::vector<int> decode_feature(std::uint32_t index, std::size_t n);

/// Per-weight temporal coherence accumulators, laid out like the weights.
/// E accumulates signed TD errors, A absolute ones.
struct CoherenceStore {
  std::vector<float> error;     // E
  std::vector<float> absolute;  // A

  explicit CoherenceStore(std::size_t size = 0) : error(size, 0.0f), absolute(size, 0.0f) {}
  void reset();
  /// |E|/A, or 1 when A is zero.
  double coherence(std::size_t cell) const;
};

/// Symmetric-sampled m x n-tuple network with 32-bit float weights.
///
/// All tables live in one contiguous buffer. Weight reads and writes go
/// through relaxed atomic_ref accesses: concurrent trainers may lose each
/// other's increments but never observe a torn float.
class NTupleNetwork final : public AfterstateEvaluator {
 public:
  /// Position of one active weight: global index into the weight buffer.
  using FeatureSlot = std::uint64_t;
  static constexpr int kMaxLookups = 8 * 16;

  NTupleNetwork(std::vector<TupleDef> tuples, bool symmetric,
                const Geometry& geometry = Geometry::standard());
  NTupleNetwork(const NTupleNetwork& other);
  NTupleNetwork& operator=(const NTupleNetwork& other);
  NTupleNetwork(NTupleNetwork&&) noexcept = default;
  NTupleNetwork& operator=(NTupleNetwork&&) noexcept = default;
  ~NTupleNetwork() override = default;

  double value(Board afterstate) const override;

  /// Adds adjustment / F to every active weight (F = lookups_per_eval()).
  /// value(b) grows by `adjustment` when the active slots are distinct; a
  /// slot hit k times gets k increments and counts k times.
  void update(Board afterstate, double adjustment);

  /// Temporal coherence step: weight += (alpha / F) * beta * delta with beta
  /// taken from the accumulators before they absorb delta.
  void tc_update(Board afterstate, double delta, double alpha);

  /// Sets every weight to v_init / F so that value(b) == v_init for all b.
  void init_optimistic(double v_init);

  /// Writes the active weight slots of `b`; returns how many were written.
  int active_slots(Board b, std::span<FeatureSlot, kMaxLookups> out) const;

  int lookups_per_eval() const { return lookups_; }
  bool symmetric() const { return symmetric_; }
  const Geometry& geometry() const { return *geometry_; }
  const std::vector<TupleDef>& tuples() const { return tuples_; }
  std::size_t weight_count() const { return weight_count_; }
  std::size_t table_offset(std::size_t tuple) const { return offsets_[tuple]; }

  std::span<float> weights() { return {weights_.get(), weight_count_}; }
  std::span<const float> weights() const { return {weights_.get(), weight_count_}; }
  float weight(std::size_t slot) const;

  bool same_shape(const NTupleNetwork& other) const;

  void enable_coherence();
  bool has_coherence() const { return coherence_ != nullptr; }
  CoherenceStore& coherence();
  const CoherenceStore& coherence() const;
  void reset_coherence();
  void drop_coherence() { coherence_.reset(); }

 private:
  std::vector<TupleDef> tuples_;
  bool symmetric_;
  const Geometry* geometry_;
  int isomorphism_count_;
  int lookups_;
  std::vector<std::size_t> offsets_;
  std::size_t weight_count_ = 0;
  std::unique_ptr<float[]> weights_;
  std::unique_ptr<CoherenceStore> coherence_;
};

/// Element-wise mean of networks with identical shapes. Throws
/// std::invalid_argument on an empty list or mismatched shapes.
NTupleNetwork swa_average(std::span<const NTupleNetwork* const> nets);

/// Running element-wise mean, for averaging snapshots one at a time.
class SwaAccumulator {
 public:
  void add(const NTupleNetwork& net);
  std::size_t count() const { return count_; }
  NTupleNetwork result() const;

 private:
  std::unique_ptr<NTupleNetwork> shape_;
  std::vector<double> sum_;
  std::size_t count_ = 0;
};

/// Independent value functions per game phase. Stage k is active when its
/// threshold tile multiset is contained in the board's tiles; the highest
/// such stage wins. Stage indices are 0-based.
class MultistageNetwork final : public AfterstateEvaluator {
 public:
  MultistageNetwork(std::vector<NTupleNetwork> stages, std::vector<TileMultiset> thresholds);
  explicit MultistageNetwork(NTupleNetwork single);

  double value(Board afterstate) const override;
  int stage_select(Board b) const;

  std::size_t stage_count() const { return stages_.size(); }
  NTupleNetwork& stage(std::size_t k) { return stages_[k]; }
  const NTupleNetwork& stage(std::size_t k) const { return stages_[k]; }
  const TileMultiset& threshold(std::size_t k) const { return thresholds_[k]; }
  const std::vector<TileMultiset>& thresholds() const { return thresholds_; }

 private:
  std::vector<NTupleNetwork> stages_;
  std::vector<TileMultiset> thresholds_;
};

/// Evaluator that returns the same constant for every afterstate.
class ConstantEvaluator final : public AfterstateEvaluator {
 public:
  explicit ConstantEvaluator(double v = 0.0) : v_(v) {}
  double value(Board) const override { return v_; }

 private:
  double v_;
};

}  // namespace otdl
