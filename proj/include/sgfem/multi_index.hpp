#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sgfem {

using MultiIndex = std::vector<int>;

/// Full tensor index set Lambda_d: mu is a member iff mu_m < d_m for every mode
/// (modes beyond the stored dims are implicitly capped at degree 1, i.e. mu_m = 0).
/// Enumeration is lexicographic with the last mode varying fastest, which matches
/// the row-major memory layout of coefficient tensors.
class MultiIndexSet {
 public:
  MultiIndexSet() = default;
  explicit MultiIndexSet(std::vector<int> dims);

  const std::vector<int>& dims() const { return dims_; }
  int mode_count() const { return static_cast<int>(dims_.size()); }

  std::size_t size() const { return size_; }
  bool contains(const MultiIndex& mu) const;

  /// Flat position of mu in the enumeration; throws IndexOutOfRange for non-members.
  std::size_t flat_index(const MultiIndex& mu) const;
  MultiIndex unflatten(std::size_t flat) const;

  std::vector<MultiIndex> enumerate() const;

  bool operator==(const MultiIndexSet& other) const { return dims_ == other.dims_; }

 private:
  std::vector<int> dims_;
  std::size_t size_ = 1;
};

/// Pads/truncates a multi-index to the given number of modes (extra entries must be zero).
MultiIndex pad_index(const MultiIndex& mu, int modes);

/// Boundary of Lambda_d with respect to Lambda_dhat: Lambda_{d+dhat-1} \ Lambda_d,
/// enumerated in the order of the covering set.
std::vector<MultiIndex> index_set_boundary(const MultiIndexSet& lambda, const std::vector<int>& dhat_dims);

/// Dimensions of the covering set Lambda_{d+dhat-1}.
std::vector<int> boundary_cover_dims(const MultiIndexSet& lambda, const std::vector<int>& dhat_dims);

/// Look-ahead slab for one mode: [d_1] x ... x [d_m : d_m + q_m] x ... x [d_M].
/// A mode beyond the active count activates with degrees [1 : 1 + q_m].
std::vector<MultiIndex> lookahead_slab(const MultiIndexSet& lambda, int mode, int q, int dhat_m);

/// Per-mode half-open degree ranges of the slab above, in the padded mode count.
struct SlabRanges {
  std::vector<int> lo;
  std::vector<int> hi;
};
SlabRanges lookahead_slab_ranges(const MultiIndexSet& lambda, int mode, int q, int dhat_m);

std::string to_string(const MultiIndex& mu);

}  // namespace sgfem
