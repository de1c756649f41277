#include "sgfem/multi_index.hpp"

#include <algorithm>

#include "sgfem/errors.hpp"

namespace sgfem {

MultiIndexSet::MultiIndexSet(std::vector<int> dims) : dims_(std::move(dims)) {
  size_ = 1;
  for (int d : dims_) {
    if (d < 1) throw Error("MultiIndexSet: all dims must be >= 1");
    size_ *= static_cast<std::size_t>(d);
  }
}

bool MultiIndexSet::contains(const MultiIndex& mu) const {
  for (std::size_t m = 0; m < mu.size(); ++m) {
    const int cap = m < dims_.size() ? dims_[m] : 1;
    if (mu[m] < 0 || mu[m] >= cap) return false;
  }
  return true;
}

std::size_t MultiIndexSet::flat_index(const MultiIndex& mu) const {
  if (!contains(mu)) throw IndexOutOfRange("flat_index: " + to_string(mu) + " not a member");
  std::size_t flat = 0;
  for (std::size_t m = 0; m < dims_.size(); ++m) {
    flat = flat * static_cast<std::size_t>(dims_[m]) + static_cast<std::size_t>(m < mu.size() ? mu[m] : 0);
  }
  return flat;
}

MultiIndex MultiIndexSet::unflatten(std::size_t flat) const {
  if (flat >= size_) throw IndexOutOfRange("unflatten: flat index out of range");
  MultiIndex mu(dims_.size(), 0);
  for (int m = static_cast<int>(dims_.size()) - 1; m >= 0; --m) {
    mu[m] = static_cast<int>(flat % static_cast<std::size_t>(dims_[m]));
    flat /= static_cast<std::size_t>(dims_[m]);
  }
  return mu;
}

std::vector<MultiIndex> MultiIndexSet::enumerate() const {
  std::vector<MultiIndex> out;
  out.reserve(size_);
  for (std::size_t f = 0; f < size_; ++f) out.push_back(unflatten(f));
  return out;
}

MultiIndex pad_index(const MultiIndex& mu, int modes) {
  MultiIndex out(static_cast<std::size_t>(modes), 0);
  for (std::size_t m = 0; m < mu.size(); ++m) {
    if (static_cast<int>(m) < modes) {
      out[m] = mu[m];
    } else if (mu[m] != 0) {
      throw IndexOutOfRange("pad_index: nonzero entry beyond mode count");
    }
  }
  return out;
}

std::vector<int> boundary_cover_dims(const MultiIndexSet& lambda, const std::vector<int>& dhat_dims) {
  const int modes = std::max<int>(lambda.mode_count(), static_cast<int>(dhat_dims.size()));
  std::vector<int> cover(static_cast<std::size_t>(modes), 1);
  for (int m = 0; m < modes; ++m) {
    const int d = m < lambda.mode_count() ? lambda.dims()[m] : 1;
    const int dh = m < static_cast<int>(dhat_dims.size()) ? dhat_dims[m] : 1;
    if (dh < 1) throw Error("boundary_cover_dims: dhat entries must be >= 1");
    cover[m] = d + dh - 1;
  }
  return cover;
}

std::vector<MultiIndex> index_set_boundary(const MultiIndexSet& lambda, const std::vector<int>& dhat_dims) {
  const MultiIndexSet cover(boundary_cover_dims(lambda, dhat_dims));
  std::vector<MultiIndex> out;
  for (std::size_t f = 0; f < cover.size(); ++f) {
    MultiIndex mu = cover.unflatten(f);
    if (!lambda.contains(mu)) out.push_back(std::move(mu));
  }
  return out;
}

SlabRanges lookahead_slab_ranges(const MultiIndexSet& lambda, int mode, int q, int dhat_m) {
  if (mode < 1) throw Error("lookahead_slab: modes are 1-based");
  if (q < 1 || q > dhat_m - 1)
    throw InvalidLookahead("lookahead q=" + std::to_string(q) + " outside [1, " + std::to_string(dhat_m - 1) + "]");
  const int modes = std::max(lambda.mode_count(), mode);
  SlabRanges r;
  r.lo.assign(static_cast<std::size_t>(modes), 0);
  r.hi.assign(static_cast<std::size_t>(modes), 1);
  for (int m = 0; m < modes; ++m) {
    const int d = m < lambda.mode_count() ? lambda.dims()[m] : 1;
    if (m == mode - 1) {
      r.lo[m] = d;
      r.hi[m] = d + q;
    } else {
      r.lo[m] = 0;
      r.hi[m] = d;
    }
  }
  return r;
}

std::vector<MultiIndex> lookahead_slab(const MultiIndexSet& lambda, int mode, int q, int dhat_m) {
  const SlabRanges r = lookahead_slab_ranges(lambda, mode, q, dhat_m);
  const int modes = static_cast<int>(r.lo.size());
  std::vector<MultiIndex> out;
  MultiIndex mu(r.lo.begin(), r.lo.end());
  while (true) {
    out.push_back(mu);
    int m = modes - 1;
    for (; m >= 0; --m) {
      if (++mu[m] < r.hi[m]) break;
      mu[m] = r.lo[m];
    }
    if (m < 0) break;
  }
  return out;
}

std::string to_string(const MultiIndex& mu) {
  std::string s = "(";
  for (std::size_t m = 0; m < mu.size(); ++m) {
    if (m > 0) s += ",";
    s += std::to_string(mu[m]);
  }
  s += ")";
  return s;
}

}  // namespace sgfem
