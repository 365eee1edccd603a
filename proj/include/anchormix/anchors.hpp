#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "anchormix/common.hpp"
#include "anchormix/params.hpp"

namespace anchormix {

// k disjoint index sets A_1..A_k of rows anchored to each component. The
// labeling convention for a stand-alone anchor model puts non-empty sets
// first, ordered by smallest row index; while an anchor set is still paired
// with a particular parameter labeling (inside EM, say) it may be
// non-canonical, and `canonical_permutation` gives the relabeling to apply
// jointly to anchors and parameters.
class AnchorSet {
 public:
  AnchorSet() = default;

  AnchorSet(std::vector<std::vector<int>> sets, int n_rows) : sets_(std::move(sets)), n_rows_(n_rows) {
    for (auto& s : sets_) std::sort(s.begin(), s.end());
    validate();
  }

  static AnchorSet empty(int k, int n_rows) {
    return AnchorSet(std::vector<std::vector<int>>(static_cast<size_t>(k)), n_rows);
  }

  int k() const { return static_cast<int>(sets_.size()); }
  int n_rows() const { return n_rows_; }
  const std::vector<std::vector<int>>& sets() const { return sets_; }
  const std::vector<int>& set(int j) const { return sets_[static_cast<size_t>(j)]; }

  int size(int j) const { return static_cast<int>(sets_[static_cast<size_t>(j)].size()); }
  int total() const {
    int m = 0;
    for (const auto& s : sets_) m += static_cast<int>(s.size());
    return m;
  }
  int k0() const {
    int c = 0;
    for (const auto& s : sets_) c += s.empty() ? 0 : 1;
    return c;
  }

  // Component index of row i, or -1 when unanchored.
  std::vector<int> row_components() const {
    std::vector<int> comp(static_cast<size_t>(n_rows_), -1);
    for (int j = 0; j < k(); ++j)
      for (int i : sets_[static_cast<size_t>(j)]) comp[static_cast<size_t>(i)] = j;
    return comp;
  }

  bool is_canonical() const {
    int last_min = -1;
    bool seen_empty = false;
    for (const auto& s : sets_) {
      if (s.empty()) {
        seen_empty = true;
        continue;
      }
      if (seen_empty) return false;  // non-empty set after an empty one
      if (s.front() <= last_min) return false;
      last_min = s.front();
    }
    return true;
  }

  // perm[j] = old label of the component that becomes label j.
  std::vector<int> canonical_permutation() const {
    std::vector<int> order(sets_.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      const auto& sa = sets_[static_cast<size_t>(a)];
      const auto& sb = sets_[static_cast<size_t>(b)];
      if (sa.empty() != sb.empty()) return !sa.empty();
      if (sa.empty()) return false;
      return sa.front() < sb.front();
    });
    return order;
  }

  AnchorSet permuted(const std::vector<int>& perm) const {
    std::vector<std::vector<int>> out;
    out.reserve(sets_.size());
    for (int j : perm) out.push_back(sets_[static_cast<size_t>(j)]);
    return AnchorSet(std::move(out), n_rows_);
  }

  AnchorSet canonicalized() const { return permuted(canonical_permutation()); }

 private:
  void validate() const {
    if (n_rows_ < 1) throw validation_error("anchor set needs a companion dataset size");
    std::vector<char> seen(static_cast<size_t>(n_rows_), 0);
    for (const auto& s : sets_) {
      for (int i : s) {
        if (i < 0 || i >= n_rows_)
          throw validation_error("anchor row index " + std::to_string(i) + " out of range");
        if (seen[static_cast<size_t>(i)]++)
          throw validation_error("anchor sets must be disjoint (row " + std::to_string(i) +
                                 " anchored twice)");
      }
    }
  }

  std::vector<std::vector<int>> sets_;
  int n_rows_ = 0;
};

// Relabels anchors to canonical order and applies the same permutation to the
// paired mixture parameters.
inline void canonicalize_labels(AnchorSet& anchors, MixtureParams& params) {
  auto perm = anchors.canonical_permutation();
  anchors = anchors.permuted(perm);
  params = params.permuted(perm);
}

// Length-n component labels (0-based internally; serialized 1-based).
struct AllocationVector {
  std::vector<int> labels;

  int n() const { return static_cast<int>(labels.size()); }

  void validate(int k) const {
    for (int s : labels)
      if (s < 0 || s >= k) throw validation_error("allocation label out of range");
  }

  // Membership in S^A: anchored rows carry their anchored label.
  bool compatible_with(const AnchorSet& anchors) const {
    for (int j = 0; j < anchors.k(); ++j)
      for (int i : anchors.set(j))
        if (labels[static_cast<size_t>(i)] != j) return false;
    return true;
  }
};

}  // namespace anchormix
