#pragma once

#include <cstdint>
#include <vector>

#include "esm/rng.hpp"

namespace esm {

// B size-r index subsets of [0, n). Each list is sorted and duplicate-free;
// duplicate subsets across draws are allowed.
struct SubsampleDesign {
  int n = 0;
  int r = 0;
  int B = 0;
  std::vector<std::vector<uint32_t>> indices;
  bool complete = false;  // true iff indices enumerate all C(n, r) subsets

  void validate() const;
};

// B independent uniform draws of r-subsets without replacement within each
// subset, with replacement across subsets. Partial Fisher-Yates per draw;
// deterministic given the stream.
SubsampleDesign draw_subsamples(int n, int r, int B, RngStream& rng);

// All C(n, r) subsets in lexicographic order, complete=true. Toy scale only;
// throws once C(n, r) exceeds max_subsets.
SubsampleDesign enumerate_complete(int n, int r, long max_subsets = 1000000);

// round(n^gamma) clamped to [2, n-1].
int subsample_size_from_gamma(int n, double gamma);

}  // namespace esm
