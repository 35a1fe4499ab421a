#include "esm/subsample.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "esm/errors.hpp"

namespace esm {

namespace {

void check_nr(int n, int r) {
  if (r < 1) throw ValidationError("subsample size r must be at least 1");
  if (r >= n) {
    throw ValidationError("subsample size r = " + std::to_string(r) +
                          " must be smaller than n = " + std::to_string(n));
  }
}

void check_b(int B) {
  if (B < 1) throw ValidationError("subsample count B must be at least 1");
}

}  // namespace

void SubsampleDesign::validate() const {
  check_nr(n, r);
  check_b(B);
  if (static_cast<int>(indices.size()) != B) {
    throw ValidationError("design holds " + std::to_string(indices.size()) +
                          " index lists, expected B = " + std::to_string(B));
  }
  for (const auto& row : indices) {
    if (static_cast<int>(row.size()) != r) {
      throw ValidationError("subsample index list has " +
                            std::to_string(row.size()) + " entries, expected " +
                            std::to_string(r));
    }
    for (size_t k = 0; k < row.size(); ++k) {
      if (row[k] >= static_cast<uint32_t>(n)) {
        throw ValidationError("subsample index " + std::to_string(row[k]) +
                              " out of range for n = " + std::to_string(n));
      }
      if (k > 0 && row[k] <= row[k - 1]) {
        throw ValidationError("subsample indices must be sorted and distinct");
      }
    }
  }
}

SubsampleDesign draw_subsamples(int n, int r, int B, RngStream& rng) {
  check_nr(n, r);
  check_b(B);
  SubsampleDesign design;
  design.n = n;
  design.r = r;
  design.B = B;
  design.indices.resize(B);
  std::vector<uint32_t> pool(n);
  for (int j = 0; j < B; ++j) {
    std::iota(pool.begin(), pool.end(), 0u);
    for (int k = 0; k < r; ++k) {
      const uint32_t pick =
          static_cast<uint32_t>(k) + rng.uniform_below(static_cast<uint32_t>(n - k));
      std::swap(pool[k], pool[pick]);
    }
    auto& row = design.indices[j];
    row.assign(pool.begin(), pool.begin() + r);
    std::sort(row.begin(), row.end());
  }
  return design;
}

SubsampleDesign enumerate_complete(int n, int r, long max_subsets) {
  check_nr(n, r);
  long count = 1;
  for (int k = 1; k <= r; ++k) {
    count = count * (n - r + k) / k;
    if (count > max_subsets) {
      throw ValidationError("complete design too large: C(n, r) exceeds " +
                            std::to_string(max_subsets));
    }
  }
  SubsampleDesign design;
  design.n = n;
  design.r = r;
  design.B = static_cast<int>(count);
  design.complete = true;
  design.indices.reserve(count);
  std::vector<uint32_t> combo(r);
  std::iota(combo.begin(), combo.end(), 0u);
  for (;;) {
    design.indices.push_back(combo);
    int k = r - 1;
    while (k >= 0 && combo[k] == static_cast<uint32_t>(n - r + k)) --k;
    if (k < 0) break;
    ++combo[k];
    for (int t = k + 1; t < r; ++t) combo[t] = combo[t - 1] + 1;
  }
  return design;
}

int subsample_size_from_gamma(int n, double gamma) {
  if (n < 3) {
    throw ValidationError("n must be at least 3 to derive r from gamma");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw ValidationError("gamma must lie in (0, 1)");
  }
  const long r = std::lround(std::pow(static_cast<double>(n), gamma));
  return static_cast<int>(std::clamp(r, 2L, static_cast<long>(n - 1)));
}

}  // namespace esm
