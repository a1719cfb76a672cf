#pragma once

#include <numeric>
#include <vector>

#include "latent_calib/netcore/rng.hpp"

namespace latent_calib::netcore {

/// Fisher-Yates permutation of 0..n-1 for one epoch.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, "epoch", epoch);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  return order;
}

/// Calls fn(begin, end) for each minibatch [begin, end) of a permutation of size n.
template <typename Fn>
void for_each_batch(std::size_t n, std::size_t batch, Fn&& fn) {
  for (std::size_t b = 0; b < n; b += batch) fn(b, std::min(n, b + batch));
}

}  // namespace latent_calib::netcore
