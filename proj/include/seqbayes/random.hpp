#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>

#include <boost/random/normal_distribution.hpp>

namespace seqbayes {

using Seed = std::uint64_t;

/// Counter-based stream splitting: the seed of stream `stream` depends only on
/// (master, stream), so any replicate can be regenerated in isolation.
Seed derive_seed(Seed master, std::uint64_t stream) noexcept;

/// Standard normal variates from a 64-bit Mersenne twister. Both the engine
/// and the ziggurat transform are fully specified, so a seed yields the same
/// stream on every platform.
class NormalStream {
 public:
  explicit NormalStream(Seed seed) : engine_(seed) {}

  double operator()() { return dist_(engine_); }
  void fill(std::span<double> out) {
    for (double& x : out) x = dist_(engine_);
  }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> dist_{0.0, 1.0};
};

/// Worker count used when callers pass 0.
unsigned default_workers() noexcept;

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Work items must
/// write only to their own output slots; the call returns after all items
/// have finished and rethrows the first exception raised by an item.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn,
                  unsigned workers = 0);

}  // namespace seqbayes
