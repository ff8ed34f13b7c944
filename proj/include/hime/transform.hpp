// Deterministic coarse-graining maps between finite outcome spaces.
// Structured constructors (block decimation, adjacent pair sums, even-spin
// decimation) expand to explicit index maps once, so all downstream code
// sees plain tabular surjections.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hime/common.hpp"

namespace hime {

class TransformStep {
public:
  TransformStep(std::size_t domain_size, std::size_t codomain_size,
                std::vector<std::size_t> map)
      : domain_(domain_size), codomain_(codomain_size), map_(std::move(map)) {
    if (domain_ == 0 || codomain_ == 0)
      throw schema_error("transform sizes must be positive");
    if (map_.size() != domain_)
      throw schema_error("transform map must be total on the domain");
    for (std::size_t x = 0; x < domain_; ++x)
      if (map_[x] >= codomain_)
        throw schema_error("transform map value out of codomain at index " +
                           std::to_string(x));
    preimages_.assign(codomain_, {});
    for (std::size_t x = 0; x < domain_; ++x) preimages_[map_[x]].push_back(x);
    for (std::size_t y = 0; y < codomain_; ++y)
      if (preimages_[y].empty())
        throw schema_error("transform map is not surjective: empty preimage of " +
                           std::to_string(y));
  }

  // Merges consecutive groups of equal size: x -> x / (domain/codomain).
  // With outcome indices read as mixed-radix words whose trailing digits
  // vary fastest, this drops the trailing digits, i.e. the last block.
  static TransformStep block_decimation(std::size_t domain_size,
                                        std::size_t codomain_size) {
    if (codomain_size == 0 || domain_size % codomain_size != 0)
      throw schema_error("block decimation needs codomain size dividing domain size");
    const std::size_t group = domain_size / codomain_size;
    std::vector<std::size_t> map(domain_size);
    for (std::size_t x = 0; x < domain_size; ++x) map[x] = x / group;
    return TransformStep(domain_size, codomain_size, std::move(map));
  }

  // Pairwise merge {2y, 2y+1} -> y.
  static TransformStep adjacent_pair_sum(std::size_t domain_size) {
    if (domain_size % 2 != 0)
      throw schema_error("adjacent pair sum needs an even domain size");
    return block_decimation(domain_size, domain_size / 2);
  }

  // Spin configurations packed as bits (bit j = spin j up); keeps the spins
  // at even 0-based positions and drops the odd ones.
  static TransformStep even_spin_decimation(std::size_t n_spins) {
    if (n_spins == 0 || n_spins % 2 != 0)
      throw schema_error("spin decimation needs an even positive spin count");
    const std::size_t domain = std::size_t{1} << n_spins;
    const std::size_t kept = n_spins / 2;
    std::vector<std::size_t> map(domain);
    for (std::size_t x = 0; x < domain; ++x) {
      std::size_t y = 0;
      for (std::size_t j = 0; j < kept; ++j)
        y |= ((x >> (2 * j)) & 1u) << j;
      map[x] = y;
    }
    return TransformStep(domain, std::size_t{1} << kept, std::move(map));
  }

  static TransformStep identity(std::size_t n) {
    std::vector<std::size_t> map(n);
    for (std::size_t x = 0; x < n; ++x) map[x] = x;
    return TransformStep(n, n, std::move(map));
  }

  std::size_t domain_size() const { return domain_; }
  std::size_t codomain_size() const { return codomain_; }
  std::size_t operator()(std::size_t x) const { return map_.at(x); }
  const std::vector<std::size_t>& map() const { return map_; }
  const std::vector<std::size_t>& preimage(std::size_t y) const {
    return preimages_.at(y);
  }
  std::size_t max_preimage_size() const {
    std::size_t m = 0;
    for (const auto& p : preimages_)
      if (p.size() > m) m = p.size();
    return m;
  }
  // Every preimage the same size: the class of chains on which a uniform
  // distribution stays uniform under pushforward.
  bool balanced() const {
    for (const auto& p : preimages_)
      if (p.size() != preimages_.front().size()) return false;
    return true;
  }

private:
  std::size_t domain_;
  std::size_t codomain_;
  std::vector<std::size_t> map_;
  std::vector<std::vector<std::size_t>> preimages_;
};

// A composable stack of steps: codomain of step i = domain of step i+1.
// depth() counts levels (steps + 1).
class TransformChain {
public:
  explicit TransformChain(std::vector<TransformStep> steps) : steps_(std::move(steps)) {
    for (std::size_t i = 0; i + 1 < steps_.size(); ++i)
      if (steps_[i].codomain_size() != steps_[i + 1].domain_size())
        throw schema_error("chain mismatch: step " + std::to_string(i + 1) +
                           " codomain != step " + std::to_string(i + 2) + " domain");
  }

  static TransformChain trivial(std::size_t finest_size) {
    (void)finest_size;
    return TransformChain(std::vector<TransformStep>{});
  }

  std::size_t depth_from_finest(std::size_t finest_size) const {
    if (!steps_.empty() && steps_.front().domain_size() != finest_size)
      throw schema_error("chain finest size mismatch");
    return steps_.size() + 1;
  }

  std::size_t depth() const { return steps_.size() + 1; }
  const std::vector<TransformStep>& steps() const { return steps_; }
  // 1-based: step(i) maps level i to level i+1.
  const TransformStep& step(std::size_t i) const { return steps_.at(i - 1); }

  // Size of the level-i space given the finest size.
  std::size_t level_size(std::size_t i, std::size_t finest_size) const {
    if (i == 1) return finest_size;
    return steps_.at(i - 2).codomain_size();
  }

  bool balanced() const {
    for (const auto& s : steps_)
      if (!s.balanced()) return false;
    return true;
  }

private:
  std::vector<TransformStep> steps_;
};

}  // namespace hime
