#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "xmrca/localize/fitness.hpp"

namespace xmrca {

struct GaConfig {
  std::size_t population = 100;
  std::size_t iterations = 30;
  double crossover_rate = 0.5;
  double mutation_rate = 0.1;
  double beta = 1.0;
  // Per-bit probability for the randomly drawn half of the population.
  double init_density = 0.3;
  std::uint64_t seed = 0;

  // Throws kInvalidArgument.
  void validate() const;
};

struct GaResult {
  Chromosome best;
  double best_fitness = 0.0;
  // Best-so-far fitness after each iteration.
  std::vector<double> history;
  std::size_t evaluations = 0;
};

using FitnessFunction = std::function<double(const Chromosome&)>;

// Initial population: half Bernoulli(init_density) draws, half singletons of
// the first candidates (callers pass candidates best-first). Chromosomes are
// never empty when n >= 1.
std::vector<Chromosome> initial_population(const GaConfig& config, std::size_t n, std::mt19937_64& rng);

// Swaps the tails of `a` and `b` from `point` on.
void crossover(Chromosome& a, Chromosome& b, std::size_t point);
void mutate(Chromosome& c, std::size_t bit);

// Rank-weighted roulette: the lowest fitness gets weight N, the highest 1.
// Returns `count` indices drawn with replacement.
std::vector<std::size_t> roulette_select(std::span<const double> fitness, std::size_t count, std::mt19937_64& rng);

// Evolves `seed_population` (or initial_population when empty) for
// config.iterations rounds of evaluate, record, select, crossover, mutate.
// Fitness values are memoised per chromosome.
GaResult ga_search(const GaConfig& config, std::size_t n, const FitnessFunction& fitness,
                   std::vector<Chromosome> seed_population = {});

}  // namespace xmrca
