#include "xmrca/localize/ga.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "xmrca/core/error.hpp"

namespace xmrca {

void GaConfig::validate() const {
  if (iterations < 1) throw Error(ErrorCode::kInvalidArgument, "iterations must be >= 1");
  if (population < 2) throw Error(ErrorCode::kInvalidArgument, "population must be >= 2");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "crossover rate must lie in [0, 1]");
  }
  if (!(mutation_rate >= 0.0 && mutation_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "mutation rate must lie in [0, 1]");
  }
  if (!(init_density >= 0.0 && init_density <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "initial density must lie in [0, 1]");
  }
  if (!(beta >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "beta must be >= 0");
}

std::vector<Chromosome> initial_population(const GaConfig& config, std::size_t n, std::mt19937_64& rng) {
  std::vector<Chromosome> pop;
  pop.reserve(config.population);
  const std::size_t singles = std::min(config.population / 2, n);
  for (std::size_t i = 0; i < singles; ++i) {
    Chromosome c(n, 0);
    c[i] = 1;
    pop.push_back(std::move(c));
  }
  std::bernoulli_distribution bit(config.init_density);
  std::uniform_int_distribution<std::size_t> any(0, n - 1);
  while (pop.size() < config.population) {
    Chromosome c(n, 0);
    for (auto& b : c) b = bit(rng) ? 1 : 0;
    if (std::find(c.begin(), c.end(), 1) == c.end()) c[any(rng)] = 1;
    pop.push_back(std::move(c));
  }
  return pop;
}

void crossover(Chromosome& a, Chromosome& b, std::size_t point) {
  for (std::size_t i = point; i < a.size() && i < b.size(); ++i) std::swap(a[i], b[i]);
}

void mutate(Chromosome& c, std::size_t bit) { c[bit] = c[bit] ? 0 : 1; }

std::vector<std::size_t> roulette_select(std::span<const double> fitness, std::size_t count, std::mt19937_64& rng) {
  const std::size_t n = fitness.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  // NaN sorts last.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (std::isnan(fitness[b])) return !std::isnan(fitness[a]);
    return fitness[a] < fitness[b];
  });
  std::vector<double> weights(n);
  for (std::size_t rank = 0; rank < n; ++rank) weights[order[rank]] = static_cast<double>(n - rank);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick(rng);
  return out;
}

GaResult ga_search(const GaConfig& config, std::size_t n, const FitnessFunction& fitness,
                   std::vector<Chromosome> population) {
  config.validate();
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "genetic search needs at least one candidate");
  std::mt19937_64 rng(config.seed);
  if (population.empty()) population = initial_population(config, n, rng);
  for (const auto& c : population) {
    if (c.size() != n) throw Error(ErrorCode::kInvalidArgument, "seed chromosome has the wrong length");
  }

  std::map<Chromosome, double> memo;
  GaResult result;
  result.best_fitness = std::numeric_limits<double>::infinity();
  auto evaluate = [&](const Chromosome& c) {
    auto it = memo.find(c);
    if (it != memo.end()) return it->second;
    const double f = fitness(c);
    ++result.evaluations;
    memo.emplace(c, f);
    return f;
  };

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> point(1, n > 1 ? n - 1 : 1);
  std::uniform_int_distribution<std::size_t> bit(0, n - 1);
  std::vector<double> scores(population.size());
  for (std::size_t iter = 0; iter < config.iterations; ++iter) {
    for (std::size_t i = 0; i < population.size(); ++i) {
      scores[i] = evaluate(population[i]);
      if (result.best.empty() || scores[i] < result.best_fitness) {
        result.best = population[i];
        result.best_fitness = scores[i];
      }
    }
    result.history.push_back(result.best_fitness);

    const auto picks = roulette_select(scores, population.size(), rng);
    std::vector<Chromosome> next;
    next.reserve(population.size());
    for (std::size_t i : picks) next.push_back(population[i]);
    for (std::size_t i = 0; i + 1 < next.size(); i += 2) {
      if (unit(rng) < config.crossover_rate) crossover(next[i], next[i + 1], point(rng));
    }
    for (auto& c : next) {
      if (unit(rng) < config.mutation_rate) mutate(c, bit(rng));
    }
    population = std::move(next);
  }
  return result;
}

}  // namespace xmrca
