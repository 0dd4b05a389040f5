#include "weightforge/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "weightforge/errors.hpp"
#include "weightforge/threading.hpp"

namespace wf::optim {

namespace {

void check_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

double checked_fitness(const FitnessFn& fitness, const std::vector<double>& x) {
  const double f = fitness(x);
  if (!std::isfinite(f)) {
    throw EvaluationError("fitness returned a non-finite value", x);
  }
  return f;
}

// Evaluates positions[i] into out[i] for every unset slot, in parallel.
// RNG is never touched here, so results do not depend on the worker count.
void evaluate_all(const FitnessFn& fitness,
                  const std::vector<std::vector<double>>& positions,
                  std::vector<double>& out, std::size_t threads) {
  parallel_for(
      positions.size(),
      [&](std::size_t i) { out[i] = checked_fitness(fitness, positions[i]); },
      threads);
}

// Population indices ordered best-to-worst by (fitness, index).
std::vector<std::size_t> fitness_ranking(const std::vector<Agent>& population) {
  std::vector<std::size_t> order(population.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (population[a].fitness != population[b].fitness) {
      return population[a].fitness < population[b].fitness;
    }
    return a < b;
  });
  return order;
}

struct BestTracker {
  std::vector<double> position;
  double fitness = std::numeric_limits<double>::infinity();

  void offer(const std::vector<double>& x, double f) {
    if (f < fitness) {
      fitness = f;
      position = x;
    }
  }
};

OptimizationResult run_pso(const FitnessFn& fitness, const Bounds& bounds,
                           const OptimizeOptions& options) {
  const auto& budget = options.budget;
  auto population =
      init_population(bounds, budget.agents, options.seed, options.anchor);

  // One stream per agent keeps the random draws independent of evaluation
  // order. Initialization uses fork(i), so update streams live in a
  // disjoint tag space.
  const Rng master(options.seed);
  std::vector<Rng> streams;
  streams.reserve(budget.agents);
  for (std::size_t i = 0; i < budget.agents; ++i) {
    streams.push_back(master.fork(0x4000000000000000ULL + i));
  }

  std::vector<std::vector<double>> positions(budget.agents);
  std::vector<double> fitnesses(budget.agents);
  for (std::size_t i = 0; i < budget.agents; ++i) {
    positions[i] = population[i].position;
  }
  evaluate_all(fitness, positions, fitnesses, options.threads);

  BestTracker global;
  std::uint64_t evaluations = budget.agents;
  for (std::size_t i = 0; i < budget.agents; ++i) {
    population[i].fitness = fitnesses[i];
    population[i].best_position = population[i].position;
    population[i].best_fitness = fitnesses[i];
    global.offer(population[i].position, fitnesses[i]);
  }

  OptimizationResult result;
  result.initial_best_fitness = global.fitness;
  result.trace.reserve(budget.iterations);

  for (std::size_t iter = 0; iter < budget.iterations; ++iter) {
    // Velocity/position transitions against the current global best; the
    // global best advances only after the barrier below.
    for (std::size_t i = 0; i < budget.agents; ++i) {
      Agent& agent = population[i];
      if (options.pso.per_dimension_r) {
        for (std::size_t d = 0; d < bounds.dims(); ++d) {
          const double r1 = streams[i].uniform01();
          const double r2 = streams[i].uniform01();
          agent.velocity[d] =
              options.pso.w * agent.velocity[d] +
              options.pso.c1 * r1 * (agent.best_position[d] - agent.position[d]) +
              options.pso.c2 * r2 * (global.position[d] - agent.position[d]);
        }
      } else {
        const double r1 = streams[i].uniform01();
        const double r2 = streams[i].uniform01();
        agent.velocity =
            pso_velocity_update(agent, global.position, options.pso, r1, r2);
      }
      agent.position = pso_position_update(agent.position, agent.velocity, bounds);
      positions[i] = agent.position;
    }

    evaluate_all(fitness, positions, fitnesses, options.threads);
    evaluations += budget.agents;
    for (std::size_t i = 0; i < budget.agents; ++i) {
      Agent& agent = population[i];
      agent.fitness = fitnesses[i];
      if (fitnesses[i] < agent.best_fitness) {
        agent.best_fitness = fitnesses[i];
        agent.best_position = agent.position;
      }
      global.offer(agent.position, fitnesses[i]);
    }
    result.trace.push_back(global.fitness);
  }

  result.best_position = global.position;
  result.best_fitness = global.fitness;
  result.evaluations = evaluations;
  return result;
}

OptimizationResult run_ga(const FitnessFn& fitness, const Bounds& bounds,
                          const OptimizeOptions& options) {
  const auto& budget = options.budget;
  auto population =
      init_population(bounds, budget.agents, options.seed, options.anchor);

  // Generation transitions draw from one sequential stream; only fitness
  // evaluations run in parallel.
  Rng rng = Rng(options.seed).fork(0x8000000000000000ULL);

  std::vector<std::vector<double>> positions(budget.agents);
  std::vector<double> fitnesses(budget.agents);
  for (std::size_t i = 0; i < budget.agents; ++i) {
    positions[i] = population[i].position;
  }
  evaluate_all(fitness, positions, fitnesses, options.threads);

  BestTracker global;
  std::uint64_t evaluations = budget.agents;
  for (std::size_t i = 0; i < budget.agents; ++i) {
    population[i].fitness = fitnesses[i];
    population[i].best_position = population[i].position;
    population[i].best_fitness = fitnesses[i];
    global.offer(population[i].position, fitnesses[i]);
  }

  OptimizationResult result;
  result.initial_best_fitness = global.fitness;
  result.trace.reserve(budget.iterations);

  for (std::size_t iter = 0; iter < budget.iterations; ++iter) {
    const auto pool = ga_select(population, options.ga.p_s, rng);

    std::vector<std::vector<double>> offspring;
    offspring.reserve(pool.size());
    for (std::size_t p = 0; p + 1 < pool.size(); p += 2) {
      auto children = ga_crossover(population[pool[p]].position,
                                   population[pool[p + 1]].position,
                                   options.ga.p_c, rng);
      offspring.push_back(ga_mutate(children.first, options.ga.p_m,
                                    options.ga.mutation_sigma, bounds, rng));
      offspring.push_back(ga_mutate(children.second, options.ga.p_m,
                                    options.ga.mutation_sigma, bounds, rng));
    }

    std::vector<double> offspring_fitness(offspring.size());
    evaluate_all(fitness, offspring, offspring_fitness, options.threads);
    evaluations += offspring.size();
    for (std::size_t i = 0; i < offspring.size(); ++i) {
      global.offer(offspring[i], offspring_fitness[i]);
    }

    // Elitist truncation: parents and offspring compete, the best m survive,
    // so the best-so-far individual always carries over.
    std::vector<Agent> merged = population;
    for (std::size_t i = 0; i < offspring.size(); ++i) {
      Agent child;
      child.position = std::move(offspring[i]);
      child.velocity.assign(bounds.dims(), 0.0);
      child.fitness = offspring_fitness[i];
      child.best_position = child.position;
      child.best_fitness = child.fitness;
      merged.push_back(std::move(child));
    }
    const auto order = fitness_ranking(merged);
    std::vector<Agent> next;
    next.reserve(budget.agents);
    for (std::size_t i = 0; i < budget.agents; ++i) {
      next.push_back(std::move(merged[order[i]]));
    }
    population = std::move(next);
    result.trace.push_back(global.fitness);
  }

  result.best_position = global.position;
  result.best_fitness = global.fitness;
  result.evaluations = evaluations;
  return result;
}

}  // namespace

void Bounds::validate() const {
  if (lower.size() != upper.size()) {
    throw ConfigError("Bounds: lower and upper differ in length");
  }
  if (lower.empty()) {
    throw ConfigError("Bounds: empty");
  }
  for (std::size_t d = 0; d < lower.size(); ++d) {
    if (!std::isfinite(lower[d]) || !std::isfinite(upper[d])) {
      throw ConfigError("Bounds: non-finite bound at dimension " +
                        std::to_string(d));
    }
    if (lower[d] > upper[d]) {
      throw ConfigError("Bounds: lower > upper at dimension " +
                        std::to_string(d));
    }
  }
}

double Bounds::clip(double x, std::size_t d) const {
  return std::min(std::max(x, lower[d]), upper[d]);
}

bool Bounds::contains(const std::vector<double>& x) const {
  if (x.size() != lower.size()) {
    return false;
  }
  for (std::size_t d = 0; d < x.size(); ++d) {
    if (x[d] < lower[d] || x[d] > upper[d]) {
      return false;
    }
  }
  return true;
}

void GaConfig::validate() const {
  if (!(p_s > 0.0) || p_s > 1.0) {
    throw ConfigError("GaConfig: p_s must be in (0, 1]");
  }
  if (p_c < 0.0 || p_c > 1.0 || p_m < 0.0 || p_m > 1.0) {
    throw ConfigError("GaConfig: probabilities must be in [0, 1]");
  }
  if (mutation_sigma && (!std::isfinite(*mutation_sigma) || *mutation_sigma < 0.0)) {
    throw ConfigError("GaConfig: mutation_sigma must be finite and >= 0");
  }
}

void PsoConfig::validate() const {
  if (!std::isfinite(w) || !std::isfinite(c1) || !std::isfinite(c2) || w < 0.0 ||
      c1 < 0.0 || c2 < 0.0) {
    throw ConfigError("PsoConfig: coefficients must be finite and nonnegative");
  }
}

void RunBudget::validate() const {
  if (agents < 2) {
    throw ConfigError("RunBudget: need at least 2 agents");
  }
  if (iterations < 1) {
    throw ConfigError("RunBudget: need at least 1 iteration");
  }
}

std::vector<Agent> init_population(const Bounds& bounds, std::size_t m,
                                   std::uint64_t seed,
                                   const std::optional<std::vector<double>>& anchor) {
  bounds.validate();
  if (m < 2) {
    throw ConfigError("init_population: need at least 2 agents");
  }
  if (anchor) {
    check_dims(anchor->size(), bounds.dims(), "init_population anchor");
    if (!bounds.contains(*anchor)) {
      throw ConfigError("init_population: anchor lies outside bounds");
    }
  }

  const Rng master(seed);
  std::vector<Agent> population(m);
  for (std::size_t i = 0; i < m; ++i) {
    Agent& agent = population[i];
    agent.position.resize(bounds.dims());
    agent.velocity.assign(bounds.dims(), 0.0);
    Rng stream = master.fork(i);
    for (std::size_t d = 0; d < bounds.dims(); ++d) {
      agent.position[d] = stream.uniform(bounds.lower[d], bounds.upper[d]);
    }
    agent.best_position = agent.position;
  }
  if (anchor) {
    population[0].position = *anchor;
    population[0].best_position = *anchor;
  }
  return population;
}

std::vector<double> pso_velocity_update(const Agent& agent,
                                        const std::vector<double>& global_best,
                                        const PsoConfig& cfg, double r1,
                                        double r2) {
  check_dims(agent.position.size(), global_best.size(), "pso_velocity_update");
  check_dims(agent.position.size(), agent.velocity.size(), "pso_velocity_update");
  check_dims(agent.position.size(), agent.best_position.size(),
             "pso_velocity_update");
  std::vector<double> velocity(agent.position.size());
  for (std::size_t d = 0; d < velocity.size(); ++d) {
    velocity[d] = cfg.w * agent.velocity[d] +
                  cfg.c1 * r1 * (agent.best_position[d] - agent.position[d]) +
                  cfg.c2 * r2 * (global_best[d] - agent.position[d]);
  }
  return velocity;
}

std::vector<double> pso_position_update(const std::vector<double>& position,
                                        const std::vector<double>& velocity,
                                        const Bounds& bounds) {
  check_dims(position.size(), velocity.size(), "pso_position_update");
  check_dims(position.size(), bounds.dims(), "pso_position_update");
  std::vector<double> next(position.size());
  for (std::size_t d = 0; d < position.size(); ++d) {
    next[d] = bounds.clip(position[d] + velocity[d], d);
  }
  return next;
}

std::vector<std::size_t> ga_select(const std::vector<Agent>& population,
                                   double p_s, Rng& rng) {
  const std::size_t m = population.size();
  std::size_t pool_size = static_cast<std::size_t>(
      std::llround(p_s * static_cast<double>(m)));
  pool_size = std::min(pool_size, m);
  if (pool_size % 2 == 1) {
    --pool_size;  // drop the worst pick below so pairs form
  }
  if (pool_size < 2) {
    throw ConfigError("ga_select: selection pool smaller than one pair");
  }

  // Linear rank weights (best gets m, worst gets 1), drawn without
  // replacement.
  const auto ranking = fitness_ranking(population);
  std::vector<double> weights(m);
  for (std::size_t rank = 0; rank < m; ++rank) {
    weights[ranking[rank]] = static_cast<double>(m - rank);
  }
  std::vector<std::size_t> remaining(m);
  std::iota(remaining.begin(), remaining.end(), std::size_t{0});

  // One extra draw when round(p_s*m) was odd, trimmed to the final size by
  // dropping the worst-fitness pick.
  const bool trim = static_cast<std::size_t>(std::llround(
                        p_s * static_cast<double>(m))) > pool_size &&
                    pool_size < m;
  const std::size_t draws = trim ? pool_size + 1 : pool_size;

  std::vector<std::size_t> pool;
  pool.reserve(draws);
  for (std::size_t pick = 0; pick < draws && !remaining.empty(); ++pick) {
    double total = 0.0;
    for (std::size_t idx : remaining) {
      total += weights[idx];
    }
    const double roll = rng.uniform01() * total;
    double cumulative = 0.0;
    std::size_t chosen = remaining.size() - 1;
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      cumulative += weights[remaining[i]];
      if (roll < cumulative) {
        chosen = i;
        break;
      }
    }
    pool.push_back(remaining[chosen]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
  }

  while (pool.size() > pool_size) {
    auto worst = pool.begin();
    for (auto it = pool.begin(); it != pool.end(); ++it) {
      if (population[*it].fitness > population[*worst].fitness) {
        worst = it;
      }
    }
    pool.erase(worst);
  }
  return pool;
}

std::pair<std::vector<double>, std::vector<double>> ga_crossover(
    const std::vector<double>& parent_a, const std::vector<double>& parent_b,
    double p_c, Rng& rng) {
  check_dims(parent_a.size(), parent_b.size(), "ga_crossover");
  std::vector<double> child_a = parent_a;
  std::vector<double> child_b = parent_b;
  if (rng.uniform01() < p_c) {
    for (std::size_t d = 0; d < parent_a.size(); ++d) {
      if (rng.uniform01() < 0.5) {
        child_a[d] = parent_b[d];
        child_b[d] = parent_a[d];
      }
    }
  }
  return {std::move(child_a), std::move(child_b)};
}

std::vector<double> ga_mutate(const std::vector<double>& individual, double p_m,
                              const std::optional<double>& sigma,
                              const Bounds& bounds, Rng& rng) {
  check_dims(individual.size(), bounds.dims(), "ga_mutate");
  std::vector<double> mutated = individual;
  if (rng.uniform01() < p_m) {
    const std::size_t d = rng.index(individual.size());
    const double scale =
        sigma ? *sigma : (bounds.upper[d] - bounds.lower[d]) / 10.0;
    mutated[d] = bounds.clip(mutated[d] + rng.normal(0.0, scale), d);
  }
  return mutated;
}

OptimizationResult optimize(const FitnessFn& fitness, const Bounds& bounds,
                            const OptimizeOptions& options) {
  bounds.validate();
  options.budget.validate();
  OptimizationResult result;
  if (options.algorithm == Algorithm::pso) {
    options.pso.validate();
    result = run_pso(fitness, bounds, options);
  } else {
    options.ga.validate();
    result = run_ga(fitness, bounds, options);
  }
  result.algorithm = options.algorithm;
  result.seed = options.seed;
  result.budget = options.budget;
  result.ga = options.ga;
  result.pso = options.pso;
  return result;
}

nlohmann::json OptimizationResult::to_json() const {
  nlohmann::json config;
  config["agents"] = budget.agents;
  config["iterations"] = budget.iterations;
  if (algorithm == Algorithm::ga) {
    config["ga"] = {{"p_s", ga.p_s},
                    {"p_c", ga.p_c},
                    {"p_m", ga.p_m},
                    {"mutation_sigma",
                     ga.mutation_sigma ? nlohmann::json(*ga.mutation_sigma)
                                       : nlohmann::json()}};
  } else {
    config["pso"] = {{"w", pso.w},
                     {"c1", pso.c1},
                     {"c2", pso.c2},
                     {"per_dimension_r", pso.per_dimension_r}};
  }
  return nlohmann::json{
      {"algorithm", algorithm == Algorithm::ga ? "ga" : "pso"},
      {"seed", seed},
      {"config", config},
      {"best_fitness", best_fitness},
      {"initial_best_fitness", initial_best_fitness},
      {"best_position", best_position},
      {"trace", trace},
      {"evaluations", evaluations},
  };
}

}  // namespace wf::optim
