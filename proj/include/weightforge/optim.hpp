#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "weightforge/rng.hpp"

namespace wf::optim {

// Per-dimension box constraints.
struct Bounds {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dims() const { return lower.size(); }
  void validate() const;
  double clip(double x, std::size_t d) const;
  bool contains(const std::vector<double>& x) const;
};

struct Agent {
  std::vector<double> position;
  std::vector<double> velocity;  // zeros unless PSO updates it
  double fitness = 0.0;
  std::vector<double> best_position;
  double best_fitness = 0.0;
};

struct GaConfig {
  double p_s = 0.75;  // selection proportion
  double p_c = 0.5;   // crossover probability
  double p_m = 0.25;  // mutation probability
  // Gaussian noise scale for mutation; unset means (upper-lower)/10 of the
  // mutated dimension.
  std::optional<double> mutation_sigma;

  void validate() const;
};

struct PsoConfig {
  double w = 0.7;   // inertia weight
  double c1 = 1.7;  // cognitive coefficient
  double c2 = 1.7;  // social coefficient
  // Draw one (r1, r2) pair per update by default; per-dimension draws when
  // set.
  bool per_dimension_r = false;

  void validate() const;
};

struct RunBudget {
  std::size_t agents = 10;
  std::size_t iterations = 5;

  void validate() const;
};

enum class Algorithm { ga, pso };

using FitnessFn = std::function<double(const std::vector<double>&)>;

// m agents uniform within bounds, velocities zero, fitness unset. When an
// anchor is given, agent 0 sits exactly on it; the remaining agents sample
// the same positions either way (per-agent streams).
std::vector<Agent> init_population(const Bounds& bounds, std::size_t m,
                                   std::uint64_t seed,
                                   const std::optional<std::vector<double>>& anchor = {});

// v' = w v + c1 r1 (x* - x) + c2 r2 (g - x), with explicit r's so tests can
// force them.
std::vector<double> pso_velocity_update(const Agent& agent,
                                        const std::vector<double>& global_best,
                                        const PsoConfig& cfg, double r1,
                                        double r2);

// x' = clip(x + v, bounds) per dimension.
std::vector<double> pso_position_update(const std::vector<double>& position,
                                        const std::vector<double>& velocity,
                                        const Bounds& bounds);

// Rank-weighted roulette without replacement; returns round(p_s * m)
// population indices, trimmed to an even pool by dropping its worst member.
std::vector<std::size_t> ga_select(const std::vector<Agent>& population,
                                   double p_s, Rng& rng);

// With probability p_c, uniform per-gene crossover (second child takes the
// complement); otherwise copies of the parents.
std::pair<std::vector<double>, std::vector<double>> ga_crossover(
    const std::vector<double>& parent_a, const std::vector<double>& parent_b,
    double p_c, Rng& rng);

// With probability p_m, adds Gaussian noise to exactly one uniformly chosen
// dimension, then clips.
std::vector<double> ga_mutate(const std::vector<double>& individual, double p_m,
                              const std::optional<double>& sigma,
                              const Bounds& bounds, Rng& rng);

struct OptimizationResult {
  std::vector<double> best_position;
  double best_fitness = 0.0;
  double initial_best_fitness = 0.0;  // best of the initial population
  std::vector<double> trace;          // best-so-far after each iteration
  std::uint64_t evaluations = 0;
  Algorithm algorithm = Algorithm::pso;
  std::uint64_t seed = 0;
  RunBudget budget;
  GaConfig ga;
  PsoConfig pso;

  nlohmann::json to_json() const;
};

struct OptimizeOptions {
  Algorithm algorithm = Algorithm::pso;
  GaConfig ga;
  PsoConfig pso;
  RunBudget budget;
  std::uint64_t seed = 0;
  std::optional<std::vector<double>> anchor;
  std::size_t threads = 0;  // 0 = thread_cap(); fitness evaluations only
};

// Minimizes `fitness` over the bounded box. Deterministic for a given
// (seed, options) regardless of evaluation parallelism.
OptimizationResult optimize(const FitnessFn& fitness, const Bounds& bounds,
                            const OptimizeOptions& options);

}  // namespace wf::optim
