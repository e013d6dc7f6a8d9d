#pragma once

// Quantum trajectories (counting and homodyne) and ensemble statistics.

#include <cstdint>
#include <functional>
#include <vector>

#include "ncfilter/filters.hpp"

namespace ncfilter {

enum class Scheme { counting, homodyne };

struct MeasurementRecord {
  Scheme scheme = Scheme::counting;
  TimeGrid grid;
  /// counting: indices n of the steps [t_n, t_n + dt) that contain a count.
  std::vector<int> jump_steps;
  /// homodyne: dY for every step.
  std::vector<double> dY;

  /// Count times, reported as the left end t_n of the step.
  std::vector<double> jump_times() const;
};

struct TrajectoryResult {
  MeasurementRecord record;
  /// Per node t_0..t_N: excitation <d-1|rho_S|d-1>, posterior rate (k_t or
  /// v_t) and cumulative record (counts or Y).
  std::vector<double> p_exc;
  std::vector<double> rate;
  std::vector<double> cumulative;
  FilterState final_state;
  std::uint64_t seed = 0;
  long clamp_count = 0;
  /// set if k_t dt ever exceeded 0.1
  bool coarse_dt = false;
};

struct TrajectoryOptions {
  /// Replays this record instead of sampling: forced jumps, or
  /// dW = dY - v_t dt for homodyne.
  const MeasurementRecord* replay = nullptr;
  /// Called with the filter state at every node (slows the run down).
  std::function<void(int, const FilterState&)> observer;
};

TrajectoryResult simulate_counting(const SystemModel& model,
                                   const FieldState& fs, const Operator& rho0,
                                   const TimeGrid& grid, std::uint64_t seed,
                                   const TrajectoryOptions& opts = {});
TrajectoryResult simulate_homodyne(const SystemModel& model,
                                   const FieldState& fs, const Operator& rho0,
                                   const TimeGrid& grid, std::uint64_t seed,
                                   const TrajectoryOptions& opts = {});

/// splitmix64-style derivation of the seed of trajectory `index`.
std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index);

struct SeriesStats {
  std::vector<double> mean;
  std::vector<double> stderr_;
};

struct EnsembleStats {
  Scheme scheme = Scheme::counting;
  TimeGrid grid;
  int M = 0;
  std::uint64_t master_seed = 0;
  SeriesStats p_exc;
  SeriesStats rate;
  SeriesStats cumulative;
  /// counting only: indicator of at least one count up to t_n
  SeriesStats atleast_one;
  /// real and imaginary parts of rho_S entries, row-major (i * d + j)
  std::vector<SeriesStats> rho_re;
  std::vector<SeriesStats> rho_im;
  /// counting only: total counts of trajectory m
  std::vector<int> total_counts;
  /// homodyne only: moments of all dW increments
  double dw_mean = 0.0;
  double dw_var = 0.0;
  long dw_samples = 0;
  long clamp_count = 0;
  bool coarse_dt = false;

  Operator mean_rho(int n) const;
};

/// Worker count from NCFILTER_THREADS (unset or 0: hardware concurrency).
int default_thread_count();

/// Runs M independent trajectories. Statistics depend only on the inputs and
/// master_seed, never on the thread count (threads <= 0: default).
EnsembleStats run_ensemble(const SystemModel& model, const FieldState& fs,
                           const Operator& rho0, const TimeGrid& grid,
                           Scheme scheme, int M, std::uint64_t master_seed,
                           int threads = 0);

/// Normalized histogram of total counts (index = number of counts).
std::vector<double> empirical_count_distribution(
    const std::vector<TrajectoryResult>& results);
std::vector<double> empirical_count_distribution(const EnsembleStats& stats);

}  // namespace ncfilter
