#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "zakotfs/frame.hpp"
#include "zakotfs/modem.hpp"

namespace zakotfs {

// Minimum-cost one-to-one assignment; returns min(n, m) (row, col) pairs sorted by row.
std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost);

struct MatchResult {
  std::vector<std::pair<int, int>> pairs;  // (truth, estimate), inside the gate
  std::vector<int> misses;                 // unmatched truths
  std::vector<int> false_alarms;           // unmatched estimates
};

// Cost |Δτ|/τ_res + |Δν|/ν_res; a pair counts only if both offsets are within half a resolution cell.
MatchResult match_targets(const PathSet& truth, const PathSet& est, const GridConfig& grid);

struct RangeVelocityError {
  double range_m = 0.0;
  double velocity_mps = 0.0;
};

RangeVelocityError range_velocity_errors(const Path& truth, const Path& est, const GridConfig& grid);

// ‖H_est − H_true‖_F / ‖H_true‖_F
double channel_rmse(const CMatrix& H_true, const CMatrix& H_est);

std::size_t bit_errors(const std::vector<std::uint8_t>& bits_true, const std::vector<std::uint8_t>& bits_est);
double ber(const std::vector<std::uint8_t>& bits_true, const std::vector<std::uint8_t>& bits_est);

struct TrialMetrics {
  int detections = 0;
  int misses = 0;
  int false_alarms = 0;
  std::vector<double> range_errors;     // m, one per detection
  std::vector<double> velocity_errors;  // m/s
  double channel_rel_err = 0.0;
  std::size_t bit_errors = 0;
  std::size_t bit_count = 0;
};

TrialMetrics evaluate_trial(const PathSet& truth, const PathSet& est, const GridConfig& grid, const CMatrix& H_true,
                            const CMatrix& H_est, const std::vector<std::uint8_t>& bits_true,
                            const std::vector<std::uint8_t>& bits_est);

}  // namespace zakotfs
