#include "zakotfs/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace zakotfs {

namespace {

// Shortest augmenting paths with potentials for an n×m cost, n ≤ m; returns the column of each row.
std::vector<int> assign_rows(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows()), m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  return col;
}

}  // namespace

std::vector<std::pair<int, int>> hungarian(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("hungarian: costs must be finite");
  std::vector<std::pair<int, int>> out;
  if (cost.rows() == 0 || cost.cols() == 0) return out;
  if (cost.rows() <= cost.cols()) {
    const auto col = assign_rows(cost);
    for (int i = 0; i < static_cast<int>(col.size()); ++i) out.emplace_back(i, col[i]);
  } else {
    const Eigen::MatrixXd t = cost.transpose();
    const auto row = assign_rows(t);
    for (int j = 0; j < static_cast<int>(row.size()); ++j) out.emplace_back(row[j], j);
    std::sort(out.begin(), out.end());
  }
  return out;
}

MatchResult match_targets(const PathSet& truth, const PathSet& est, const GridConfig& grid) {
  const double tr = grid.delay_resolution(), nr = grid.doppler_resolution();
  const int n = static_cast<int>(truth.size()), m = static_cast<int>(est.size());
  Eigen::MatrixXd cost(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      cost(i, j) = std::abs(truth[i].tau - est[j].tau) / tr + std::abs(truth[i].nu - est[j].nu) / nr;

  MatchResult res;
  std::vector<char> t_hit(n, 0), e_hit(m, 0);
  for (const auto& [i, j] : hungarian(cost)) {
    if (std::abs(truth[i].tau - est[j].tau) > 0.5 * tr || std::abs(truth[i].nu - est[j].nu) > 0.5 * nr) continue;
    res.pairs.emplace_back(i, j);
    t_hit[i] = e_hit[j] = 1;
  }
  for (int i = 0; i < n; ++i)
    if (!t_hit[i]) res.misses.push_back(i);
  for (int j = 0; j < m; ++j)
    if (!e_hit[j]) res.false_alarms.push_back(j);
  return res;
}

RangeVelocityError range_velocity_errors(const Path& truth, const Path& est, const GridConfig& grid) {
  return {kSpeedOfLight * std::abs(truth.tau - est.tau), kSpeedOfLight / grid.f_c * std::abs(truth.nu - est.nu)};
}

double channel_rmse(const CMatrix& H_true, const CMatrix& H_est) {
  if (H_true.rows() != H_est.rows() || H_true.cols() != H_est.cols())
    throw std::invalid_argument("channel_rmse: size mismatch");
  const double ref = H_true.norm();
  if (ref == 0.0) throw std::invalid_argument("channel_rmse: reference channel is zero");
  return (H_est - H_true).norm() / ref;
}

std::size_t bit_errors(const std::vector<std::uint8_t>& bits_true, const std::vector<std::uint8_t>& bits_est) {
  if (bits_true.size() != bits_est.size()) throw std::invalid_argument("bit_errors: length mismatch");
  std::size_t e = 0;
  for (std::size_t i = 0; i < bits_true.size(); ++i) e += (bits_true[i] != 0) != (bits_est[i] != 0);
  return e;
}

double ber(const std::vector<std::uint8_t>& bits_true, const std::vector<std::uint8_t>& bits_est) {
  if (bits_true.empty()) throw std::invalid_argument("ber: no bits");
  return static_cast<double>(bit_errors(bits_true, bits_est)) / static_cast<double>(bits_true.size());
}

TrialMetrics evaluate_trial(const PathSet& truth, const PathSet& est, const GridConfig& grid, const CMatrix& H_true,
                            const CMatrix& H_est, const std::vector<std::uint8_t>& bits_true,
                            const std::vector<std::uint8_t>& bits_est) {
  TrialMetrics tm;
  const MatchResult mr = match_targets(truth, est, grid);
  tm.detections = static_cast<int>(mr.pairs.size());
  tm.misses = static_cast<int>(mr.misses.size());
  tm.false_alarms = static_cast<int>(mr.false_alarms.size());
  for (const auto& [i, j] : mr.pairs) {
    const auto e = range_velocity_errors(truth[i], est[j], grid);
    tm.range_errors.push_back(e.range_m);
    tm.velocity_errors.push_back(e.velocity_mps);
  }
  tm.channel_rel_err = channel_rmse(H_true, H_est);
  tm.bit_errors = bit_errors(bits_true, bits_est);
  tm.bit_count = bits_true.size();
  return tm;
}

}  // namespace zakotfs
