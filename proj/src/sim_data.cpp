#include "poolfreq/sim_data.hpp"

#include <algorithm>
#include <cmath>

#include "poolfreq/errors.hpp"
#include "poolfreq/model_core.hpp"

namespace poolfreq {

namespace {

int markers_for(int haplotype_count) {
  int m = 0;
  while ((1 << m) < haplotype_count) ++m;
  if ((1 << m) != haplotype_count || haplotype_count < 2)
    throw InvalidInputError("simulate_shared: haplotype count must be a power of two");
  return m;
}

}  // namespace

SharedSim simulate_shared(int haplotype_count, int pools, int pool_size, double concentration,
                          RngEngine& rng) {
  if (pools < 1) throw InvalidInputError("simulate_shared: need at least one pool");
  if (pool_size < 0) throw InvalidInputError("simulate_shared: pool size must be nonnegative");
  if (!(concentration > 0))
    throw InvalidInputError("simulate_shared: concentration must be positive");

  SharedSim sim;
  sim.data.marker_count = markers_for(haplotype_count);
  sim.data.haplotypes = all_haplotypes(sim.data.marker_count);
  auto matrix = std::make_shared<const ConfigurationMatrix>(
      build_allele_count_matrix(sim.data.haplotypes, false));

  sim.truth = rand_dirichlet(rng, Vec::Constant(haplotype_count, concentration));
  for (int i = 0; i < pools; ++i) {
    IntVec z = rand_multinomial(rng, pool_size, sim.truth);
    PoolObservation pool;
    pool.pool_id = "pool" + std::to_string(i + 1);
    pool.size = pool_size;
    pool.matrix = matrix;
    pool.counts = matrix->entries * z;
    sim.data.pools.push_back(std::move(pool));
    sim.latents.push_back(std::move(z));
  }
  return sim;
}

double SigmoidRate::operator()(double t) const {
  double r = levels(0);
  for (int d = 0; d < changepoints.size(); ++d)
    r += (levels(d + 1) - levels(d)) / (1.0 + std::exp(-(t - changepoints(d)) / slopes(d)));
  return r;
}

SigmoidRate sample_sigmoid_rate(int sigmoids, double horizon, RngEngine& rng) {
  if (sigmoids < 1) throw InvalidInputError("sample_sigmoid_rate: need at least one sigmoid");
  SigmoidRate rate;
  rate.changepoints = Vec(sigmoids);
  for (int d = 0; d < sigmoids; ++d) rate.changepoints(d) = horizon * rand_uniform(rng);
  std::sort(rate.changepoints.data(), rate.changepoints.data() + sigmoids);
  rate.slopes = Vec(sigmoids);
  for (int d = 0; d < sigmoids; ++d) rate.slopes(d) = 0.2 + 1.8 * rand_uniform(rng);
  // Level d rules between changepoints d and d+1; the gap sequence is
  // anchored at 0 and the horizon, and wide gaps get tight levels.
  rate.levels = Vec(sigmoids + 1);
  for (int d = 0; d <= sigmoids; ++d) {
    const double left = d == 0 ? 0.0 : rate.changepoints(d - 1);
    const double right = d == sigmoids ? horizon : rate.changepoints(d);
    rate.levels(d) = rand_normal(rng) / (right - left);
  }
  return rate;
}

GridTrajectories integrate_relative_growth(
    const std::vector<std::function<double(double)>>& rates, double horizon, double step) {
  const int h = static_cast<int>(rates.size());
  if (h < 2) throw InvalidInputError("integrate_relative_growth: need at least two rates");
  if (!(step > 0) || !(horizon > step))
    throw InvalidInputError("integrate_relative_growth: bad grid");

  const int points = static_cast<int>(std::llround(horizon / step)) + 1;
  GridTrajectories out;
  out.grid = Vec(points);
  out.log_population = Mat(points, h);
  for (int c = 0; c < h; ++c) out.log_population(0, c) = 0.0;

  // In log coordinates the growth ODE reads x' = r(t), integrated with the
  // classical fourth-order rule.
  for (int j = 0; j < points; ++j) out.grid(j) = j * step;
  for (int j = 1; j < points; ++j) {
    const double t = out.grid(j - 1);
    for (int c = 0; c < h; ++c) {
      const double k1 = rates[static_cast<size_t>(c)](t);
      const double k2 = rates[static_cast<size_t>(c)](t + step / 2);
      const double k4 = rates[static_cast<size_t>(c)](t + step);
      const double x =
          out.log_population(j - 1, c) + step * (k1 + 4.0 * k2 + k4) / 6.0;
      if (!std::isfinite(x))
        throw NumericalError("integrate_relative_growth: trajectory left the finite range");
      out.log_population(j, c) = x;
    }
  }

  // The ODE is linear, so shifting a column's start shifts the whole
  // column; one shift per column aligns every median exactly.
  for (int c = 0; c < h; ++c) {
    std::vector<double> col(out.log_population.col(c).data(),
                            out.log_population.col(c).data() + points);
    std::nth_element(col.begin(), col.begin() + points / 2, col.end());
    out.log_population.col(c).array() -= col[static_cast<size_t>(points) / 2];
  }

  out.frequencies = Mat(points, h);
  out.slopes = Mat(points, h);
  for (int j = 0; j < points; ++j) {
    Vec x = out.log_population.row(j).transpose();
    const double m = x.maxCoeff();
    Vec w = (x.array() - m).exp();
    Vec p = w / w.sum();
    out.frequencies.row(j) = p.transpose();
    // d p_h / dt = p_h (r_h - sum_k p_k r_k), exact on the grid.
    Vec r(h);
    for (int c = 0; c < h; ++c) r(c) = rates[static_cast<size_t>(c)](out.grid(j));
    const double mean_rate = p.dot(r);
    out.slopes.row(j) = (p.array() * (r.array() - mean_rate)).transpose();
  }
  return out;
}

TimeSeriesSimConfig::TimeSeriesSimConfig() {
  for (int i = 1; i <= 30; ++i) time_points.push_back(0.66 * i - 0.23);
}

TimeSeriesSim simulate_timeseries(const TimeSeriesSimConfig& config, RngEngine& rng) {
  if (config.time_points.empty())
    throw InvalidInputError("simulate_timeseries: no time points requested");
  for (double t : config.time_points)
    if (t < 0.0 || t > config.horizon)
      throw InvalidInputError("simulate_timeseries: time point outside the horizon");
  const int h = 1 << config.markers;

  // Among rate draws whose frequency slopes stay bounded, keep the one
  // with the most movement across unit steps of the middle of the horizon.
  GridTrajectories best;
  double best_score = -1.0;
  int accepted = 0;
  long long attempts = 0;
  while (accepted < config.candidate_runs) {
    if (++attempts > 1000LL * config.candidate_runs)
      throw NumericalError("simulate_timeseries: slope bound rejected all candidate draws");
    std::vector<std::function<double(double)>> rates;
    rates.reserve(static_cast<size_t>(h));
    for (int c = 0; c < h; ++c)
      rates.emplace_back(sample_sigmoid_rate(config.sigmoids, config.horizon, rng));
    auto grid = integrate_relative_growth(rates, config.horizon, config.step);
    if (grid.slopes.cwiseAbs().maxCoeff() >= config.slope_limit) continue;
    ++accepted;

    double score = 0.0;
    const int lo = static_cast<int>(std::llround(0.25 * config.horizon / config.step));
    const int unit = static_cast<int>(std::llround(1.0 / config.step));
    const int steps = static_cast<int>(std::llround(config.horizon / 2));
    for (int c = 0; c < h; ++c)
      for (int k = 0; k < steps; ++k)
        score += std::abs(grid.frequencies(lo + (k + 1) * unit, c) -
                          grid.frequencies(lo + k * unit, c));
    if (score > best_score) {
      best_score = score;
      best = std::move(grid);
    }
  }

  TimeSeriesSim sim;
  sim.grid = std::move(best);
  sim.data.marker_count = config.markers;
  sim.data.haplotypes = all_haplotypes(config.markers);
  auto matrix = std::make_shared<const ConfigurationMatrix>(
      build_allele_count_matrix(sim.data.haplotypes, false));

  const int n_points = static_cast<int>(config.time_points.size());
  sim.frequencies = Mat(n_points, h);
  for (int i = 0; i < n_points; ++i) {
    const double t = config.time_points[static_cast<size_t>(i)];
    const int j = static_cast<int>(std::llround(t / config.step));
    Vec p = sim.grid.frequencies.row(j).transpose();
    sim.frequencies.row(i) = p.transpose();

    IntVec z = rand_dirichlet_multinomial(rng, config.pool_size,
                                          config.concentration_scale * p);
    PoolObservation pool;
    pool.pool_id = "t" + std::to_string(i + 1);
    pool.size = config.pool_size;
    pool.matrix = matrix;
    pool.counts = matrix->entries * z;
    pool.covariates = {t};
    sim.data.pools.push_back(std::move(pool));
    sim.latents.push_back(std::move(z));
  }
  return sim;
}

}  // namespace poolfreq
