#include <doctest.h>

#include <boost/math/distributions/binomial.hpp>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "poolfreq/diagnostics.hpp"
#include "poolfreq/errors.hpp"
#include "poolfreq/model_core.hpp"
#include "poolfreq/rng.hpp"
#include "poolfreq/samplers.hpp"

using namespace poolfreq;

namespace {

Vec vec3(double a, double b, double c) {
  Vec v(3);
  v << a, b, c;
  return v;
}

std::vector<Vec> iid_normal_chains(int chains, int length, std::uint64_t seed) {
  std::vector<Vec> out;
  auto rng = substream(seed, {0});
  for (int m = 0; m < chains; ++m) {
    Vec c(length);
    for (int j = 0; j < length; ++j) c(j) = rand_normal(rng);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace

TEST_CASE("tvd on shared support") {
  CHECK(tvd(vec3(0.2, 0.5, 0.3), vec3(0.2, 0.5, 0.3)) == 0.0);
  Vec a(2), b(2);
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  CHECK(tvd(a, b) == 1.0);
  CHECK(tvd(vec3(0.5, 0.3, 0.2), vec3(0.4, 0.4, 0.2)) == doctest::Approx(0.1));
  CHECK_THROWS_AS(tvd(a, vec3(1, 0, 0)), InvalidInputError);
}

TEST_CASE("tvd over the union of labelled supports") {
  Vec a(2), b(2);
  a << 0.5, 0.5;
  b << 0.5, 0.5;
  CHECK(tvd({"00", "01"}, a, {"00", "11"}, b) == doctest::Approx(0.5));
  CHECK(tvd({"00", "01"}, a, {"01", "00"}, b) == doctest::Approx(0.0));
}

TEST_CASE("tvd is a metric on random frequency triples") {
  auto rng = substream(31, {0});
  for (int rep = 0; rep < 50; ++rep) {
    Vec alpha = Vec::Ones(4);
    Vec a = rand_dirichlet(rng, alpha);
    Vec b = rand_dirichlet(rng, alpha);
    Vec c = rand_dirichlet(rng, alpha);
    CHECK(tvd(a, b) == doctest::Approx(tvd(b, a)));
    CHECK(tvd(a, c) <= tvd(a, b) + tvd(b, c) + 1e-12);
    CHECK(tvd(a, b) >= 0.0);
    CHECK(tvd(a, b) <= 1.0 + 1e-12);
    CHECK(tvd(a, a) == 0.0);
  }
}

TEST_CASE("ess of independent draws sits near the total draw count") {
  std::mt19937_64 seeder(414);
  int inside = 0;
  const int reps = 100;
  double sum = 0.0;
  for (int r = 0; r < reps; ++r) {
    auto chains = iid_normal_chains(5, 500, seeder());
    const double e = ess(chains);
    sum += e;
    if (e >= 2000.0 && e <= 3000.0) ++inside;
    CHECK(e <= 1.5 * 2500.0);
  }
  CHECK(inside >= 90);
  CHECK(sum / reps == doctest::Approx(2500.0).epsilon(0.08));
}

TEST_CASE("ess tracks the analytic autocorrelation of an AR(1) chain") {
  const double rho = 0.9;
  const double expect = 8000.0 * (1.0 - rho) / (1.0 + rho);
  std::mt19937_64 seeder(515);
  for (int rep = 0; rep < 3; ++rep) {
    auto rng = substream(seeder(), {0});
    std::vector<Vec> chains;
    for (int m = 0; m < 4; ++m) {
      Vec c(2000);
      double x = rand_normal(rng) / std::sqrt(1.0 - rho * rho);
      for (int j = 0; j < 2000; ++j) {
        x = rho * x + rand_normal(rng);
        c(j) = x;
      }
      chains.push_back(std::move(c));
    }
    const double e = ess(chains);
    CHECK(e > expect / 1.5);
    CHECK(e < expect * 1.5);
  }
}

TEST_CASE("chains stuck at distinct constants collapse the ess to the chain count") {
  std::vector<Vec> chains = {Vec::Constant(200, 1.0), Vec::Constant(200, 2.0)};
  const double e = ess(chains);
  CHECK(e >= 1.0);
  CHECK(e <= 4.0);
}

TEST_CASE("fully constant input uses the total-count convention") {
  std::vector<Vec> chains = {Vec::Constant(100, 3.0), Vec::Constant(100, 3.0),
                             Vec::Constant(100, 3.0)};
  CHECK(ess(chains) == doctest::Approx(300.0));
  CHECK(rhat(chains) == doctest::Approx(1.0));
}

TEST_CASE("rhat is near one for well-mixed draws and large for separated chains") {
  auto chains = iid_normal_chains(4, 2000, 616);
  CHECK(rhat(chains) == doctest::Approx(1.0).epsilon(0.01));

  std::vector<Vec> stuck = {Vec::Constant(200, 0.0), Vec::Constant(200, 5.0)};
  CHECK(rhat(stuck) > 1.1);

  auto one = iid_normal_chains(1, 1000, 717);
  std::vector<Vec> identical = {one[0], one[0], one[0]};
  CHECK(rhat(identical) == doctest::Approx(1.0).epsilon(0.02));

  std::vector<Vec> tiny = {Vec::Constant(3, 1.0)};
  CHECK(std::isnan(rhat(tiny)));
}

TEST_CASE("thinning keeps evenly spaced draws") {
  Vec c(1000);
  for (int j = 0; j < 1000; ++j) c(j) = j;
  auto thinned = thin_chain_draws(std::vector<Vec>{c}, 500);
  REQUIRE(thinned[0].size() == 500);
  CHECK(thinned[0](0) == doctest::Approx(1.0));
  CHECK(thinned[0](499) == doctest::Approx(999.0));
  for (int j = 1; j < 500; ++j) CHECK(thinned[0](j) > thinned[0](j - 1));

  Vec small(300);
  for (int j = 0; j < 300; ++j) small(j) = j;
  auto kept = thin_chain_draws(std::vector<Vec>{small}, 500);
  CHECK(kept[0].size() == 300);

  Mat m(10, 2);
  for (int j = 0; j < 10; ++j) m.row(j) << j, -j;
  auto mt = thin_chain_draws(std::vector<Mat>{m}, 5);
  REQUIRE(mt[0].rows() == 5);
  CHECK(mt[0](0, 0) == doctest::Approx(1.0));
  CHECK(mt[0](4, 1) == doctest::Approx(-9.0));
}

TEST_CASE("equal-tail intervals and degenerate coverage") {
  std::vector<double> ramp;
  for (int j = 0; j <= 100; ++j) ramp.push_back(j / 100.0);
  auto iv = equal_tail_interval(ramp, 0.9);
  CHECK(iv.lo == doctest::Approx(0.05));
  CHECK(iv.hi == doctest::Approx(0.95));
  CHECK_THROWS_AS(equal_tail_interval({}, 0.5), InvalidInputError);
  CHECK_THROWS_AS(equal_tail_interval({1.0}, 1.0), InvalidInputError);

  PosteriorDraws exact_hit;
  exact_hit.labels = {"a", "b", "c"};
  exact_hit.freq = {Mat(50, 3)};
  for (int s = 0; s < 50; ++s) exact_hit.freq[0].row(s) << 0.2, 0.5, 0.3;
  auto table = credible_coverage(exact_hit, vec3(0.2, 0.5, 0.3), {0.5, 0.8, 0.95});
  CHECK(table.total == 3);
  for (size_t i = 0; i < table.levels.size(); ++i) CHECK(table.fraction(i) == 1.0);
}

TEST_CASE("never-sampled haplotypes give zero-width non-covering intervals") {
  PosteriorDraws draws;
  draws.labels = {"a", "b", "c"};
  draws.freq = {Mat(80, 3)};
  for (int s = 0; s < 80; ++s) draws.freq[0].row(s) << 0.0, 0.6, 0.4;
  // Truth: a is present but never sampled; b matches; c is absent (skipped).
  auto table = credible_coverage(draws, vec3(0.1, 0.6, 0.0), {0.5, 0.9});
  CHECK(table.total == 2);
  CHECK(table.covered[0] == 1);
  CHECK(table.covered[1] == 1);
}

TEST_CASE("coverage is calibrated when data come from the model") {
  // Fully informative single-marker pools: the fiber is a point, so the
  // sampler draws from the exact conjugate posterior and equal-tail
  // intervals must hit their nominal coverage.
  const double alpha = 0.4;
  DirichletPrior prior{alpha};
  auto haps = all_haplotypes(1);
  auto cm = std::make_shared<const ConfigurationMatrix>(build_allele_count_matrix(haps, true));

  SamplerConfig config;
  config.method = InferenceMethod::Latent;
  config.chains = 1;
  config.burn_in = 2;
  config.inference_iters = 600;

  const std::vector<double> levels = {0.5, 0.8, 0.9, 0.95};
  CoverageAccumulator acc(levels);
  auto rng = substream(818, {0});
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    Vec truth = rand_dirichlet(rng, Vec::Constant(2, alpha));
    IntVec z = rand_multinomial(rng, 15, truth);
    Dataset data;
    data.marker_count = 1;
    data.haplotypes = haps;
    PoolObservation pool;
    pool.pool_id = "p";
    pool.size = 15;
    pool.matrix = cm;
    IntVec y(2);
    y << z(1), 15;
    pool.counts = y;
    data.pools.push_back(pool);

    // With two haplotypes the components cover together, so only the first
    // is scored; zeroing the second invokes the absent-haplotype rule and
    // keeps the binomial band below valid for independent trials.
    Vec scored(2);
    scored << truth(0), 0.0;
    config.seed = 1000 + static_cast<std::uint64_t>(r);
    acc.add(run_lc_sampling(data, prior, config), scored);
  }

  const auto& table = acc.table();
  for (size_t i = 0; i < levels.size(); ++i) {
    boost::math::binomial_distribution<double> bin(static_cast<double>(table.total), levels[i]);
    const double lo = boost::math::quantile(bin, 0.025);
    const double hi = boost::math::quantile(bin, 0.975);
    CHECK(static_cast<double>(table.covered[i]) >= lo);
    CHECK(static_cast<double>(table.covered[i]) <= hi);
  }
}

TEST_CASE("power-law exponent recovers an exact slope") {
  Vec x(5), y(5);
  for (int j = 0; j < 5; ++j) {
    x(j) = 20.0 * (j + 1);
    y(j) = 3.5 * std::pow(x(j), 1.2);
  }
  CHECK(power_law_exponent(x, y) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK_THROWS_AS(power_law_exponent(x.head(1), y.head(1)), InvalidInputError);
}
