#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "poolfreq/errors.hpp"
#include "poolfreq/io.hpp"
#include "poolfreq/model_core.hpp"
#include "poolfreq/rng.hpp"
#include "poolfreq/sim_data.hpp"

using namespace poolfreq;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / ("poolfreq_io_" + std::to_string(::getpid()) + "_" +
                                              std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("haplotype lists round trip and reject malformed input") {
  auto dir = temp_dir();
  auto path = (dir / "haps.txt").string();

  auto haps = all_haplotypes(3);
  write_haplotype_list(path, haps);
  CHECK(read_haplotype_list(path) == haps);

  write_text(dir / "commented.txt", "# candidate list\n01  # trailing note\n\n11\n");
  auto parsed = read_haplotype_list((dir / "commented.txt").string());
  REQUIRE(parsed.size() == 2);
  CHECK(parsed[0].bits == "01");
  CHECK(parsed[1].bits == "11");

  write_text(dir / "dup.txt", "01\n01\n");
  CHECK_THROWS_AS(read_haplotype_list((dir / "dup.txt").string()), InvalidInputError);
  write_text(dir / "ragged.txt", "01\n011\n");
  CHECK_THROWS_AS(read_haplotype_list((dir / "ragged.txt").string()), InvalidInputError);
  write_text(dir / "alpha.txt", "0a\n");
  CHECK_THROWS_AS(read_haplotype_list((dir / "alpha.txt").string()), InvalidInputError);
  write_text(dir / "empty.txt", "# nothing\n");
  CHECK_THROWS_AS(read_haplotype_list((dir / "empty.txt").string()), InvalidInputError);
  CHECK_THROWS_AS(read_haplotype_list((dir / "missing.txt").string()), InvalidInputError);
}

TEST_CASE("subset designs map bit strings to haplotype indices") {
  auto dir = temp_dir();
  auto haps = all_haplotypes(2);

  write_text(dir / "subsets.txt", "# carriers per observed count\n00 11\n10\n");
  auto subsets = read_subset_design((dir / "subsets.txt").string(), haps);
  REQUIRE(subsets.size() == 2);
  CHECK(subsets[0] == std::vector<int>{0, 3});
  CHECK(subsets[1] == std::vector<int>{1});

  auto out = (dir / "round.txt").string();
  write_subset_design(out, haps, subsets);
  CHECK(read_subset_design(out, haps) == subsets);

  write_text(dir / "unknown.txt", "00 01 111\n");
  CHECK_THROWS_AS(read_subset_design((dir / "unknown.txt").string(), haps), InvalidInputError);
  write_text(dir / "dup.txt", "00 00\n");
  CHECK_THROWS_AS(read_subset_design((dir / "dup.txt").string(), haps), InvalidInputError);
}

TEST_CASE("pool tables parse all three delimiters") {
  auto dir = temp_dir();
  const std::string tsv =
      "pool_id\tn\tm0\tm1\tx_time\n"
      "a\t10\t4\t7\t0.5\n"
      "b\t12\t6\t1\t1.25\n";
  write_text(dir / "pools.tsv", tsv);
  write_text(dir / "pools.csv", "pool_id,n,m0,m1,x_time\na,10,4,7,0.5\nb,12,6,1,1.25\n");
  write_text(dir / "pools.txt", "pool_id n m0 m1 x_time\na 10 4 7 0.5\nb 12 6 1 1.25\n");

  for (const char* name : {"pools.tsv", "pools.csv", "pools.txt"}) {
    auto table = read_pool_table((dir / name).string());
    REQUIRE(table.pool_count() == 2);
    CHECK(table.count_names == std::vector<std::string>{"m0", "m1"});
    CHECK(table.covariate_names == std::vector<std::string>{"x_time"});
    CHECK(table.ids == std::vector<std::string>{"a", "b"});
    CHECK(table.sizes == std::vector<int>{10, 12});
    CHECK(table.counts[1](0) == 6);
    CHECK(table.covariates[0] == std::vector<double>{0.5});
    CHECK(table.covariates[1] == std::vector<double>{1.25});
  }

  write_text(dir / "no_n.tsv", "pool_id\tm0\na\t3\n");
  CHECK_THROWS_AS(read_pool_table((dir / "no_n.tsv").string()), InvalidInputError);
  write_text(dir / "dup_id.tsv", "pool_id\tn\tm0\na\t3\t1\na\t3\t1\n");
  CHECK_THROWS_AS(read_pool_table((dir / "dup_id.tsv").string()), InvalidInputError);
  write_text(dir / "neg.tsv", "pool_id\tn\tm0\na\t3\t-1\n");
  CHECK_THROWS_AS(read_pool_table((dir / "neg.tsv").string()), InvalidInputError);
  write_text(dir / "ragged.tsv", "pool_id\tn\tm0\na\t3\n");
  CHECK_THROWS_AS(read_pool_table((dir / "ragged.tsv").string()), InvalidInputError);
  write_text(dir / "zero.tsv", "pool_id\tn\tm0\na\t0\t0\n");
  CHECK_THROWS_AS(read_pool_table((dir / "zero.tsv").string()), InvalidInputError);
  write_text(dir / "counts_only.tsv", "pool_id\tn\ta\t3\n");
  CHECK_THROWS_AS(read_pool_table((dir / "counts_only.tsv").string()), InvalidInputError);
}

TEST_CASE("datasets survive the pool table round trip") {
  auto dir = temp_dir();
  auto rng = substream(7, {99});
  auto sim = simulate_shared(8, 5, 20, 0.4, rng);
  auto path = (dir / "pools.tsv").string();

  write_pool_table(path, sim.data);
  auto table = read_pool_table(path);
  auto back = assemble_dataset(sim.data.haplotypes, table);

  CHECK(back.marker_count == sim.data.marker_count);
  CHECK(back.haplotypes == sim.data.haplotypes);
  REQUIRE(back.pools.size() == sim.data.pools.size());
  for (size_t i = 0; i < back.pools.size(); ++i) {
    CHECK(back.pools[i].pool_id == sim.data.pools[i].pool_id);
    CHECK(back.pools[i].size == sim.data.pools[i].size);
    CHECK(back.pools[i].counts == sim.data.pools[i].counts);
    CHECK(back.pools[i].matrix->entries == sim.data.pools[i].matrix->entries);
  }

  // Covariates keep their exact bit patterns through the text format.
  auto ts_rng = substream(7, {100});
  TimeSeriesSimConfig ts_config;
  ts_config.markers = 2;
  ts_config.time_points = {0.1, 1.0 / 3.0, 2.7};
  ts_config.pool_size = 10;
  auto ts = simulate_timeseries(ts_config, ts_rng);
  auto ts_path = (dir / "ts.tsv").string();
  write_pool_table(ts_path, ts.data, {"x_time"});
  auto ts_table = read_pool_table(ts_path);
  CHECK(ts_table.covariate_names == std::vector<std::string>{"x_time"});
  for (size_t i = 0; i < ts.data.pools.size(); ++i)
    CHECK(ts_table.covariates[i][0] == ts.data.pools[i].covariates[0]);

  // The subset route builds the matching design.
  std::vector<std::vector<int>> subsets = {{0, 1}, {1, 2, 3}};
  Dataset sub;
  sub.marker_count = 2;
  sub.haplotypes = all_haplotypes(2);
  PoolObservation pool;
  pool.pool_id = "s1";
  pool.size = 6;
  pool.matrix = std::make_shared<const ConfigurationMatrix>(
      build_subset_matrix(sub.haplotypes, subsets, false));
  pool.counts = IntVec::Zero(2);
  pool.counts << 3, 4;
  sub.pools.push_back(pool);
  auto sub_path = (dir / "sub.tsv").string();
  write_pool_table(sub_path, sub);
  auto sub_back = assemble_dataset(sub.haplotypes, read_pool_table(sub_path), subsets);
  CHECK(sub_back.pools[0].matrix->entries == pool.matrix->entries);

  // Column count mismatches against the design are rejected.
  CHECK_THROWS_AS(assemble_dataset(all_haplotypes(3), read_pool_table(sub_path)),
                  InvalidInputError);
}

TEST_CASE("truth tables round trip shared and per-pool forms") {
  auto dir = temp_dir();

  TruthTable shared;
  shared.pool_ids = {"*"};
  shared.labels = {"00", "10", "01", "11"};
  shared.frequencies.resize(1, 4);
  shared.frequencies << 0.4, 0.3, 0.2, 0.1;
  auto shared_path = (dir / "truth.tsv").string();
  write_truth_table(shared_path, shared);
  auto shared_back = read_truth_table(shared_path);
  CHECK(shared_back.shared());
  CHECK(shared_back.labels == shared.labels);
  CHECK(shared_back.frequencies == shared.frequencies);

  TruthTable per_pool;
  per_pool.pool_ids = {"a", "b", "c"};
  per_pool.labels = {"0", "1"};
  per_pool.frequencies.resize(3, 2);
  per_pool.frequencies << 0.25, 0.75, 1.0 / 3.0, 2.0 / 3.0, 0.5, 0.5;
  auto pool_path = (dir / "truth_t.tsv").string();
  write_truth_table(pool_path, per_pool);
  auto pool_back = read_truth_table(pool_path);
  CHECK_FALSE(pool_back.shared());
  CHECK(pool_back.pool_ids == per_pool.pool_ids);
  CHECK(pool_back.frequencies == per_pool.frequencies);

  write_text(dir / "order.tsv",
             "pool_id\thaplotype\tfrequency\na\t0\t0.5\na\t1\t0.5\nb\t1\t0.5\nb\t0\t0.5\n");
  CHECK_THROWS_AS(read_truth_table((dir / "order.tsv").string()), InvalidInputError);
  write_text(dir / "split.tsv",
             "pool_id\thaplotype\tfrequency\na\t0\t0.5\nb\t0\t0.5\na\t1\t0.5\n");
  CHECK_THROWS_AS(read_truth_table((dir / "split.tsv").string()), InvalidInputError);
  write_text(dir / "short.tsv", "pool_id\thaplotype\tfrequency\na\t0\t0.5\na\t1\t0.5\nb\t0\t0.5\n");
  CHECK_THROWS_AS(read_truth_table((dir / "short.tsv").string()), InvalidInputError);
}

TEST_CASE("posterior draws round trip with and without latent counts") {
  auto dir = temp_dir();

  PosteriorDraws draws;
  draws.labels = {"00", "10", "01", "11"};
  for (int c = 0; c < 2; ++c) {
    Mat freq(3, 4);
    for (int s = 0; s < 3; ++s)
      for (int k = 0; k < 4; ++k) freq(s, k) = 1.0 / (1.0 + c + 2 * s + 3 * k);
    draws.freq.push_back(freq);
    std::vector<IntMat> pools;
    for (int i = 0; i < 2; ++i) {
      IntMat z(3, 4);
      for (int s = 0; s < 3; ++s)
        for (int k = 0; k < 4; ++k) z(s, k) = (c + 1) * (s + 1) + k * i;
      pools.push_back(z);
    }
    draws.latents.push_back(pools);
  }
  draws.warnings.resize(2);

  auto path = (dir / "draws.tsv").string();
  write_draws(path, draws, {"a", "b"});
  auto back = read_draws(path);
  CHECK(back.labels == draws.labels);
  REQUIRE(back.chain_count() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(back.freq[c] == draws.freq[c]);
    REQUIRE(back.latents[c].size() == 2);
    CHECK(back.latents[c][0] == draws.latents[c][0]);
    CHECK(back.latents[c][1] == draws.latents[c][1]);
  }

  // Writing the same draws again is byte identical.
  auto again = (dir / "draws2.tsv").string();
  write_draws(again, draws, {"a", "b"});
  CHECK(read_text(path) == read_text(again));

  draws.latents.clear();
  auto no_latents = (dir / "plain.tsv").string();
  write_draws(no_latents, draws);
  auto plain = read_draws(no_latents);
  CHECK(plain.latents.empty());
  CHECK(plain.freq[1] == draws.freq[1]);

  write_text(dir / "header.tsv", "chain\tp\t00\n1\t1\t0.5\n");
  CHECK_THROWS_AS(read_draws((dir / "header.tsv").string()), InvalidInputError);
  write_text(dir / "nolabel.tsv", "chain\titeration\tmean\n1\t1\t0.5\n");
  CHECK_THROWS_AS(read_draws((dir / "nolabel.tsv").string()), InvalidInputError);
  write_text(dir / "fraction.tsv", "chain\titeration\t0\tz:a:0\n1\t1\t0.5\t0.25\n");
  CHECK_THROWS_AS(read_draws((dir / "fraction.tsv").string()), InvalidInputError);
  write_text(dir / "gap.tsv", "chain\titeration\t0\n1\t1\t0.5\n3\t1\t0.5\n");
  CHECK_THROWS_AS(read_draws((dir / "gap.tsv").string()), InvalidInputError);
  write_text(dir / "uneven.tsv", "chain\titeration\t0\n1\t1\t0.5\n2\t1\t0.5\n2\t2\t0.5\n");
  CHECK_THROWS_AS(read_draws((dir / "uneven.tsv").string()), InvalidInputError);
}

TEST_CASE("hierarchical draws round trip through their directory") {
  auto dir = temp_dir();

  HierDraws draws;
  draws.labels = {"0", "1"};
  draws.times = Vec(3);
  draws.times << 0.4, 1.0, 2.5;
  const int h = 2, n = 3;
  for (int c = 0; c < 2; ++c) {
    Mat freq(4, n * h), field(4, h * n), hyper(4, 3 * h + 1);
    for (int s = 0; s < 4; ++s) {
      for (int j = 0; j < n; ++j) {
        double a = 0.3 + 0.1 * std::sin(1.0 + c + s + j);
        freq(s, j * h) = a;
        freq(s, j * h + 1) = 1.0 - a;
        field(s, j * h) = std::cos(c + 0.5 * s + j);
        field(s, j * h + 1) = -field(s, j * h);
      }
      hyper(s, 0) = 0.2 + 0.01 * s;
      hyper(s, 1) = -hyper(s, 0);
      hyper(s, 2) = 1.1 + 0.05 * c;
      hyper(s, 3) = 0.9;
      hyper(s, 4) = 1.4 + 0.02 * s;
      hyper(s, 5) = 2.0;
      hyper(s, 6) = 0.3;
    }
    draws.frequencies.push_back(freq);
    draws.field.push_back(field);
    draws.hyper.push_back(hyper);
  }
  draws.warnings.resize(2);

  auto out = (dir / "run").string();
  write_hier_draws(out, draws, {"p1", "p2", "p3"});
  auto back = read_hier_draws(out);
  CHECK(back.labels == draws.labels);
  CHECK(back.times == draws.times);
  REQUIRE(back.chain_count() == 2);
  for (int c = 0; c < 2; ++c) {
    CHECK(back.frequencies[c] == draws.frequencies[c]);
    CHECK(back.field[c] == draws.field[c]);
    CHECK(back.hyper[c] == draws.hyper[c]);
  }

  // Prediction from the reloaded draws matches the original exactly.
  Vec stars(2);
  stars << 0.7, 3.2;
  CHECK(posterior_predict(back, stars, 11) == posterior_predict(draws, stars, 11));

  // A missing file or tampered header is rejected.
  CHECK_THROWS_AS(read_hier_draws((dir / "nowhere").string()), InvalidInputError);
  auto field_path = dir / "run" / "hier_field.tsv";
  auto text = read_text(field_path);
  write_text(field_path, "chain\titeration\tbogus\n1\t1\t0.0\n");
  CHECK_THROWS_AS(read_hier_draws(out), InvalidInputError);
  write_text(field_path, text);
  CHECK_NOTHROW(read_hier_draws(out));
}

TEST_CASE("predictive tables carry level-dependent percentile headers") {
  auto dir = temp_dir();

  PredictiveSummary summary;
  summary.times = Vec(2);
  summary.times << 0.5, 1.5;
  summary.mean.resize(2, 2);
  summary.mean << 0.6, 0.4, 0.55, 0.45;
  summary.lower = summary.mean.array() - 0.1;
  summary.upper = summary.mean.array() + 0.1;

  auto path = (dir / "pred.tsv").string();
  write_predictive_table(path, summary, {"0", "1"}, 0.95);
  auto lines = read_text(path);
  CHECK(lines.find("t\thaplotype\tmean\t2.5%\t97.5%") == 0);
  CHECK(std::count(lines.begin(), lines.end(), '\n') == 5);

  write_predictive_table(path, summary, {"0", "1"}, 0.8);
  CHECK(read_text(path).find("\t10%\t90%") != std::string::npos);

  CHECK_THROWS_AS(write_predictive_table(path, summary, {"0"}, 0.95), InvalidInputError);
}

TEST_CASE("feasible-set caches round trip") {
  auto dir = temp_dir();

  std::vector<LatentCounts> solutions;
  for (int a = 0; a <= 3; ++a) {
    IntVec z(4);
    z << a, 3 - a, 5, 0;
    solutions.push_back(z);
  }
  auto path = (dir / "fiber.txt").string();
  write_feasible_set(path, solutions);
  auto back = read_feasible_set(path);
  REQUIRE(back.size() == solutions.size());
  for (size_t i = 0; i < back.size(); ++i) CHECK(back[i] == solutions[i]);

  write_text(dir / "ragged.txt", "1 2 3\n1 2\n");
  CHECK_THROWS_AS(read_feasible_set((dir / "ragged.txt").string()), InvalidInputError);
}
