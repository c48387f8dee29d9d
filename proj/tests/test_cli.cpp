#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "poolfreq/io.hpp"
#include "poolfreq/markov_basis.hpp"
#include "poolfreq/model_core.hpp"
#include "poolfreq/types.hpp"

using namespace poolfreq;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  static int counter = 0;
  fs::path dir = fs::temp_directory_path() / ("poolfreq_cli_" + std::to_string(::getpid()) +
                                              "_" + std::to_string(counter++));
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Shells the installed binary out of process, capturing both streams.
RunResult run_cli(const fs::path& cwd, const std::string& args) {
  const fs::path out_file = cwd / ".stdout";
  const fs::path err_file = cwd / ".stderr";
  std::string command = "cd '" + cwd.string() + "' && '" + POOLFREQ_CLI_PATH + "' " + args +
                        " > '" + out_file.string() + "' 2> '" + err_file.string() + "'";
  int status = std::system(command.c_str());
  RunResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = read_text(out_file);
  result.err = read_text(err_file);
  return result;
}

}  // namespace

TEST_CASE("simulate shared writes a reproducible dataset directory") {
  auto dir = temp_dir();
  auto first = run_cli(dir, "simulate shared --H 4 --N 5 --n 12 --conc 0.4 --seed 3 "
                            "--out-dir one");
  REQUIRE(first.exit_code == 0);
  for (const char* name : {"haplotypes.txt", "pools.tsv", "truth.tsv", "config.resolved.txt"})
    CHECK(fs::exists(dir / "one" / name));

  // Same seed reproduces the files byte for byte; a new seed does not.
  REQUIRE(run_cli(dir, "simulate shared --H 4 --N 5 --n 12 --conc 0.4 --seed 3 "
                       "--out-dir two").exit_code == 0);
  CHECK(read_text(dir / "one" / "pools.tsv") == read_text(dir / "two" / "pools.tsv"));
  CHECK(read_text(dir / "one" / "truth.tsv") == read_text(dir / "two" / "truth.tsv"));
  REQUIRE(run_cli(dir, "simulate shared --H 4 --N 5 --n 12 --conc 0.4 --seed 4 "
                       "--out-dir three").exit_code == 0);
  CHECK(read_text(dir / "one" / "pools.tsv") != read_text(dir / "three" / "pools.tsv"));

  auto haps = read_haplotype_list((dir / "one" / "haplotypes.txt").string());
  CHECK(haps == all_haplotypes(2));
  auto data = assemble_dataset(haps, read_pool_table((dir / "one" / "pools.tsv").string()));
  CHECK(data.pools.size() == 5);
  for (const auto& pool : data.pools) CHECK(pool.size == 12);

  auto truth = read_truth_table((dir / "one" / "truth.tsv").string());
  CHECK(truth.shared());
  CHECK(truth.frequencies.sum() == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(read_text(dir / "one" / "config.resolved.txt").find("[simulate.shared]") !=
        std::string::npos);
}

TEST_CASE("infer writes deterministic draws that honor the model") {
  auto dir = temp_dir();
  REQUIRE(run_cli(dir, "simulate shared --H 4 --N 4 --n 10 --conc 0.4 --seed 8 "
                       "--out-dir sim").exit_code == 0);

  const std::string flags = "infer --pools sim/pools.tsv --method latent --chains 2 "
                            "--burn-in 60 --iters 80 --seed 2 --store-latents";
  REQUIRE(run_cli(dir, flags + " --out-dir run1").exit_code == 0);
  REQUIRE(run_cli(dir, flags + " --out-dir run2").exit_code == 0);
  CHECK(read_text(dir / "run1" / "draws.tsv") == read_text(dir / "run2" / "draws.tsv"));
  CHECK(fs::exists(dir / "run1" / "warnings.tsv"));

  auto draws = read_draws((dir / "run1" / "draws.tsv").string());
  REQUIRE(draws.chain_count() == 2);
  CHECK(draws.freq[0].rows() == 80);
  std::vector<std::string> expected;
  for (const auto& h : all_haplotypes(2)) expected.push_back(h.bits);
  CHECK(draws.labels == expected);
  for (int s = 0; s < draws.freq[0].rows(); ++s) {
    CHECK(draws.freq[0].row(s).minCoeff() >= 0.0);
    CHECK(draws.freq[0].row(s).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Stored latent counts stay on their pools' fibers.
  auto data = assemble_dataset(read_haplotype_list((dir / "sim" / "haplotypes.txt").string()),
                               read_pool_table((dir / "sim" / "pools.tsv").string()));
  REQUIRE(draws.latents.size() == 2);
  REQUIRE(draws.latents[0].size() == data.pools.size());
  for (size_t i = 0; i < data.pools.size(); ++i)
    for (int s : {0, 37, 79}) {
      LatentCounts z = draws.latents[0][i].row(s).transpose();
      CHECK(latent_is_feasible(data.pools[i], z));
    }

  // A config file drives the same run to the same bytes.
  {
    std::ofstream cfg(dir / "run.txt");
    cfg << "[infer]\npools=sim/pools.tsv\nmethod=latent\nchains=2\nburn-in=60\niters=80\n"
           "seed=2\nstore-latents=true\nout-dir=run3\n";
  }
  REQUIRE(run_cli(dir, "infer --config run.txt").exit_code == 0);
  CHECK(read_text(dir / "run1" / "draws.tsv") == read_text(dir / "run3" / "draws.tsv"));
}

TEST_CASE("exact inference over budget names the fallback methods") {
  auto dir = temp_dir();
  REQUIRE(run_cli(dir, "simulate shared --H 8 --N 3 --n 30 --conc 1.5 --seed 12 "
                       "--out-dir sim").exit_code == 0);
  auto run = run_cli(dir, "infer --pools sim/pools.tsv --method exact --max-solutions 2 "
                          "--out-dir run");
  CHECK(run.exit_code == 6);
  CHECK(run.err.find("op=infer") != std::string::npos);
  CHECK(run.err.find("type=EnumerationOverflow") != std::string::npos);
  CHECK(run.err.find("approximate") != std::string::npos);
  CHECK(run.err.find("latent") != std::string::npos);
}

TEST_CASE("diagnose summarizes draws against the truth") {
  auto dir = temp_dir();
  REQUIRE(run_cli(dir, "simulate shared --H 4 --N 6 --n 15 --conc 0.4 --seed 5 "
                       "--out-dir sim").exit_code == 0);
  REQUIRE(run_cli(dir, "infer --pools sim/pools.tsv --method approx --chains 2 --burn-in 80 "
                       "--iters 120 --seed 3 --out-dir run").exit_code == 0);
  auto run = run_cli(dir, "diagnose --draws run/draws.tsv --truth sim/truth.tsv "
                          "--levels 0.5,0.9 --thin 50 --out-dir diag");
  REQUIRE(run.exit_code == 0);
  CHECK(run.out.find("mean TVD to truth:") != std::string::npos);

  auto summary = read_text(dir / "diag" / "summary.tsv");
  CHECK(summary.find("haplotype\tmean\tess\trhat\ttruth\tabs_error") == 0);
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 5);

  auto coverage = read_text(dir / "diag" / "coverage.tsv");
  CHECK(coverage.find("level\tcovered\ttotal\tfraction") == 0);
  CHECK(std::count(coverage.begin(), coverage.end(), '\n') == 3);

  // Coverage needs a shared truth table.
  {
    std::ofstream truth(dir / "per_pool.tsv");
    truth << "pool_id\thaplotype\tfrequency\np1\t00\t1\n";
  }
  CHECK(run_cli(dir, "diagnose --draws run/draws.tsv --truth per_pool.tsv --out-dir d2")
            .exit_code == 3);
}

TEST_CASE("hierarchical inference and prediction run end to end") {
  auto dir = temp_dir();
  REQUIRE(run_cli(dir, "simulate timeseries --markers 2 --N 6 --n 10 --seed 4 "
                       "--out-dir ts").exit_code == 0);
  REQUIRE(run_cli(dir, "infer --pools ts/pools.tsv --hierarchical --method latent --chains 2 "
                       "--burn-in 60 --iters 60 --seed 5 --out-dir hrun").exit_code == 0);
  for (const char* name :
       {"hier_frequencies.tsv", "hier_field.tsv", "hier_hyper.tsv", "hier_times.tsv"})
    CHECK(fs::exists(dir / "hrun" / name));

  auto draws = read_hier_draws((dir / "hrun").string());
  REQUIRE(draws.chain_count() == 2);
  CHECK(draws.frequencies[0].rows() == 60);
  CHECK(draws.times.size() == 6);
  const int h = static_cast<int>(draws.labels.size());
  for (int i = 0; i < 6; ++i)
    CHECK(draws.frequencies[0].row(0).segment(i * h, h).sum() ==
          doctest::Approx(1.0).epsilon(1e-9));

  auto pred = run_cli(dir, "predict --draws-dir hrun --times 0.5,2.5,4 --seed 7 "
                           "--out-dir pred");
  REQUIRE(pred.exit_code == 0);
  auto table = read_text(dir / "pred" / "predictive.tsv");
  CHECK(table.find("t\thaplotype\tmean\t2.5%\t97.5%") == 0);
  CHECK(std::count(table.begin(), table.end(), '\n') == 1 + 3 * h);

  // Same seed reproduces the bands; the grid form matches explicit times.
  REQUIRE(run_cli(dir, "predict --draws-dir hrun --times 0.5,2.5,4 --seed 7 "
                       "--out-dir pred2").exit_code == 0);
  CHECK(read_text(dir / "pred" / "predictive.tsv") ==
        read_text(dir / "pred2" / "predictive.tsv"));

  CHECK(run_cli(dir, "predict --draws-dir hrun --times 1 --grid 0:1:3 --out-dir p3")
            .exit_code == 3);
  CHECK(run_cli(dir, "predict --draws-dir hrun --out-dir p4").exit_code == 3);
  CHECK(run_cli(dir, "predict --draws-dir hrun --grid 5:1 --out-dir p5").exit_code == 3);
}

TEST_CASE("markov-basis subcommands compute, verify and import") {
  auto dir = temp_dir();
  auto compute = run_cli(dir, "markov-basis compute --markers 2 --out-dir mb");
  REQUIRE(compute.exit_code == 0);
  auto basis = read_markov_basis((dir / "mb" / "basis.txt").string());
  REQUIRE(basis.move_count() == 1);
  IntVec expect(4);
  expect << 1, -1, -1, 1;
  CHECK(basis.moves.row(0).transpose() == expect);

  auto verify = run_cli(dir, "markov-basis verify --markers 2 --basis mb/basis.txt --n 6");
  CHECK(verify.exit_code == 0);
  CHECK(verify.out.find("connected=true") != std::string::npos);

  auto import = run_cli(dir, "markov-basis import --markers 2 --in mb/basis.txt --out-dir mbi");
  CHECK(import.exit_code == 0);
  auto reimported = read_markov_basis((dir / "mbi" / "basis.txt").string());
  CHECK(reimported.moves == basis.moves);

  // A move outside the kernel is rejected on import; an empty move set
  // fails verification.
  {
    std::ofstream bad(dir / "bad.txt");
    bad << "1\t1\t-1\t1\n";
  }
  auto bad = run_cli(dir, "markov-basis import --markers 2 --in bad.txt --out-dir mbx");
  CHECK(bad.exit_code == 3);
  CHECK(bad.err.find("kernel") != std::string::npos);
  {
    MarkovBasis empty;
    empty.moves.resize(0, 4);
    write_markov_basis((dir / "empty.txt").string(), empty);
  }
  auto disconnected =
      run_cli(dir, "markov-basis verify --markers 2 --basis empty.txt --n 4");
  CHECK(disconnected.exit_code == 4);
  CHECK(disconnected.out.find("connected=false") != std::string::npos);

  CHECK(run_cli(dir, "markov-basis compute --out-dir mby").exit_code == 3);
  CHECK(run_cli(dir, "markov-basis compute --markers 2 --haplotypes mb/basis.txt "
                     "--out-dir mbz").exit_code == 3);
}

TEST_CASE("ligate emits a candidate list that infer consumes") {
  auto dir = temp_dir();
  REQUIRE(run_cli(dir, "simulate shared --H 64 --N 4 --n 15 --conc 0.1 --seed 21 "
                       "--out-dir sim").exit_code == 0);
  auto ligate = run_cli(dir, "ligate --pools sim/pools.tsv --block-size 3 --threshold 0.05 "
                             "--chains 2 --burn-in 60 --iters 60 --seed 6 --out-dir lig");
  REQUIRE(ligate.exit_code == 0);
  auto kept = read_haplotype_list((dir / "lig" / "haplotypes.txt").string());
  CHECK(!kept.empty());
  CHECK(kept[0].marker_count() == 6);
  CHECK(kept.size() <= 64);
  CHECK(fs::exists(dir / "lig" / "estimates.tsv"));

  REQUIRE(run_cli(dir, "infer --pools sim/pools.tsv --haplotypes lig/haplotypes.txt "
                       "--method approx --chains 1 --burn-in 40 --iters 40 --seed 2 "
                       "--out-dir run").exit_code == 0);
  auto draws = read_draws((dir / "run" / "draws.tsv").string());
  CHECK(draws.labels.size() == kept.size());
}

TEST_CASE("usage errors exit nonzero") {
  auto dir = temp_dir();
  CHECK(run_cli(dir, "frobnicate").exit_code != 0);
  CHECK(run_cli(dir, "infer --out-dir x").exit_code != 0);
  CHECK(run_cli(dir, "simulate").exit_code != 0);
  CHECK(run_cli(dir, "infer --pools missing.tsv --out-dir x").exit_code == 3);
}
