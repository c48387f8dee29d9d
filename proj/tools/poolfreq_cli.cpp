#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "poolfreq/diagnostics.hpp"
#include "poolfreq/errors.hpp"
#include "poolfreq/hier_gp.hpp"
#include "poolfreq/io.hpp"
#include "poolfreq/markov_basis.hpp"
#include "poolfreq/model_core.hpp"
#include "poolfreq/partition_ligation.hpp"
#include "poolfreq/rng.hpp"
#include "poolfreq/samplers.hpp"
#include "poolfreq/sim_data.hpp"

namespace fs = std::filesystem;
using namespace poolfreq;

namespace {

constexpr std::uint64_t kStreamSimShared = 10;
constexpr std::uint64_t kStreamSimTimeseries = 11;

// Dotted section name of a (possibly nested) subcommand, as config files
// expect it.
std::string section_path(const CLI::App* leaf) {
  std::string path;
  for (const CLI::App* node = leaf; node->get_parent() != nullptr; node = node->get_parent())
    path = node->get_name() + (path.empty() ? "" : ".") + path;
  return path;
}

// Every output directory records the fully resolved option values so a run
// can be reproduced from its artifacts alone; the echo is itself a valid
// --config file for the same subcommand.
void echo_config(const CLI::App& cmd, const std::string& out_dir, const std::string& op) {
  fs::create_directories(out_dir);
  const fs::path path = fs::path(out_dir) / "config.resolved.txt";
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write " + path.string());
  out << "# resolved configuration\n# command: " << op << "\n[" << section_path(&cmd) << "]\n"
      << cmd.config_to_str(true, false);
  if (!out) throw InvalidInputError("write failed for " + path.string());
}

InferenceMethod parse_method(const std::string& name) {
  if (name == "exact") return InferenceMethod::Exact;
  if (name == "approx") return InferenceMethod::Approx;
  return InferenceMethod::Latent;
}

// Options shared by every sampling run.
struct SamplerOpts {
  std::string method = "latent";
  double alpha = 0.4;
  int chains = 5;
  int burn_in = 500;
  int iters = 500;
  std::uint64_t updates_per_iter = 0;
  std::uint64_t seed = 1;
  int threads = 0;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  double stabilize_eps = 1e-9;
  std::uint64_t max_solutions = EnumerationBudget{}.max_solutions;
  double max_seconds = EnumerationBudget{}.max_seconds;

  SamplerConfig to_config() const {
    SamplerConfig config;
    config.method = parse_method(method);
    config.chains = chains;
    config.burn_in = burn_in;
    config.inference_iters = iters;
    config.latent_updates_per_iter = updates_per_iter;
    config.seed = seed;
    config.threads = threads;
    config.max_tree_depth = max_tree_depth;
    config.target_accept = target_accept;
    config.stabilize_eps = stabilize_eps;
    config.budget = {max_solutions, max_seconds};
    return config;
  }
};

void add_sampler_options(CLI::App* cmd, SamplerOpts& o) {
  cmd->add_option("--method", o.method, "Likelihood treatment: exact, approx or latent")
      ->check(CLI::IsMember({"exact", "approx", "latent"}))
      ->capture_default_str();
  cmd->add_option("--alpha", o.alpha, "Dirichlet prior concentration")->capture_default_str();
  cmd->add_option("--chains", o.chains, "Independent chains")->capture_default_str();
  cmd->add_option("--burn-in", o.burn_in, "Warmup iterations per chain")->capture_default_str();
  cmd->add_option("--iters", o.iters, "Retained iterations per chain")->capture_default_str();
  cmd->add_option("--updates-per-iter", o.updates_per_iter,
                  "Latent updates per iteration (0 = 5 x total pool size)")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "Master seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker threads (0 = one per chain)")
      ->capture_default_str();
  cmd->add_option("--max-tree-depth", o.max_tree_depth, "No-U-turn doubling limit")
      ->capture_default_str();
  cmd->add_option("--target-accept", o.target_accept, "Step-size adaptation target")
      ->capture_default_str();
  cmd->add_option("--stabilize-eps", o.stabilize_eps, "Approximate-likelihood covariance floor")
      ->capture_default_str();
  cmd->add_option("--max-solutions", o.max_solutions, "Feasible-set enumeration cap")
      ->capture_default_str();
  cmd->add_option("--max-seconds", o.max_seconds, "Feasible-set enumeration time cap")
      ->capture_default_str();
}

// Dataset inputs shared by ligate and infer.
struct DataOpts {
  std::string pools;
  std::string haplotypes;
  std::string subsets;
};

void add_data_options(CLI::App* cmd, DataOpts& o, bool with_subsets) {
  cmd->add_option("--pools", o.pools, "Pool table (pool_id, n, counts, x_* covariates)")
      ->required();
  cmd->add_option("--haplotypes", o.haplotypes,
                  "Candidate haplotype list (default: all over the count columns)");
  if (with_subsets)
    cmd->add_option("--subsets", o.subsets,
                    "Subset design file; requires --haplotypes, replaces the allele design");
}

Dataset load_dataset(const DataOpts& o, std::vector<std::string>* pool_ids) {
  PoolTable table = read_pool_table(o.pools);
  if (pool_ids) *pool_ids = table.ids;
  std::vector<std::vector<int>> subsets;
  std::vector<Haplotype> haplotypes;
  if (!o.subsets.empty()) {
    if (o.haplotypes.empty())
      throw InvalidInputError("--subsets requires an explicit --haplotypes list");
    haplotypes = read_haplotype_list(o.haplotypes);
    subsets = read_subset_design(o.subsets, haplotypes);
  } else if (!o.haplotypes.empty()) {
    haplotypes = read_haplotype_list(o.haplotypes);
  } else {
    const int markers = static_cast<int>(table.count_names.size());
    if (markers > 12)
      throw InvalidInputError("refusing to expand " + std::to_string(markers) +
                              " markers into all haplotypes; pass --haplotypes");
    haplotypes = all_haplotypes(markers);
  }
  return assemble_dataset(std::move(haplotypes), table, subsets);
}

void write_warnings(const std::string& out_dir, const std::vector<ChainWarnings>& warnings) {
  const fs::path path = fs::path(out_dir) / "warnings.tsv";
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write " + path.string());
  out << "chain\tdivergences\ttransitions\tnumerical_failures\tstuck_rejections\tmessages\n";
  for (size_t c = 0; c < warnings.size(); ++c) {
    const auto& w = warnings[c];
    out << (c + 1) << '\t' << w.divergences << '\t' << w.transitions << '\t'
        << w.numerical_failures << '\t' << w.stuck_rejections << '\t';
    for (size_t m = 0; m < w.messages.size(); ++m) out << (m ? "; " : "") << w.messages[m];
    out << '\n';
  }
  for (size_t c = 0; c < warnings.size(); ++c)
    for (const auto& m : warnings[c].messages)
      std::cout << "warning: chain " << (c + 1) << ": " << m << '\n';
}

ConfigurationMatrix design_from_options(const std::string& haplotypes_path, int markers,
                                        const std::string& subsets_path) {
  if (haplotypes_path.empty() == (markers <= 0))
    throw InvalidInputError("pass exactly one of --haplotypes and --markers");
  std::vector<Haplotype> haplotypes =
      haplotypes_path.empty() ? all_haplotypes(markers) : read_haplotype_list(haplotypes_path);
  if (subsets_path.empty()) return build_allele_count_matrix(haplotypes, true);
  return build_subset_matrix(haplotypes, read_subset_design(subsets_path, haplotypes), true);
}

std::string fmt_count(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian haplotype frequency inference from pooled allele counts"};
  app.require_subcommand(1);
  app.set_config("--config", "",
                 "Key-value run file with [subcommand] sections; may follow the subcommand");
  std::string op = "startup";

  // ---- simulate ----------------------------------------------------------
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic pooled datasets");
  simulate->fallthrough();
  simulate->require_subcommand(1);

  struct {
    int haplotypes = 8, pools = 20, pool_size = 20;
    double conc = 0.4;
    std::uint64_t seed = 1;
    std::string out;
  } shared_opts;
  auto* shared = simulate->add_subcommand("shared", "Pools drawn from one frequency vector");
  shared->fallthrough();
  shared->add_option("--H", shared_opts.haplotypes, "Haplotype count (power of two)")
      ->capture_default_str();
  shared->add_option("--N", shared_opts.pools, "Number of pools")->capture_default_str();
  shared->add_option("--n", shared_opts.pool_size, "Organisms per pool")->capture_default_str();
  shared->add_option("--conc", shared_opts.conc, "Dirichlet concentration of the truth")
      ->capture_default_str();
  shared->add_option("--seed", shared_opts.seed, "Master seed")->capture_default_str();
  shared->add_option("--out-dir", shared_opts.out, "Output directory")->required();
  shared->callback([&] {
    op = "simulate shared";
    echo_config(*shared, shared_opts.out, op);
    auto rng = substream(shared_opts.seed, {kStreamSimShared});
    auto sim = simulate_shared(shared_opts.haplotypes, shared_opts.pools, shared_opts.pool_size,
                               shared_opts.conc, rng);
    const fs::path out(shared_opts.out);
    write_haplotype_list((out / "haplotypes.txt").string(), sim.data.haplotypes);
    write_pool_table((out / "pools.tsv").string(), sim.data);
    TruthTable truth;
    truth.pool_ids = {"*"};
    for (const auto& h : sim.data.haplotypes) truth.labels.push_back(h.bits);
    truth.frequencies = sim.truth.transpose();
    write_truth_table((out / "truth.tsv").string(), truth);
    std::cout << "wrote " << shared_opts.pools << " pools over " << shared_opts.haplotypes
              << " haplotypes to " << shared_opts.out << '\n';
  });

  struct {
    TimeSeriesSimConfig config;
    int points = 30;
    std::uint64_t seed = 1;
    std::string out;
  } ts_opts;
  auto* timeseries =
      simulate->add_subcommand("timeseries", "Pools tracking drifting frequencies");
  timeseries->fallthrough();
  timeseries->add_option("--markers", ts_opts.config.markers, "Marker count")
      ->capture_default_str();
  timeseries->add_option("--sigmoids", ts_opts.config.sigmoids, "Fitness transitions")
      ->capture_default_str();
  timeseries->add_option("--horizon", ts_opts.config.horizon, "Time horizon")
      ->capture_default_str();
  timeseries->add_option("--N", ts_opts.points, "Number of sampling times")
      ->capture_default_str();
  timeseries->add_option("--n", ts_opts.config.pool_size, "Organisms per pool")
      ->capture_default_str();
  timeseries
      ->add_option("--conc-scale", ts_opts.config.concentration_scale,
                   "Overdispersion scale of the pool draws")
      ->capture_default_str();
  timeseries->add_option("--seed", ts_opts.seed, "Master seed")->capture_default_str();
  timeseries->add_option("--out-dir", ts_opts.out, "Output directory")->required();
  timeseries->callback([&] {
    op = "simulate timeseries";
    echo_config(*timeseries, ts_opts.out, op);
    ts_opts.config.time_points.clear();
    for (int i = 1; i <= ts_opts.points; ++i)
      ts_opts.config.time_points.push_back(0.66 * i - 0.23);
    auto rng = substream(ts_opts.seed, {kStreamSimTimeseries});
    auto sim = simulate_timeseries(ts_opts.config, rng);
    const fs::path out(ts_opts.out);
    write_haplotype_list((out / "haplotypes.txt").string(), sim.data.haplotypes);
    write_pool_table((out / "pools.tsv").string(), sim.data, {"x_time"});
    TruthTable truth;
    for (const auto& pool : sim.data.pools) truth.pool_ids.push_back(pool.pool_id);
    for (const auto& h : sim.data.haplotypes) truth.labels.push_back(h.bits);
    truth.frequencies = sim.frequencies;
    write_truth_table((out / "truth.tsv").string(), truth);
    std::cout << "wrote " << ts_opts.points << " timed pools over "
              << sim.data.haplotypes.size() << " haplotypes to " << ts_opts.out << '\n';
  });

  // ---- ligate -------------------------------------------------------------
  struct {
    DataOpts data;
    SamplerOpts sampler;
    int block_size = 4;
    double threshold = 0.01;
    int max_candidates = 256;
    std::string out;
  } ligate_opts;
  ligate_opts.sampler.method = "approx";
  ligate_opts.sampler.alpha = 0.1;
  auto* ligate = app.add_subcommand(
      "ligate", "Build a candidate haplotype list by recursive block estimation");
  ligate->fallthrough();
  add_data_options(ligate, ligate_opts.data, false);
  add_sampler_options(ligate, ligate_opts.sampler);
  ligate->add_option("--block-size", ligate_opts.block_size, "Markers per initial block")
      ->capture_default_str();
  ligate->add_option("--threshold", ligate_opts.threshold, "Keep estimates above this")
      ->capture_default_str();
  ligate
      ->add_option("--max-candidates", ligate_opts.max_candidates,
                   "Per-segment candidate cap")
      ->capture_default_str();
  ligate->add_option("--out-dir", ligate_opts.out, "Output directory")->required();
  ligate->callback([&] {
    op = "ligate";
    echo_config(*ligate, ligate_opts.out, op);
    Dataset data = load_dataset(ligate_opts.data, nullptr);
    LigationConfig config;
    config.block_size = ligate_opts.block_size;
    config.threshold = ligate_opts.threshold;
    config.max_candidates = ligate_opts.max_candidates;
    config.prior = {ligate_opts.sampler.alpha};
    config.sampler = ligate_opts.sampler.to_config();
    auto result = run_partition_ligation(data, config);

    const fs::path out(ligate_opts.out);
    write_haplotype_list((out / "haplotypes.txt").string(), result.haplotypes);
    std::ofstream est((out / "estimates.tsv").string());
    if (!est) throw InvalidInputError("cannot write estimates.tsv");
    est << "haplotype\testimate\n";
    for (size_t k = 0; k < result.haplotypes.size(); ++k)
      est << result.haplotypes[k].bits << '\t' << result.estimates(static_cast<int>(k)) << '\n';
    for (const auto& m : result.messages) std::cout << "note: " << m << '\n';
    std::cout << "kept " << result.haplotypes.size() << " haplotypes in " << ligate_opts.out
              << '\n';
  });

  // ---- markov-basis -------------------------------------------------------
  auto* basis_cmd = app.add_subcommand("markov-basis", "Compute, verify or import move sets");
  basis_cmd->fallthrough();
  basis_cmd->require_subcommand(1);

  struct {
    std::string haplotypes, subsets, out;
    int markers = 0;
    BasisOptions options;
  } bc_opts;
  auto* basis_compute = basis_cmd->add_subcommand("compute", "Build a certified basis");
  basis_compute->fallthrough();
  basis_compute->add_option("--haplotypes", bc_opts.haplotypes, "Haplotype list file");
  basis_compute->add_option("--markers", bc_opts.markers,
                            "Use all haplotypes over this many markers");
  basis_compute->add_option("--subsets", bc_opts.subsets, "Subset design file");
  basis_compute->add_option("--max-degree", bc_opts.options.max_degree, "Candidate 1-norm cap")
      ->capture_default_str();
  basis_compute
      ->add_option("--certify-n", bc_opts.options.certify_n, "Pool sizes checked per fiber")
      ->capture_default_str();
  basis_compute
      ->add_option("--probe-samples", bc_opts.options.probe_samples,
                   "Random probes beyond the exhaustive range")
      ->capture_default_str();
  basis_compute->add_option("--probe-seed", bc_opts.options.probe_seed, "Probe seed")
      ->capture_default_str();
  basis_compute->add_option("--max-seconds", bc_opts.options.max_seconds, "Time cap")
      ->capture_default_str();
  basis_compute->add_option("--out-dir", bc_opts.out, "Output directory")->required();
  basis_compute->callback([&] {
    op = "markov-basis compute";
    echo_config(*basis_compute, bc_opts.out, op);
    auto matrix = design_from_options(bc_opts.haplotypes, bc_opts.markers, bc_opts.subsets);
    auto basis = compute_markov_basis(matrix, bc_opts.options);
    write_markov_basis((fs::path(bc_opts.out) / "basis.txt").string(), basis);
    std::cout << "wrote " << basis.move_count() << " moves (certified n<=" << basis.certified_n
              << (basis.exhaustive ? ", exhaustive" : ", probed") << ") to " << bc_opts.out
              << '\n';
  });

  struct {
    std::string haplotypes, subsets, basis;
    int markers = 0;
    int size = 8;
  } bv_opts;
  auto* basis_verify = basis_cmd->add_subcommand("verify", "Check fiber connectivity");
  basis_verify->fallthrough();
  basis_verify->add_option("--haplotypes", bv_opts.haplotypes, "Haplotype list file");
  basis_verify->add_option("--markers", bv_opts.markers,
                           "Use all haplotypes over this many markers");
  basis_verify->add_option("--subsets", bv_opts.subsets, "Subset design file");
  basis_verify->add_option("--basis", bv_opts.basis, "Basis file")->required();
  basis_verify->add_option("--n", bv_opts.size, "Largest pool size to check")
      ->capture_default_str();
  basis_verify->callback([&] {
    op = "markov-basis verify";
    auto matrix = design_from_options(bv_opts.haplotypes, bv_opts.markers, bv_opts.subsets);
    auto basis = read_markov_basis(bv_opts.basis);
    const bool ok = verify_connectivity(matrix, basis, bv_opts.size);
    std::cout << "connected=" << (ok ? "true" : "false") << " for all pool sizes <= "
              << bv_opts.size << '\n';
    if (!ok)
      throw DataInconsistencyError("basis does not connect every fiber up to n = " +
                                   std::to_string(bv_opts.size));
  });

  struct {
    std::string haplotypes, subsets, in, out;
    int markers = 0;
  } bi_opts;
  auto* basis_import = basis_cmd->add_subcommand("import", "Validate an external basis");
  basis_import->fallthrough();
  basis_import->add_option("--haplotypes", bi_opts.haplotypes, "Haplotype list file");
  basis_import->add_option("--markers", bi_opts.markers,
                           "Use all haplotypes over this many markers");
  basis_import->add_option("--subsets", bi_opts.subsets, "Subset design file");
  basis_import->add_option("--in", bi_opts.in, "Basis file to import")->required();
  basis_import->add_option("--out-dir", bi_opts.out, "Output directory")->required();
  basis_import->callback([&] {
    op = "markov-basis import";
    echo_config(*basis_import, bi_opts.out, op);
    auto matrix = design_from_options(bi_opts.haplotypes, bi_opts.markers, bi_opts.subsets);
    auto basis = read_markov_basis(bi_opts.in);
    if (basis.haplotype_count() != matrix.haplotype_count())
      throw InvalidInputError("basis and design disagree on the haplotype count");
    for (int r = 0; r < basis.moves.rows(); ++r)
      if (!(matrix.entries * basis.moves.row(r).transpose()).isZero(0))
        throw InvalidInputError("move " + std::to_string(r + 1) +
                                " is not in the kernel of the design");
    write_markov_basis((fs::path(bi_opts.out) / "basis.txt").string(), basis);
    std::cout << "imported " << basis.move_count() << " moves to " << bi_opts.out << '\n';
  });

  // ---- infer ---------------------------------------------------------------
  struct {
    DataOpts data;
    SamplerOpts sampler;
    bool hierarchical = false;
    bool store_latents = false;
    int updates_per_unit = 10;
    HierPriors priors;
    std::string out;
  } infer_opts;
  auto* infer = app.add_subcommand("infer", "Sample posterior haplotype frequencies");
  infer->fallthrough();
  add_data_options(infer, infer_opts.data, true);
  add_sampler_options(infer, infer_opts.sampler);
  infer->add_flag("--store-latents", infer_opts.store_latents, "Keep latent count draws");
  infer->add_flag("--hierarchical", infer_opts.hierarchical,
                  "Time-series model over the x_time covariate");
  infer
      ->add_option("--updates-per-unit", infer_opts.updates_per_unit,
                   "Hierarchical latent updates per organism per iteration")
      ->capture_default_str();
  infer->add_option("--level-scale", infer_opts.priors.level_scale, "Level prior scale")
      ->capture_default_str();
  infer
      ->add_option("--amplitude-shape", infer_opts.priors.amplitude.shape,
                   "Amplitude prior shape")
      ->capture_default_str();
  infer
      ->add_option("--amplitude-scale", infer_opts.priors.amplitude.scale,
                   "Amplitude prior scale")
      ->capture_default_str();
  infer
      ->add_option("--timescale-shape", infer_opts.priors.timescale.shape,
                   "Timescale prior shape")
      ->capture_default_str();
  infer
      ->add_option("--timescale-scale", infer_opts.priors.timescale.scale,
                   "Timescale prior scale")
      ->capture_default_str();
  infer->add_option("--noise-shape", infer_opts.priors.noise.shape, "Noise prior shape")
      ->capture_default_str();
  infer->add_option("--noise-scale", infer_opts.priors.noise.scale, "Noise prior scale")
      ->capture_default_str();
  infer->add_option("--out-dir", infer_opts.out, "Output directory")->required();
  infer->callback([&] {
    op = "infer";
    echo_config(*infer, infer_opts.out, op);
    std::vector<std::string> pool_ids;
    Dataset data = load_dataset(infer_opts.data, &pool_ids);
    const fs::path out(infer_opts.out);
    if (infer_opts.hierarchical) {
      HierConfig config;
      config.method = parse_method(infer_opts.sampler.method);
      config.chains = infer_opts.sampler.chains;
      config.burn_in = infer_opts.sampler.burn_in;
      config.inference_iters = infer_opts.sampler.iters;
      config.updates_per_unit = infer_opts.updates_per_unit;
      config.seed = infer_opts.sampler.seed;
      config.threads = infer_opts.sampler.threads;
      config.store_latents = infer_opts.store_latents;
      config.max_tree_depth = infer_opts.sampler.max_tree_depth;
      config.target_accept = infer_opts.sampler.target_accept;
      config.stabilize_eps = infer_opts.sampler.stabilize_eps;
      config.budget = {infer_opts.sampler.max_solutions, infer_opts.sampler.max_seconds};
      config.priors = infer_opts.priors;
      auto draws = run_hier_sampler(data, config);
      write_hier_draws(infer_opts.out, draws, pool_ids);
      write_warnings(infer_opts.out, draws.warnings);
      std::cout << "wrote " << config.chains << " chains x " << config.inference_iters
                << " hierarchical draws to " << infer_opts.out << '\n';
    } else {
      SamplerConfig config = infer_opts.sampler.to_config();
      config.store_latents = infer_opts.store_latents;
      DirichletPrior prior{infer_opts.sampler.alpha};
      auto draws = run_inference(data, prior, config);
      write_draws((out / "draws.tsv").string(), draws, pool_ids);
      write_warnings(infer_opts.out, draws.warnings);
      std::cout << "wrote " << config.chains << " chains x " << config.inference_iters
                << " draws to " << infer_opts.out << '\n';
    }
  });

  // ---- diagnose -------------------------------------------------------------
  struct {
    std::string draws, truth, out;
    std::vector<double> levels = {0.5, 0.8, 0.9, 0.95};
    int thin = 0;
  } diag_opts;
  auto* diagnose = app.add_subcommand("diagnose", "Summarize a draws file");
  diagnose->fallthrough();
  diagnose->add_option("--draws", diag_opts.draws, "Draws file from infer")->required();
  diagnose->add_option("--truth", diag_opts.truth, "Shared truth table for coverage");
  diagnose->add_option("--levels", diag_opts.levels, "Credible levels for coverage")
      ->delimiter(',')
      ->capture_default_str();
  diagnose
      ->add_option("--thin", diag_opts.thin,
                   "Thin each chain to this many draws for ESS and R-hat (0 = off)")
      ->capture_default_str();
  diagnose->add_option("--out-dir", diag_opts.out, "Output directory")->required();
  diagnose->callback([&] {
    op = "diagnose";
    echo_config(*diagnose, diag_opts.out, op);
    PosteriorDraws draws = read_draws(diag_opts.draws);
    const int h = static_cast<int>(draws.labels.size());

    Vec truth;
    if (!diag_opts.truth.empty()) {
      TruthTable table = read_truth_table(diag_opts.truth);
      if (!table.shared())
        throw InvalidInputError("coverage needs a shared truth table (pool_id *)");
      truth.resize(h);
      for (int k = 0; k < h; ++k) {
        auto it = std::find(table.labels.begin(), table.labels.end(),
                            draws.labels[static_cast<size_t>(k)]);
        if (it == table.labels.end())
          throw InvalidInputError("truth table is missing haplotype " +
                                  draws.labels[static_cast<size_t>(k)]);
        truth(k) = table.frequencies(0, static_cast<int>(it - table.labels.begin()));
      }
    }

    // Interval statistics use every retained draw; the optional thinning
    // only standardizes the ESS and R-hat sample counts.
    std::vector<Mat> for_mixing =
        diag_opts.thin > 0 ? thin_chain_draws(draws.freq, diag_opts.thin) : draws.freq;
    Vec ess = ess_by_column(for_mixing);
    Vec rhat = rhat_by_column(for_mixing);
    Vec mean = draws.mean();

    const fs::path out(diag_opts.out);
    std::ofstream summary((out / "summary.tsv").string());
    if (!summary) throw InvalidInputError("cannot write summary.tsv");
    summary << "haplotype\tmean\tess\trhat";
    if (truth.size() > 0) summary << "\ttruth\tabs_error";
    summary << '\n';
    for (int k = 0; k < h; ++k) {
      summary << draws.labels[static_cast<size_t>(k)] << '\t' << mean(k) << '\t' << ess(k)
              << '\t' << rhat(k);
      if (truth.size() > 0)
        summary << '\t' << truth(k) << '\t' << std::abs(mean(k) - truth(k));
      summary << '\n';
    }

    if (truth.size() > 0) {
      CoverageTable coverage = credible_coverage(draws, truth, diag_opts.levels);
      std::ofstream cov((out / "coverage.tsv").string());
      if (!cov) throw InvalidInputError("cannot write coverage.tsv");
      cov << "level\tcovered\ttotal\tfraction\n";
      for (size_t i = 0; i < coverage.levels.size(); ++i)
        cov << coverage.levels[i] << '\t' << coverage.covered[i] << '\t' << coverage.total
            << '\t' << coverage.fraction(i) << '\n';
      std::cout << "mean TVD to truth: " << fmt_count(tvd(mean, truth)) << '\n';
    }
    std::cout << "min ESS " << fmt_count(ess.minCoeff()) << ", max R-hat "
              << fmt_count(rhat.maxCoeff()) << "; wrote " << diag_opts.out << '\n';
  });

  // ---- predict -------------------------------------------------------------
  struct {
    std::string draws_dir, grid, out;
    std::vector<double> times;
    double level = 0.95;
    std::uint64_t seed = 1;
  } pred_opts;
  auto* predict = app.add_subcommand("predict", "Predictive bands from hierarchical draws");
  predict->fallthrough();
  predict->add_option("--draws-dir", pred_opts.draws_dir, "Directory written by infer")
      ->required();
  predict->add_option("--times", pred_opts.times, "Prediction times")->delimiter(',');
  predict->add_option("--grid", pred_opts.grid, "Evenly spaced times as from:to:count");
  predict->add_option("--level", pred_opts.level, "Credible level of the bands")
      ->capture_default_str();
  predict->add_option("--seed", pred_opts.seed, "Prediction seed")->capture_default_str();
  predict->add_option("--out-dir", pred_opts.out, "Output directory")->required();
  predict->callback([&] {
    op = "predict";
    echo_config(*predict, pred_opts.out, op);
    std::vector<double> times = pred_opts.times;
    if (!pred_opts.grid.empty()) {
      if (!times.empty()) throw InvalidInputError("pass either --times or --grid, not both");
      double from = 0.0, to = 0.0;
      int count = 0;
      char c1 = 0, c2 = 0;
      std::istringstream in(pred_opts.grid);
      if (!(in >> from >> c1 >> to >> c2 >> count) || c1 != ':' || c2 != ':' || count < 2 ||
          !(in >> std::ws).eof())
        throw InvalidInputError("--grid expects from:to:count with count >= 2");
      for (int i = 0; i < count; ++i)
        times.push_back(from + (to - from) * i / (count - 1));
    }
    if (times.empty()) throw InvalidInputError("no prediction times; pass --times or --grid");

    HierDraws draws = read_hier_draws(pred_opts.draws_dir);
    Vec t = Eigen::Map<const Vec>(times.data(), static_cast<int>(times.size()));
    PredictiveSummary summary = summarize_predictive(draws, t, pred_opts.seed, pred_opts.level);
    write_predictive_table((fs::path(pred_opts.out) / "predictive.tsv").string(), summary,
                           draws.labels, pred_opts.level);
    std::cout << "wrote " << times.size() << " times x " << draws.labels.size()
              << " haplotypes to " << pred_opts.out << '\n';
  });

  // ---- dispatch --------------------------------------------------------------
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const InvalidInputError& e) {
    std::cerr << "error\top=" << op << "\ttype=InvalidInput\tmessage=" << e.what() << '\n';
    return 3;
  } catch (const DataInconsistencyError& e) {
    std::cerr << "error\top=" << op << "\ttype=DataInconsistency\tmessage=" << e.what() << '\n';
    return 4;
  } catch (const NumericalError& e) {
    std::cerr << "error\top=" << op << "\ttype=Numerical\tmessage=" << e.what() << '\n';
    return 5;
  } catch (const EnumerationOverflowError& e) {
    std::cerr << "error\top=" << op << "\ttype=EnumerationOverflow\tmessage=" << e.what()
              << '\n';
    return 6;
  } catch (const std::exception& e) {
    std::cerr << "error\top=" << op << "\ttype=Unexpected\tmessage=" << e.what() << '\n';
    return 1;
  }
  return 0;
}
