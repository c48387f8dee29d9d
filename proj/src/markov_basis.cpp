#include "poolfreq/markov_basis.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "poolfreq/errors.hpp"
#include "poolfreq/exact_linalg.hpp"
#include "poolfreq/feasible.hpp"
#include "poolfreq/model_core.hpp"

namespace poolfreq {

namespace {

using Clock = std::chrono::steady_clock;

IntMat matrix_with_sum_row(const ConfigurationMatrix& m) {
  if (m.has_sum_row) return m.entries;
  IntMat a(m.rows() + 1, m.haplotype_count());
  a.topRows(m.rows()) = m.entries;
  a.row(m.rows()).setOnes();
  return a;
}

void for_each_composition(int n, int h, const std::function<void(const IntVec&)>& fn) {
  IntVec z = IntVec::Zero(h);
  std::function<void(int, int)> rec = [&](int idx, int rem) {
    if (idx == h - 1) {
      z(idx) = rem;
      fn(z);
      return;
    }
    for (int v = 0; v <= rem; ++v) {
      z(idx) = v;
      rec(idx + 1, rem - v);
    }
  };
  rec(0, n);
}

std::vector<int> key_of(const IntVec& v) {
  return std::vector<int>(v.data(), v.data() + v.size());
}

// Candidate moves of half 1-norm k: u = z1 - z2 with disjoint supports and
// A z1 = A z2. Sign-canonical: first nonzero entry positive.
void candidate_moves(const IntMat& a, int k, std::set<std::vector<int>>& moves,
                     Clock::time_point deadline) {
  const int h = static_cast<int>(a.cols());
  std::map<std::vector<int>, std::vector<IntVec>> groups;
  for_each_composition(k, h, [&](const IntVec& z) {
    groups[key_of(a * z)].push_back(z);
  });
  for (const auto& [y, members] : groups) {
    if (Clock::now() > deadline)
      throw NumericalError("markov basis: completion exceeded its time budget");
    for (size_t i = 0; i < members.size(); ++i)
      for (size_t j = i + 1; j < members.size(); ++j) {
        const IntVec& z1 = members[i];
        const IntVec& z2 = members[j];
        bool disjoint = true;
        for (int c = 0; c < h; ++c)
          if (z1(c) > 0 && z2(c) > 0) { disjoint = false; break; }
        if (!disjoint) continue;
        IntVec u = z1 - z2;
        for (int c = 0; c < h; ++c) {
          if (u(c) == 0) continue;
          if (u(c) < 0) u = -u;
          break;
        }
        moves.insert(key_of(u));
      }
  }
}

IntMat moves_to_matrix(const std::set<std::vector<int>>& moves, int h) {
  IntMat out(static_cast<int>(moves.size()), h);
  int r = 0;
  for (const auto& m : moves) {
    for (int c = 0; c < h; ++c) out(r, c) = m[c];
    ++r;
  }
  return out;
}

// Fibers for pool size n grouped by observable y.
std::map<std::vector<int>, std::vector<LatentCounts>> fibers_by_y(const IntMat& a, int n) {
  std::map<std::vector<int>, std::vector<LatentCounts>> out;
  for_each_composition(n, static_cast<int>(a.cols()), [&](const IntVec& z) {
    out[key_of(a * z)].push_back(z);
  });
  return out;
}

bool certify_exhaustive(const IntMat& a, const IntMat& moves, int max_n,
                        Clock::time_point deadline) {
  for (int n = 1; n <= max_n; ++n) {
    if (Clock::now() > deadline)
      throw NumericalError("markov basis: certification exceeded its time budget");
    for (const auto& [y, fiber] : fibers_by_y(a, n))
      if (!fiber_connected(moves, fiber)) return false;
  }
  return true;
}

bool certify_probes(const IntMat& a, int sum_row_index, const IntMat& moves, int max_n,
                    int samples, std::uint64_t seed, Clock::time_point deadline) {
  std::mt19937_64 rng(seed);
  const int h = static_cast<int>(a.cols());
  for (int s = 0; s < samples; ++s) {
    if (Clock::now() > deadline)
      throw NumericalError("markov basis: certification exceeded its time budget");
    const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_n));
    IntVec z = IntVec::Zero(h);
    for (int i = 0; i < n; ++i) z(static_cast<int>(rng() % static_cast<std::uint64_t>(h))) += 1;
    IntVec y = a * z;
    ConfigurationMatrix cm;
    cm.entries = a;
    cm.has_sum_row = true;
    cm.sum_row_index = sum_row_index;
    auto pre = preprocess_pool(cm, y, n);
    FeasibleSolver solver(pre.matrix, pre.counts, n);
    auto fiber = solver.enumerate();
    if (!fiber_connected(moves, fiber)) return false;
  }
  return true;
}

}  // namespace

bool fiber_connected(const IntMat& moves, const std::vector<LatentCounts>& fiber) {
  if (fiber.size() <= 1) return true;
  std::map<std::vector<int>, int> index;
  for (size_t i = 0; i < fiber.size(); ++i) index[key_of(fiber[i])] = static_cast<int>(i);
  std::vector<bool> seen(fiber.size(), false);
  std::vector<int> stack = {0};
  seen[0] = true;
  size_t reached = 1;
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    for (int m = 0; m < moves.rows(); ++m) {
      for (int sign : {1, -1}) {
        IntVec nb = fiber[cur] + sign * IntVec(moves.row(m).transpose());
        if ((nb.array() < 0).any()) continue;
        auto it = index.find(key_of(nb));
        if (it == index.end() || seen[it->second]) continue;
        seen[it->second] = true;
        ++reached;
        stack.push_back(it->second);
      }
    }
  }
  return reached == fiber.size();
}

MarkovBasis compute_markov_basis(const ConfigurationMatrix& m, const BasisOptions& opts) {
  const IntMat a = matrix_with_sum_row(m);
  const int h = static_cast<int>(a.cols());
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(opts.max_seconds));

  MarkovBasis basis;
  basis.certified_n = opts.certify_n;
  basis.exhaustive = h <= opts.certify_haplotypes;
  basis.probe_samples = basis.exhaustive ? 0 : opts.probe_samples;

  // Full column rank means singleton fibers everywhere: empty basis.
  if (rational_row_rank(a) == h) {
    basis.moves.resize(0, h);
    return basis;
  }

  std::set<std::vector<int>> moves;
  for (int degree = 1; degree <= opts.max_degree; ++degree) {
    candidate_moves(a, degree, moves, deadline);
    if (moves.empty()) continue;
    IntMat mm = moves_to_matrix(moves, h);
    const int sum_row = m.has_sum_row ? m.sum_row_index : m.rows();
    const bool ok = basis.exhaustive
                        ? certify_exhaustive(a, mm, opts.certify_n, deadline)
                        : certify_probes(a, sum_row, mm, opts.certify_n, opts.probe_samples,
                                         opts.probe_seed, deadline);
    if (ok) {
      basis.moves = std::move(mm);
      return basis;
    }
  }
  throw NumericalError("markov basis: no certified basis up to the degree cap");
}

bool verify_connectivity(const ConfigurationMatrix& m, const MarkovBasis& basis, int n) {
  const IntMat a = matrix_with_sum_row(m);
  if (basis.haplotype_count() != a.cols())
    throw InvalidInputError("verify_connectivity: basis and matrix disagree on haplotypes");
  for (int size = 1; size <= n; ++size)
    for (const auto& [y, fiber] : fibers_by_y(a, size))
      if (!fiber_connected(basis.moves, fiber)) return false;
  return true;
}

void write_markov_basis(const std::string& path, const MarkovBasis& basis) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open basis file for writing: " + path);
  out << "# markov-basis haplotypes=" << basis.haplotype_count()
      << " moves=" << basis.move_count() << " certified_n=" << basis.certified_n
      << " probe_samples=" << basis.probe_samples
      << " exhaustive=" << (basis.exhaustive ? 1 : 0) << "\n";
  for (int r = 0; r < basis.moves.rows(); ++r) {
    for (int c = 0; c < basis.moves.cols(); ++c) out << (c ? "\t" : "") << basis.moves(r, c);
    out << "\n";
  }
}

MarkovBasis read_markov_basis(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open basis file: " + path);
  MarkovBasis basis;
  std::string line;
  int h = -1;
  std::vector<std::vector<int>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string tok;
      while (ss >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string k = tok.substr(0, eq);
        const int v = std::stoi(tok.substr(eq + 1));
        if (k == "haplotypes") h = v;
        else if (k == "certified_n") basis.certified_n = v;
        else if (k == "probe_samples") basis.probe_samples = v;
        else if (k == "exhaustive") basis.exhaustive = (v != 0);
      }
      continue;
    }
    std::istringstream ss(line);
    std::vector<int> vals;
    int v;
    while (ss >> v) vals.push_back(v);
    if (h < 0) h = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != h)
      throw InvalidInputError("basis file has ragged rows: " + path);
    rows.push_back(std::move(vals));
  }
  if (h < 0) throw InvalidInputError("basis file has no header: " + path);
  basis.moves.resize(static_cast<int>(rows.size()), h);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < h; ++c) basis.moves(static_cast<int>(r), c) = rows[r][c];
  return basis;
}

}  // namespace poolfreq
