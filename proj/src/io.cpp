#include "poolfreq/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>

#include "poolfreq/errors.hpp"
#include "poolfreq/model_core.hpp"

namespace poolfreq {
namespace {

[[noreturn]] void fail_at(const std::string& path, int line, const std::string& msg) {
  throw InvalidInputError(path + ":" + std::to_string(line) + ": " + msg);
}

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Header percentages are display values, not round-trip data.
std::string fmt_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string trimmed(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Lines with comments stripped and their 1-based numbers.
struct TextLine {
  int number = 0;
  std::string text;
};

std::vector<TextLine> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open " + path);
  std::vector<TextLine> lines;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    if (size_t hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::string text = trimmed(raw);
    if (!text.empty()) lines.push_back({number, std::move(text)});
  }
  return lines;
}

char detect_delimiter(const std::string& header) {
  if (header.find('\t') != std::string::npos) return '\t';
  if (header.find(',') != std::string::npos) return ',';
  return ' ';
}

std::vector<std::string> split_fields(const std::string& path, const TextLine& line, char delim) {
  std::vector<std::string> fields;
  if (delim == ' ') {
    std::istringstream in(line.text);
    std::string tok;
    while (in >> tok) fields.push_back(tok);
  } else {
    size_t begin = 0;
    while (true) {
      size_t end = line.text.find(delim, begin);
      fields.push_back(trimmed(line.text.substr(begin, end - begin)));
      if (end == std::string::npos) break;
      begin = end + 1;
    }
  }
  for (const auto& f : fields)
    if (f.empty()) fail_at(path, line.number, "empty field");
  return fields;
}

int parse_int(const std::string& path, int line, const std::string& field) {
  int value = 0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    fail_at(path, line, "expected an integer, got '" + field + "'");
  return value;
}

double parse_double(const std::string& path, int line, const std::string& field) {
  double value = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    fail_at(path, line, "expected a number, got '" + field + "'");
  return value;
}

bool is_bit_string(const std::string& s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](char c) { return c == '0' || c == '1'; });
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot write " + path);
  return out;
}

void finish_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw InvalidInputError("write failed for " + path);
}

int label_index(const std::string& path, int line, const std::vector<std::string>& labels,
                const std::string& bits) {
  auto it = std::find(labels.begin(), labels.end(), bits);
  if (it == labels.end()) fail_at(path, line, "unknown haplotype '" + bits + "'");
  return static_cast<int>(it - labels.begin());
}

std::vector<std::string> bit_labels(const std::vector<Haplotype>& haplotypes) {
  std::vector<std::string> labels;
  labels.reserve(haplotypes.size());
  for (const auto& h : haplotypes) labels.push_back(h.bits);
  return labels;
}

// Delimited table with a fixed chain/iteration prefix: returns per-chain
// row blocks, validating that chains are 1-based and equally long.
struct DrawTable {
  std::vector<std::string> columns;  // beyond chain and iteration
  std::vector<Mat> rows;             // per chain
};

DrawTable read_draw_table(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw InvalidInputError(path + ": empty file");
  const char delim = detect_delimiter(lines[0].text);
  auto header = split_fields(path, lines[0], delim);
  if (header.size() < 3 || header[0] != "chain" || header[1] != "iteration")
    fail_at(path, lines[0].number, "expected header starting with chain, iteration");
  DrawTable table;
  table.columns.assign(header.begin() + 2, header.end());
  const int width = static_cast<int>(table.columns.size());

  std::vector<std::vector<Vec>> chains;
  for (size_t k = 1; k < lines.size(); ++k) {
    auto fields = split_fields(path, lines[k], delim);
    if (fields.size() != header.size()) fail_at(path, lines[k].number, "wrong column count");
    const int chain = parse_int(path, lines[k].number, fields[0]);
    if (chain < 1) fail_at(path, lines[k].number, "chain indices are 1-based");
    if (chain > static_cast<int>(chains.size())) chains.resize(static_cast<size_t>(chain));
    Vec row(width);
    for (int j = 0; j < width; ++j)
      row(j) = parse_double(path, lines[k].number, fields[static_cast<size_t>(j) + 2]);
    chains[static_cast<size_t>(chain) - 1].push_back(std::move(row));
  }
  if (chains.empty()) throw InvalidInputError(path + ": no draws");
  for (size_t c = 0; c < chains.size(); ++c)
    if (chains[c].empty() || chains[c].size() != chains[0].size())
      throw InvalidInputError(path + ": chains must be contiguous and equally long");

  for (const auto& chain : chains) {
    Mat m(static_cast<int>(chain.size()), width);
    for (size_t s = 0; s < chain.size(); ++s) m.row(static_cast<int>(s)) = chain[s].transpose();
    table.rows.push_back(std::move(m));
  }
  return table;
}

void write_draw_table(const std::string& path, const std::vector<std::string>& columns,
                      const std::vector<Mat>& rows) {
  auto out = open_out(path);
  out << "chain\titeration";
  for (const auto& c : columns) out << '\t' << c;
  out << '\n';
  for (size_t c = 0; c < rows.size(); ++c) {
    for (int s = 0; s < rows[c].rows(); ++s) {
      out << (c + 1) << '\t' << (s + 1);
      for (int j = 0; j < rows[c].cols(); ++j) out << '\t' << fmt(rows[c](s, j));
      out << '\n';
    }
  }
  finish_out(out, path);
}

std::string after_last_bar(const std::string& s) {
  size_t bar = s.rfind('|');
  return bar == std::string::npos ? std::string() : s.substr(bar + 1);
}

std::string before_last_bar(const std::string& s) {
  size_t bar = s.rfind('|');
  return bar == std::string::npos ? std::string() : s.substr(0, bar);
}

}  // namespace

std::vector<Haplotype> read_haplotype_list(const std::string& path) {
  auto lines = read_lines(path);
  std::vector<Haplotype> haplotypes;
  std::set<std::string> seen;
  for (const auto& line : lines) {
    if (!is_bit_string(line.text)) fail_at(path, line.number, "expected a 0/1 string");
    if (!haplotypes.empty() && line.text.size() != haplotypes[0].bits.size())
      fail_at(path, line.number, "inconsistent marker count");
    if (!seen.insert(line.text).second) fail_at(path, line.number, "duplicate haplotype");
    haplotypes.push_back(parse_haplotype(line.text));
  }
  if (haplotypes.empty()) throw InvalidInputError(path + ": no haplotypes");
  return haplotypes;
}

void write_haplotype_list(const std::string& path, const std::vector<Haplotype>& haplotypes) {
  auto out = open_out(path);
  for (const auto& h : haplotypes) out << h.bits << '\n';
  finish_out(out, path);
}

std::vector<std::vector<int>> read_subset_design(const std::string& path,
                                                 const std::vector<Haplotype>& haplotypes) {
  auto labels = bit_labels(haplotypes);
  auto lines = read_lines(path);
  if (lines.empty()) throw InvalidInputError(path + ": no subsets");
  std::vector<std::vector<int>> subsets;
  for (const auto& line : lines) {
    std::istringstream in(line.text);
    std::string bits;
    std::vector<int> members;
    while (in >> bits) {
      int idx = label_index(path, line.number, labels, bits);
      if (std::find(members.begin(), members.end(), idx) != members.end())
        fail_at(path, line.number, "duplicate member '" + bits + "'");
      members.push_back(idx);
    }
    subsets.push_back(std::move(members));
  }
  return subsets;
}

void write_subset_design(const std::string& path, const std::vector<Haplotype>& haplotypes,
                         const std::vector<std::vector<int>>& subsets) {
  auto out = open_out(path);
  for (const auto& subset : subsets) {
    for (size_t j = 0; j < subset.size(); ++j) {
      if (subset[j] < 0 || subset[j] >= static_cast<int>(haplotypes.size()))
        throw InvalidInputError("subset member out of range");
      out << (j ? " " : "") << haplotypes[static_cast<size_t>(subset[j])].bits;
    }
    out << '\n';
  }
  finish_out(out, path);
}

PoolTable read_pool_table(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.empty()) throw InvalidInputError(path + ": empty file");
  const char delim = detect_delimiter(lines[0].text);
  auto header = split_fields(path, lines[0], delim);

  int id_col = -1, n_col = -1;
  std::vector<int> count_cols, covariate_cols;
  PoolTable table;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    const std::string& name = header[static_cast<size_t>(j)];
    if (name == "pool_id") {
      if (id_col >= 0) fail_at(path, lines[0].number, "duplicate pool_id column");
      id_col = j;
    } else if (name == "n") {
      if (n_col >= 0) fail_at(path, lines[0].number, "duplicate n column");
      n_col = j;
    } else if (name.rfind("x_", 0) == 0) {
      covariate_cols.push_back(j);
      table.covariate_names.push_back(name);
    } else {
      count_cols.push_back(j);
      table.count_names.push_back(name);
    }
  }
  if (id_col < 0 || n_col < 0) fail_at(path, lines[0].number, "missing pool_id or n column");
  if (count_cols.empty()) fail_at(path, lines[0].number, "no observed-count columns");

  std::set<std::string> seen;
  for (size_t k = 1; k < lines.size(); ++k) {
    auto fields = split_fields(path, lines[k], delim);
    if (fields.size() != header.size()) fail_at(path, lines[k].number, "wrong column count");
    const std::string& id = fields[static_cast<size_t>(id_col)];
    if (!seen.insert(id).second) fail_at(path, lines[k].number, "duplicate pool_id '" + id + "'");
    const int n = parse_int(path, lines[k].number, fields[static_cast<size_t>(n_col)]);
    if (n <= 0) fail_at(path, lines[k].number, "pool size must be positive");
    IntVec y(static_cast<int>(count_cols.size()));
    for (size_t j = 0; j < count_cols.size(); ++j) {
      y(static_cast<int>(j)) =
          parse_int(path, lines[k].number, fields[static_cast<size_t>(count_cols[j])]);
      if (y(static_cast<int>(j)) < 0) fail_at(path, lines[k].number, "negative count");
    }
    std::vector<double> x;
    x.reserve(covariate_cols.size());
    for (int col : covariate_cols)
      x.push_back(parse_double(path, lines[k].number, fields[static_cast<size_t>(col)]));
    table.ids.push_back(id);
    table.sizes.push_back(n);
    table.counts.push_back(std::move(y));
    table.covariates.push_back(std::move(x));
  }
  if (table.ids.empty()) throw InvalidInputError(path + ": no pools");
  return table;
}

void write_pool_table(const std::string& path, const Dataset& data,
                      const std::vector<std::string>& covariate_names) {
  if (data.pools.empty()) throw InvalidInputError("dataset has no pools");
  const int r = static_cast<int>(data.pools[0].counts.size());
  const size_t n_cov = data.pools[0].covariates.size();
  if (!covariate_names.empty() && covariate_names.size() != n_cov)
    throw InvalidInputError("covariate name count does not match the pools");

  auto out = open_out(path);
  out << "pool_id\tn";
  for (int j = 0; j < r; ++j) out << "\ty" << j;
  for (size_t j = 0; j < n_cov; ++j) {
    if (covariate_names.empty())
      out << "\tx_" << j;
    else
      out << '\t' << covariate_names[j];
  }
  out << '\n';
  for (const auto& pool : data.pools) {
    if (pool.counts.size() != r || pool.covariates.size() != n_cov)
      throw InvalidInputError("pools have inconsistent columns");
    out << pool.pool_id << '\t' << pool.size;
    for (int j = 0; j < r; ++j) out << '\t' << pool.counts(j);
    for (double x : pool.covariates) out << '\t' << fmt(x);
    out << '\n';
  }
  finish_out(out, path);
}

Dataset assemble_dataset(std::vector<Haplotype> haplotypes, const PoolTable& table,
                         const std::vector<std::vector<int>>& subsets) {
  if (haplotypes.empty()) throw InvalidInputError("empty haplotype list");
  Dataset data;
  data.marker_count = haplotypes[0].marker_count();
  data.haplotypes = std::move(haplotypes);

  ConfigurationMatrix design = subsets.empty()
                                   ? build_allele_count_matrix(data.haplotypes, false)
                                   : build_subset_matrix(data.haplotypes, subsets, false);
  if (static_cast<int>(table.count_names.size()) != design.rows())
    throw InvalidInputError("pool table has " + std::to_string(table.count_names.size()) +
                            " count columns but the design has " + std::to_string(design.rows()) +
                            " rows");
  auto matrix = std::make_shared<const ConfigurationMatrix>(std::move(design));

  data.pools.reserve(table.ids.size());
  for (int i = 0; i < table.pool_count(); ++i) {
    PoolObservation pool;
    pool.pool_id = table.ids[static_cast<size_t>(i)];
    pool.size = table.sizes[static_cast<size_t>(i)];
    pool.counts = table.counts[static_cast<size_t>(i)];
    pool.matrix = matrix;
    pool.covariates = table.covariates[static_cast<size_t>(i)];
    data.pools.push_back(std::move(pool));
  }
  return data;
}

TruthTable read_truth_table(const std::string& path) {
  auto lines = read_lines(path);
  if (lines.size() < 2) throw InvalidInputError(path + ": empty file");
  const char delim = detect_delimiter(lines[0].text);
  auto header = split_fields(path, lines[0], delim);
  if (header != std::vector<std::string>{"pool_id", "haplotype", "frequency"})
    fail_at(path, lines[0].number, "expected header pool_id, haplotype, frequency");

  TruthTable table;
  std::vector<std::vector<double>> blocks;
  size_t cursor = 0;  // position inside the current block
  for (size_t k = 1; k < lines.size(); ++k) {
    auto fields = split_fields(path, lines[k], delim);
    if (fields.size() != 3) fail_at(path, lines[k].number, "wrong column count");
    const double freq = parse_double(path, lines[k].number, fields[2]);
    if (table.pool_ids.empty() || fields[0] != table.pool_ids.back()) {
      if (!blocks.empty() && cursor != table.labels.size())
        fail_at(path, lines[k].number, "incomplete block for '" + table.pool_ids.back() + "'");
      if (std::find(table.pool_ids.begin(), table.pool_ids.end(), fields[0]) !=
          table.pool_ids.end())
        fail_at(path, lines[k].number, "pool '" + fields[0] + "' appears in two blocks");
      table.pool_ids.push_back(fields[0]);
      blocks.emplace_back();
      cursor = 0;
    }
    if (blocks.size() == 1) {
      if (!is_bit_string(fields[1])) fail_at(path, lines[k].number, "expected a 0/1 string");
      table.labels.push_back(fields[1]);
    } else {
      if (cursor >= table.labels.size() || fields[1] != table.labels[cursor])
        fail_at(path, lines[k].number, "haplotype order differs between blocks");
    }
    blocks.back().push_back(freq);
    ++cursor;
  }
  if (cursor != table.labels.size())
    throw InvalidInputError(path + ": incomplete final block");

  table.frequencies.resize(static_cast<int>(blocks.size()), static_cast<int>(table.labels.size()));
  for (size_t i = 0; i < blocks.size(); ++i)
    for (size_t h = 0; h < blocks[i].size(); ++h)
      table.frequencies(static_cast<int>(i), static_cast<int>(h)) = blocks[i][h];
  return table;
}

void write_truth_table(const std::string& path, const TruthTable& table) {
  if (table.frequencies.rows() != static_cast<int>(table.pool_ids.size()) ||
      table.frequencies.cols() != static_cast<int>(table.labels.size()))
    throw InvalidInputError("truth table dimensions disagree with its labels");
  auto out = open_out(path);
  out << "pool_id\thaplotype\tfrequency\n";
  for (size_t i = 0; i < table.pool_ids.size(); ++i)
    for (size_t h = 0; h < table.labels.size(); ++h)
      out << table.pool_ids[i] << '\t' << table.labels[h] << '\t'
          << fmt(table.frequencies(static_cast<int>(i), static_cast<int>(h))) << '\n';
  finish_out(out, path);
}

void write_draws(const std::string& path, const PosteriorDraws& draws,
                 const std::vector<std::string>& pool_ids) {
  const bool with_latents = !draws.latents.empty();
  const int h = static_cast<int>(draws.labels.size());
  const int pools = with_latents ? static_cast<int>(draws.latents[0].size()) : 0;
  if (with_latents && static_cast<int>(pool_ids.size()) != pools)
    throw InvalidInputError("latent draws need one pool id per pool");

  std::vector<std::string> columns = draws.labels;
  for (int i = 0; i < pools; ++i)
    for (int k = 0; k < h; ++k)
      columns.push_back("z:" + pool_ids[static_cast<size_t>(i)] + ":" +
                        draws.labels[static_cast<size_t>(k)]);

  std::vector<Mat> rows;
  rows.reserve(draws.freq.size());
  for (size_t c = 0; c < draws.freq.size(); ++c) {
    Mat m(draws.freq[c].rows(), static_cast<int>(columns.size()));
    m.leftCols(h) = draws.freq[c];
    for (int i = 0; i < pools; ++i)
      m.middleCols(h + i * h, h) = draws.latents[c][static_cast<size_t>(i)].cast<double>();
    rows.push_back(std::move(m));
  }
  write_draw_table(path, columns, rows);
}

PosteriorDraws read_draws(const std::string& path) {
  DrawTable table = read_draw_table(path);

  PosteriorDraws draws;
  size_t col = 0;
  while (col < table.columns.size() && is_bit_string(table.columns[col]))
    draws.labels.push_back(table.columns[col++]);
  if (draws.labels.empty()) throw InvalidInputError(path + ": no frequency columns");
  const int h = static_cast<int>(draws.labels.size());

  // Optional latent blocks: pool-major z:<pool>:<bits> in label order.
  std::vector<std::string> latent_pools;
  for (; col < table.columns.size(); col += static_cast<size_t>(h)) {
    const std::string& first = table.columns[col];
    if (first.rfind("z:", 0) != 0) throw InvalidInputError(path + ": unexpected column " + first);
    size_t sep = first.rfind(':');
    latent_pools.push_back(first.substr(2, sep - 2));
    if (col + static_cast<size_t>(h) > table.columns.size())
      throw InvalidInputError(path + ": truncated latent block");
    for (int k = 0; k < h; ++k) {
      const std::string expected =
          "z:" + latent_pools.back() + ":" + draws.labels[static_cast<size_t>(k)];
      if (table.columns[col + static_cast<size_t>(k)] != expected)
        throw InvalidInputError(path + ": expected column " + expected);
    }
  }

  for (auto& chain : table.rows) {
    draws.freq.push_back(chain.leftCols(h));
    if (!latent_pools.empty()) {
      std::vector<IntMat> per_pool;
      for (size_t i = 0; i < latent_pools.size(); ++i) {
        Mat block = chain.middleCols(h + static_cast<int>(i) * h, h);
        IntMat z = block.array().round().cast<int>();
        if ((z.cast<double>() - block).cwiseAbs().maxCoeff() > 1e-9)
          throw InvalidInputError(path + ": latent counts must be integers");
        per_pool.push_back(std::move(z));
      }
      draws.latents.push_back(std::move(per_pool));
    }
  }
  draws.warnings.resize(table.rows.size());
  return draws;
}

void write_hier_draws(const std::string& dir, const HierDraws& draws,
                      const std::vector<std::string>& pool_ids) {
  const int h = static_cast<int>(draws.labels.size());
  const int n = static_cast<int>(draws.times.size());
  if (static_cast<int>(pool_ids.size()) != n)
    throw InvalidInputError("hierarchical draws need one pool id per time point");
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);

  {
    auto out = open_out((base / "hier_times.tsv").string());
    out << "pool_id\ttime\n";
    for (int i = 0; i < n; ++i)
      out << pool_ids[static_cast<size_t>(i)] << '\t' << fmt(draws.times(i)) << '\n';
    finish_out(out, (base / "hier_times.tsv").string());
  }

  std::vector<std::string> freq_cols;
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < h; ++k)
      freq_cols.push_back(pool_ids[static_cast<size_t>(i)] + "|" +
                          draws.labels[static_cast<size_t>(k)]);
  write_draw_table((base / "hier_frequencies.tsv").string(), freq_cols, draws.frequencies);

  std::vector<std::string> field_cols;
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < h; ++k)
      field_cols.push_back(draws.labels[static_cast<size_t>(k)] + "|t" + std::to_string(j));
  write_draw_table((base / "hier_field.tsv").string(), field_cols, draws.field);

  std::vector<std::string> hyper_cols;
  for (const char* prefix : {"level|", "amplitude|", "timescale|"})
    for (int k = 0; k < h; ++k) hyper_cols.push_back(prefix + draws.labels[static_cast<size_t>(k)]);
  hyper_cols.push_back("noise");
  write_draw_table((base / "hier_hyper.tsv").string(), hyper_cols, draws.hyper);
}

HierDraws read_hier_draws(const std::string& dir) {
  const std::filesystem::path base(dir);
  HierDraws draws;

  const std::string times_path = (base / "hier_times.tsv").string();
  auto lines = read_lines(times_path);
  if (lines.size() < 2) throw InvalidInputError(times_path + ": empty file");
  const char delim = detect_delimiter(lines[0].text);
  if (split_fields(times_path, lines[0], delim) != std::vector<std::string>{"pool_id", "time"})
    fail_at(times_path, lines[0].number, "expected header pool_id, time");
  std::vector<std::string> pool_ids;
  std::vector<double> times;
  for (size_t k = 1; k < lines.size(); ++k) {
    auto fields = split_fields(times_path, lines[k], delim);
    if (fields.size() != 2) fail_at(times_path, lines[k].number, "wrong column count");
    pool_ids.push_back(fields[0]);
    times.push_back(parse_double(times_path, lines[k].number, fields[1]));
  }
  draws.times = Eigen::Map<const Vec>(times.data(), static_cast<int>(times.size()));
  const int n = static_cast<int>(times.size());

  const std::string hyper_path = (base / "hier_hyper.tsv").string();
  DrawTable hyper = read_draw_table(hyper_path);
  for (const auto& c : hyper.columns)
    if (c.rfind("level|", 0) == 0) draws.labels.push_back(c.substr(6));
  const int h = static_cast<int>(draws.labels.size());
  if (h == 0 || static_cast<int>(hyper.columns.size()) != 3 * h + 1)
    throw InvalidInputError(hyper_path + ": malformed hyperparameter columns");
  draws.hyper = std::move(hyper.rows);

  const std::string field_path = (base / "hier_field.tsv").string();
  DrawTable field = read_draw_table(field_path);
  if (static_cast<int>(field.columns.size()) != h * n)
    throw InvalidInputError(field_path + ": expected " + std::to_string(h * n) + " columns");
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < h; ++k) {
      const auto& c = field.columns[static_cast<size_t>(j * h + k)];
      if (before_last_bar(c) != draws.labels[static_cast<size_t>(k)] ||
          after_last_bar(c) != "t" + std::to_string(j))
        throw InvalidInputError(field_path + ": unexpected column " + c);
    }
  draws.field = std::move(field.rows);

  const std::string freq_path = (base / "hier_frequencies.tsv").string();
  DrawTable freq = read_draw_table(freq_path);
  if (static_cast<int>(freq.columns.size()) != h * n)
    throw InvalidInputError(freq_path + ": expected " + std::to_string(h * n) + " columns");
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < h; ++k) {
      const auto& c = freq.columns[static_cast<size_t>(i * h + k)];
      if (before_last_bar(c) != pool_ids[static_cast<size_t>(i)] ||
          after_last_bar(c) != draws.labels[static_cast<size_t>(k)])
        throw InvalidInputError(freq_path + ": unexpected column " + c);
    }
  draws.frequencies = std::move(freq.rows);

  if (draws.hyper.size() != draws.field.size() || draws.hyper.size() != draws.frequencies.size())
    throw InvalidInputError(dir + ": chain counts differ between files");
  for (size_t c = 0; c < draws.hyper.size(); ++c)
    if (draws.hyper[c].rows() != draws.field[c].rows() ||
        draws.hyper[c].rows() != draws.frequencies[c].rows())
      throw InvalidInputError(dir + ": draw counts differ between files");
  draws.warnings.resize(draws.hyper.size());
  return draws;
}

void write_predictive_table(const std::string& path, const PredictiveSummary& summary,
                            const std::vector<std::string>& labels, double level) {
  if (summary.mean.cols() != static_cast<int>(labels.size()))
    throw InvalidInputError("predictive summary disagrees with its labels");
  auto out = open_out(path);
  const double tail = 100.0 * (1.0 - level) / 2.0;
  out << "t\thaplotype\tmean\t" << fmt_percent(tail) << "%\t" << fmt_percent(100.0 - tail)
      << "%\n";
  for (int i = 0; i < summary.times.size(); ++i)
    for (size_t k = 0; k < labels.size(); ++k)
      out << fmt(summary.times(i)) << '\t' << labels[k] << '\t'
          << fmt(summary.mean(i, static_cast<int>(k))) << '\t'
          << fmt(summary.lower(i, static_cast<int>(k))) << '\t'
          << fmt(summary.upper(i, static_cast<int>(k))) << '\n';
  finish_out(out, path);
}

void write_feasible_set(const std::string& path, const std::vector<LatentCounts>& solutions) {
  auto out = open_out(path);
  for (const auto& z : solutions) {
    for (int j = 0; j < z.size(); ++j) out << (j ? " " : "") << z(j);
    out << '\n';
  }
  finish_out(out, path);
}

std::vector<LatentCounts> read_feasible_set(const std::string& path) {
  auto lines = read_lines(path);
  std::vector<LatentCounts> solutions;
  for (const auto& line : lines) {
    std::istringstream in(line.text);
    std::vector<int> values;
    std::string tok;
    while (in >> tok) values.push_back(parse_int(path, line.number, tok));
    if (!solutions.empty() && static_cast<int>(values.size()) != solutions[0].size())
      fail_at(path, line.number, "inconsistent solution length");
    solutions.push_back(Eigen::Map<const IntVec>(values.data(), static_cast<int>(values.size())));
  }
  return solutions;
}

}  // namespace poolfreq
