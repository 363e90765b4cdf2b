#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mcg/harness.hpp"

namespace mcg {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

std::vector<std::string> metrics_header(const GameSpec& spec) {
  const int n = spec.n_agents();
  std::vector<std::string> h = {"iteration", "seed"};
  for (int i = 0; i < n; ++i) h.push_back("return_a" + std::to_string(i));
  for (int i = 0; i < n; ++i) h.push_back("disc_return_a" + std::to_string(i));
  h.push_back("welfare");
  h.push_back("agreement_rate");
  for (int i = 0; i < n; ++i) {
    for (const auto& label : spec.action_labels[i]) {
      h.push_back("proposal_freq_a" + std::to_string(i) + "_" + label);
    }
  }
  h.push_back("entropy_coef");
  h.push_back("temperature");
  return h;
}

std::string metrics_csv_row(const MetricsRow& row) {
  std::string out = std::to_string(row.iteration) + "," + std::to_string(row.seed);
  for (double v : row.returns) out += "," + fmt(v);
  for (double v : row.discounted_returns) out += "," + fmt(v);
  out += "," + fmt(row.welfare);
  out += "," + fmt(row.agreement_rate);
  for (const auto& agent : row.proposal_freq) {
    for (double v : agent) out += "," + fmt(v);
  }
  out += "," + fmt(row.entropy_coef);
  out += "," + fmt(row.temperature);
  return out;
}

void write_metrics_csv(std::ostream& out, const GameSpec& spec, const std::vector<MetricsRow>& rows) {
  const auto header = metrics_header(spec);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) out << metrics_csv_row(row) << '\n';
}

int MetricsTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

MetricsTable read_metrics_csv(std::istream& in, std::ostream* warnings) {
  MetricsTable table;
  std::string line;
  if (!std::getline(in, line)) return table;
  table.header = split(line, ',');
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    std::vector<double> values;
    bool ok = cells.size() == table.header.size();
    for (const auto& cell : cells) {
      if (!ok) break;
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') ok = false;
      values.push_back(v);
    }
    if (!ok) {
      if (warnings) *warnings << "warning: skipping malformed metrics row " << line_no << '\n';
      continue;
    }
    table.rows.push_back(std::move(values));
  }
  return table;
}

MetricsTable aggregate_metrics(const std::vector<MetricsTable>& per_seed) {
  MetricsTable out;
  if (per_seed.empty()) return out;
  const auto& header = per_seed.front().header;
  for (const auto& t : per_seed) {
    if (t.header != header) throw ConfigError("metrics files have different columns");
  }
  const int it_col = per_seed.front().column("iteration");
  const int seed_col = per_seed.front().column("seed");
  if (it_col < 0) throw ConfigError("metrics file lacks an iteration column");
  std::vector<int> value_cols;
  out.header = {"iteration", "n_seeds"};
  for (int c = 0; c < static_cast<int>(header.size()); ++c) {
    if (c == it_col || c == seed_col) continue;
    value_cols.push_back(c);
    out.header.push_back(header[c] + "_mean");
    out.header.push_back(header[c] + "_stderr");
  }
  // iteration -> row per table
  std::vector<std::map<long, const std::vector<double>*>> index(per_seed.size());
  std::set<long> common;
  for (std::size_t s = 0; s < per_seed.size(); ++s) {
    for (const auto& row : per_seed[s].rows) index[s][std::lround(row[it_col])] = &row;
  }
  for (const auto& [it, row] : index[0]) {
    bool everywhere = true;
    for (std::size_t s = 1; s < index.size(); ++s) everywhere = everywhere && index[s].count(it);
    if (everywhere) common.insert(it);
  }
  const double n = static_cast<double>(per_seed.size());
  for (long it : common) {
    std::vector<double> row = {static_cast<double>(it), n};
    for (int c : value_cols) {
      double mean = 0.0;
      for (const auto& idx : index) mean += (*idx.at(it))[c];
      mean /= n;
      double ss = 0.0;
      for (const auto& idx : index) {
        const double d = (*idx.at(it))[c] - mean;
        ss += d * d;
      }
      const double stderr_ = n > 1 ? std::sqrt(ss / (n - 1.0)) / std::sqrt(n) : 0.0;
      row.push_back(mean);
      row.push_back(stderr_);
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

void write_table_csv(std::ostream& out, const MetricsTable& table) {
  for (std::size_t i = 0; i < table.header.size(); ++i) out << (i ? "," : "") << table.header[i];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
    out << '\n';
  }
}

std::string resolve_output_dir(const std::string& configured) {
  const char* env = std::getenv(kOutputDirEnv);
  return env && *env ? std::string(env) : configured;
}

RunSummary run_experiment(const ExperimentConfig& config, std::uint64_t seed_offset) {
  config.validate();
  const GameSpec spec = make_env(config.env);
  RunSummary summary;
  summary.output_dir = resolve_output_dir(config.output_dir);
  std::filesystem::create_directories(summary.output_dir);
  {
    std::ofstream cfg(summary.output_dir + "/config.txt");
    cfg << serialize_config(config);
  }
  const int n_seeds = static_cast<int>(config.seeds.size());
  std::vector<std::vector<MetricsRow>> metrics(n_seeds);
  summary.metrics_files.resize(n_seeds);
  summary.checkpoint_files.resize(n_seeds);
  std::atomic<int> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;

  auto worker = [&] {
    while (true) {
      const int s = next.fetch_add(1);
      if (s >= n_seeds) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error) return;
      }
      const std::uint64_t seed = config.seeds[s] + seed_offset;
      try {
        TrainResult result = train_seed(config, spec, seed);
        const std::string tag = std::to_string(seed);
        summary.metrics_files[s] = summary.output_dir + "/metrics_seed" + tag + ".csv";
        summary.checkpoint_files[s] = summary.output_dir + "/checkpoint_seed" + tag + ".txt";
        std::ofstream m(summary.metrics_files[s]);
        write_metrics_csv(m, spec, result.metrics);
        auto meta = env_meta(config.env);
        meta["algorithm"] = to_string(config.algorithm);
        meta["seed"] = tag;
        meta["iterations"] = std::to_string(config.trainer.iterations);
        std::ofstream ck(summary.checkpoint_files[s]);
        write_checkpoint(ck, spec, result.policies, meta);
        metrics[s] = std::move(result.metrics);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) {
          try {
            throw std::runtime_error("seed " + std::to_string(seed) + ": " + e.what());
          } catch (...) {
            error = std::current_exception();
          }
        }
      }
    }
  };
  const int workers = std::min(config.workers, n_seeds);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  std::vector<MetricsTable> tables;
  for (int s = 0; s < n_seeds; ++s) {
    std::ostringstream csv;
    write_metrics_csv(csv, spec, metrics[s]);
    std::istringstream back(csv.str());
    tables.push_back(read_metrics_csv(back));
  }
  summary.aggregate_file = summary.output_dir + "/metrics_aggregate.csv";
  std::ofstream agg(summary.aggregate_file);
  write_table_csv(agg, aggregate_metrics(tables));
  return summary;
}

}  // namespace mcg
