#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mcg/baselines.hpp"
#include "mcg/envs.hpp"
#include "mcg/harness.hpp"

namespace mcg {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("key " + key + ": expected a number, got '" + v + "'");
  }
}

int to_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<int>(x);
  } catch (const std::exception&) {
    throw ConfigError("key " + key + ": expected an integer, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("key " + key + ": expected true or false, got '" + v + "'");
}

OptimizerKind to_optimizer(const std::string& key, const std::string& v) {
  if (v == "adam") return OptimizerKind::adam;
  if (v == "sgd") return OptimizerKind::sgd;
  throw ConfigError("key " + key + ": expected adam or sgd, got '" + v + "'");
}

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

struct Key {
  std::string name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

#define MCG_DOUBLE_KEY(NAME, FIELD)                                            \
  Key {                                                                        \
    NAME, [](const ExperimentConfig& c) { return fmt(c.FIELD); },              \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); } \
  }
#define MCG_INT_KEY(NAME, FIELD)                                                   \
  Key {                                                                            \
    NAME, [](const ExperimentConfig& c) { return std::to_string(c.FIELD); },       \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_int(NAME, v); } \
  }
#define MCG_BOOL_KEY(NAME, FIELD)                                                    \
  Key {                                                                              \
    NAME, [](const ExperimentConfig& c) { return std::string(c.FIELD ? "true" : "false"); }, \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); }  \
  }
#define MCG_OPTIMIZER_KEY(NAME, FIELD)                                                  \
  Key {                                                                                 \
    NAME, [](const ExperimentConfig& c) { return optimizer_name(c.FIELD); },            \
        [](ExperimentConfig& c, const std::string& v) { c.FIELD = to_optimizer(NAME, v); } \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"env.name", [](const ExperimentConfig& c) { return c.env.name; },
       [](ExperimentConfig& c, const std::string& v) { c.env.name = v; }},
      MCG_INT_KEY("env.grid_size", env.grid_size),
      MCG_INT_KEY("env.horizon", env.horizon),
      MCG_INT_KEY("env.mega_step", env.mega_step),
      MCG_INT_KEY("env.n_agents", env.n_agents),
      MCG_DOUBLE_KEY("env.benefit_factor", env.benefit_factor),
      MCG_DOUBLE_KEY("env.gamma", env.gamma),
      {"algorithm", [](const ExperimentConfig& c) { return to_string(c.algorithm); },
       [](ExperimentConfig& c, const std::string& v) { c.algorithm = parse_algorithm(v); }},
      MCG_INT_KEY("train.iterations", trainer.iterations),
      MCG_INT_KEY("train.batch_size", trainer.batch_size),
      MCG_DOUBLE_KEY("train.lr_policy", trainer.lr_policy),
      MCG_DOUBLE_KEY("train.lr_value", trainer.lr_value),
      MCG_DOUBLE_KEY("train.lambda_ic", trainer.lambda_ic),
      MCG_INT_KEY("train.updates_per_iteration", trainer.updates_per_iteration),
      MCG_DOUBLE_KEY("train.entropy.start", trainer.entropy.start),
      MCG_DOUBLE_KEY("train.entropy.decay", trainer.entropy.decay),
      MCG_DOUBLE_KEY("train.entropy.min", trainer.entropy.min),
      MCG_BOOL_KEY("train.entropy.proposal", trainer.entropy_targets.proposal),
      MCG_BOOL_KEY("train.entropy.commit", trainer.entropy_targets.commit),
      MCG_BOOL_KEY("train.entropy.action", trainer.entropy_targets.action),
      MCG_DOUBLE_KEY("train.temperature.start", trainer.temperature.start),
      MCG_DOUBLE_KEY("train.temperature.decay", trainer.temperature.decay),
      MCG_DOUBLE_KEY("train.temperature.min", trainer.temperature.min),
      MCG_BOOL_KEY("train.discounted_state_weighting", trainer.discounted_state_weighting),
      MCG_OPTIMIZER_KEY("train.optimizer", trainer.optimizer),
      MCG_OPTIMIZER_KEY("train.critic_optimizer", trainer.critic_optimizer),
      {"train.critic_normalization",
       [](const ExperimentConfig& c) {
         return std::string(c.trainer.critic_normalization == CriticNormalization::cell ? "cell"
                                                                                       : "batch");
       },
       [](ExperimentConfig& c, const std::string& v) {
         if (v == "cell") {
           c.trainer.critic_normalization = CriticNormalization::cell;
         } else if (v == "batch") {
           c.trainer.critic_normalization = CriticNormalization::batch;
         } else {
           throw ConfigError("key train.critic_normalization: expected cell or batch, got '" + v + "'");
         }
       }},
      MCG_DOUBLE_KEY("train.adam.beta1", trainer.adam_beta1),
      MCG_DOUBLE_KEY("train.adam.beta2", trainer.adam_beta2),
      MCG_DOUBLE_KEY("train.adam.epsilon", trainer.adam_epsilon),
      MCG_DOUBLE_KEY("train.grad_clip", trainer.grad_clip),
      MCG_BOOL_KEY("train.force_reject", trainer.force_reject),
      MCG_DOUBLE_KEY("train.model_init_scale", trainer.model_init_scale),
      MCG_INT_KEY("train.metric_every", trainer.metric_every),
      {"run.seeds",
       [](const ExperimentConfig& c) {
         std::string out;
         for (std::size_t i = 0; i < c.seeds.size(); ++i) {
           if (i) out += ',';
           out += std::to_string(c.seeds[i]);
         }
         return out;
       },
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         std::stringstream ss(v);
         std::string item;
         while (std::getline(ss, item, ',')) {
           item = trim(item);
           if (item.empty()) continue;
           try {
             std::size_t used = 0;
             c.seeds.push_back(std::stoull(item, &used));
             if (used != item.size()) throw std::invalid_argument(item);
           } catch (const std::exception&) {
             throw ConfigError("key run.seeds: bad seed '" + item + "'");
           }
         }
       }},
      {"run.output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
       [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; }},
      MCG_INT_KEY("run.workers", workers),
  };
  return table;
}

#undef MCG_DOUBLE_KEY
#undef MCG_INT_KEY
#undef MCG_BOOL_KEY
#undef MCG_OPTIMIZER_KEY

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::dcl: return "dcl";
    case Algorithm::dcl_ic: return "dcl-ic";
    case Algorithm::dcl_decentralized: return "dcl-decentralized";
    case Algorithm::dcl_decentralized_ic: return "dcl-decentralized-ic";
    case Algorithm::independent_pg: return "independent-pg";
  }
  return "unknown";
}

Algorithm parse_algorithm(const std::string& name) {
  for (Algorithm a : {Algorithm::dcl, Algorithm::dcl_ic, Algorithm::dcl_decentralized,
                      Algorithm::dcl_decentralized_ic, Algorithm::independent_pg}) {
    if (to_string(a) == name) return a;
  }
  throw ConfigError("unknown algorithm '" + name +
                    "' (expected dcl, dcl-ic, dcl-decentralized, dcl-decentralized-ic or "
                    "independent-pg)");
}

ExperimentConfig ExperimentConfig::defaults(const std::string& env_name) {
  ExperimentConfig c;
  c.env.name = env_name;
  TrainerConfig& t = c.trainer;
  if (env_name == "pd" || env_name == "public-goods") {
    t.iterations = 10000;
    t.batch_size = 128;
    t.updates_per_iteration = 1;
    t.entropy = {1.0, 0.0005, 0.0};
    t.temperature = {10.0, 0.05, 1.0};
    t.metric_every = 1;
    c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    if (env_name == "public-goods") {
      t.batch_size = 256;
      c.seeds = {0, 1, 2, 3, 4};
    }
  } else if (env_name == "grid" || env_name == "rpc") {
    t.iterations = 10000;
    t.batch_size = 512;
    t.updates_per_iteration = 30;
    t.entropy = {2.0, 0.0005, 0.001};
    t.temperature = {1.0, 0.0, 1.0};
    t.metric_every = 10;
    c.env.horizon = 16;
    c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  } else {
    throw ConfigError("unknown environment '" + env_name +
                      "' (expected pd, grid, rpc or public-goods)");
  }
  return c;
}

TrainerConfig ExperimentConfig::effective_trainer() const {
  TrainerConfig t = trainer;
  t.mode = algorithm == Algorithm::dcl_decentralized || algorithm == Algorithm::dcl_decentralized_ic
               ? TrainMode::decentralized
               : TrainMode::centralized;
  t.ic_enabled = algorithm == Algorithm::dcl_ic || algorithm == Algorithm::dcl_decentralized_ic;
  return t;
}

void ExperimentConfig::validate() const {
  make_env(env);
  effective_trainer().validate();
  if (seeds.empty()) throw ConfigError("run.seeds must list at least one seed");
  if (workers < 1) throw ConfigError("run.workers must be positive");
}

ExperimentConfig parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  int line_no = 0;
  std::string env_name = "pd";
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "env.name") env_name = value;
    entries.emplace_back(key, value);
  }
  ExperimentConfig config = ExperimentConfig::defaults(env_name);
  for (const auto& [key, value] : entries) {
    bool found = false;
    for (const auto& k : keys()) {
      if (k.name == key) {
        k.set(config, value);
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown config key '" + key + "'");
  }
  config.validate();
  return config;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  return parse_config(in);
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& config) {
  std::string out;
  for (const auto& k : keys()) out += k.name + " = " + k.get(config) + "\n";
  return out;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  for (const auto& k : keys()) {
    if (k.get(a) != k.get(b)) return false;
  }
  return true;
}

GameSpec make_env(const EnvConfig& env) {
  if (env.name == "pd") return envs::prisoners_dilemma(env.gamma);
  if (env.name == "grid") return envs::grid_game(env.grid_size, env.horizon, env.gamma);
  if (env.name == "rpc") return envs::repeated_conflict(env.horizon, env.mega_step, env.gamma);
  if (env.name == "public-goods") {
    return envs::public_goods(env.n_agents, env.benefit_factor, env.gamma);
  }
  throw ConfigError("unknown environment '" + env.name + "'");
}

std::map<std::string, std::string> env_meta(const EnvConfig& env) {
  ExperimentConfig c;
  c.env = env;
  std::map<std::string, std::string> meta;
  for (const auto& k : keys()) {
    if (k.name.rfind("env.", 0) == 0) meta[k.name] = k.get(c);
  }
  return meta;
}

EnvConfig env_from_meta(const std::map<std::string, std::string>& meta) {
  ExperimentConfig c;
  for (const auto& k : keys()) {
    if (k.name.rfind("env.", 0) != 0) continue;
    auto it = meta.find(k.name);
    if (it == meta.end()) throw ConfigError("checkpoint metadata lacks " + k.name);
    k.set(c, it->second);
  }
  return c.env;
}

TrainResult train_seed(const ExperimentConfig& config, const GameSpec& spec, std::uint64_t seed) {
  const TrainerConfig trainer = config.effective_trainer();
  if (config.algorithm == Algorithm::independent_pg) {
    return train_independent(spec, independent_from(trainer), seed);
  }
  return train_dcl(spec, trainer, seed);
}

}  // namespace mcg
