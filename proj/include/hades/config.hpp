#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hades/acquisition.hpp"
#include "hades/metrics.hpp"
#include "hades/oracles.hpp"

namespace hades {

struct OracleSpec {
  enum class Kind { nk, lookup };
  Kind kind = Kind::nk;
  std::string path;
  std::size_t sites = 2;
  std::size_t symbols = 20;
  std::size_t k = 1;
  std::uint64_t seed = 1;
  UnknownPolicy unknown = UnknownPolicy::error;
};

/// Everything a command needs: run parameters, task, oracle, outputs.
struct CliConfig {
  RunConfig run;
  std::string alphabet{kAminoAcids};
  /// Empty selects the first alphabet symbol repeated at every site.
  std::string wild_type;
  std::string full_template;
  std::vector<std::size_t> mutable_positions;
  OracleSpec oracle;
  ProxyMode proxy_mode = ProxyMode::weighted_hamming;
  std::uint64_t proxy_seed = 7;
  std::string out_dir = "hades_out";
  std::vector<std::uint64_t> seeds{0};
  std::vector<int> k_grid{16, 32, 64, 128};
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) parts.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) parts.emplace_back();
  return parts;
}

template <class T>
T parse_number(const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = b + text.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw Error("expected a number, got '" + text + "'");
  return v;
}

template <class T>
std::string format_number(T v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

inline bool parse_bool(const std::string& s) {
  if (s == "true" || s == "on" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "off" || s == "0" || s == "no") return false;
  throw Error("expected a boolean (true/false/on/off), got '" + s + "'");
}

inline std::string format_bool(bool b) { return b ? "true" : "false"; }

template <class T>
std::vector<T> parse_list(const std::string& s) {
  std::vector<T> out;
  if (trim(s).empty()) return out;
  for (const auto& part : split(s, ',')) out.push_back(parse_number<T>(part));
  return out;
}

template <class T>
std::string format_list(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + format_number(xs[i]);
  return out;
}

inline std::string format_oracle(const OracleSpec& o) {
  if (o.kind == OracleSpec::Kind::lookup) return "lookup:" + o.path;
  return "nk:" + format_number(o.sites) + "," + format_number(o.symbols) + "," + format_number(o.k) + "," +
         format_number(o.seed);
}

inline void parse_oracle(const std::string& s, OracleSpec& o) {
  if (s.rfind("lookup:", 0) == 0) {
    o.kind = OracleSpec::Kind::lookup;
    o.path = s.substr(7);
    if (o.path.empty()) throw Error("lookup oracle needs a path");
    return;
  }
  if (s.rfind("nk:", 0) == 0) {
    auto parts = split(s.substr(3), ',');
    if (parts.size() != 4) throw Error("nk oracle expects nk:L,S,k,seed");
    o.kind = OracleSpec::Kind::nk;
    o.sites = parse_number<std::size_t>(parts[0]);
    o.symbols = parse_number<std::size_t>(parts[1]);
    o.k = parse_number<std::size_t>(parts[2]);
    o.seed = parse_number<std::uint64_t>(parts[3]);
    return;
  }
  throw Error("oracle must be lookup:PATH or nk:L,S,k,seed, got '" + s + "'");
}

struct Key {
  std::string name;
  std::function<std::string(const CliConfig&)> get;
  std::function<void(CliConfig&, const std::string&)> set;
};

#define HADES_NUM_KEY(NAME, FIELD)                                                                  \
  Key {                                                                                            \
    NAME, [](const CliConfig& c) { return format_number(c.FIELD); },                               \
        [](CliConfig& c, const std::string& v) { c.FIELD = parse_number<decltype(c.FIELD)>(v); } \
  }
#define HADES_BOOL_KEY(NAME, FIELD)                                                         \
  Key {                                                                                    \
    NAME, [](const CliConfig& c) { return format_bool(c.FIELD); },                         \
        [](CliConfig& c, const std::string& v) { c.FIELD = parse_bool(v); }                \
  }

inline const std::vector<Key>& registry() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(HADES_NUM_KEY("rounds", run.rounds));
    k.push_back(HADES_NUM_KEY("queries_per_round", run.queries_per_round));
    k.push_back(HADES_NUM_KEY("ensemble_size", run.ensemble_size));
    k.push_back(HADES_NUM_KEY("init_mutations", run.init_mutations));
    k.push_back(HADES_NUM_KEY("max_chain_restarts", run.max_chain_restarts));
    k.push_back({"proposals",
                 [](const CliConfig& c) { return std::string(c.run.proposals == ProposalMode::hmc ? "hmc" : "random"); },
                 [](CliConfig& c, const std::string& v) {
                   if (v == "hmc") c.run.proposals = ProposalMode::hmc;
                   else if (v == "random") c.run.proposals = ProposalMode::random;
                   else throw Error("expected hmc or random, got '" + v + "'");
                 }});
    k.push_back(HADES_BOOL_KEY("ablation.structure", run.use_structure));
    k.push_back(HADES_BOOL_KEY("ablation.ucb", run.use_ucb));
    k.push_back(HADES_NUM_KEY("hmc.epsilon", run.hmc.epsilon));
    k.push_back(HADES_NUM_KEY("hmc.trajectory_length", run.hmc.trajectory_length));
    k.push_back(HADES_NUM_KEY("hmc.mass", run.hmc.mass));
    k.push_back(HADES_NUM_KEY("hmc.max_reflections", run.hmc.max_reflections));
    k.push_back(HADES_NUM_KEY("hmc.chains", run.hmc.chains));
    k.push_back({"hmc.barriers",
                 [](const CliConfig& c) {
                   return std::string(c.run.hmc.barriers == BarrierMode::reflect ? "reflect" : "clamp");
                 },
                 [](CliConfig& c, const std::string& v) {
                   if (v == "reflect") c.run.hmc.barriers = BarrierMode::reflect;
                   else if (v == "clamp") c.run.hmc.barriers = BarrierMode::clamp;
                   else throw Error("expected reflect or clamp, got '" + v + "'");
                 }});
    k.push_back({"hmc.continue_from",
                 [](const CliConfig& c) {
                   return std::string(c.run.hmc.continue_from == ContinueFrom::continuous ? "continuous" : "discrete");
                 },
                 [](CliConfig& c, const std::string& v) {
                   if (v == "continuous") c.run.hmc.continue_from = ContinueFrom::continuous;
                   else if (v == "discrete") c.run.hmc.continue_from = ContinueFrom::discrete;
                   else throw Error("expected continuous or discrete, got '" + v + "'");
                 }});
    k.push_back(HADES_BOOL_KEY("hmc.resample_every_step", run.hmc.resample_every_step));
    k.push_back(HADES_BOOL_KEY("hmc.keep_rejected", run.hmc.keep_rejected));
    k.push_back(HADES_NUM_KEY("train.learning_rate", run.train.learning_rate));
    k.push_back(HADES_NUM_KEY("train.patience", run.train.patience));
    k.push_back(HADES_NUM_KEY("train.batch_size", run.train.batch_size));
    k.push_back(HADES_NUM_KEY("train.max_epochs", run.train.max_epochs));
    k.push_back(HADES_BOOL_KEY("train.warm_start", run.warm_start));
    k.push_back(HADES_NUM_KEY("model.hidden_width", run.model.hidden_width));
    k.push_back(HADES_NUM_KEY("model.encoder_depth", run.model.encoder_depth));
    k.push_back({"task.alphabet", [](const CliConfig& c) { return c.alphabet; },
                 [](CliConfig& c, const std::string& v) { c.alphabet = v; }});
    k.push_back({"task.wild_type", [](const CliConfig& c) { return c.wild_type; },
                 [](CliConfig& c, const std::string& v) { c.wild_type = v; }});
    k.push_back({"task.template", [](const CliConfig& c) { return c.full_template; },
                 [](CliConfig& c, const std::string& v) { c.full_template = v; }});
    k.push_back({"task.mutable_positions", [](const CliConfig& c) { return format_list(c.mutable_positions); },
                 [](CliConfig& c, const std::string& v) { c.mutable_positions = parse_list<std::size_t>(v); }});
    k.push_back({"oracle", [](const CliConfig& c) { return format_oracle(c.oracle); },
                 [](CliConfig& c, const std::string& v) { parse_oracle(v, c.oracle); }});
    k.push_back({"oracle.unknown_policy",
                 [](const CliConfig& c) {
                   return std::string(c.oracle.unknown == UnknownPolicy::error ? "error" : "zero");
                 },
                 [](CliConfig& c, const std::string& v) {
                   if (v == "error") c.oracle.unknown = UnknownPolicy::error;
                   else if (v == "zero") c.oracle.unknown = UnknownPolicy::zero;
                   else throw Error("expected error or zero, got '" + v + "'");
                 }});
    k.push_back({"proxy.mode",
                 [](const CliConfig& c) {
                   return std::string(c.proxy_mode == ProxyMode::weighted_hamming ? "weighted_hamming"
                                                                                   : "smooth_random");
                 },
                 [](CliConfig& c, const std::string& v) {
                   if (v == "weighted_hamming") c.proxy_mode = ProxyMode::weighted_hamming;
                   else if (v == "smooth_random") c.proxy_mode = ProxyMode::smooth_random;
                   else throw Error("expected weighted_hamming or smooth_random, got '" + v + "'");
                 }});
    k.push_back(HADES_NUM_KEY("proxy.seed", proxy_seed));
    k.push_back({"seeds", [](const CliConfig& c) { return format_list(c.seeds); },
                 [](CliConfig& c, const std::string& v) { c.seeds = parse_list<std::uint64_t>(v); }});
    k.push_back({"bench.k_grid", [](const CliConfig& c) { return format_list(c.k_grid); },
                 [](CliConfig& c, const std::string& v) { c.k_grid = parse_list<int>(v); }});
    k.push_back(HADES_NUM_KEY("jobs", run.jobs));
    k.push_back({"out", [](const CliConfig& c) { return c.out_dir; },
                 [](CliConfig& c, const std::string& v) { c.out_dir = v; }});
    return k;
  }();
  return keys;
}

#undef HADES_NUM_KEY
#undef HADES_BOOL_KEY

}  // namespace config_detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const auto& k : config_detail::registry()) names.push_back(k.name);
  return names;
}

inline void set_config_value(CliConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_detail::registry()) {
    if (k.name != key) continue;
    try {
      k.set(cfg, value);
    } catch (const std::exception& e) {
      throw Error("config key '" + key + "': " + e.what());
    }
    return;
  }
  throw Error("unknown config key '" + key + "'");
}

inline std::string get_config_value(const CliConfig& cfg, const std::string& key) {
  for (const auto& k : config_detail::registry())
    if (k.name == key) return k.get(cfg);
  throw Error("unknown config key '" + key + "'");
}

/// Reads `key = value` lines; `#` starts a comment line.
inline void apply_config(CliConfig& cfg, std::istream& in, const std::string& source = "config") {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(source + ":" + std::to_string(lineno) + ": expected key = value");
    try {
      set_config_value(cfg, config_detail::trim(t.substr(0, eq)), config_detail::trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline CliConfig parse_config(const std::string& text) {
  CliConfig cfg;
  std::istringstream in(text);
  apply_config(cfg, in);
  return cfg;
}

inline CliConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  CliConfig cfg;
  apply_config(cfg, in, path);
  return cfg;
}

inline std::string serialize_config(const CliConfig& cfg) {
  std::string out;
  for (const auto& k : config_detail::registry()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

/// Settings that determine results; output location and thread count are left out.
inline ConfigEcho config_echo(const CliConfig& cfg) {
  ConfigEcho echo;
  for (const auto& k : config_detail::registry())
    if (k.name != "out" && k.name != "jobs" && k.name != "seeds") echo.emplace_back(k.name, k.get(cfg));
  return echo;
}

inline void validate_config(const CliConfig& cfg) {
  if (cfg.seeds.empty()) throw Error("seed list is empty");
  cfg.run.validate();
}

inline TaskDefinition make_task(const CliConfig& cfg) {
  TaskDefinition task;
  task.alphabet = Alphabet(cfg.alphabet);
  if (!cfg.wild_type.empty()) {
    task.wild_type = parse_sequence(cfg.wild_type, task.alphabet);
  } else if (cfg.oracle.kind == OracleSpec::Kind::nk) {
    task.wild_type = Sequence(std::vector<int>(cfg.oracle.sites, 0));
  } else {
    throw Error("task.wild_type is required with a lookup oracle");
  }
  if (!cfg.full_template.empty()) task.full_sequence_template = cfg.full_template;
  task.mutable_positions = cfg.mutable_positions;
  task.validate();
  return task;
}

inline std::unique_ptr<Landscape> make_landscape(const CliConfig& cfg, const TaskDefinition& task) {
  std::unique_ptr<Landscape> land;
  if (cfg.oracle.kind == OracleSpec::Kind::nk) {
    if (cfg.oracle.sites != task.length())
      throw Error("nk oracle has L=" + std::to_string(cfg.oracle.sites) + " but the wild type has " +
                  std::to_string(task.length()) + " sites");
    if (cfg.oracle.symbols != task.alphabet.size())
      throw Error("nk oracle has S=" + std::to_string(cfg.oracle.symbols) + " but the alphabet has " +
                  std::to_string(task.alphabet.size()) + " symbols");
    land = std::make_unique<NkLandscape>(cfg.oracle.sites, cfg.oracle.symbols, cfg.oracle.k, cfg.oracle.seed);
  } else {
    land = std::make_unique<LookupLandscape>(load_lookup(cfg.oracle.path, task, cfg.oracle.unknown));
  }
  land->attach_structure(
      {ProxyStructureOracle(task.length(), task.alphabet.size(), cfg.proxy_mode, cfg.proxy_seed), task.wild_type});
  return land;
}

}  // namespace hades
