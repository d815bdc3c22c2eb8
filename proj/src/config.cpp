#include "boba/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "boba/error.hpp"

namespace boba {
namespace {

using Setter = std::function<void(const std::string&)>;
using SectionTable = std::map<std::string, Setter>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  require(res.ec == std::errc() && res.ptr == v.data() + v.size() && !v.empty(), ErrorCode::kConfig,
          key + ": expected an integer, got '" + raw + "'");
  return out;
}

double parse_double(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "inf" || v == "+inf" || v == "infinity") return std::numeric_limits<double>::infinity();
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  require(res.ec == std::errc() && res.ptr == v.data() + v.size() && !v.empty() && std::isfinite(out),
          ErrorCode::kConfig, key + ": expected a number, got '" + raw + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::kConfig, key + ": expected true/false, got '" + raw + "'");
}

template <typename Fn>
auto translate(const std::string& key, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, key + ": " + e.what());
  }
}

std::map<std::string, SectionTable> build_tables(SimConfig& c) {
  std::map<std::string, SectionTable> t;
  auto integer = [](int& dst, const char* key) {
    return Setter([&dst, key](const std::string& v) { dst = parse_integer<int>(key, v); });
  };
  auto real = [](double& dst, const char* key) {
    return Setter([&dst, key](const std::string& v) { dst = parse_double(key, v); });
  };
  auto flag = [](bool& dst, const char* key) {
    return Setter([&dst, key](const std::string& v) { dst = parse_bool(key, v); });
  };
  auto text = [](std::string& dst) { return Setter([&dst](const std::string& v) { dst = trim(v); }); };

  t["task"] = {
      {"classes", integer(c.task.classes, "task.classes")},
      {"dim", integer(c.task.dim, "task.dim")},
      {"per_class", integer(c.task.per_class, "task.per_class")},
      {"separation", real(c.task.separation, "task.separation")},
      {"test_per_class", integer(c.task.test_per_class, "task.test_per_class")},
      {"server_per_class", integer(c.task.server_per_class, "task.server_per_class")},
      {"oracle_per_class", integer(c.task.oracle_per_class, "task.oracle_per_class")},
      {"csv", text(c.task.csv)},
      {"test_csv", text(c.task.test_csv)},
  };
  t["partition"] = {
      {"scheme",
       [&c](const std::string& v) {
         c.partition.scheme = translate("partition.scheme", [&] { return parse_partition_scheme(trim(v)); });
       }},
      {"shards", integer(c.partition.shards_per_client, "partition.shards")},
      {"alpha", real(c.partition.alpha, "partition.alpha")},
      {"honest", integer(c.partition.honest_count, "partition.honest")},
  };
  t["model"] = {
      {"arch", [&c](const std::string& v) { c.model.arch = translate("model.arch", [&] { return parse_arch_kind(trim(v)); }); }},
      {"hidden", integer(c.model.hidden, "model.hidden")},
      {"init_scale", real(c.model.init_scale, "model.init_scale")},
      {"local",
       [&c](const std::string& v) {
         c.model.local = translate("model.local", [&] { return parse_local_variant(trim(v)); });
       }},
      {"epochs", integer(c.model.epochs, "model.epochs")},
      {"prox_mu", real(c.model.prox_mu, "model.prox_mu")},
      {"minibatch", integer(c.model.minibatch, "model.minibatch")},
      {"grad_noise", real(c.model.grad_noise, "model.grad_noise")},
  };
  t["schedule"] = {
      {"rounds", integer(c.schedule.rounds, "schedule.rounds")},
      {"eta", real(c.schedule.eta, "schedule.eta")},
      {"decay_start", integer(c.schedule.decay_start, "schedule.decay_start")},
      {"decay_every", integer(c.schedule.decay_every, "schedule.decay_every")},
      {"decay", real(c.schedule.decay, "schedule.decay")},
      {"participation", real(c.schedule.participation, "schedule.participation")},
  };
  t["aggregator"] = {
      {"name", text(c.aggregator.spec.name)},
      {"f", integer(c.aggregator.f, "aggregator.f")},
      {"pmin", real(c.aggregator.spec.boba.p_min, "aggregator.pmin")},
      {"max_alternations", integer(c.aggregator.spec.boba.max_alternations, "aggregator.max_alternations")},
      {"exhaustive_cap",
       [&c](const std::string& v) {
         c.aggregator.spec.boba.exhaustive_cap = parse_integer<std::int64_t>("aggregator.exhaustive_cap", v);
       }},
      {"bucket_size", integer(c.aggregator.spec.bucket_size, "aggregator.bucket_size")},
      {"geomed_tol", real(c.aggregator.spec.geomed_tol, "aggregator.geomed_tol")},
      {"geomed_max_iter", integer(c.aggregator.spec.geomed_max_iter, "aggregator.geomed_max_iter")},
      {"reference", flag(c.aggregator.reference, "aggregator.reference")},
      {"compare_es", flag(c.aggregator.compare_es, "aggregator.compare_es")},
  };
  t["attack"] = {
      {"kind",
       [&c](const std::string& v) {
         c.attack.spec.kind = translate("attack.kind", [&] { return parse_attack_kind(trim(v)); });
       }},
      {"byzantine", integer(c.attack.byzantine, "attack.byzantine")},
      {"gamma", real(c.attack.spec.gamma, "attack.gamma")},
      {"variance", real(c.attack.spec.variance, "attack.variance")},
      {"gamma_init", real(c.attack.spec.gamma_init, "attack.gamma_init")},
      {"tau", real(c.attack.spec.tau, "attack.tau")},
      {"mimic_target", integer(c.attack.spec.mimic_target, "attack.mimic_target")},
  };
  t["seeds"] = {
      {"master", [&c](const std::string& v) { c.seed = parse_integer<std::uint64_t>("seeds.master", v); }},
  };
  return t;
}

std::string fmt_double(double v) {
  if (std::isinf(v)) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

SimConfig parse_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed config: ") + e.what());
  }
  SimConfig config;
  auto tables = build_tables(config);
  for (const auto& [section, body] : tree) {
    require(!body.empty() || body.data().empty(), ErrorCode::kConfig,
            "key '" + section + "' outside any section");
    const auto table = tables.find(section);
    require(table != tables.end(), ErrorCode::kConfig, "unknown section [" + section + "]");
    for (const auto& [key, value] : body) {
      const auto setter = table->second.find(key);
      require(setter != table->second.end(), ErrorCode::kConfig,
              "unknown key '" + key + "' in [" + section + "]");
      setter->second(value.data());
    }
  }
  validate_config(config);
  return config;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorCode::kConfig, "cannot read config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const SimConfig& c) {
  auto check = [](bool ok, const std::string& key, const std::string& rule) {
    require(ok, ErrorCode::kConfig, key + ": " + rule);
  };
  const bool csv_mode = !c.task.csv.empty();
  check(c.task.classes >= 2, "task.classes", "must be >= 2");
  if (!csv_mode) {
    check(c.task.dim >= c.task.classes - 1, "task.dim", "must be >= classes - 1");
    check(c.task.per_class >= 1, "task.per_class", "must be >= 1");
    check(c.task.separation >= 0.0, "task.separation", "must be >= 0");
    check(c.task.test_per_class >= 1, "task.test_per_class", "must be >= 1");
    check(c.task.oracle_per_class >= 1, "task.oracle_per_class", "must be >= 1");
  } else {
    check(!c.task.test_csv.empty(), "task.test_csv", "required when task.csv is set");
  }
  check(c.task.server_per_class >= 1, "task.server_per_class", "must be >= 1");

  check(c.partition.honest_count >= 1, "partition.honest", "must be >= 1");
  check(c.partition.shards_per_client >= 1, "partition.shards", "must be >= 1");
  if (c.partition.scheme == PartitionScheme::kStep) {
    check(c.partition.alpha >= 1.0, "partition.alpha", "step partition needs alpha >= 1");
  } else if (c.partition.scheme == PartitionScheme::kDirichlet) {
    check(c.partition.alpha > 0.0 && std::isfinite(c.partition.alpha), "partition.alpha",
          "Dirichlet partition needs a finite alpha > 0");
  }

  check(c.model.hidden >= 1, "model.hidden", "must be >= 1");
  check(c.model.init_scale >= 0.0, "model.init_scale", "must be >= 0");
  check(c.model.epochs >= 1, "model.epochs", "must be >= 1");
  check(c.model.prox_mu >= 0.0, "model.prox_mu", "must be >= 0");
  check(c.model.minibatch >= 0, "model.minibatch", "must be >= 0");
  check(c.model.grad_noise >= 0.0, "model.grad_noise", "must be >= 0");

  check(c.schedule.rounds >= 1, "schedule.rounds", "must be >= 1");
  check(c.schedule.eta >= 0.0, "schedule.eta", "must be >= 0");
  check(c.schedule.decay_start >= 0, "schedule.decay_start", "must be >= 0");
  check(c.schedule.decay_every >= 1, "schedule.decay_every", "must be >= 1");
  check(c.schedule.decay > 0.0 && c.schedule.decay <= 1.0, "schedule.decay", "must be in (0, 1]");
  check(c.schedule.participation > 0.0 && c.schedule.participation <= 1.0, "schedule.participation",
        "must be in (0, 1]");

  bool known = false;
  for (const auto& name : aggregator_names()) known = known || name == c.aggregator.spec.name;
  check(known, "aggregator.name", "unknown aggregator '" + c.aggregator.spec.name + "'");
  check(c.aggregator.f >= 0, "aggregator.f", "must be >= 0");
  check(c.aggregator.f < c.partition.honest_count + c.attack.byzantine, "aggregator.f",
        "must be < number of clients");
  check(c.aggregator.spec.boba.p_min <= 0.0, "aggregator.pmin", "must be <= 0");
  check(c.aggregator.spec.boba.max_alternations >= 1, "aggregator.max_alternations", "must be >= 1");
  check(c.aggregator.spec.boba.exhaustive_cap >= 1, "aggregator.exhaustive_cap", "must be >= 1");
  check(c.aggregator.spec.bucket_size >= 1, "aggregator.bucket_size", "must be >= 1");
  check(c.aggregator.spec.geomed_tol > 0.0, "aggregator.geomed_tol", "must be > 0");
  check(c.aggregator.spec.geomed_max_iter >= 1, "aggregator.geomed_max_iter", "must be >= 1");

  check(c.attack.byzantine >= 0, "attack.byzantine", "must be >= 0");
  check(c.attack.spec.gamma >= 0.0, "attack.gamma", "must be >= 0");
  check(c.attack.spec.variance > 0.0, "attack.variance", "must be > 0");
  check(c.attack.spec.gamma_init > 0.0, "attack.gamma_init", "must be > 0");
  check(c.attack.spec.tau > 0.0, "attack.tau", "must be > 0");
  check(c.attack.spec.mimic_target < c.partition.honest_count, "attack.mimic_target",
        "must index an honest client");
}

std::string config_to_string(const SimConfig& c) {
  std::ostringstream o;
  o << "[task]\n"
    << "classes = " << c.task.classes << "\n"
    << "dim = " << c.task.dim << "\n"
    << "per_class = " << c.task.per_class << "\n"
    << "separation = " << fmt_double(c.task.separation) << "\n"
    << "test_per_class = " << c.task.test_per_class << "\n"
    << "server_per_class = " << c.task.server_per_class << "\n"
    << "oracle_per_class = " << c.task.oracle_per_class << "\n";
  if (!c.task.csv.empty()) o << "csv = " << c.task.csv << "\n";
  if (!c.task.test_csv.empty()) o << "test_csv = " << c.task.test_csv << "\n";
  o << "\n[partition]\n"
    << "scheme = " << partition_scheme_name(c.partition.scheme) << "\n"
    << "shards = " << c.partition.shards_per_client << "\n"
    << "alpha = " << fmt_double(c.partition.alpha) << "\n"
    << "honest = " << c.partition.honest_count << "\n"
    << "\n[model]\n"
    << "arch = " << arch_kind_name(c.model.arch) << "\n"
    << "hidden = " << c.model.hidden << "\n"
    << "init_scale = " << fmt_double(c.model.init_scale) << "\n"
    << "local = " << local_variant_name(c.model.local) << "\n"
    << "epochs = " << c.model.epochs << "\n"
    << "prox_mu = " << fmt_double(c.model.prox_mu) << "\n"
    << "minibatch = " << c.model.minibatch << "\n"
    << "grad_noise = " << fmt_double(c.model.grad_noise) << "\n"
    << "\n[schedule]\n"
    << "rounds = " << c.schedule.rounds << "\n"
    << "eta = " << fmt_double(c.schedule.eta) << "\n"
    << "decay_start = " << c.schedule.decay_start << "\n"
    << "decay_every = " << c.schedule.decay_every << "\n"
    << "decay = " << fmt_double(c.schedule.decay) << "\n"
    << "participation = " << fmt_double(c.schedule.participation) << "\n"
    << "\n[aggregator]\n"
    << "name = " << c.aggregator.spec.name << "\n"
    << "f = " << c.aggregator.f << "\n"
    << "pmin = " << fmt_double(c.aggregator.spec.boba.p_min) << "\n"
    << "max_alternations = " << c.aggregator.spec.boba.max_alternations << "\n"
    << "exhaustive_cap = " << c.aggregator.spec.boba.exhaustive_cap << "\n"
    << "bucket_size = " << c.aggregator.spec.bucket_size << "\n"
    << "geomed_tol = " << fmt_double(c.aggregator.spec.geomed_tol) << "\n"
    << "geomed_max_iter = " << c.aggregator.spec.geomed_max_iter << "\n"
    << "reference = " << (c.aggregator.reference ? "true" : "false") << "\n"
    << "compare_es = " << (c.aggregator.compare_es ? "true" : "false") << "\n"
    << "\n[attack]\n"
    << "kind = " << attack_kind_name(c.attack.spec.kind) << "\n"
    << "byzantine = " << c.attack.byzantine << "\n"
    << "gamma = " << fmt_double(c.attack.spec.gamma) << "\n"
    << "variance = " << fmt_double(c.attack.spec.variance) << "\n"
    << "gamma_init = " << fmt_double(c.attack.spec.gamma_init) << "\n"
    << "tau = " << fmt_double(c.attack.spec.tau) << "\n"
    << "mimic_target = " << c.attack.spec.mimic_target << "\n"
    << "\n[seeds]\n"
    << "master = " << c.seed << "\n";
  return o.str();
}

double learning_rate_at(const ScheduleConfig& s, int round) {
  if (round < s.decay_start) return s.eta;
  const int steps = (round - s.decay_start) / s.decay_every + 1;
  return s.eta * std::pow(s.decay, steps);
}

}  // namespace boba
