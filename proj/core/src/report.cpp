#include "fedsim/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "fedsim/errors.hpp"
#include "fedsim/gamma_probe.hpp"

#include "json.hpp"

namespace fedsim::report {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& path, const std::string& why) {
  throw ConfigError("config key '" + path + "': " + why);
}

void expect_keys(const json& obj, const std::string& path,
                 const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.contains(key)) bad_key(path + "." + key, "unknown key");
  }
}

template <typename T>
T get_or(const json& obj, const std::string& path, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    bad_key(path + "." + key, "type mismatch");
  }
}

DatasetSpec parse_dataset(const json& obj) {
  const std::string type = get_or<std::string>(obj, "dataset", "type", "synthetic");
  if (type == "synthetic") {
    expect_keys(obj, "dataset",
                {"type", "classes", "per_class", "dim", "test_per_class", "seed"});
    SyntheticSpec s;
    s.classes = get_or(obj, "dataset", "classes", s.classes);
    s.per_class = get_or(obj, "dataset", "per_class", s.per_class);
    s.dim = get_or(obj, "dataset", "dim", s.dim);
    s.test_per_class = get_or(obj, "dataset", "test_per_class", s.test_per_class);
    s.seed = get_or(obj, "dataset", "seed", s.seed);
    if (s.test_per_class < 1) bad_key("dataset.test_per_class", "must be >= 1");
    return s;
  }
  if (type == "idx") {
    expect_keys(obj, "dataset",
                {"type", "train_images", "train_labels", "test_images",
                 "test_labels", "train_limit"});
    IdxSpec s;
    for (const char* key :
         {"train_images", "train_labels", "test_images", "test_labels"})
      if (!obj.contains(key)) bad_key(std::string("dataset.") + key, "required");
    s.train_images = obj.at("train_images").get<std::string>();
    s.train_labels = obj.at("train_labels").get<std::string>();
    s.test_images = obj.at("test_images").get<std::string>();
    s.test_labels = obj.at("test_labels").get<std::string>();
    s.train_limit = get_or<std::size_t>(obj, "dataset", "train_limit", 0);
    return s;
  }
  bad_key("dataset.type", "must be 'synthetic' or 'idx'");
}

}  // namespace

ExperimentSpec parse_config_text(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  expect_keys(root, "",
              {"name", "output", "dataset", "model", "federated", "partition",
               "strategy", "gamma_probe"});

  ExperimentSpec spec;
  if (!root.contains("name") || !root.at("name").is_string() ||
      root.at("name").get<std::string>().empty())
    throw ConfigError("config key 'name': required non-empty string");
  spec.name = root.at("name").get<std::string>();
  spec.out_dir = get_or<std::string>(root, "", "output", "runs");

  if (root.contains("dataset")) spec.dataset = parse_dataset(root.at("dataset"));

  if (root.contains("model")) {
    const json& m = root.at("model");
    expect_keys(m, "model", {"kind", "hidden"});
    const std::string kind = get_or<std::string>(m, "model", "kind", "mlp");
    if (kind == "logreg") {
      spec.model.logreg = true;
      spec.model.hidden.clear();
    } else if (kind == "mlp") {
      spec.model.logreg = false;
      spec.model.hidden = get_or(m, "model", "hidden", spec.model.hidden);
      if (spec.model.hidden.empty()) bad_key("model.hidden", "must be non-empty");
    } else {
      bad_key("model.kind", "must be 'mlp' or 'logreg'");
    }
  }

  engine::FederatedConfig& fed = spec.fed;
  if (root.contains("federated")) {
    const json& f = root.at("federated");
    expect_keys(f, "federated",
                {"clients", "participation", "local_epochs", "batch_size", "eta",
                 "rounds", "eval_every", "seed", "target_accuracy"});
    fed.n_clients = get_or(f, "federated", "clients", fed.n_clients);
    fed.participation = get_or(f, "federated", "participation", fed.participation);
    fed.local_epochs = get_or(f, "federated", "local_epochs", fed.local_epochs);
    fed.batch_size = get_or(f, "federated", "batch_size", fed.batch_size);
    fed.eta = get_or(f, "federated", "eta", fed.eta);
    fed.rounds_max = get_or(f, "federated", "rounds", fed.rounds_max);
    fed.eval_every = get_or(f, "federated", "eval_every", fed.eval_every);
    fed.seed = get_or(f, "federated", "seed", fed.seed);
    if (f.contains("target_accuracy"))
      fed.target_accuracy = get_or<double>(f, "federated", "target_accuracy", 0.0);
  }

  if (root.contains("partition")) {
    const json& p = root.at("partition");
    expect_keys(p, "partition", {"mode", "shards_per_client", "pool_gamma"});
    fed.partition.mode = data::partition_mode_from_string(
        get_or<std::string>(p, "partition", "mode", "iid"));
    fed.partition.shards_per_client =
        get_or(p, "partition", "shards_per_client", fed.partition.shards_per_client);
    fed.partition.pool_gamma =
        get_or(p, "partition", "pool_gamma", fed.partition.pool_gamma);
  }

  if (root.contains("strategy")) {
    const json& s = root.at("strategy");
    expect_keys(s, "strategy",
                {"kind", "k_frac", "cmfl_threshold", "mmd_lambda", "mmd_bandwidth",
                 "dropout_rate", "warmstart_epochs", "alpha",
                 "signsgd_compress_down"});
    strat::StrategyConfig& sc = fed.strategy;
    sc.kind = strat::strategy_kind_from_string(
        get_or<std::string>(s, "strategy", "kind", "fedavg"));
    sc.k_frac = get_or(s, "strategy", "k_frac", sc.k_frac);
    sc.cmfl_threshold = get_or(s, "strategy", "cmfl_threshold", sc.cmfl_threshold);
    sc.mmd_lambda = get_or(s, "strategy", "mmd_lambda", sc.mmd_lambda);
    if (s.contains("mmd_bandwidth")) {
      const json& bw = s.at("mmd_bandwidth");
      if (bw.is_string() && bw.get<std::string>() == "median") {
        sc.mmd_bandwidth.reset();
      } else if (bw.is_number()) {
        sc.mmd_bandwidth = bw.get<double>();
      } else {
        bad_key("strategy.mmd_bandwidth", "must be 'median' or a number");
      }
    }
    sc.dropout_rate = get_or(s, "strategy", "dropout_rate", sc.dropout_rate);
    sc.warmstart_epochs =
        get_or(s, "strategy", "warmstart_epochs", sc.warmstart_epochs);
    sc.alpha = get_or(s, "strategy", "alpha", sc.alpha);
    sc.signsgd_compress_down =
        get_or(s, "strategy", "signsgd_compress_down", sc.signsgd_compress_down);
  }

  if (root.contains("gamma_probe")) {
    const json& g = root.at("gamma_probe");
    expect_keys(g, "gamma_probe",
                {"batch_sizes", "trials", "pretrain_epochs", "modes"});
    spec.gamma.batch_sizes =
        get_or(g, "gamma_probe", "batch_sizes", spec.gamma.batch_sizes);
    spec.gamma.trials = get_or(g, "gamma_probe", "trials", spec.gamma.trials);
    spec.gamma.pretrain_epochs =
        get_or(g, "gamma_probe", "pretrain_epochs", spec.gamma.pretrain_epochs);
    if (g.contains("modes")) {
      spec.gamma.iid = false;
      spec.gamma.single_class = false;
      for (const auto& m : g.at("modes")) {
        const std::string name = m.get<std::string>();
        if (name == "iid-sample") {
          spec.gamma.iid = true;
        } else if (name == "single-class") {
          spec.gamma.single_class = true;
        } else {
          bad_key("gamma_probe.modes", "unknown mode " + name);
        }
      }
    }
  }

  // Constraint checks that do not need the dataset.
  if (!(fed.participation > 0.0) || fed.participation > 1.0)
    bad_key("federated.participation", "must be in (0,1]");
  if (fed.n_clients < 1) bad_key("federated.clients", "must be >= 1");
  if (fed.local_epochs < 1) bad_key("federated.local_epochs", "must be >= 1");
  if (fed.batch_size < 1) bad_key("federated.batch_size", "must be >= 1");
  if (!(fed.eta > 0.0)) bad_key("federated.eta", "must be positive");
  if (fed.rounds_max < 0) bad_key("federated.rounds", "must be >= 0");
  fed.strategy.validate();
  return spec;
}

ExperimentSpec parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

LoadedData load_dataset(const DatasetSpec& spec) {
  if (const auto* synth = std::get_if<SyntheticSpec>(&spec)) {
    data::Dataset full =
        data::synth_generate(synth->classes, synth->per_class + synth->test_per_class,
                             synth->dim, synth->seed);
    const double frac = static_cast<double>(synth->test_per_class) /
                        static_cast<double>(synth->per_class + synth->test_per_class);
    auto [train, test] = data::split_holdout(full, frac);
    return LoadedData{std::move(train), std::move(test)};
  }
  const auto& idx = std::get<IdxSpec>(spec);
  data::Dataset train = data::load_idx(idx.train_images, idx.train_labels);
  data::Dataset test = data::load_idx(idx.test_images, idx.test_labels);
  if (idx.train_limit > 0 && idx.train_limit < train.size()) {
    std::vector<std::uint32_t> head(idx.train_limit);
    for (std::size_t i = 0; i < head.size(); ++i)
      head[i] = static_cast<std::uint32_t>(i);
    train = data::subset(train, head);
  }
  if (train.class_count != test.class_count) {
    const int classes = std::max(train.class_count, test.class_count);
    train.class_count = classes;
    test.class_count = classes;
  }
  return LoadedData{std::move(train), std::move(test)};
}

nn::ModelArch build_arch(const ModelSpec& model, const data::Dataset& train) {
  nn::ModelArch arch;
  arch.layer_sizes.push_back(train.dim());
  if (!model.logreg)
    for (std::size_t h : model.hidden) arch.layer_sizes.push_back(h);
  arch.layer_sizes.push_back(static_cast<std::size_t>(train.class_count));
  arch.validate();
  return arch;
}

namespace {

std::string fmt_real(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string csv_row(const engine::RoundRecord& r, const std::string& strategy) {
  std::string row = std::to_string(r.round) + "," + strategy + ",";
  if (r.test_accuracy) row += fmt_real(*r.test_accuracy);
  row += ",";
  if (r.test_loss) row += fmt_real(*r.test_loss);
  row += "," + std::to_string(r.bits_up) + "," + std::to_string(r.bits_down) +
         "," + std::to_string(r.participants.size()) + "," +
         std::to_string(r.uploads_skipped) + "\n";
  return row;
}

constexpr const char* kMetricsHeader =
    "round,strategy,test_accuracy,test_loss,bits_up,bits_down,participants,"
    "uploads_skipped\n";

struct RunTotals {
  std::uint64_t bits_up = 0;
  std::uint64_t bits_down = 0;
  std::uint64_t skipped = 0;
  std::optional<double> final_accuracy;
  std::optional<double> final_loss;
};

RunTotals totals_of(const engine::RunResult& result) {
  RunTotals t;
  for (const auto& r : result.records) {
    t.bits_up += r.bits_up;
    t.bits_down += r.bits_down;
    t.skipped += static_cast<std::uint64_t>(r.uploads_skipped);
    if (r.test_accuracy) {
      t.final_accuracy = r.test_accuracy;
      t.final_loss = r.test_loss;
    }
  }
  return t;
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << body;
}

}  // namespace

std::string metrics_csv(const engine::RunResult& result) {
  std::string out = kMetricsHeader;
  const std::string strategy = strat::to_string(result.config.strategy.kind);
  for (const auto& r : result.records) out += csv_row(r, strategy);
  return out;
}

std::string summary_json(const engine::RunResult& result) {
  const RunTotals t = totals_of(result);
  json j;
  j["strategy"] = strat::to_string(result.config.strategy.kind);
  j["clients"] = result.config.n_clients;
  j["participation"] = result.config.participation;
  j["local_epochs"] = result.config.local_epochs;
  j["batch_size"] = result.config.batch_size;
  j["eta"] = result.config.eta;
  j["seed"] = result.config.seed;
  j["rounds_executed"] =
      result.records.empty() ? 0 : result.records.back().round;
  j["partition_mode"] = data::to_string(result.config.partition.mode);
  if (t.final_accuracy) j["final_accuracy"] = *t.final_accuracy;
  if (t.final_loss) j["final_loss"] = *t.final_loss;
  j["total_bits_up"] = t.bits_up;
  j["total_bits_down"] = t.bits_down;
  j["uploads_skipped"] = t.skipped;
  if (result.config.target_accuracy) {
    j["target_accuracy"] = *result.config.target_accuracy;
    if (result.converged_at) j["rounds_to_target"] = *result.converged_at;
  }
  j["wall_time_s"] = result.wall_time_s;
  return j.dump(2) + "\n";
}

std::string compare_summary_csv(const std::vector<engine::RunResult>& results,
                                const std::vector<std::string>& names) {
  std::string out =
      "name,strategy,final_accuracy,rounds_to_target,total_bits_up,"
      "total_bits_down,uploads_skipped,speedup_vs_first\n";
  std::optional<int> baseline_rounds;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& result = results[i];
    const double target = result.config.target_accuracy.value_or(0.8);
    const auto rounds = engine::detect_convergence(result.records, target);
    if (i == 0) baseline_rounds = rounds;
    const RunTotals t = totals_of(result);
    out += names[i] + "," + strat::to_string(result.config.strategy.kind) + ",";
    if (t.final_accuracy) out += fmt_real(*t.final_accuracy);
    out += ",";
    if (rounds) out += std::to_string(*rounds);
    out += "," + std::to_string(t.bits_up) + "," + std::to_string(t.bits_down) +
           "," + std::to_string(t.skipped) + ",";
    // CMFL-style ratio: baseline rounds-to-target over this run's.
    if (baseline_rounds && rounds)
      out += fmt_real(static_cast<double>(*baseline_rounds) /
                      static_cast<double>(*rounds));
    out += "\n";
  }
  return out;
}

std::string partition_histogram_csv(const data::PartitionPlan& plan,
                                    const data::Dataset& d) {
  std::string out = "client,label,count\n";
  for (std::size_t c = 0; c < plan.assignments.size(); ++c) {
    std::vector<std::size_t> counts(d.class_count, 0);
    for (std::uint32_t idx : plan.assignments[c])
      ++counts[static_cast<std::size_t>(d.labels[idx])];
    for (int label = 0; label < d.class_count; ++label)
      if (counts[static_cast<std::size_t>(label)] > 0)
        out += std::to_string(c) + "," + std::to_string(label) + "," +
               std::to_string(counts[static_cast<std::size_t>(label)]) + "\n";
  }
  return out;
}

namespace {

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const PartitionError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
}

engine::RunResult execute(const ExperimentSpec& spec) {
  LoadedData loaded = load_dataset(spec.dataset);
  engine::FederatedConfig cfg = spec.fed;
  cfg.arch = build_arch(spec.model, loaded.train);
  return engine::run_federated(cfg, loaded.train, loaded.test);
}

}  // namespace

int cmd_run(const ExperimentSpec& spec) {
  return guarded([&] {
    const engine::RunResult result = execute(spec);
    std::filesystem::create_directories(spec.out_dir);
    write_file(spec.out_dir / (spec.name + "_metrics.csv"), metrics_csv(result));
    write_file(spec.out_dir / (spec.name + "_summary.json"), summary_json(result));
    return 0;
  });
}

int cmd_compare(const std::vector<ExperimentSpec>& specs) {
  return guarded([&] {
    if (specs.size() < 2)
      throw ConfigError("compare needs at least two experiment configs");
    for (std::size_t i = 1; i < specs.size(); ++i) {
      if (!(specs[i].dataset == specs[0].dataset))
        throw ConfigError("compare: experiments use different datasets");
      if (specs[i].fed.partition.mode != specs[0].fed.partition.mode ||
          specs[i].fed.partition.shards_per_client !=
              specs[0].fed.partition.shards_per_client ||
          specs[i].fed.seed != specs[0].fed.seed)
        throw ConfigError("compare: experiments use different partitions");
    }
    std::vector<engine::RunResult> results;
    std::vector<std::string> names;
    std::string merged = kMetricsHeader;
    for (const ExperimentSpec& spec : specs) {
      engine::RunResult result = execute(spec);
      const std::string strategy = strat::to_string(result.config.strategy.kind);
      for (const auto& r : result.records) merged += csv_row(r, strategy);
      names.push_back(spec.name);
      results.push_back(std::move(result));
    }
    std::filesystem::create_directories(specs[0].out_dir);
    write_file(specs[0].out_dir / "compare_metrics.csv", merged);
    write_file(specs[0].out_dir / "compare_summary.csv",
               compare_summary_csv(results, names));
    return 0;
  });
}

int cmd_gamma(const ExperimentSpec& spec) {
  return guarded([&] {
    LoadedData loaded = load_dataset(spec.dataset);
    nn::ModelArch arch = build_arch(spec.model, loaded.train);
    nn::ModelParams params = nn::init_model(arch, spec.fed.seed);
    if (spec.gamma.pretrain_epochs > 0) {
      std::vector<std::uint32_t> all(loaded.train.size());
      for (std::size_t i = 0; i < all.size(); ++i)
        all[i] = static_cast<std::uint32_t>(i);
      params = *nn::local_train(params, loaded.train, all,
                                spec.gamma.pretrain_epochs, spec.fed.batch_size,
                                spec.fed.eta, spec.fed.seed);
    }
    std::vector<gamma::SignProbeResult> results;
    gamma::ProbeConfig probe;
    probe.batch_sizes = spec.gamma.batch_sizes;
    probe.trials = spec.gamma.trials;
    if (spec.gamma.iid) {
      probe.mode = gamma::DataMode::IidSample;
      results.push_back(gamma::gamma_estimate(params, loaded.train, probe,
                                              spec.fed.seed));
    }
    if (spec.gamma.single_class) {
      probe.mode = gamma::DataMode::SingleClass;
      results.push_back(gamma::gamma_estimate(params, loaded.train, probe,
                                              spec.fed.seed));
    }
    std::filesystem::create_directories(spec.out_dir);
    write_file(spec.out_dir / (spec.name + "_gamma.csv"),
               gamma::gamma_csv(gamma::gamma_report(results)));
    return 0;
  });
}

int cmd_partition(const ExperimentSpec& spec) {
  return guarded([&] {
    LoadedData loaded = load_dataset(spec.dataset);
    engine::FederatedConfig cfg = spec.fed;
    data::PartitionPlan plan;
    switch (cfg.partition.mode) {
      case data::PartitionMode::Iid:
        plan = data::partition_iid(loaded.train, cfg.n_clients, cfg.seed);
        break;
      case data::PartitionMode::SortedNonIid:
      case data::PartitionMode::SharedPoolRemainder:
        plan = data::partition_noniid_sorted(loaded.train, cfg.n_clients,
                                             cfg.partition.shards_per_client,
                                             cfg.seed);
        break;
    }
    std::filesystem::create_directories(spec.out_dir);
    write_file(spec.out_dir / (spec.name + "_plan.json"), data::export_plan(plan));
    write_file(spec.out_dir / (spec.name + "_partition_hist.csv"),
               partition_histogram_csv(plan, loaded.train));
    return 0;
  });
}

}  // namespace fedsim::report
