#include "amfir_cli/cli.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <future>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

#include <CLI11.hpp>
#include <json.hpp>

namespace amfir::cli {
namespace {

using Json = nlohmann::ordered_json;

Json config_to_json(const RunConfig& c) {
  const auto& h = c.hyper;
  const auto& s = c.synthetic;
  Json seeds = Json::array();
  for (const auto seed : c.seeds) seeds.push_back(seed);
  return {{"command", c.command},
          {"data", c.data.string()},
          {"model", c.model.string()},
          {"n_way", c.episode.n_way},
          {"k_shot", c.episode.k_shot},
          {"q_per_class", c.episode.q_per_class},
          {"episodes", c.resolved_episodes()},
          {"eval_episodes", c.eval_episodes},
          {"lambda", h.lambda},
          {"gamma", h.gamma},
          {"d_proj", h.d_proj},
          {"reliability_mode", to_string(h.reliability)},
          {"distance_mode", to_string(h.distance)},
          {"distill_mode", to_string(h.distill)},
          {"asi_force", to_string(h.asi_force)},
          {"margin", h.margin},
          {"fusion_mode", to_string(c.fusion)},
          {"seed", c.seed},
          {"seeds", seeds},
          {"synthetic",
           {{"num_classes", s.num_classes},
            {"per_class", s.per_class},
            {"dim_rgb", s.dim_rgb},
            {"dim_flow", s.dim_flow},
            {"sep", s.sep},
            {"sigma_low", s.sigma_low},
            {"sigma_high", s.sigma_high},
            {"p_rgb_dominant", s.p_rgb_dominant}}}};
}

Json hyper_to_json(const Hyperparameters& h) {
  return {{"d_proj", h.d_proj},
          {"lambda", h.lambda},
          {"gamma", h.gamma},
          {"reliability_mode", to_string(h.reliability)},
          {"distance_mode", to_string(h.distance)},
          {"distill_mode", to_string(h.distill)},
          {"asi_force", to_string(h.asi_force)},
          {"margin", h.margin}};
}

Json metrics_to_json(const RunMetrics& m, const RunConfig& c) {
  Json j = {{"kind", "metrics"},
            {"format_version", 1},
            {"fusion_mode", to_string(m.fusion)},
            {"episodes", m.episodes},
            {"mean_accuracy", m.mean_accuracy},
            {"ci95", m.ci95},
            {"mean_accuracy_rgb", m.mean_accuracy_rgb},
            {"mean_accuracy_flow", m.mean_accuracy_flow}};
  if (m.asi_agreement) j["asi_agreement"] = *m.asi_agreement;
  j["seed"] = c.seed;
  j["config"] = config_to_json(c);
  j["episode_accuracies"] = m.episode_accuracies;
  j["episode_rgb_groups"] = m.episode_rgb_groups;
  j["episode_flow_groups"] = m.episode_flow_groups;
  return j;
}

void write_json_file(const Json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

void require_path(const std::filesystem::path& p, const char* flag) {
  if (p.empty()) throw ConfigError(std::string("missing required flag ") + flag);
}

double window_mean(const std::vector<TraceRow>& trace, std::size_t begin, std::size_t end,
                   double TraceRow::*field) {
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += trace[i].*field;
  return end > begin ? acc / static_cast<double>(end - begin) : 0.0;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("invalid seed list entry '" + item + "'");
    }
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  return seeds;
}

// Reads key=value lines ('#' comments) into "--key value" tokens.
std::vector<std::string> config_file_tokens(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config file line " + std::to_string(line_no) + ": expected key=value");
    }
    auto key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    tokens.push_back("--" + key);
    tokens.push_back(trim(line.substr(eq + 1)));
  }
  return tokens;
}

// Inserts config-file tokens right after the subcommand so later
// command-line flags take precedence.
std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::filesystem::path config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[i + 1];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    }
  }
  if (config.empty() || args.size() < 2) return args;
  std::vector<std::string> out(args.begin(), args.begin() + 2);
  const auto tokens = config_file_tokens(config);
  out.insert(out.end(), tokens.begin(), tokens.end());
  out.insert(out.end(), args.begin() + 2, args.end());
  return out;
}

// String-valued flags converted to enums after parsing.
struct EnumFlags {
  std::string reliability = "entropy";
  std::string distance = "sq_euclidean";
  std::string distill = "both";
  std::string asi_force = "off";
  std::string fusion = "adaptive";
  std::string seeds = "0,1,2";
};

void add_common(CLI::App* sub, RunConfig& c, std::string& config_path) {
  sub->add_option("--config", config_path, "key=value file; command-line flags override it");
  sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
}

void add_episode_flags(CLI::App* sub, RunConfig& c) {
  sub->add_option("--n-way", c.episode.n_way, "Classes per episode")->capture_default_str();
  sub->add_option("--k-shot", c.episode.k_shot, "Support samples per class")->capture_default_str();
  sub->add_option("--q-per-class", c.episode.q_per_class, "Query samples per class")
      ->capture_default_str();
  sub->add_option("--episodes", c.episodes, "Episode count (train 2000, eval 600)");
  sub->add_option("--threads", c.threads, "Worker threads for evaluation (0 = all cores)");
}

void add_model_flags(CLI::App* sub, RunConfig& c, EnumFlags& e) {
  sub->add_option("--lambda", c.hyper.lambda, "Distillation weight")->capture_default_str();
  sub->add_option("--lr", c.hyper.gamma, "SGD learning rate")->capture_default_str();
  sub->add_option("--proj-dim", c.hyper.d_proj, "Projection dimension")->capture_default_str();
  sub->add_option("--reliability", e.reliability, "entropy | vfe")->capture_default_str();
  sub->add_option("--distance", e.distance, "sq_euclidean | euclidean")->capture_default_str();
  sub->add_option("--distill", e.distill, "both | t_rgb | t_flow | none")->capture_default_str();
  sub->add_option("--asi-force", e.asi_force, "off | force_rgb | force_flow")->capture_default_str();
  sub->add_option("--margin", c.hyper.margin, "Minimum reliability gap for distillation")
      ->capture_default_str();
}

void add_synthetic_flags(CLI::App* sub, SyntheticSpec& s) {
  sub->add_option("--num-classes", s.num_classes)->capture_default_str();
  sub->add_option("--per-class", s.per_class)->capture_default_str();
  sub->add_option("--dim-rgb", s.dim_rgb)->capture_default_str();
  sub->add_option("--dim-flow", s.dim_flow)->capture_default_str();
  sub->add_option("--sep", s.sep, "Class-mean scale")->capture_default_str();
  sub->add_option("--sigma-low", s.sigma_low, "Noise std of the dominant modality")
      ->capture_default_str();
  sub->add_option("--sigma-high", s.sigma_high, "Noise std of the other modality")
      ->capture_default_str();
  sub->add_option("--p-rgb-dominant", s.p_rgb_dominant)->capture_default_str();
}

void apply_enums(RunConfig& c, const EnumFlags& e) {
  c.hyper.reliability = parse_reliability_mode(e.reliability);
  c.hyper.distance = parse_distance_mode(e.distance);
  c.hyper.distill = parse_distill_mode(e.distill);
  c.hyper.asi_force = parse_asi_force(e.asi_force);
  c.fusion = parse_fusion_mode(e.fusion);
  c.seeds = parse_seed_list(e.seeds);
}

}  // namespace

int RunConfig::resolved_episodes() const {
  if (episodes >= 0) return episodes;
  return command == "eval" ? kDefaultEvalEpisodes : kDefaultTrainEpisodes;
}

void RunConfig::validate() const {
  if (episode.n_way < 1 || episode.k_shot < 1 || episode.q_per_class < 1) {
    throw ConfigError("--n-way, --k-shot and --q-per-class must be >= 1");
  }
  if (command == "eval" && resolved_episodes() < 1) throw ConfigError("--episodes must be >= 1");
  if (eval_episodes < 1) throw ConfigError("--eval-episodes must be >= 1");
  hyper.validate();
}

void cmd_generate(const RunConfig& config, std::ostream& log) {
  require_path(config.data, "--data");
  SyntheticSpec spec = config.synthetic;
  spec.seed = config.seed;
  const auto dataset = generate_synthetic(spec);
  save_dataset(dataset, config.data);
  log << "wrote " << dataset.size() << " records (dim_rgb=" << spec.dim_rgb
      << ", dim_flow=" << spec.dim_flow << ", classes=" << spec.num_classes << ") to "
      << config.data.string() << '\n';
}

void cmd_split(const RunConfig& config, std::ostream& log) {
  require_path(config.data, "--data");
  require_path(config.out_train, "--out-train");
  require_path(config.out_test, "--out-test");
  const auto dataset = load_dataset(config.data);
  Rng rng(config.seed, streams::kSplit);
  const auto [train, test] = split_by_class(dataset, config.split_ratio, rng);
  save_dataset(train, config.out_train);
  save_dataset(test, config.out_test);
  log << "split " << dataset.num_classes() << " classes: " << train.num_classes() << " ("
      << train.size() << " records) -> " << config.out_train.string() << ", "
      << test.num_classes() << " (" << test.size() << " records) -> "
      << config.out_test.string() << '\n';
}

TrainResult cmd_train(const RunConfig& config, std::ostream& log) {
  config.validate();
  require_path(config.data, "--data");
  require_path(config.model, "--model");
  const auto dataset = load_dataset(config.data);
  const auto& meta = dataset.meta();

  Rng init_rng(config.seed, streams::kInit);
  auto model = init_heads(meta.dim_rgb, meta.dim_flow, config.hyper, init_rng);
  const int episodes = config.resolved_episodes();
  auto result = train_meta(dataset, config.episode, episodes, std::move(model), config.seed);

  save_model(result.model, config.model);
  if (!config.trace.empty()) save_trace(result.trace, config.trace);

  if (!config.metrics.empty()) {
    const auto held_in = aggregate_metrics(
        evaluate_run(dataset, result.model, config.episode, config.eval_episodes, config.fusion,
                     config.seed, config.threads),
        config.fusion);
    Json j = metrics_to_json(held_in, config);
    j["kind"] = "train_metrics";
    const auto& t = result.trace;
    const std::size_t window = std::min<std::size_t>(100, t.size());
    Json training = {{"episodes", t.size()}, {"window", window}};
    if (!t.empty()) {
      const std::size_t n = t.size();
      training["first_window_F_r"] = window_mean(t, 0, window, &TraceRow::free_energy_r);
      training["first_window_F_f"] = window_mean(t, 0, window, &TraceRow::free_energy_f);
      training["last_window_F_r"] = window_mean(t, n - window, n, &TraceRow::free_energy_r);
      training["last_window_F_f"] = window_mean(t, n - window, n, &TraceRow::free_energy_f);
      double total = 0.0;
      for (std::size_t i = n - window; i < n; ++i) total += t[i].loss.total;
      training["last_window_total_loss"] = total / static_cast<double>(window);
    }
    j["training"] = std::move(training);
    write_json_file(j, config.metrics);
  }

  log << "trained " << episodes << " episodes";
  if (!result.trace.empty()) log << ", final total loss " << result.trace.back().loss.total;
  log << "; model -> " << config.model.string() << '\n';
  return result;
}

RunMetrics cmd_eval(const RunConfig& config, std::ostream& log) {
  config.validate();
  require_path(config.data, "--data");
  require_path(config.model, "--model");
  const auto dataset = load_dataset(config.data);
  const auto model = load_model(config.model);
  check_compatible(model, dataset.meta());

  const auto results = evaluate_run(dataset, model, config.episode, config.resolved_episodes(),
                                    config.fusion, config.seed, config.threads);
  const auto metrics = aggregate_metrics(results, config.fusion);
  if (!config.metrics.empty()) {
    Json j = metrics_to_json(metrics, config);
    j["model_hyper"] = hyper_to_json(model.hyper);
    write_json_file(j, config.metrics);
  }
  log << "fusion=" << to_string(config.fusion) << " episodes=" << metrics.episodes
      << " accuracy=" << metrics.mean_accuracy << " +/- " << metrics.ci95
      << " (rgb " << metrics.mean_accuracy_rgb << ", flow " << metrics.mean_accuracy_flow << ")";
  if (metrics.asi_agreement) log << " asi_agreement=" << *metrics.asi_agreement;
  log << '\n';
  return metrics;
}

std::vector<AblationCell> ablation_grid() {
  return {
      {"full", DistillMode::kBoth, AsiForce::kOff, FusionMode::kAdaptive, false},
      {"rgb_dominant_only", DistillMode::kBoth, AsiForce::kForceRgb, FusionMode::kAdaptive, false},
      {"flow_dominant_only", DistillMode::kBoth, AsiForce::kForceFlow, FusionMode::kAdaptive, false},
      {"amd_off", DistillMode::kNone, AsiForce::kOff, FusionMode::kAdaptive, false},
      {"ami_off", DistillMode::kBoth, AsiForce::kOff, FusionMode::kMean, false},
      {"t_rgb", DistillMode::kTeacherRgb, AsiForce::kOff, FusionMode::kAdaptive, false},
      {"t_flow", DistillMode::kTeacherFlow, AsiForce::kOff, FusionMode::kAdaptive, false},
  };
}

std::vector<AblationCell> ablation_baselines() {
  return {
      {"rgb_only", DistillMode::kBoth, AsiForce::kOff, FusionMode::kRgbOnly, true},
      {"flow_only", DistillMode::kBoth, AsiForce::kOff, FusionMode::kFlowOnly, true},
  };
}

const AblationRow& AblationTable::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.cell.name == name) return r;
  }
  throw ConfigError("no ablation row named '" + name + "'");
}

AblationTable run_ablation(const RunConfig& config) {
  config.validate();
  auto cells = ablation_grid();
  const auto baselines = ablation_baselines();
  cells.insert(cells.end(), baselines.begin(), baselines.end());

  std::vector<MultimodalDataset> datasets;
  if (!config.data.empty()) {
    datasets.push_back(load_dataset(config.data));
  } else {
    for (const auto seed : config.seeds) {
      SyntheticSpec spec = config.synthetic;
      spec.seed = seed;
      datasets.push_back(generate_synthetic(spec));
    }
  }
  auto dataset_for = [&](std::size_t s) -> const MultimodalDataset& {
    return datasets.size() == 1 ? datasets.front() : datasets[s];
  };

  // Cells differing only in fusion share one trained model.
  using TrainKey = std::tuple<std::size_t, DistillMode, AsiForce>;
  std::map<TrainKey, std::shared_future<ModelBundle>> models;
  const int episodes = config.resolved_episodes();
  for (std::size_t s = 0; s < config.seeds.size(); ++s) {
    for (const auto& cell : cells) {
      const TrainKey key{s, cell.distill, cell.asi_force};
      if (models.count(key)) continue;
      Hyperparameters hyper = config.hyper;
      hyper.distill = cell.distill;
      hyper.asi_force = cell.asi_force;
      const auto seed = config.seeds[s];
      const auto& dataset = dataset_for(s);
      const auto episode = config.episode;
      models[key] = std::async(std::launch::async, [&dataset, hyper, seed, episode, episodes] {
                      const auto& meta = dataset.meta();
                      Rng init_rng(seed, streams::kInit);
                      auto model = init_heads(meta.dim_rgb, meta.dim_flow, hyper, init_rng);
                      return train_meta(dataset, episode, episodes, std::move(model), seed).model;
                    }).share();
    }
  }

  AblationTable table;
  table.seeds = config.seeds;
  std::vector<std::vector<std::future<RunMetrics>>> evals(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (std::size_t s = 0; s < config.seeds.size(); ++s) {
      const auto model = models.at({s, cells[c].distill, cells[c].asi_force});
      const auto seed = config.seeds[s];
      const auto& dataset = dataset_for(s);
      const auto fusion = cells[c].fusion;
      evals[c].push_back(std::async(std::launch::async, [&config, &dataset, model, seed, fusion] {
        const auto results = evaluate_run(dataset, model.get(), config.episode,
                                          config.eval_episodes, fusion, seed, 1);
        return aggregate_metrics(results, fusion);
      }));
    }
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    AblationRow row;
    row.cell = cells[c];
    for (auto& f : evals[c]) {
      const auto m = f.get();
      row.accuracy.push_back(m.mean_accuracy);
      row.ci95.push_back(m.ci95);
      row.mean_accuracy += m.mean_accuracy;
    }
    row.mean_accuracy /= static_cast<double>(row.accuracy.size());
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_ablation_table(const AblationTable& table, std::ostream& out) {
  out << "#cell\tkind\tdistill\tasi_force\tfusion";
  for (const auto seed : table.seeds) out << "\tacc_seed" << seed;
  out << "\tmean_accuracy\n";
  for (const auto& r : table.rows) {
    out << r.cell.name << '\t' << (r.cell.baseline ? "baseline" : "grid") << '\t'
        << to_string(r.cell.distill) << '\t' << to_string(r.cell.asi_force) << '\t'
        << to_string(r.cell.fusion);
    for (const double a : r.accuracy) out << '\t' << format_double(a);
    out << '\t' << format_double(r.mean_accuracy) << '\n';
  }
}

void write_metrics(const RunMetrics& metrics, const RunConfig& config, std::ostream& out) {
  out << metrics_to_json(metrics, config).dump() << '\n';
}

AblationTable cmd_ablate(const RunConfig& config, std::ostream& log) {
  const auto table = run_ablation(config);
  if (!config.table.empty()) {
    std::ofstream out(config.table, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + config.table.string());
    write_ablation_table(table, out);
  }
  write_ablation_table(table, log);
  return table;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig config;
  EnumFlags enums;
  std::string config_path;

  CLI::App app{"Active multimodal few-shot inference: generate, split, train, eval, ablate"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);

  auto* generate = app.add_subcommand("generate", "Write a synthetic two-modality benchmark");
  add_common(generate, config, config_path);
  generate->add_option("--data", config.data, "Output dataset path")->required();
  add_synthetic_flags(generate, config.synthetic);

  auto* split = app.add_subcommand("split", "Split a dataset into class-disjoint halves");
  add_common(split, config, config_path);
  split->add_option("--data", config.data, "Input dataset")->required();
  split->add_option("--out-train", config.out_train)->required();
  split->add_option("--out-test", config.out_test)->required();
  split->add_option("--ratio", config.split_ratio, "Fraction of classes in --out-train")
      ->capture_default_str();

  auto* train = app.add_subcommand("train", "Meta-train the modality heads");
  add_common(train, config, config_path);
  train->add_option("--data", config.data, "Training dataset")->required();
  train->add_option("--model", config.model, "Output model path")->required();
  train->add_option("--trace", config.trace, "Per-episode loss / free-energy trace");
  train->add_option("--metrics", config.metrics, "Training summary");
  train->add_option("--eval-episodes", config.eval_episodes, "Held-in evaluation episodes")
      ->capture_default_str();
  train->add_option("--fusion", enums.fusion, "Fusion for the held-in summary");
  add_episode_flags(train, config);
  add_model_flags(train, config, enums);

  auto* eval = app.add_subcommand("eval", "Evaluate a model on sampled episodes");
  add_common(eval, config, config_path);
  eval->add_option("--data", config.data, "Evaluation dataset")->required();
  eval->add_option("--model", config.model, "Model file")->required();
  eval->add_option("--metrics", config.metrics, "Metrics output");
  eval->add_option("--fusion", enums.fusion, "adaptive | rgb | flow | mean")->capture_default_str();
  add_episode_flags(eval, config);

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate the ablation grid");
  add_common(ablate, config, config_path);
  ablate->add_option("--data", config.data, "Dataset (default: synthetic benchmark per seed)");
  ablate->add_option("--table", config.table, "Output table path");
  ablate->add_option("--seeds", enums.seeds, "Comma-separated seeds")->capture_default_str();
  ablate->add_option("--eval-episodes", config.eval_episodes)->capture_default_str();
  add_episode_flags(ablate, config);
  add_model_flags(ablate, config, enums);
  add_synthetic_flags(ablate, config.synthetic);

  try {
    const auto expanded = expand_config(args);
    std::vector<const char*> argv;
    for (const auto& a : expanded) argv.push_back(a.c_str());
    app.parse(static_cast<int>(argv.size()), argv.data());
    apply_enums(config, enums);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (generate->parsed()) {
      config.command = "generate";
      cmd_generate(config, out);
    } else if (split->parsed()) {
      config.command = "split";
      cmd_split(config, out);
    } else if (train->parsed()) {
      config.command = "train";
      cmd_train(config, out);
    } else if (eval->parsed()) {
      config.command = "eval";
      cmd_eval(config, out);
    } else if (ablate->parsed()) {
      config.command = "ablate";
      cmd_ablate(config, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace amfir::cli
