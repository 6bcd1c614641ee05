#include "deepida/classifier.hpp"
#include "deepida/config.hpp"
#include "deepida/error.hpp"
#include "deepida/io.hpp"
#include "deepida/log.hpp"
#include "deepida/ranking.hpp"
#include "deepida/rng.hpp"
#include "deepida/serialize.hpp"
#include "deepida/simgen.hpp"
#include "deepida/trainer.hpp"
#include "deepida/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace deepida::cli {

namespace {

struct DataFlags {
  std::string dir;
  std::vector<std::string> views;
  std::string labels;
};

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> learning_rate;
  std::optional<double> rho;
  std::optional<int> l;
  std::optional<double> ridge;
  std::optional<std::vector<Eigen::Index>> hidden;
  std::optional<Eigen::Index> output;
  std::optional<bool> best_epoch;
  std::optional<int> pairs;
  std::optional<double> feature_fraction;
  std::optional<int> permutations;
  std::optional<std::string> retrain_top;
  DataFlags train;
  DataFlags valid;
  DataFlags test;
};

/// view1.csv, view2.csv, ... in numeric order, plus labels.csv.
config::DataPaths paths_in_dir(const std::string& dir) {
  if (!fs::is_directory(dir)) fail(ErrorKind::IoError, "data directory not found: " + dir);
  static const std::regex pattern(R"(view(\d+)\.csv)");
  std::vector<std::pair<int, std::string>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) found.emplace_back(std::stoi(m[1].str()), entry.path().string());
  }
  std::sort(found.begin(), found.end());
  config::DataPaths out;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != static_cast<int>(i + 1)) {
      fail(ErrorKind::IoError, dir + ": view" + std::to_string(i + 1) + ".csv is missing");
    }
    out.views.push_back(found[i].second);
  }
  out.labels = (fs::path(dir) / "labels.csv").string();
  return out;
}

void apply_data(const DataFlags& flags, config::DataPaths& paths) {
  if (!flags.dir.empty()) paths = paths_in_dir(flags.dir);
  if (!flags.views.empty()) paths.views = flags.views;
  if (!flags.labels.empty()) paths.labels = flags.labels;
}

void add_data_flags(CLI::App* app, DataFlags& train, DataFlags* valid, DataFlags* test) {
  app->add_option("--data", train.dir, "Directory holding view<d>.csv and labels.csv");
  app->add_option("--views", train.views, "View CSV files, in view order")->delimiter(',');
  app->add_option("--labels", train.labels, "Labels CSV file");
  if (valid != nullptr) app->add_option("--valid", valid->dir, "Validation data directory");
  if (test != nullptr) app->add_option("--test", test->dir, "Test data directory");
}

void add_config_flags(CLI::App* app, Overrides& o) {
  app->add_option("--config", o.config_path, "JSON run configuration");
  app->add_option("--seed", o.seed, "Random seed");
  app->add_option("--epochs", o.epochs, "Training epochs");
  app->add_option("--batch-size", o.batch_size, "Minibatch size (0 = full batch)");
  app->add_option("--lr", o.learning_rate, "Adam learning rate");
  app->add_option("--rho", o.rho, "Weight of class separation, in [0, 1]");
  app->add_option("--l", o.l, "Discriminant directions (0 = K - 1)");
  app->add_option("--ridge", o.ridge, "Ridge scale for the total covariance");
  app->add_option("--hidden", o.hidden, "Hidden widths, e.g. 512,256,64")->delimiter(',');
  app->add_option("--output-dim", o.output, "Network output width");
  app->add_flag("--best-epoch{true},--no-best-epoch{false}", o.best_epoch,
                "Keep the epoch with the best validation loss");
}

config::RunConfig resolve_config(const Overrides& o) {
  config::RunConfig c = o.config_path.empty() ? config::RunConfig{} : config::load_config(o.config_path);
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.train.epochs = *o.epochs;
  if (o.batch_size) c.train.batch_size = *o.batch_size;
  if (o.learning_rate) c.train.adam.learning_rate = *o.learning_rate;
  if (o.rho) c.train.ida.rho = *o.rho;
  if (o.l) c.train.ida.l = *o.l;
  if (o.ridge) c.train.ida.ridge = *o.ridge;
  if (o.hidden || o.output) {
    for (auto& shape : c.networks) {
      if (o.hidden) shape.hidden = *o.hidden;
      if (o.output) shape.output = *o.output;
    }
  }
  if (o.best_epoch) {
    c.train.validation = *o.best_epoch ? trainer::Validation::BestEpoch : trainer::Validation::None;
  }
  if (o.pairs) c.ranking.pairs = *o.pairs;
  if (o.feature_fraction) c.ranking.feature_fraction = *o.feature_fraction;
  if (o.permutations) c.ranking.permutations_per_feature = *o.permutations;
  if (o.retrain_top) c.retrain_top = config::parse_selection(*o.retrain_top);
  apply_data(o.train, c.train_data);
  apply_data(o.valid, c.valid_data);
  apply_data(o.test, c.test_data);
  c.sync_seed();
  c.validate();
  return c;
}

MultiViewDataset load(const config::DataPaths& paths, const std::string& role) {
  if (paths.views.empty()) fail(ErrorKind::InvalidInput, role + " data: no view files given");
  return io::load_dataset(paths.views, paths.labels);
}

std::optional<MultiViewDataset> load_optional(const config::DataPaths& paths, const std::string& role) {
  if (paths.empty()) return std::nullopt;
  return load(paths, role);
}

Json header(const std::string& kind) {
  Json j = Json::object();
  j["deepida_version"] = kVersion;
  j["kind"] = kind;
  return j;
}

Json accuracy_block(const trainer::TrainedDeepIda& model, const std::vector<Matrix>& scores,
                    const Labels& labels) {
  Json j = Json::object();
  j["pooled"] = classifier::accuracy(trainer::predict(model, scores), labels.ids);
  for (std::size_t d = 0; d < model.num_views(); ++d) {
    const classifier::Space space{static_cast<int>(d)};
    j["view" + std::to_string(d + 1)] = classifier::accuracy(trainer::predict(model, scores, space), labels.ids);
  }
  return j;
}

Json model_metrics(const trainer::TrainedDeepIda& model, const MultiViewDataset& train,
                   const std::optional<MultiViewDataset>& valid,
                   const std::optional<MultiViewDataset>& test) {
  Json j = Json::object();
  j["final_loss"] = model.final_loss;
  j["selected_epoch"] = model.selected_epoch;
  j["optimizer_steps"] = model.optimizer_steps;
  j["l"] = model.ida.l;
  j["loss_history"] = model.loss_history;
  if (!model.validation_history.empty()) j["validation_history"] = model.validation_history;
  j["train_accuracy"] = accuracy_block(model, trainer::project(model, train), train.labels);
  if (valid) j["valid_accuracy"] = accuracy_block(model, trainer::project(model, *valid), valid->labels);
  if (test) j["test_accuracy"] = accuracy_block(model, trainer::project(model, *test), test->labels);
  return j;
}

void emit(const Json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
  } else {
    io::write_text(path, text);
  }
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorKind::IoError, "cannot create directory " + dir + ": " + ec.message());
}

// simulate ------------------------------------------------------------------

struct SimulateFlags {
  int views = 2;
  std::vector<Eigen::Index> p;
  std::vector<int> n;
  std::uint64_t seed = 1;
  std::string out;
  std::vector<double> split;
};

void write_simulation(const MultiViewDataset& data, const SimulateFlags& flags) {
  Json prov = header("provenance");
  prov["generator"] = Json::parse(data.provenance);
  if (flags.split.empty()) {
    io::save_dataset(data, flags.out);
  } else {
    if (flags.split.size() != 3) {
      fail(ErrorKind::InvalidConfig, "--split takes three weights: train,valid,test");
    }
    const double total = flags.split[0] + flags.split[1] + flags.split[2];
    if (!(total > 0.0) || *std::min_element(flags.split.begin(), flags.split.end()) < 0.0) {
      fail(ErrorKind::InvalidConfig, "--split weights must be nonnegative with a positive sum");
    }
    const simgen::SplitFractions fractions{flags.split[0] / total, flags.split[1] / total,
                                           flags.split[2] / total};
    const std::uint64_t split_seed = derive_seed(flags.seed, {7});
    const simgen::Split split = simgen::train_valid_test_split(data, fractions, split_seed);
    const std::array<std::pair<const char*, const MultiViewDataset*>, 3> parts = {
        {{"train", &split.train}, {"valid", &split.valid}, {"test", &split.test}}};
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (split.rows[i].empty()) continue;
      io::save_dataset(*parts[i].second, (fs::path(flags.out) / parts[i].first).string());
    }
    prov["split"] = {{"train", fractions.train}, {"valid", fractions.valid}, {"test", fractions.test},
                     {"seed", split_seed}};
  }
  ensure_dir(flags.out);
  emit(prov, (fs::path(flags.out) / "provenance.json").string());
}

void run_simulate_linear(const SimulateFlags& flags) {
  simgen::LinearSimSpec spec;
  if (flags.views != 2 && flags.views != 3) fail(ErrorKind::InvalidSpec, "--d must be 2 or 3");
  if (flags.p.empty()) {
    spec.p.assign(static_cast<std::size_t>(flags.views), 100);
  } else if (flags.p.size() == 1) {
    spec.p.assign(static_cast<std::size_t>(flags.views), flags.p.front());
  } else {
    spec.p = flags.p;
    if (spec.p.size() != static_cast<std::size_t>(flags.views)) {
      fail(ErrorKind::InvalidSpec, "--p lists " + std::to_string(spec.p.size()) + " widths for " +
                                       std::to_string(flags.views) + " views");
    }
  }
  if (flags.n.size() == 1) {
    spec.n_per_class.assign(3, flags.n.front());
  } else if (!flags.n.empty()) {
    spec.n_per_class = flags.n;
  } else {
    spec.n_per_class.assign(3, 60);
  }
  spec.seed = flags.seed;
  write_simulation(simgen::gen_linear(spec), flags);
}

void run_simulate_nonlinear(const SimulateFlags& flags) {
  simgen::NonlinearSimSpec spec;
  if (flags.p.size() == 1) {
    spec.p = {flags.p[0], flags.p[0]};
  } else if (flags.p.size() == 2) {
    spec.p = {flags.p[0], flags.p[1]};
  } else if (flags.p.empty()) {
    spec.p = {100, 100};
  } else {
    fail(ErrorKind::InvalidSpec, "--p takes one or two widths");
  }
  if (flags.n.size() == 2) {
    spec.n_per_class = {flags.n[0], flags.n[1]};
  } else if (!flags.n.empty()) {
    fail(ErrorKind::InvalidSpec, "--n takes two class sizes");
  }
  spec.seed = flags.seed;
  write_simulation(simgen::gen_nonlinear(spec), flags);
}

// train / rank / predict / evaluate -----------------------------------------

void run_train(const Overrides& o, const std::string& model_path, const std::string& metrics_path) {
  const config::RunConfig c = resolve_config(o);
  const MultiViewDataset train = load(c.train_data, "train");
  const auto valid = load_optional(c.valid_data, "valid");
  const auto test = load_optional(c.test_data, "test");
  if (c.train.validation == trainer::Validation::BestEpoch && !valid) {
    fail(ErrorKind::InvalidConfig, "best-epoch selection needs validation data (--valid)");
  }
  const auto specs = trainer::specs_for(c.networks, train.feature_counts());
  const trainer::TrainedDeepIda model = trainer::fit(train, specs, c.train, valid ? &*valid : nullptr);
  if (!model_path.empty()) serialize::save(model, model_path);

  Json j = header("train_metrics");
  j["config"] = Json::parse(config::effective_config(c));
  j["metrics"] = model_metrics(model, train, valid, test);
  emit(j, metrics_path);
}

Json ranking_summary(const ranking::RankingReport& report, const MultiViewDataset& data,
                     const ranking::Selection& top) {
  Json j = Json::object();
  j["pairs_succeeded"] = report.succeeded.size();
  j["pairs_failed"] = report.failed;
  double mean = 0.0;
  for (double a : report.baseline_accuracy) mean += a;
  if (!report.baseline_accuracy.empty()) mean /= static_cast<double>(report.baseline_accuracy.size());
  j["mean_out_of_bag_accuracy"] = mean;
  j["top"] = config::format_selection(top);
  const auto kept = ranking::top_features(report, top);
  Json views = Json::array();
  for (std::size_t d = 0; d < kept.size(); ++d) {
    Json names = Json::array();
    for (int f : report.order[d]) {
      if (names.size() >= kept[d].size()) break;
      names.push_back(data.feature_name(d, f));
    }
    views.push_back(std::move(names));
  }
  j["top_features"] = std::move(views);
  return j;
}

void run_rank(const Overrides& o, int workers, const std::string& top_text, const std::string& out_dir) {
  config::RunConfig c = resolve_config(o);
  c.ranking.workers = workers;
  const ranking::Selection top = config::parse_selection(top_text);
  const MultiViewDataset train = load(c.train_data, "train");
  const auto test = load_optional(c.test_data, "test");

  const ranking::RankingReport report = ranking::rank_features(train, c.networks, c.train, c.ranking);
  ensure_dir(out_dir);
  io::write_ranking_csv((fs::path(out_dir) / "ranking.csv").string(), report, train);

  Json j = header("rank_summary");
  j["config"] = Json::parse(config::effective_config(c));
  j["ranking"] = ranking_summary(report, train, top);
  if (c.retrain_top) {
    const auto specs = trainer::specs_for(c.networks, train.feature_counts());
    const trainer::TrainedDeepIda baseline = trainer::fit(train, specs, c.train);
    const trainer::TrainedDeepIda selected =
        ranking::select_and_retrain(train, report, *c.retrain_top, c.networks, c.train);
    serialize::save(selected, (fs::path(out_dir) / "model.json").string());
    j["baseline"] = model_metrics(baseline, train, std::nullopt, test);
    j["selected"] = model_metrics(selected, train, std::nullopt, test);
    j["selected"]["kept_features"] = selected.kept_features;
  }
  emit(j, (fs::path(out_dir) / "summary.json").string());
}

/// Views only; predict does not need labels.
MultiViewDataset load_unlabelled(const config::DataPaths& paths) {
  if (paths.views.empty()) fail(ErrorKind::InvalidInput, "no view files given");
  if (!paths.labels.empty() && fs::exists(paths.labels)) return io::load_dataset(paths.views, paths.labels);
  MultiViewDataset data;
  for (std::size_t d = 0; d < paths.views.size(); ++d) {
    if (!fs::exists(paths.views[d])) {
      fail(ErrorKind::IoError, "view " + std::to_string(d + 1) + ": file not found: " + paths.views[d]);
    }
    io::ViewTable table = io::read_view_csv(paths.views[d]);
    if (d > 0 && table.values.rows() != data.views.front().rows()) {
      fail(ErrorKind::ShapeMismatch, "view " + std::to_string(d + 1) + " (" + paths.views[d] + ") has " +
                                         std::to_string(table.values.rows()) + " rows, view 1 has " +
                                         std::to_string(data.views.front().rows()));
    }
    data.views.push_back(std::move(table.values));
    data.feature_names.push_back(std::move(table.names));
  }
  // Placeholder labels so the dataset validates; predictions never read them.
  data.labels.ids.assign(static_cast<std::size_t>(data.views.front().rows()), 0);
  data.labels.num_classes = 1;
  return data;
}

void check_views(const trainer::TrainedDeepIda& model, const MultiViewDataset& data) {
  if (data.num_views() != model.num_views()) {
    fail(ErrorKind::ShapeMismatch, "model has " + std::to_string(model.num_views()) +
                                       " views, data has " + std::to_string(data.num_views()));
  }
}

void run_predict(const std::string& model_path, const DataFlags& flags, const std::string& out) {
  const trainer::TrainedDeepIda model = serialize::load(model_path);
  config::DataPaths paths;
  apply_data(flags, paths);
  const MultiViewDataset data = load_unlabelled(paths);
  check_views(model, data);
  const std::vector<Matrix> scores = trainer::project(model, data);
  std::vector<std::vector<int>> per_view;
  for (std::size_t d = 0; d < model.num_views(); ++d) {
    per_view.push_back(trainer::predict(model, scores, classifier::Space{static_cast<int>(d)}));
  }
  io::write_predictions_csv(out, trainer::predict(model, scores), per_view, scores);
}

void run_evaluate(const std::string& model_path, const DataFlags& flags, const std::string& out) {
  const trainer::TrainedDeepIda model = serialize::load(model_path);
  config::DataPaths paths;
  apply_data(flags, paths);
  const MultiViewDataset data = load(paths, "evaluation");
  check_views(model, data);
  if (data.labels.num_classes > model.num_classes()) {
    fail(ErrorKind::InvalidLabels, "labels use " + std::to_string(data.labels.num_classes) +
                                       " classes, the model knows " + std::to_string(model.num_classes()));
  }
  Json j = header("evaluation");
  j["samples"] = data.num_samples();
  j["accuracy"] = accuracy_block(model, trainer::project(model, data), data.labels);
  if (data.labels.num_classes == model.num_classes()) {
    j["loss"] = trainer::evaluate_loss(model, data);
  }
  emit(j, out);
}

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  std::replace(text.begin(), text.end(), '\r', ' ');
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  log::init_from_env();
  CLI::App app{"Deep IDA: multi-view discriminant networks with bootstrap feature ranking"};
  app.set_version_flag("--version", std::string("deepida ") + kVersion);
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a simulated multi-view dataset");
  simulate->require_subcommand(1);
  auto* linear = simulate->add_subcommand("linear", "Gaussian classes with planted signal blocks");
  auto* nonlinear = simulate->add_subcommand("nonlinear", "Two-class curve data, view 2 a noisy transform");
  for (auto* sub : {linear, nonlinear}) {
    sub->add_option("--p", sim.p, "Features per view")->delimiter(',');
    sub->add_option("--seed", sim.seed, "Random seed");
    sub->add_option("--out", sim.out, "Output directory")->required();
    sub->add_option("--split", sim.split, "Train,valid,test weights, e.g. 1,0,2")->delimiter(',');
  }
  linear->add_option("--d", sim.views, "Number of views (2 or 3)");
  linear->add_option("--nk", sim.n, "Samples per class (one value or three)")->delimiter(',');
  nonlinear->add_option("--n", sim.n, "Samples in class 1 and class 2")->delimiter(',');

  Overrides train_o;
  std::string model_out;
  std::string metrics_out;
  auto* train = app.add_subcommand("train", "Train a Deep IDA model");
  add_config_flags(train, train_o);
  add_data_flags(train, train_o.train, &train_o.valid, &train_o.test);
  train->add_option("--model", model_out, "Model file to write");
  train->add_option("--metrics", metrics_out, "Metrics JSON file (default stdout)");
  int train_workers = 0;
  train->add_option("--workers", train_workers, "Accepted for symmetry with rank; training is sequential")
      ->check(CLI::NonNegativeNumber);

  Overrides rank_o;
  int workers = 0;
  std::string top = "10%";
  std::string rank_out;
  auto* rank = app.add_subcommand("rank", "Rank features by bootstrap permutation importance");
  add_config_flags(rank, rank_o);
  add_data_flags(rank, rank_o.train, nullptr, &rank_o.test);
  rank->add_option("--m", rank_o.pairs, "Bootstrap pairs");
  rank->add_option("--feature-fraction", rank_o.feature_fraction, "Fraction of features drawn per pair");
  rank->add_option("--permutations", rank_o.permutations, "Permutations per feature");
  rank->add_option("--top", top, "Features listed in the summary: N or N%");
  rank->add_option("--retrain-top", rank_o.retrain_top, "Retrain on the top N or N% features");
  rank->add_option("--workers", workers, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  rank->add_option("--out", rank_out, "Output directory")->required();

  std::string model_in;
  DataFlags predict_data;
  std::string predictions_out;
  auto* predict = app.add_subcommand("predict", "Predict classes with a trained model");
  predict->add_option("--model", model_in, "Model file")->required();
  add_data_flags(predict, predict_data, nullptr, nullptr);
  predict->add_option("--out", predictions_out, "Predictions CSV")->required();

  std::string eval_model;
  DataFlags eval_data;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Accuracy and loss of a model on labelled data");
  evaluate->add_option("--model", eval_model, "Model file")->required();
  add_data_flags(evaluate, eval_data, nullptr, nullptr);
  evaluate->add_option("--out", eval_out, "Report JSON file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: UsageError: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (linear->parsed()) {
      run_simulate_linear(sim);
    } else if (nonlinear->parsed()) {
      run_simulate_nonlinear(sim);
    } else if (train->parsed()) {
      run_train(train_o, model_out, metrics_out);
    } else if (rank->parsed()) {
      run_rank(rank_o, workers, top, rank_out);
    } else if (predict->parsed()) {
      run_predict(model_in, predict_data, predictions_out);
    } else if (evaluate->parsed()) {
      run_evaluate(eval_model, eval_data, eval_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 0;
}

}  // namespace deepida::cli

int main(int argc, char** argv) { return deepida::cli::main(argc, argv); }
