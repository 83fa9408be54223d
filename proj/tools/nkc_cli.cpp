#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nkc/datagen.hpp"
#include "nkc/errors.hpp"
#include "nkc/estimator.hpp"
#include "nkc/lscde.hpp"
#include "nkc/repr_checks.hpp"
#include "nkc/rng.hpp"
#include "nkc/serialize.hpp"
#include "nkc/trainer.hpp"

namespace {

using nkc::Index;
using nkc::Json;

struct CommonOpts {
  std::string config;
  std::string out = ".";
  std::string data;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<Index> d;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_data, bool with_model,
                bool with_d) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--out", o.out, "output directory");
  if (with_data) cmd->add_option("--data", o.data, "input dataset CSV");
  if (with_model) cmd->add_option("--model", o.model, "model JSON file");
  if (with_d)
    cmd->add_option("--d", o.d, "latent dimension")
        ->check(CLI::IsMember({3, 5}));
  cmd->add_option("--threads", o.threads, "worker threads (advisory)");
}

Json load_config(const std::string& path) {
  if (path.empty()) return Json::object();
  Json j = nkc::read_json_file(path);
  if (!j.is_object()) throw nkc::ConfigError("config root must be a JSON object");
  return j;
}

void check_keys(const Json& j, const std::set<std::string>& allowed,
                const std::string& what) {
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw nkc::ConfigError("unknown " + what + " config key: " + item.key());
}

template <typename T>
T get_or(const Json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw nkc::ConfigError("bad config value for '" + key + "': " + e.what());
  }
}

std::string out_path(const CommonOpts& o, const std::string& name) {
  std::filesystem::create_directories(o.out);
  return (std::filesystem::path(o.out) / name).string();
}

void write_with_manifest(const std::string& path, Json payload, const Json& manifest) {
  payload["manifest"] = manifest;
  nkc::write_json_file(path, payload);
}

nkc::Dataset require_data(const CommonOpts& o) {
  if (o.data.empty()) throw nkc::ConfigError("--data is required for this command");
  return nkc::load_dataset_csv(o.data);
}

nkc::NkcModel require_model(const CommonOpts& o) {
  if (o.model.empty()) throw nkc::ConfigError("--model is required for this command");
  return nkc::model_from_json(nkc::read_json_file(o.model));
}

// Proposal in the model's training space: standardized models imply unit
// training variance, otherwise fall back to the given sample.
nkc::Proposal model_proposal(const nkc::NkcModel& model, const nkc::Matrix& fallback_y,
                             Index M) {
  if (!model.standardization.is_identity()) {
    nkc::Proposal p;
    p.mean = nkc::Vector::Zero(model.meta.d_y);
    p.var = nkc::Vector::Constant(model.meta.d_y, 2.0);
    p.M = M;
    return p;
  }
  return nkc::make_proposal(fallback_y, M);
}

int cmd_generate(const CommonOpts& o) {
  Json cfg = load_config(o.config);
  check_keys(cfg, {"type", "d_x", "T", "seed", "test_fraction"}, "generate");
  const std::string type = get_or<std::string>(cfg, "type", "mixture");
  if (type != "mixture")
    throw nkc::ConfigError("generate: unsupported type '" + type + "'");
  const Index d_x = get_or<Index>(cfg, "d_x", 50);
  const Index T = get_or<Index>(cfg, "T", 30000);
  std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 0);
  if (o.seed) seed = *o.seed;
  const double test_fraction = get_or<double>(cfg, "test_fraction", 0.0);
  if (d_x < 1 || T < 1) throw nkc::ConfigError("generate: d_x and T must be positive");
  if (test_fraction < 0.0 || test_fraction >= 1.0)
    throw nkc::ConfigError("generate: test_fraction must be in [0, 1)");

  Json echo{{"type", type}, {"d_x", d_x},           {"T", T},
            {"seed", seed}, {"test_fraction", test_fraction}};

  const nkc::MixtureGenerator gen(d_x, seed);
  const nkc::Dataset ds = gen.sample(T, nkc::mix_seed(seed, 0xda7a, 1));

  std::vector<std::string> outputs;
  if (test_fraction > 0.0) {
    auto [train, test] =
        nkc::split_dataset(ds, test_fraction, nkc::mix_seed(seed, 0x7e57, 0));
    const std::string ptr = out_path(o, "train.csv");
    const std::string pte = out_path(o, "test.csv");
    nkc::save_dataset_csv(ptr, train);
    nkc::save_dataset_csv(pte, test);
    outputs = {ptr, pte};
  } else {
    const std::string p = out_path(o, "data.csv");
    nkc::save_dataset_csv(p, ds);
    outputs = {p};
  }
  const Json manifest = nkc::manifest_json("generate", echo, {}, outputs);
  for (const auto& p : outputs)
    nkc::write_json_file(p + ".manifest.json", manifest);
  const std::string pgen = out_path(o, "generator.json");
  write_with_manifest(pgen, echo, manifest);
  std::cout << "generated " << T << " samples (d_x=" << d_x << ") in " << o.out
            << "\n";
  return 0;
}

int cmd_train(const CommonOpts& o) {
  Json cfg_json = load_config(o.config);
  const bool standardize = get_or<bool>(cfg_json, "standardize", true);
  Json train_json = cfg_json;
  train_json.erase("standardize");
  nkc::TrainConfig cfg = nkc::train_config_from_json(train_json);
  if (o.seed) cfg.seed = *o.seed;
  if (o.d) cfg.d = *o.d;

  const nkc::Dataset raw = require_data(o);
  nkc::Standardizer std_rec =
      standardize ? nkc::Standardizer::fit(raw)
                  : nkc::Standardizer::identity(raw.dy(), raw.dx());
  const nkc::Dataset data = standardize ? std_rec.transform(raw) : raw;

  auto [model, report] = nkc::fit(data, cfg);
  model.standardization = std_rec;

  Json echo = nkc::train_config_to_json(cfg);
  echo["standardize"] = standardize;
  const std::string pmodel = out_path(o, "model.json");
  const std::string preport = out_path(o, "train_report.json");
  const Json manifest =
      nkc::manifest_json("train", echo, {o.data}, {pmodel, preport});
  write_with_manifest(pmodel, nkc::model_to_json(model), manifest);
  write_with_manifest(preport, nkc::train_report_to_json(report), manifest);
  std::cout << "trained: best val objective " << report.best_val_j << " (lr "
            << report.chosen_lr << ", width " << report.chosen_width << ", epoch "
            << report.best_epoch << ")\n";
  return 0;
}

int cmd_eval(const CommonOpts& o) {
  Json cfg = load_config(o.config);
  check_keys(cfg, {"original_scale", "M", "seed"}, "eval");
  const bool original_scale = get_or<bool>(cfg, "original_scale", true);
  const Index M = get_or<Index>(cfg, "M", 10000);
  std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 0);
  if (o.seed) seed = *o.seed;

  const nkc::NkcModel model = require_model(o);
  const nkc::Dataset raw = require_data(o);
  const nkc::Dataset test = model.standardization.transform(raw);
  const nkc::Proposal prop = model_proposal(model, test.Y, M);
  const nkc::EvalReport rep =
      nkc::cond_log_likelihood(model, test, prop, seed, original_scale);

  Json echo{{"original_scale", original_scale}, {"M", M}, {"seed", seed}};
  const std::string prep = out_path(o, "eval_report.json");
  const Json manifest =
      nkc::manifest_json("eval", echo, {o.model, o.data}, {prep});
  write_with_manifest(prep, nkc::eval_report_to_json(rep), manifest);
  std::cout << "mean loglik " << rep.mean_loglik << " (se " << rep.se << ") over "
            << rep.per_sample.size() << " samples\n";
  return 0;
}

int cmd_compare(const CommonOpts& o) {
  Json cfg = load_config(o.config);
  check_keys(cfg,
             {"test_fraction", "seed", "M", "d_values", "train", "lscde_centers",
              "lscde_folds"},
             "compare");
  const double test_fraction = get_or<double>(cfg, "test_fraction", 0.1);
  std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 0);
  if (o.seed) seed = *o.seed;
  const Index M = get_or<Index>(cfg, "M", 10000);
  std::vector<Index> d_values = get_or<std::vector<Index>>(cfg, "d_values", {3, 5});
  if (o.d) d_values = {*o.d};
  const Index lscde_centers = get_or<Index>(cfg, "lscde_centers", 1000);
  const Index lscde_folds = get_or<Index>(cfg, "lscde_folds", 5);

  const nkc::Dataset raw = require_data(o);
  auto [train_raw, test_raw] =
      nkc::split_dataset(raw, test_fraction, nkc::mix_seed(seed, 0x7e57, 1));
  const nkc::Standardizer std_rec = nkc::Standardizer::fit(train_raw);
  const nkc::Dataset train = std_rec.transform(train_raw);
  const nkc::Dataset test = std_rec.transform(test_raw);
  const double log_ys = std_rec.log_scale_y_sum();
  const nkc::Proposal prop = nkc::make_proposal(train.Y, M);

  Json rows = Json::array();
  std::cout << "method      mean_loglik        se\n";
  for (Index d : d_values) {
    nkc::TrainConfig tc;
    tc.widths_relative = true;
    tc.width_grid = {0.5, 1.0, 2.0, 3.0};
    if (cfg.contains("train")) tc = nkc::train_config_from_json(cfg.at("train"), tc);
    tc.d = d;
    tc.seed = nkc::mix_seed(seed, 0x7a11, static_cast<std::uint64_t>(d));
    auto [model, report] = nkc::fit(train, tc);
    model.standardization = std_rec;
    nkc::EvalReport ev = nkc::cond_log_likelihood(
        model, test, prop, nkc::mix_seed(seed, 0xe7a1, static_cast<std::uint64_t>(d)),
        false);
    const double mean_orig = ev.mean_loglik - log_ys;
    const std::string name = "NKC" + std::to_string(d);
    rows.push_back(Json{{"method", name},
                        {"mean_loglik", mean_orig},
                        {"se", ev.se},
                        {"chosen_lr", report.chosen_lr},
                        {"chosen_width", report.chosen_width}});
    std::cout << name << "        " << mean_orig << "   " << ev.se << "\n";
  }

  const nkc::LscdeModel lm = nkc::lscde_fit(
      train, lscde_centers, nkc::lscde_default_sigma_grid(train, nkc::mix_seed(seed, 0x3ed, 1)),
      nkc::kLscdeDefaultLambdaGrid, lscde_folds, nkc::mix_seed(seed, 0x15cd, 1));
  const nkc::LscdeEval le = nkc::lscde_cond_log_likelihood(lm, test);
  rows.push_back(Json{{"method", "LSCDE"},
                      {"mean_loglik", le.mean_loglik - log_ys},
                      {"se", le.se},
                      {"flagged", le.flagged},
                      {"sigma", lm.sigma},
                      {"lambda", lm.lambda}});
  std::cout << "LSCDE       " << (le.mean_loglik - log_ys) << "   " << le.se << "\n";

  Json echo{{"test_fraction", test_fraction},
            {"seed", seed},
            {"M", M},
            {"d_values", d_values},
            {"lscde_centers", lscde_centers},
            {"lscde_folds", lscde_folds}};
  if (cfg.contains("train")) echo["train"] = cfg.at("train");
  const std::string pout = out_path(o, "compare.json");
  const Json manifest = nkc::manifest_json("compare", echo, {o.data}, {pout});
  write_with_manifest(pout, Json{{"rows", rows}}, manifest);
  return 0;
}

int cmd_ica_check(const CommonOpts& o) {
  Json cfg = load_config(o.config);
  check_keys(cfg, {"d", "T", "seed", "identity_mixing", "train"}, "ica-check");
  const Index d = get_or<Index>(cfg, "d", 2);
  const Index T = get_or<Index>(cfg, "T", 30000);
  std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 41);
  if (o.seed) seed = *o.seed;
  const bool identity_mixing = get_or<bool>(cfg, "identity_mixing", false);

  nkc::TrainConfig tc;
  tc.d = d;
  tc.width_grid = {1.0, 2.0, 3.0};
  tc.lr_grid = {1e-3};
  tc.minibatch = 512;
  tc.epochs = 250;
  tc.seed = nkc::mix_seed(seed, 0x7a11, 2);
  if (cfg.contains("train")) {
    tc = nkc::train_config_from_json(cfg.at("train"), tc);
    tc.d = d;
  }

  const nkc::IcaGenerator gen = nkc::IcaGenerator::make(d, seed, identity_mixing);
  const nkc::AffineRecoveryReport rep = nkc::ica_experiment(gen, T, tc);

  Json payload{{"r2", nkc::vector_to_json(rep.r2)},
               {"mean_r2", rep.mean_r2},
               {"cond_B", rep.cond_B},
               {"mean_abs_corr", rep.mean_abs_corr},
               {"i5_min_eig", rep.i5_min_eig},
               {"B", nkc::matrix_to_json(rep.B)},
               {"b", nkc::vector_to_json(rep.b)},
               {"chosen_width", rep.chosen_width},
               {"chosen_lr", rep.chosen_lr}};
  Json echo{{"d", d},
            {"T", T},
            {"seed", seed},
            {"identity_mixing", identity_mixing},
            {"train", nkc::train_config_to_json(tc)}};
  const std::string pout = out_path(o, "ica_report.json");
  write_with_manifest(pout, payload, nkc::manifest_json("ica-check", echo, {}, {pout}));
  std::cout << "ica-check: mean R2 " << rep.mean_r2 << ", cond(B) " << rep.cond_B
            << ", I5 min eig " << rep.i5_min_eig << "\n";
  return 0;
}

int cmd_sdr_check(const CommonOpts& o) {
  Json cfg = load_config(o.config);
  check_keys(cfg, {"d_true", "d_x", "T", "seed", "M", "train"}, "sdr-check");
  const Index d_true = get_or<Index>(cfg, "d_true", 1);
  const Index d_x = get_or<Index>(cfg, "d_x", 20);
  const Index T = get_or<Index>(cfg, "T", 20000);
  std::uint64_t seed = get_or<std::uint64_t>(cfg, "seed", 51);
  if (o.seed) seed = *o.seed;
  const Index M = get_or<Index>(cfg, "M", 10000);

  nkc::TrainConfig tc;
  tc.width_grid = {0.5, 1.0};
  tc.lr_grid = {1e-3};
  tc.minibatch = 512;
  tc.epochs = 120;
  tc.seed = nkc::mix_seed(seed, 0x7a11, 3);
  if (cfg.contains("train")) tc = nkc::train_config_from_json(cfg.at("train"), tc);

  const nkc::SdrReport rep = nkc::sdr_experiment(d_true, d_x, T, tc, seed, M);
  Json payload{{"d_low", rep.d_low},
               {"d_high", rep.d_high},
               {"loglik_low", rep.loglik_low},
               {"loglik_high", rep.loglik_high},
               {"gap", rep.gap},
               {"pred_mse_h", rep.pred_mse_h},
               {"pred_mse_x", rep.pred_mse_x},
               {"pred_mse_baseline", rep.pred_mse_baseline}};
  Json echo{{"d_true", d_true}, {"d_x", d_x},
            {"T", T},           {"seed", seed},
            {"M", M},           {"train", nkc::train_config_to_json(tc)}};
  const std::string pout = out_path(o, "sdr_report.json");
  write_with_manifest(pout, payload, nkc::manifest_json("sdr-check", echo, {}, {pout}));
  std::cout << "sdr-check: loglik d=" << rep.d_low << " " << rep.loglik_low
            << ", d=" << rep.d_high << " " << rep.loglik_high << " (gap " << rep.gap
            << ")\n";
  return 0;
}

int cmd_grid(const CommonOpts& o) {
  Json cfg = load_config(o.config);
  check_keys(cfg, {"y_min", "y_max", "points", "x_rows"}, "grid");
  const double y_min = get_or<double>(cfg, "y_min", -5.0);
  const double y_max = get_or<double>(cfg, "y_max", 5.0);
  const Index points = get_or<Index>(cfg, "points", 201);
  const std::vector<Index> x_rows = get_or<std::vector<Index>>(cfg, "x_rows", {0});
  if (!(y_max > y_min) || points < 3)
    throw nkc::ConfigError("grid: need y_max > y_min and points >= 3");

  const nkc::NkcModel model = require_model(o);
  if (model.meta.d_y != 1) throw nkc::ConfigError("grid: model must have d_y = 1");
  const nkc::Dataset raw = require_data(o);
  const nkc::Dataset data = model.standardization.transform(raw);

  const double ym = model.standardization.y_mean(0);
  const double ys = model.standardization.y_scale(0);
  nkc::Vector grid_orig(points), grid_std(points);
  for (Index i = 0; i < points; ++i) {
    grid_orig(i) =
        y_min + (y_max - y_min) * static_cast<double>(i) / static_cast<double>(points - 1);
    grid_std(i) = (grid_orig(i) - ym) / ys;
  }

  Json echo{{"y_min", y_min}, {"y_max", y_max}, {"points", points}, {"x_rows", x_rows}};
  std::vector<std::string> outputs;
  for (Index row : x_rows) {
    if (row < 0 || row >= data.rows())
      throw nkc::DataError("grid: x row " + std::to_string(row) + " out of range");
    const nkc::Vector dens_std =
        nkc::density_grid(model, data.X.row(row).transpose(), grid_std);
    const std::string p = out_path(o, "grid_" + std::to_string(row) + ".csv");
    std::ofstream fout(p);
    if (!fout) throw nkc::DataError("cannot write " + p);
    fout << "y,density\n";
    char buf[80];
    for (Index i = 0; i < points; ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", grid_orig(i), dens_std(i) / ys);
      fout << buf;
    }
    outputs.push_back(p);
  }
  const Json manifest = nkc::manifest_json("grid", echo, {o.model, o.data}, outputs);
  for (const auto& p : outputs) nkc::write_json_file(p + ".manifest.json", manifest);
  std::cout << "wrote " << outputs.size() << " density grid file(s)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural kernelized conditional density estimation toolkit"};
  app.require_subcommand(1);

  CommonOpts og, ot, oe, oc, oi, os, ogr;
  CLI::App* g = app.add_subcommand("generate", "sample the synthetic generator");
  add_common(g, og, false, false, false);
  CLI::App* t = app.add_subcommand("train", "fit the conditional model");
  add_common(t, ot, true, false, true);
  CLI::App* e = app.add_subcommand("eval", "test log-likelihood of a model");
  add_common(e, oe, true, true, false);
  CLI::App* c = app.add_subcommand("compare", "NKC vs LSCDE on one dataset");
  add_common(c, oc, true, false, true);
  CLI::App* i = app.add_subcommand("ica-check", "source recovery experiment");
  add_common(i, oi, false, false, false);
  CLI::App* s = app.add_subcommand("sdr-check", "dimension reduction experiment");
  add_common(s, os, false, false, false);
  CLI::App* gr = app.add_subcommand("grid", "conditional density on a y grid");
  add_common(gr, ogr, true, true, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex);
  } catch (const CLI::ParseError& ex) {
    std::cerr << ex.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (g->parsed()) return cmd_generate(og);
    if (t->parsed()) return cmd_train(ot);
    if (e->parsed()) return cmd_eval(oe);
    if (c->parsed()) return cmd_compare(oc);
    if (i->parsed()) return cmd_ica_check(oi);
    if (s->parsed()) return cmd_sdr_check(os);
    if (gr->parsed()) return cmd_grid(ogr);
    std::cerr << app.help();
    return 2;
  } catch (const nkc::ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return 2;
  } catch (const nkc::DataError& ex) {
    std::cerr << "data error: " << ex.what() << "\n";
    return 3;
  } catch (const nkc::NumericalError& ex) {
    std::cerr << "numerical failure: " << ex.what() << "\n";
    return 4;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
}
