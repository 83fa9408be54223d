#include "nkc/serialize.hpp"

#include <ctime>
#include <fstream>
#include <set>

#include "nkc/errors.hpp"

namespace nkc {

Json matrix_to_json(const Matrix& m) {
  Json data = Json::array();
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const Json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto& data = j.at("data");
  if (static_cast<Index>(data.size()) != rows * cols)
    throw DataError("matrix JSON has wrong element count");
  Matrix m(rows, cols);
  Index k = 0;
  for (Index i = 0; i < rows; ++i)
    for (Index jj = 0; jj < cols; ++jj)
      m(i, jj) = data[static_cast<std::size_t>(k++)].get<double>();
  return m;
}

Json vector_to_json(const Vector& v) {
  Json data = Json::array();
  for (Index i = 0; i < v.size(); ++i) data.push_back(v(i));
  return data;
}

Vector vector_from_json(const Json& j) {
  Vector v(static_cast<Index>(j.size()));
  for (Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

namespace {

Json mlp_to_json(const Mlp& net) {
  Json w = Json::array(), b = Json::array();
  for (const auto& W : net.W) w.push_back(matrix_to_json(W));
  for (const auto& bb : net.b) b.push_back(vector_to_json(bb));
  return Json{{"out_act", net.out_act == OutAct::relu ? "relu" : "linear"},
              {"W", std::move(w)},
              {"b", std::move(b)}};
}

Mlp mlp_from_json(const Json& j) {
  Mlp net;
  const std::string act = j.at("out_act").get<std::string>();
  if (act == "relu")
    net.out_act = OutAct::relu;
  else if (act == "linear")
    net.out_act = OutAct::linear;
  else
    throw DataError("unknown out_act: " + act);
  for (const auto& w : j.at("W")) net.W.push_back(matrix_from_json(w));
  for (const auto& b : j.at("b")) net.b.push_back(vector_from_json(b));
  if (net.W.size() != net.b.size() || net.W.empty())
    throw DataError("mlp JSON layer mismatch");
  return net;
}

}  // namespace

Json model_to_json(const NkcModel& model) {
  return Json{
      {"basis",
       Json{{"centers", matrix_to_json(model.basis.centers)},
            {"sigma", model.basis.sigma}}},
      {"alpha", matrix_to_json(model.alpha)},
      {"mlp", mlp_to_json(model.net)},
      {"standardization",
       Json{{"y_mean", vector_to_json(model.standardization.y_mean)},
            {"y_scale", vector_to_json(model.standardization.y_scale)},
            {"x_mean", vector_to_json(model.standardization.x_mean)},
            {"x_scale", vector_to_json(model.standardization.x_scale)}}},
      {"meta",
       Json{{"d", model.meta.d},
            {"d_y", model.meta.d_y},
            {"d_x", model.meta.d_x},
            {"seed", model.meta.seed},
            {"version", model.meta.version}}}};
}

NkcModel model_from_json(const Json& j) {
  NkcModel model;
  model.basis.centers = matrix_from_json(j.at("basis").at("centers"));
  model.basis.sigma = j.at("basis").at("sigma").get<double>();
  model.alpha = matrix_from_json(j.at("alpha"));
  model.net = mlp_from_json(j.at("mlp"));
  const auto& s = j.at("standardization");
  model.standardization.y_mean = vector_from_json(s.at("y_mean"));
  model.standardization.y_scale = vector_from_json(s.at("y_scale"));
  model.standardization.x_mean = vector_from_json(s.at("x_mean"));
  model.standardization.x_scale = vector_from_json(s.at("x_scale"));
  const auto& m = j.at("meta");
  model.meta.d = m.at("d").get<Index>();
  model.meta.d_y = m.at("d_y").get<Index>();
  model.meta.d_x = m.at("d_x").get<Index>();
  model.meta.seed = m.at("seed").get<std::uint64_t>();
  model.meta.version = m.at("version").get<std::string>();
  if (model.alpha.rows() != model.meta.d ||
      model.alpha.cols() != model.basis.feature_dim())
    throw DataError("model JSON shape mismatch");
  return model;
}

Json train_config_to_json(const TrainConfig& cfg) {
  return Json{{"d", cfg.d},
              {"B", cfg.B},
              {"minibatch", cfg.minibatch},
              {"epochs", cfg.epochs},
              {"val_fraction", cfg.val_fraction},
              {"lr_grid", cfg.lr_grid},
              {"width_grid", cfg.width_grid},
              {"widths_relative", cfg.widths_relative},
              {"l2_alpha", cfg.l2_alpha},
              {"rmsprop_decay", cfg.rmsprop_decay},
              {"rmsprop_epsilon", cfg.rmsprop_epsilon},
              {"hidden", cfg.hidden},
              {"out_act", cfg.out_act == OutAct::relu ? "relu" : "linear"},
              {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const Json& j, TrainConfig base) {
  static const std::set<std::string> known{
      "d",          "B",         "minibatch",       "epochs",
      "val_fraction", "lr_grid", "width_grid",      "widths_relative",
      "l2_alpha",   "rmsprop_decay", "rmsprop_epsilon", "hidden",
      "out_act",    "seed"};
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  for (const auto& item : j.items())
    if (!known.count(item.key()))
      throw ConfigError("unknown train config key: " + item.key());
  try {
    if (j.contains("d")) base.d = j.at("d").get<Index>();
    if (j.contains("B")) base.B = j.at("B").get<Index>();
    if (j.contains("minibatch")) base.minibatch = j.at("minibatch").get<Index>();
    if (j.contains("epochs")) base.epochs = j.at("epochs").get<Index>();
    if (j.contains("val_fraction"))
      base.val_fraction = j.at("val_fraction").get<double>();
    if (j.contains("lr_grid"))
      base.lr_grid = j.at("lr_grid").get<std::vector<double>>();
    if (j.contains("width_grid"))
      base.width_grid = j.at("width_grid").get<std::vector<double>>();
    if (j.contains("widths_relative"))
      base.widths_relative = j.at("widths_relative").get<bool>();
    if (j.contains("l2_alpha")) base.l2_alpha = j.at("l2_alpha").get<double>();
    if (j.contains("rmsprop_decay"))
      base.rmsprop_decay = j.at("rmsprop_decay").get<double>();
    if (j.contains("rmsprop_epsilon"))
      base.rmsprop_epsilon = j.at("rmsprop_epsilon").get<double>();
    if (j.contains("hidden")) base.hidden = j.at("hidden").get<std::vector<Index>>();
    if (j.contains("out_act")) {
      const std::string act = j.at("out_act").get<std::string>();
      if (act == "relu")
        base.out_act = OutAct::relu;
      else if (act == "linear")
        base.out_act = OutAct::linear;
      else
        throw ConfigError("out_act must be 'linear' or 'relu'");
    }
    if (j.contains("seed")) base.seed = j.at("seed").get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad train config value: ") + e.what());
  }
  return base;
}

Json train_report_to_json(const TrainReport& report) {
  Json cands = Json::array();
  for (const auto& c : report.candidates)
    cands.push_back(Json{{"lr", c.lr},
                         {"width", c.width},
                         {"diverged", c.diverged},
                         {"train_j", c.train_j},
                         {"val_j", c.val_j}});
  return Json{{"candidates", std::move(cands)},
              {"chosen_candidate", report.chosen_candidate},
              {"chosen_lr", report.chosen_lr},
              {"chosen_width", report.chosen_width},
              {"best_epoch", report.best_epoch},
              {"best_val_j", report.best_val_j},
              {"wall_seconds", report.wall_seconds}};
}

Json eval_report_to_json(const EvalReport& report) {
  return Json{{"mean_loglik", report.mean_loglik},
              {"per_sample", vector_to_json(report.per_sample)},
              {"se", report.se},
              {"config", Json{{"original_scale", report.original_scale},
                              {"log_scale_correction", report.log_scale_correction},
                              {"proposal_samples", report.proposal_samples},
                              {"seed", report.seed}}}};
}

Json lscde_eval_to_json(const LscdeEval& eval) {
  return Json{{"mean_loglik", eval.mean_loglik},
              {"per_sample", vector_to_json(eval.per_sample)},
              {"se", eval.se},
              {"flagged", eval.flagged}};
}

void write_json_file(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("write failed: " + path);
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw ConfigError("JSON parse error in " + path + ": " + e.what());
  }
  return j;
}

std::string timestamp_utc() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json manifest_json(const std::string& command, const Json& config_echo,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs) {
  return Json{{"command", command},
              {"config", config_echo},
              {"inputs", inputs},
              {"outputs", outputs},
              {"version", kArtifactVersion},
              {"timestamp", timestamp_utc()}};
}

}  // namespace nkc
