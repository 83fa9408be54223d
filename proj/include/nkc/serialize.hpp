#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "nkc/estimator.hpp"
#include "nkc/lscde.hpp"
#include "nkc/trainer.hpp"
#include "nkc/types.hpp"

namespace nkc {

using Json = nlohmann::json;

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j);
Json vector_to_json(const Vector& v);
Vector vector_from_json(const Json& j);

Json model_to_json(const NkcModel& model);
NkcModel model_from_json(const Json& j);

Json train_config_to_json(const TrainConfig& cfg);
// Overrides fields of `base` with any keys present in j; rejects unknown keys.
TrainConfig train_config_from_json(const Json& j, TrainConfig base = {});

Json train_report_to_json(const TrainReport& report);
Json eval_report_to_json(const EvalReport& report);
Json lscde_eval_to_json(const LscdeEval& eval);

void write_json_file(const std::string& path, const Json& j);
Json read_json_file(const std::string& path);

std::string timestamp_utc();

// Run provenance attached to every output file.
Json manifest_json(const std::string& command, const Json& config_echo,
                   const std::vector<std::string>& inputs,
                   const std::vector<std::string>& outputs);

}  // namespace nkc
