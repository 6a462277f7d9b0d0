#include "stattn/stattn.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stattn/clinical.hpp"
#include "stattn/data.hpp"
#include "stattn/error.hpp"
#include "stattn/metrics.hpp"
#include "stattn/training.hpp"
#include "text_util.hpp"

struct stattn_cohort {
  stattn::Cohort cohort;
  std::vector<double> true_logits;  // empty unless generated
};

struct stattn_dataset {
  std::vector<stattn::FeatureSequence> sequences;
  stattn::PreprocessState state;
};

struct stattn_model {
  stattn::Checkpoint checkpoint;
  stattn::Model model;
};

namespace {

using json = nlohmann::json;

thread_local std::string last_error;

int status_of(stattn::ErrorCode code) {
  switch (code) {
    case stattn::ErrorCode::kInvalidArgument: return STATTN_ERR_INVALID_ARGUMENT;
    case stattn::ErrorCode::kShapeMismatch: return STATTN_ERR_SHAPE;
    case stattn::ErrorCode::kParse: return STATTN_ERR_PARSE;
    case stattn::ErrorCode::kIo: return STATTN_ERR_IO;
    case stattn::ErrorCode::kNumeric: return STATTN_ERR_NUMERIC;
    case stattn::ErrorCode::kFormat: return STATTN_ERR_FORMAT;
  }
  return STATTN_ERR_INTERNAL;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return STATTN_OK;
  } catch (const stattn::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    last_error = e.what();
    return STATTN_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return STATTN_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return STATTN_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) stattn::fail(stattn::ErrorCode::kInvalidArgument, std::string(what) + " is null");
}

void require_count(const stattn_dataset* dataset, std::size_t count) {
  if (count != dataset->sequences.size()) {
    stattn::fail(stattn::ErrorCode::kShapeMismatch, "buffer holds " + std::to_string(count) + " values for " +
                                                        std::to_string(dataset->sequences.size()) + " sequences");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) stattn::fail(stattn::ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

extern "C" {

const char* stattn_version(void) { return "0.1.0"; }

const char* stattn_last_error(void) { return last_error.c_str(); }

void stattn_string_free(char* s) { std::free(s); }

int stattn_cohort_generate(const char* generator_json, uint64_t seed, stattn_cohort** out) {
  return guarded([&] {
    require(out, "out");
    const auto config = generator_json ? stattn::GeneratorConfig::from_json(generator_json) : stattn::GeneratorConfig{};
    auto synthetic = stattn::generate_synthetic_cohort(config, seed);
    *out = new stattn_cohort{std::move(synthetic.cohort), std::move(synthetic.true_logits)};
  });
}

int stattn_cohort_load(const char* dir, stattn_cohort** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    *out = new stattn_cohort{stattn::load_cohort(dir), {}};
  });
}

int stattn_cohort_save(const stattn_cohort* cohort, const char* dir) {
  return guarded([&] {
    require(cohort, "cohort");
    require(dir, "dir");
    stattn::write_cohort(cohort->cohort, dir);
  });
}

int stattn_cohort_summary(const stattn_cohort* cohort, char** json_out) {
  return guarded([&] {
    require(cohort, "cohort");
    require(json_out, "json_out");
    std::size_t positives = 0, visits = 0;
    for (const auto& r : cohort->cohort.records) {
      positives += static_cast<std::size_t>(r.label);
      visits += r.visits.size();
    }
    json names_static = json::array(), names_long = json::array();
    for (const auto& v : cohort->cohort.catalog.statics) names_static.push_back(v.name);
    for (const auto& v : cohort->cohort.catalog.longitudinal) names_long.push_back(v.name);
    const json j = {{"patients", cohort->cohort.records.size()},
                    {"positives", positives},
                    {"visits", visits},
                    {"static_variables", names_static},
                    {"longitudinal_variables", names_long}};
    *json_out = copy_string(j.dump(2));
  });
}

int stattn_cohort_true_logits(const stattn_cohort* cohort, char** csv_out) {
  return guarded([&] {
    require(cohort, "cohort");
    require(csv_out, "csv_out");
    if (cohort->true_logits.size() != cohort->cohort.records.size()) {
      stattn::fail(stattn::ErrorCode::kInvalidArgument, "cohort was not generated; no true logits");
    }
    std::string csv = "patient_id,logit\n";
    for (std::size_t i = 0; i < cohort->true_logits.size(); ++i) {
      csv += cohort->cohort.records[i].patient_id + "," + stattn::text::format_double(cohort->true_logits[i]) + "\n";
    }
    *csv_out = copy_string(csv);
  });
}

void stattn_cohort_free(stattn_cohort* cohort) { delete cohort; }

int stattn_dataset_create(const stattn_cohort* cohort, const char* options_json, stattn_dataset** out) {
  return guarded([&] {
    require(cohort, "cohort");
    require(out, "out");
    stattn::PreprocessOptions options;
    if (options_json) {
      const json j = json::parse(options_json);
      for (const auto& [key, value] : j.items()) {
        if (key == "prevalence_threshold") {
          options.prevalence_threshold = value.get<double>();
        } else if (key == "modalities") {
          options.modalities = stattn::parse_modality_list(value.get<std::string>());
        } else {
          stattn::fail(stattn::ErrorCode::kParse, "preprocess options: unknown key '" + key + "'");
        }
      }
    }
    auto prepared = stattn::preprocess(cohort->cohort, options);
    *out = new stattn_dataset{std::move(prepared.sequences), std::move(prepared.state)};
  });
}

int stattn_dataset_apply(const stattn_cohort* cohort, const char* state_json, stattn_dataset** out) {
  return guarded([&] {
    require(cohort, "cohort");
    require(state_json, "state_json");
    require(out, "out");
    auto state = stattn::PreprocessState::from_json(state_json);
    auto sequences = stattn::preprocess_with(cohort->cohort, state);
    *out = new stattn_dataset{std::move(sequences), std::move(state)};
  });
}

int stattn_dataset_attach_clinical(stattn_dataset* dataset, const stattn_cohort* cohort,
                                   const char* scoring_table_path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(cohort, "cohort");
    require(scoring_table_path, "scoring_table_path");
    const auto table = stattn::load_scoring_table(scoring_table_path);
    stattn::attach_clinical_risk(dataset->sequences, cohort->cohort, table);
  });
}

int stattn_dataset_state(const stattn_dataset* dataset, char** json_out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(json_out, "json_out");
    *json_out = copy_string(dataset->state.to_json());
  });
}

int stattn_dataset_save(const stattn_dataset* dataset, const char* dir) {
  return guarded([&] {
    require(dataset, "dataset");
    require(dir, "dir");
    const std::filesystem::path root(dir);
    std::filesystem::create_directories(root);
    stattn::write_sequences(dataset->sequences, root / "features.csv");
    std::ofstream out(root / "state.json");
    if (!out) stattn::fail(stattn::ErrorCode::kIo, "cannot write " + (root / "state.json").string());
    out << dataset->state.to_json() << '\n';
  });
}

int stattn_dataset_load(const char* dir, stattn_dataset** out) {
  return guarded([&] {
    require(dir, "dir");
    require(out, "out");
    const std::filesystem::path root(dir);
    auto sequences = stattn::read_sequences(root / "features.csv");
    auto state = stattn::PreprocessState::from_json(read_text(root / "state.json"));
    if (sequences.front().feature_names != stattn::feature_names(state.catalog)) {
      stattn::fail(stattn::ErrorCode::kFormat, "features.csv columns do not match state.json");
    }
    *out = new stattn_dataset{std::move(sequences), std::move(state)};
  });
}

int stattn_dataset_labels(const stattn_dataset* dataset, int* labels, size_t count) {
  return guarded([&] {
    require(dataset, "dataset");
    require(labels, "labels");
    require_count(dataset, count);
    for (std::size_t i = 0; i < count; ++i) labels[i] = dataset->sequences[i].label;
  });
}

int stattn_dataset_clinical_risks(const stattn_dataset* dataset, double* risks, size_t count) {
  return guarded([&] {
    require(dataset, "dataset");
    require(risks, "risks");
    require_count(dataset, count);
    for (std::size_t i = 0; i < count; ++i) {
      const auto& seq = dataset->sequences[i];
      if (!seq.clinical_risk) {
        stattn::fail(stattn::ErrorCode::kInvalidArgument, "no clinical score attached for patient '" + seq.patient_id + "'");
      }
      risks[i] = *seq.clinical_risk;
    }
  });
}

int stattn_dataset_patient_ids(const stattn_dataset* dataset, char** text_out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(text_out, "text_out");
    std::string text;
    for (const auto& seq : dataset->sequences) text += seq.patient_id + "\n";
    *text_out = copy_string(text);
  });
}

size_t stattn_dataset_size(const stattn_dataset* dataset) { return dataset ? dataset->sequences.size() : 0; }

size_t stattn_dataset_width(const stattn_dataset* dataset) {
  return dataset && !dataset->sequences.empty() ? dataset->sequences.front().width() : 0;
}

void stattn_dataset_free(stattn_dataset* dataset) { delete dataset; }

int stattn_cross_validate(const stattn_dataset* dataset, const char* config_json, const char* checkpoint_dir,
                          char** report_json) {
  return guarded([&] {
    require(dataset, "dataset");
    require(report_json, "report_json");
    const auto config = config_json ? stattn::TrainConfig::from_json(config_json) : stattn::TrainConfig{};
    auto report = stattn::cross_validate(dataset->sequences, config);
    json j = json::parse(report.to_json());
    if (checkpoint_dir) {
      const std::filesystem::path root(checkpoint_dir);
      std::filesystem::create_directories(root);
      const std::string state = dataset->state.to_json();
      json paths = json::array();
      for (std::size_t f = 0; f < report.checkpoints.size(); ++f) {
        auto& ckpt = report.checkpoints[f];
        ckpt.preprocess_json = state;
        const auto path = root / ("fold_" + std::to_string(f) + ".ckpt");
        stattn::save_checkpoint(ckpt, path);
        paths.push_back(path.string());
      }
      j["checkpoints"] = paths;
    }
    *report_json = copy_string(j.dump(2));
  });
}

int stattn_model_load(const char* checkpoint_path, stattn_model** out) {
  return guarded([&] {
    require(checkpoint_path, "checkpoint_path");
    require(out, "out");
    auto checkpoint = stattn::load_checkpoint(checkpoint_path);
    auto model = checkpoint.restore();
    *out = new stattn_model{std::move(checkpoint), std::move(model)};
  });
}

int stattn_model_save(const stattn_model* model, const char* checkpoint_path) {
  return guarded([&] {
    require(model, "model");
    require(checkpoint_path, "checkpoint_path");
    stattn::save_checkpoint(model->checkpoint, checkpoint_path);
  });
}

int stattn_model_info(const stattn_model* model, char** json_out) {
  return guarded([&] {
    require(model, "model");
    require(json_out, "json_out");
    const auto& c = model->checkpoint;
    const json j = {{"variant", std::string(stattn::variant_name(c.model.variant))},
                    {"input_size", c.model.input_size},
                    {"model_seed", c.model.seed},
                    {"train", json::parse(c.train.to_json())},
                    {"epoch", c.epoch},
                    {"validation_auc", c.validation_auc},
                    {"tensors", c.tensors.size()}};
    *json_out = copy_string(j.dump(2));
  });
}

int stattn_model_preprocess_state(const stattn_model* model, char** json_out) {
  return guarded([&] {
    require(model, "model");
    require(json_out, "json_out");
    *json_out = copy_string(model->checkpoint.preprocess_json);
  });
}

int stattn_model_predict(const stattn_model* model, const stattn_dataset* dataset, double* risks, size_t count) {
  return guarded([&] {
    require(model, "model");
    require(dataset, "dataset");
    require(risks, "risks");
    require_count(dataset, count);
    const auto predictions = stattn::predict(model->model, dataset->sequences);
    std::copy(predictions.begin(), predictions.end(), risks);
  });
}

void stattn_model_free(stattn_model* model) { delete model; }

int stattn_auc(const double* scores, const int* labels, size_t count, double* out) {
  return guarded([&] {
    require(scores, "scores");
    require(labels, "labels");
    require(out, "out");
    *out = stattn::auc({scores, count}, {labels, count});
  });
}

int stattn_roc_csv(const double* scores, const int* labels, size_t count, char** csv_out) {
  return guarded([&] {
    require(scores, "scores");
    require(labels, "labels");
    require(csv_out, "csv_out");
    std::string csv = "fpr,tpr,threshold\n";
    for (const auto& p : stattn::roc_curve({scores, count}, {labels, count})) {
      csv += stattn::text::format_double(p.fpr) + "," + stattn::text::format_double(p.tpr) + "," +
             stattn::text::format_double(p.threshold) + "\n";
    }
    *csv_out = copy_string(csv);
  });
}

}  // extern "C"
