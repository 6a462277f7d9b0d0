#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "stattn/stattn.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  stattn_string_free(s);
  return out;
}

std::string data_file(const char* name) { return std::string(STATTN_DATA_DIR) + "/" + name; }

}  // namespace

TEST_SUITE("c_api") {

TEST_CASE("version and error reporting") {
  CHECK(std::string(stattn_version()).size() > 0);
  stattn_cohort* cohort = nullptr;
  CHECK(stattn_cohort_load("/nonexistent/dir", &cohort) == STATTN_ERR_IO);
  CHECK(cohort == nullptr);
  CHECK(std::string(stattn_last_error()).find("/nonexistent/dir") != std::string::npos);
  CHECK(stattn_cohort_generate("{\"n_patients\": 0}", 1, &cohort) == STATTN_ERR_INVALID_ARGUMENT);
  CHECK(stattn_cohort_generate("{bad json", 1, &cohort) == STATTN_ERR_PARSE);
  CHECK(stattn_cohort_generate(nullptr, 1, nullptr) == STATTN_ERR_INVALID_ARGUMENT);
  stattn_cohort_free(nullptr);
  stattn_dataset_free(nullptr);
  stattn_model_free(nullptr);
}

TEST_CASE("generate, save, load and summarize a cohort") {
  stattn_cohort* cohort = nullptr;
  REQUIRE(stattn_cohort_generate("{\"n_patients\": 30}", 4, &cohort) == STATTN_OK);
  char* json = nullptr;
  REQUIRE(stattn_cohort_summary(cohort, &json) == STATTN_OK);
  CHECK(take(json).find("\"patients\": 30") != std::string::npos);
  char* logits = nullptr;
  REQUIRE(stattn_cohort_true_logits(cohort, &logits) == STATTN_OK);
  CHECK(take(logits).find("patient_id,logit") == 0);

  test_util::TempDir dir;
  REQUIRE(stattn_cohort_save(cohort, dir.path().c_str()) == STATTN_OK);
  stattn_cohort* loaded = nullptr;
  REQUIRE(stattn_cohort_load(dir.path().c_str(), &loaded) == STATTN_OK);
  REQUIRE(stattn_cohort_summary(loaded, &json) == STATTN_OK);
  CHECK(take(json).find("\"patients\": 30") != std::string::npos);
  CHECK(stattn_cohort_true_logits(loaded, &logits) != STATTN_OK);
  stattn_cohort_free(loaded);
  stattn_cohort_free(cohort);
}

TEST_CASE("preprocess, train, predict and evaluate through handles") {
  stattn_cohort* cohort = nullptr;
  REQUIRE(stattn_cohort_generate("{\"n_patients\": 50}", 2, &cohort) == STATTN_OK);
  stattn_dataset* data = nullptr;
  REQUIRE(stattn_dataset_create(cohort, "{\"modalities\": \"labs,vitals\"}", &data) == STATTN_OK);
  CHECK(stattn_dataset_size(data) == 50);
  CHECK(stattn_dataset_width(data) == 28);
  CHECK(stattn_dataset_create(cohort, "{\"modalities\": \"genes\"}", &data) == STATTN_ERR_INVALID_ARGUMENT);

  std::vector<int> labels(50);
  REQUIRE(stattn_dataset_labels(data, labels.data(), labels.size()) == STATTN_OK);
  CHECK(stattn_dataset_labels(data, labels.data(), 49) == STATTN_ERR_SHAPE);
  std::vector<double> clinical(50);
  CHECK(stattn_dataset_clinical_risks(data, clinical.data(), clinical.size()) != STATTN_OK);
  REQUIRE(stattn_dataset_attach_clinical(data, cohort, data_file("synthetic_scoring_table.json").c_str()) == STATTN_OK);
  REQUIRE(stattn_dataset_clinical_risks(data, clinical.data(), clinical.size()) == STATTN_OK);
  for (double r : clinical) CHECK((r > 0.0 && r < 1.0));
  char* ids = nullptr;
  REQUIRE(stattn_dataset_patient_ids(data, &ids) == STATTN_OK);
  const std::string id_text = take(ids);
  CHECK(std::count(id_text.begin(), id_text.end(), '\n') == 50);

  test_util::TempDir dir;
  const std::string ckpt_dir = (dir / "ckpt").string();
  char* report = nullptr;
  REQUIRE(stattn_cross_validate(data, "{\"variant\": \"lstm\", \"epochs\": 2, \"hidden_size\": 4}", ckpt_dir.c_str(),
                                &report) == STATTN_OK);
  CHECK(take(report).find("mean_auc") != std::string::npos);
  CHECK(stattn_cross_validate(data, "{\"variant\": \"gru\"}", nullptr, &report) == STATTN_ERR_INVALID_ARGUMENT);

  stattn_model* model = nullptr;
  REQUIRE(stattn_model_load((ckpt_dir + "/fold_0.ckpt").c_str(), &model) == STATTN_OK);
  char* info = nullptr;
  REQUIRE(stattn_model_info(model, &info) == STATTN_OK);
  CHECK(take(info).find("\"variant\"") != std::string::npos);
  std::vector<double> risks(50), again(50);
  REQUIRE(stattn_model_predict(model, data, risks.data(), risks.size()) == STATTN_OK);
  for (double r : risks) CHECK((r > 0.0 && r < 1.0));
  CHECK(stattn_model_predict(model, data, risks.data(), 3) == STATTN_ERR_SHAPE);

  const std::string copy = (dir / "copy.ckpt").string();
  REQUIRE(stattn_model_save(model, copy.c_str()) == STATTN_OK);
  stattn_model* reloaded = nullptr;
  REQUIRE(stattn_model_load(copy.c_str(), &reloaded) == STATTN_OK);
  REQUIRE(stattn_model_predict(reloaded, data, again.data(), again.size()) == STATTN_OK);
  CHECK(again == risks);

  double value = 0.0;
  REQUIRE(stattn_auc(risks.data(), labels.data(), labels.size(), &value) == STATTN_OK);
  CHECK((value >= 0.0 && value <= 1.0));
  char* roc = nullptr;
  REQUIRE(stattn_roc_csv(risks.data(), labels.data(), labels.size(), &roc) == STATTN_OK);
  CHECK(take(roc).find("fpr,tpr,threshold") == 0);
  const std::vector<int> one_class(50, 1);
  CHECK(stattn_auc(risks.data(), one_class.data(), 50, &value) == STATTN_ERR_INVALID_ARGUMENT);

  stattn_model_free(reloaded);
  stattn_model_free(model);
  stattn_dataset_free(data);
  stattn_cohort_free(cohort);
}

TEST_CASE("dataset save, load and stored state") {
  stattn_cohort* cohort = nullptr;
  REQUIRE(stattn_cohort_generate("{\"n_patients\": 20}", 6, &cohort) == STATTN_OK);
  stattn_dataset* data = nullptr;
  REQUIRE(stattn_dataset_create(cohort, nullptr, &data) == STATTN_OK);
  test_util::TempDir dir;
  REQUIRE(stattn_dataset_save(data, dir.path().c_str()) == STATTN_OK);
  stattn_dataset* loaded = nullptr;
  REQUIRE(stattn_dataset_load(dir.path().c_str(), &loaded) == STATTN_OK);
  CHECK(stattn_dataset_size(loaded) == 20);
  CHECK(stattn_dataset_width(loaded) == stattn_dataset_width(data));

  char* state = nullptr;
  REQUIRE(stattn_dataset_state(data, &state) == STATTN_OK);
  const std::string state_text = take(state);
  stattn_dataset* applied = nullptr;
  REQUIRE(stattn_dataset_apply(cohort, state_text.c_str(), &applied) == STATTN_OK);
  CHECK(stattn_dataset_width(applied) == stattn_dataset_width(data));
  CHECK(stattn_dataset_apply(cohort, "{}", &applied) != STATTN_OK);

  stattn_dataset_free(applied);
  stattn_dataset_free(loaded);
  stattn_dataset_free(data);
  stattn_cohort_free(cohort);
}

}  // TEST_SUITE
