// Command-line front end. Talks to the library only through stattn.h.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stattn/stattn.h"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check(int status, const char* what) {
  if (status != STATTN_OK) throw CliError(std::string(what) + ": " + stattn_last_error());
}

std::string take(char* s) {
  std::string out = s ? s : "";
  stattn_string_free(s);
  return out;
}

struct CohortPtr {
  stattn_cohort* p = nullptr;
  ~CohortPtr() { stattn_cohort_free(p); }
};
struct DatasetPtr {
  stattn_dataset* p = nullptr;
  ~DatasetPtr() { stattn_dataset_free(p); }
};
struct ModelPtr {
  stattn_model* p = nullptr;
  ~ModelPtr() { stattn_model_free(p); }
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CliError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw CliError("cannot write " + path.string());
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Records what a command read and wrote; saved as manifest.json next to the
// outputs.
class Manifest {
 public:
  Manifest(std::string command, fs::path out_dir)
      : command_(std::move(command)), out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {}

  void config(const std::string& key, json value) { config_[key] = std::move(value); }
  void seed(std::uint64_t s) { seed_ = s; }
  void input(const fs::path& path) {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path))
        if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) input(f);
      return;
    }
    inputs_[path.string()] = fnv1a_hex(read_file(path));
  }
  void output(const fs::path& path) { outputs_.push_back(path.string()); }

  void write() const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    json j = {{"command", command_},    {"config", config_},     {"seed", seed_},
              {"inputs", inputs_},      {"outputs", outputs_},   {"wall_clock_seconds", seconds},
              {"library_version", stattn_version()}};
    write_file(out_dir_ / "manifest.json", j.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path out_dir_;
  std::chrono::steady_clock::time_point start_;
  json config_ = json::object();
  json seed_ = nullptr;
  std::map<std::string, std::string> inputs_;
  std::vector<std::string> outputs_;
};

// Options shared by train and compare.
struct TrainFlags {
  std::string data;
  std::string modalities = "all";
  double prevalence_threshold = 0.95;
  std::string scoring_table;
  std::string config_path;
  int epochs = -1;
  int folds = -1;
  int threads = -1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--data", data, "Cohort directory holding static.csv and visits.csv")->required();
    cmd->add_option("--modalities", modalities,
                    "Comma-separated subset of labs,vitals,demographic,history,imaging, or all")
        ->capture_default_str();
    cmd->add_option("--prevalence-threshold", prevalence_threshold,
                    "Keep longitudinal variables observed in more than this fraction of patients")
        ->capture_default_str();
    cmd->add_option("--scoring-table", scoring_table, "Scoring table JSON; required for the clinical variant");
    cmd->add_option("--config", config_path, "Train config JSON; flags given explicitly override it");
    cmd->add_option("--epochs", epochs, "Override the number of epochs");
    cmd->add_option("--folds", folds, "Override the number of folds");
    cmd->add_option("--threads", threads, "Folds trained concurrently");
  }

  json config(const std::string& variant, std::uint64_t seed) const {
    json c = config_path.empty() ? json::object() : json::parse(read_file(config_path));
    c["variant"] = variant;
    c["seed"] = seed;
    if (epochs >= 0) c["epochs"] = epochs;
    if (folds >= 0) c["folds"] = folds;
    if (threads >= 0) c["threads"] = threads;
    return c;
  }

  json preprocess_options() const {
    return {{"modalities", modalities}, {"prevalence_threshold", prevalence_threshold}};
  }
};

// Loads and preprocesses a raw cohort; attaches clinical risk when a scoring
// table is given.
void prepare(const TrainFlags& flags, CohortPtr& cohort, DatasetPtr& dataset) {
  check(stattn_cohort_load(flags.data.c_str(), &cohort.p), "loading cohort");
  check(stattn_dataset_create(cohort.p, flags.preprocess_options().dump().c_str(), &dataset.p), "preprocessing");
  if (!flags.scoring_table.empty()) {
    check(stattn_dataset_attach_clinical(dataset.p, cohort.p, flags.scoring_table.c_str()), "clinical scoring");
  }
}

std::vector<double> predict_risks(const ModelPtr& model, const DatasetPtr& dataset) {
  std::vector<double> risks(stattn_dataset_size(dataset.p));
  check(stattn_model_predict(model.p, dataset.p, risks.data(), risks.size()), "prediction");
  return risks;
}

constexpr const char* kFormats = R"(File formats:
  static.csv     patient_id,label,<static columns>; binary flags as 0/1; empty cell = missing
  visits.csv     patient_id,day_index,<longitudinal columns>; empty cell = missing
                 Column headers carry the modality as a prefix: lab:, vital:, demo:, hist:, img:
  features.csv   patient_id,step,label,clinical_risk,<feature columns>, values in [0,1]
  state.json     preprocessing state: catalog, (variable, min, max) scaling triples, medians
  report.json    cross-validation report: config, per-fold test AUC and best epoch, mean AUC
  *.ckpt         binary checkpoint: magic, version, JSON header, named float64 tensors, checksum
  manifest.json  command, config, seed, input hashes, outputs, wall-clock seconds)";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Longitudinal risk models with joint spatiotemporal attention"};
  app.footer(kFormats);
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with planted signals");
  std::string synth_out, synth_config;
  long long synth_n = 365;
  std::uint64_t synth_seed = 0;
  std::map<std::string, double> synth_overrides;
  double severity = NAN, drift = NAN, motif = NAN, long_range = NAN, label_noise = NAN, interleave = NAN, missing = NAN;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--n", synth_n, "Number of patients")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Random seed")->capture_default_str();
  synth->add_option("--config", synth_config, "Generator config JSON; flags override it");
  synth->add_option("--severity", severity, "Logit weight of the latent severity");
  synth->add_option("--drift", drift, "Logit weight of the severity trend across the stay");
  synth->add_option("--motif", motif, "Logit weight of the short-range ordered motif");
  synth->add_option("--long-range", long_range, "Logit weight of the early x late interaction");
  synth->add_option("--label-noise", label_noise, "Scale of logistic label noise (0 = deterministic)");
  synth->add_option("--interleave", interleave, "Probability that adjacent visits swap records");
  synth->add_option("--missing-rate", missing, "Probability that an observation is missing");
  synth->footer("Writes static.csv, visits.csv, truth.csv (noise-free logits), generator.json, manifest.json.");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "Filter, normalize, impute and assemble feature sequences");
  TrainFlags prep_flags;
  std::string prep_out;
  prep->add_option("--data", prep_flags.data, "Cohort directory")->required();
  prep->add_option("--out", prep_out, "Output directory")->required();
  prep->add_option("--modalities", prep_flags.modalities, "Modalities to keep, or all")->capture_default_str();
  prep->add_option("--prevalence-threshold", prep_flags.prevalence_threshold, "Prevalence filter threshold")
      ->capture_default_str();
  prep->add_option("--scoring-table", prep_flags.scoring_table, "Attach clinical risk from this scoring table");
  prep->footer("Writes features.csv, state.json, manifest.json.");

  // train
  auto* train = app.add_subcommand("train", "Cross-validate one model variant");
  TrainFlags train_flags;
  std::string train_out, variant = "local-joint";
  std::uint64_t train_seed = 0;
  train_flags.add_to(train);
  train->add_option("--variant", variant, "clinical, lstm, lstm-temporal, lstm-joint or local-joint")
      ->capture_default_str();
  train->add_option("--seed", train_seed, "Seed for folds, initialization and shuffling")->capture_default_str();
  train->add_option("--out", train_out, "Output directory")->required();
  train->footer("Writes report.json, fold_<k>.ckpt per fold, manifest.json.");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a cohort with a checkpoint or the clinical table");
  std::string eval_data, eval_ckpt, eval_table, eval_roc, eval_pred, eval_out;
  evaluate->add_option("--data", eval_data, "Cohort directory")->required();
  evaluate->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
  evaluate->add_option("--scoring-table", eval_table, "Score with the clinical table instead of a checkpoint");
  evaluate->add_option("--roc", eval_roc, "Write ROC points (fpr,tpr,threshold) to this file");
  evaluate->add_option("--predictions", eval_pred, "Write patient_id,label,risk to this file");
  evaluate->add_option("--out", eval_out, "Directory for the manifest (default: current directory)");
  evaluate->footer("Prints auc,<value>. Exactly one of --checkpoint or --scoring-table is required.");

  // compare
  auto* compare = app.add_subcommand("compare", "Cross-validate several variants over several seeds");
  TrainFlags cmp_flags;
  std::vector<std::string> cmp_variants;
  std::vector<std::uint64_t> cmp_seeds{0, 1, 2, 3, 4};
  std::string cmp_out;
  cmp_flags.add_to(compare);
  compare->add_option("--variants", cmp_variants, "Variants to compare (at least two)")->delimiter(',')->required();
  compare->add_option("--seeds", cmp_seeds, "Training seeds")->delimiter(',')->capture_default_str();
  compare->add_option("--out", cmp_out, "Output directory")->required();
  compare->footer("Writes compare.csv (variant,mean_auc,sd_auc,seeds,aucs; sorted by mean), runs.json, manifest.json.");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      if (synth_n <= 0) throw CLI::ValidationError("--n", "must be a positive number of patients");
      json config = synth_config.empty() ? json::object() : json::parse(read_file(synth_config));
      config["n_patients"] = synth_n;
      const std::pair<const char*, double> overrides[] = {
          {"severity_strength", severity},  {"drift_strength", drift},         {"motif_strength", motif},
          {"long_range_strength", long_range}, {"label_noise", label_noise}, {"interleave_noise", interleave},
          {"missing_rate", missing}};
      for (const auto& [key, value] : overrides)
        if (!std::isnan(value)) config[key] = value;
      fs::create_directories(synth_out);
      Manifest manifest("synth", synth_out);
      if (!synth_config.empty()) manifest.input(synth_config);
      CohortPtr cohort;
      check(stattn_cohort_generate(config.dump().c_str(), synth_seed, &cohort.p), "generating cohort");
      check(stattn_cohort_save(cohort.p, synth_out.c_str()), "writing cohort");
      char* truth = nullptr;
      check(stattn_cohort_true_logits(cohort.p, &truth), "truth");
      write_file(fs::path(synth_out) / "truth.csv", take(truth));
      write_file(fs::path(synth_out) / "generator.json", config.dump(2) + "\n");
      manifest.config("generator", config);
      manifest.seed(synth_seed);
      for (const char* f : {"static.csv", "visits.csv", "truth.csv", "generator.json"}) {
        manifest.output(fs::path(synth_out) / f);
      }
      manifest.write();
      char* summary = nullptr;
      check(stattn_cohort_summary(cohort.p, &summary), "summary");
      const auto s = json::parse(take(summary));
      std::cout << "wrote " << s["patients"] << " patients (" << s["positives"] << " positive) to " << synth_out
                << "\n";
    } else if (prep->parsed()) {
      fs::create_directories(prep_out);
      Manifest manifest("preprocess", prep_out);
      manifest.input(fs::path(prep_flags.data) / "static.csv");
      manifest.input(fs::path(prep_flags.data) / "visits.csv");
      if (!prep_flags.scoring_table.empty()) manifest.input(prep_flags.scoring_table);
      CohortPtr cohort;
      DatasetPtr dataset;
      prepare(prep_flags, cohort, dataset);
      check(stattn_dataset_save(dataset.p, prep_out.c_str()), "writing features");
      manifest.config("preprocess", prep_flags.preprocess_options());
      manifest.output(fs::path(prep_out) / "features.csv");
      manifest.output(fs::path(prep_out) / "state.json");
      manifest.write();
      std::cout << "wrote " << stattn_dataset_size(dataset.p) << " sequences of width "
                << stattn_dataset_width(dataset.p) << " to " << prep_out << "\n";
    } else if (train->parsed()) {
      if (variant == "clinical" && train_flags.scoring_table.empty()) {
        throw CLI::ValidationError("--scoring-table", "the clinical variant needs a scoring table");
      }
      fs::create_directories(train_out);
      Manifest manifest("train", train_out);
      manifest.input(fs::path(train_flags.data) / "static.csv");
      manifest.input(fs::path(train_flags.data) / "visits.csv");
      if (!train_flags.scoring_table.empty()) manifest.input(train_flags.scoring_table);
      if (!train_flags.config_path.empty()) manifest.input(train_flags.config_path);
      CohortPtr cohort;
      DatasetPtr dataset;
      prepare(train_flags, cohort, dataset);
      const json config = train_flags.config(variant, train_seed);
      char* report = nullptr;
      check(stattn_cross_validate(dataset.p, config.dump().c_str(), train_out.c_str(), &report), "training");
      const json r = json::parse(take(report));
      write_file(fs::path(train_out) / "report.json", r.dump(2) + "\n");
      manifest.config("train", r["config"]);
      manifest.config("preprocess", train_flags.preprocess_options());
      manifest.seed(train_seed);
      manifest.output(fs::path(train_out) / "report.json");
      for (const auto& p : r.value("checkpoints", json::array())) manifest.output(p.get<std::string>());
      manifest.write();
      for (const auto& f : r["folds"]) {
        std::cout << "fold " << f["fold"] << " test_auc " << f["test_auc"].get<double>() << " best_epoch "
                  << f["best_epoch"] << "\n";
      }
      std::cout << variant << " mean_auc " << r["mean_auc"].get<double>() << "\n";
    } else if (evaluate->parsed()) {
      if (eval_ckpt.empty() == eval_table.empty()) {
        throw CLI::ValidationError("evaluate", "give exactly one of --checkpoint or --scoring-table");
      }
      const fs::path out_dir = eval_out.empty() ? fs::current_path() : fs::path(eval_out);
      fs::create_directories(out_dir);
      Manifest manifest("evaluate", out_dir);
      manifest.input(fs::path(eval_data) / "static.csv");
      manifest.input(fs::path(eval_data) / "visits.csv");
      CohortPtr cohort;
      check(stattn_cohort_load(eval_data.c_str(), &cohort.p), "loading cohort");
      DatasetPtr dataset;
      std::vector<double> risks;
      if (!eval_ckpt.empty()) {
        manifest.input(eval_ckpt);
        ModelPtr model;
        check(stattn_model_load(eval_ckpt.c_str(), &model.p), "loading checkpoint");
        char* state = nullptr;
        check(stattn_model_preprocess_state(model.p, &state), "checkpoint state");
        const std::string state_json = take(state);
        if (state_json.empty()) throw CliError("checkpoint carries no preprocessing state");
        check(stattn_dataset_apply(cohort.p, state_json.c_str(), &dataset.p), "preprocessing");
        risks = predict_risks(model, dataset);
      } else {
        manifest.input(eval_table);
        check(stattn_dataset_create(cohort.p, nullptr, &dataset.p), "preprocessing");
        check(stattn_dataset_attach_clinical(dataset.p, cohort.p, eval_table.c_str()), "clinical scoring");
        risks.resize(stattn_dataset_size(dataset.p));
        check(stattn_dataset_clinical_risks(dataset.p, risks.data(), risks.size()), "clinical scoring");
      }
      std::vector<int> labels(risks.size());
      check(stattn_dataset_labels(dataset.p, labels.data(), labels.size()), "labels");
      char* id_text = nullptr;
      check(stattn_dataset_patient_ids(dataset.p, &id_text), "patient ids");
      std::vector<std::string> ids;
      {
        std::istringstream lines(take(id_text));
        for (std::string id; std::getline(lines, id);) ids.push_back(id);
      }
      double auc = 0.0;
      check(stattn_auc(risks.data(), labels.data(), risks.size(), &auc), "AUC");
      if (!eval_roc.empty()) {
        char* roc = nullptr;
        check(stattn_roc_csv(risks.data(), labels.data(), risks.size(), &roc), "ROC");
        write_file(eval_roc, take(roc));
        manifest.output(eval_roc);
      }
      if (!eval_pred.empty()) {
        std::ostringstream pred;
        pred << "patient_id,label,risk\n";
        pred.precision(17);
        for (std::size_t i = 0; i < ids.size(); ++i) pred << ids[i] << ',' << labels[i] << ',' << risks[i] << '\n';
        write_file(eval_pred, pred.str());
        manifest.output(eval_pred);
      }
      manifest.config("checkpoint", eval_ckpt);
      manifest.config("scoring_table", eval_table);
      manifest.config("auc", auc);
      manifest.write();
      std::cout << "auc," << auc << "\n";
    } else if (compare->parsed()) {
      if (cmp_variants.size() < 2) throw CLI::ValidationError("--variants", "need at least two variants");
      if (cmp_seeds.empty()) throw CLI::ValidationError("--seeds", "need at least one seed");
      fs::create_directories(cmp_out);
      Manifest manifest("compare", cmp_out);
      manifest.input(fs::path(cmp_flags.data) / "static.csv");
      manifest.input(fs::path(cmp_flags.data) / "visits.csv");
      if (!cmp_flags.scoring_table.empty()) manifest.input(cmp_flags.scoring_table);
      if (!cmp_flags.config_path.empty()) manifest.input(cmp_flags.config_path);
      CohortPtr cohort;
      DatasetPtr dataset;
      prepare(cmp_flags, cohort, dataset);

      struct Row {
        std::string variant;
        std::vector<double> aucs;
        double mean = 0.0, sd = 0.0;
      };
      std::vector<Row> rows;
      json runs = json::array();
      for (const auto& v : cmp_variants) {
        Row row{v, {}, 0.0, 0.0};
        for (auto seed : cmp_seeds) {
          char* report = nullptr;
          check(stattn_cross_validate(dataset.p, cmp_flags.config(v, seed).dump().c_str(), nullptr, &report),
                "training");
          const json r = json::parse(take(report));
          row.aucs.push_back(r["mean_auc"].get<double>());
          runs.push_back({{"variant", v}, {"seed", seed}, {"report", r}});
          std::cerr << v << " seed " << seed << " mean_auc " << row.aucs.back() << "\n";
        }
        for (double a : row.aucs) row.mean += a;
        row.mean /= static_cast<double>(row.aucs.size());
        for (double a : row.aucs) row.sd += (a - row.mean) * (a - row.mean);
        row.sd = row.aucs.size() > 1 ? std::sqrt(row.sd / static_cast<double>(row.aucs.size() - 1)) : 0.0;
        rows.push_back(std::move(row));
      }
      std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.mean > b.mean; });
      std::ostringstream table;
      table.precision(6);
      table << "variant,mean_auc,sd_auc,seeds,aucs\n";
      for (const auto& r : rows) {
        table << r.variant << ',' << r.mean << ',' << r.sd << ',' << r.aucs.size() << ',';
        for (std::size_t i = 0; i < r.aucs.size(); ++i) table << (i ? ";" : "") << r.aucs[i];
        table << '\n';
      }
      write_file(fs::path(cmp_out) / "compare.csv", table.str());
      write_file(fs::path(cmp_out) / "runs.json", runs.dump(2) + "\n");
      manifest.config("variants", cmp_variants);
      manifest.config("seeds", cmp_seeds);
      manifest.config("train", cmp_flags.config("<variant>", 0));
      manifest.config("preprocess", cmp_flags.preprocess_options());
      manifest.output(fs::path(cmp_out) / "compare.csv");
      manifest.output(fs::path(cmp_out) / "runs.json");
      manifest.write();
      std::cout << table.str();
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
