#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "stattn/data.hpp"
#include "stattn/model.hpp"

namespace stattn {

struct TrainConfig {
  Variant variant = Variant::kLocalJoint;
  std::size_t epochs = 50;
  std::size_t batch_size = 2;
  double lr_start = 1e-3;
  double lr_end = 1e-5;
  std::uint64_t seed = 0;
  std::size_t hidden_size = 32;
  std::size_t num_layers = 2;
  std::size_t window = 6;
  std::size_t attn_dim = 8;
  std::size_t folds = 5;
  double val_fraction = 0.2;
  std::size_t threads = 1;  // folds trained concurrently; results do not depend on it

  void validate() const;
  std::string to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(std::string_view text);
  ModelConfig model_config(std::size_t input_size, std::uint64_t model_seed) const;
};

// Geometric decay from lr_start at epoch 0 to lr_end at the last epoch.
double lr_schedule(std::size_t epoch, const TrainConfig& config);

struct StoredTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  std::size_t epoch = 0;
  double validation_auc = 0.0;
  std::string preprocess_json;  // serialized PreprocessState, may be empty
  std::vector<StoredTensor> tensors;

  static Checkpoint capture(const Model& model, const TrainConfig& train, std::size_t epoch, double validation_auc);
  // Rebuilds the model and copies every stored tensor into it; names and
  // shapes must match exactly.
  Model restore() const;
};

// Binary layout: magic, format version, JSON header, named f64 tensor
// blocks, trailing FNV-1a checksum of everything before it.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;  // mean per-sample loss
  double validation_auc = 0.0;
};

struct TrainResult {
  Checkpoint best;  // highest validation AUC; ties keep the earlier epoch
  std::vector<EpochLog> history;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train_model(const std::vector<FeatureSequence>& train, const std::vector<FeatureSequence>& validation,
                        const TrainConfig& config, std::uint64_t model_seed, const EpochCallback& on_epoch = {});

std::vector<double> predict(const Model& model, const std::vector<FeatureSequence>& sequences);
double evaluate_auc(const Model& model, const std::vector<FeatureSequence>& sequences);

struct FoldResult {
  std::size_t fold = 0;
  double test_auc = 0.0;
  double validation_auc = 0.0;
  std::size_t best_epoch = 0;
  std::size_t n_train = 0;
  std::size_t n_validation = 0;
  std::size_t n_test = 0;
};

struct CvReport {
  TrainConfig config;
  std::vector<FoldResult> folds;
  std::vector<Checkpoint> checkpoints;  // one per fold, empty for the clinical variant
  double mean_auc() const;
  std::string to_json() const;
};

// Stratified k-fold cross-validation. The clinical variant is scored
// directly from FeatureSequence::clinical_risk without training.
CvReport cross_validate(const std::vector<FeatureSequence>& sequences, const TrainConfig& config);

// Seed used to initialize the model of a given fold.
std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold);

}  // namespace stattn
