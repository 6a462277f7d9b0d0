#include "stattn/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "stattn/error.hpp"
#include "stattn/metrics.hpp"
#include "stattn/ops.hpp"
#include "stattn/optim.hpp"

namespace stattn {
namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'S', 'T', 'A', 'T', 'T', 'N', 'C', 'K'};
constexpr std::uint32_t kFormatVersion = 1;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

json model_config_json(const ModelConfig& m) {
  return {{"variant", std::string(variant_name(m.variant))},
          {"input_size", m.input_size},
          {"hidden_size", m.hidden_size},
          {"num_layers", m.num_layers},
          {"window", m.window},
          {"attn_dim", m.attn_dim},
          {"seed", m.seed}};
}

ModelConfig model_config_from(const json& j) {
  ModelConfig m;
  m.variant = parse_variant(j.at("variant").get<std::string>());
  m.input_size = j.at("input_size").get<std::size_t>();
  m.hidden_size = j.at("hidden_size").get<std::size_t>();
  m.num_layers = j.at("num_layers").get<std::size_t>();
  m.window = j.at("window").get<std::size_t>();
  m.attn_dim = j.at("attn_dim").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n) {
    if (n > bytes_.size() - pos_) fail(ErrorCode::kFormat, "checkpoint truncated at byte " + std::to_string(pos_));
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t u64() { return little_endian(take(8)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(little_endian(take(4))); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t position() const { return pos_; }

 private:
  static std::uint64_t little_endian(std::string_view s) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < s.size(); ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[i])) << (8 * i);
    return v;
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

const FeatureSequence* find_degenerate(const std::vector<FeatureSequence>& seqs) {
  for (const auto& s : seqs)
    if (!s.matrix.all_finite()) return &s;
  return nullptr;
}

void require_both_classes(const std::vector<FeatureSequence>& seqs, const char* what) {
  bool pos = false, neg = false;
  for (const auto& s : seqs) (s.label == 1 ? pos : neg) = true;
  if (!pos || !neg) fail(ErrorCode::kInvalidArgument, std::string(what) + " set must contain both classes");
}

}  // namespace

void TrainConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(ErrorCode::kInvalidArgument, "train config: " + msg); };
  if (epochs == 0) bad("epochs must be positive");
  if (batch_size == 0) bad("batch_size must be positive");
  if (!(lr_start > 0.0) || !(lr_end > 0.0) || !std::isfinite(lr_start) || !std::isfinite(lr_end)) {
    bad("learning rates must be positive and finite");
  }
  if (lr_start < lr_end) bad("lr_start must not be below lr_end");
  if (hidden_size == 0) bad("hidden_size must be positive");
  if (num_layers == 0) bad("num_layers must be positive");
  if (window == 0) bad("window must be positive");
  if (attn_dim == 0) bad("attn_dim must be positive");
  if (folds < 2) bad("folds must be at least 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) bad("val_fraction must lie in (0, 1)");
  if (threads == 0) bad("threads must be positive");
}

std::string TrainConfig::to_json() const {
  json j = {{"variant", std::string(variant_name(variant))},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"lr_start", lr_start},
            {"lr_end", lr_end},
            {"seed", seed},
            {"hidden_size", hidden_size},
            {"num_layers", num_layers},
            {"window", window},
            {"attn_dim", attn_dim},
            {"folds", folds},
            {"val_fraction", val_fraction},
            {"threads", threads}};
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(std::string_view text) {
  TrainConfig c;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) fail(ErrorCode::kParse, "train config must be a JSON object");
    static const std::unordered_set<std::string> known = {
        "variant", "epochs",   "batch_size", "lr_start", "lr_end", "seed",         "hidden_size",
        "num_layers", "window", "attn_dim", "folds",    "val_fraction", "threads"};
    for (const auto& [key, value] : j.items()) {
      if (!known.count(key)) fail(ErrorCode::kParse, "train config: unknown key '" + key + "'");
    }
    if (j.contains("variant")) c.variant = parse_variant(j["variant"].get<std::string>());
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j[key].get<std::remove_reference_t<decltype(field)>>();
    };
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("lr_start", c.lr_start);
    get("lr_end", c.lr_end);
    get("seed", c.seed);
    get("hidden_size", c.hidden_size);
    get("num_layers", c.num_layers);
    get("window", c.window);
    get("attn_dim", c.attn_dim);
    get("folds", c.folds);
    get("val_fraction", c.val_fraction);
    get("threads", c.threads);
  } catch (const json::exception& e) {
    fail(ErrorCode::kParse, std::string("invalid train config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig TrainConfig::model_config(std::size_t input_size, std::uint64_t model_seed) const {
  return {variant, input_size, hidden_size, num_layers, window, attn_dim, model_seed};
}

double lr_schedule(std::size_t epoch, const TrainConfig& config) {
  if (epoch >= config.epochs) {
    fail(ErrorCode::kInvalidArgument, "lr_schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                                          std::to_string(config.epochs) + ")");
  }
  if (epoch == 0) return config.lr_start;
  if (epoch + 1 == config.epochs) return config.lr_end;
  const double progress = static_cast<double>(epoch) / static_cast<double>(config.epochs - 1);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, progress);
}

std::uint64_t fold_seed(std::uint64_t seed, std::size_t fold) { return splitmix(seed ^ splitmix(fold + 1)); }

Checkpoint Checkpoint::capture(const Model& model, const TrainConfig& train, std::size_t epoch, double validation_auc) {
  Checkpoint c;
  c.model = model.config();
  c.train = train;
  c.epoch = epoch;
  c.validation_auc = validation_auc;
  for (const auto& p : model.parameters()) {
    const auto values = p.tensor.data();
    c.tensors.push_back({p.name, p.tensor.shape(), {values.begin(), values.end()}});
  }
  return c;
}

Model Checkpoint::restore() const {
  Model model(this->model);
  auto params = model.parameters();
  if (params.size() != tensors.size()) {
    fail(ErrorCode::kFormat, "checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                                 std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& stored = tensors[i];
    auto& target = params[i];
    if (stored.name != target.name) {
      fail(ErrorCode::kFormat, "checkpoint tensor '" + stored.name + "' where '" + target.name + "' was expected");
    }
    if (stored.shape != target.tensor.shape()) {
      fail(ErrorCode::kFormat, "checkpoint tensor '" + stored.name + "' has shape " + shape_string(stored.shape) +
                                   ", model expects " + shape_string(target.tensor.shape()));
    }
    std::copy(stored.values.begin(), stored.values.end(), target.tensor.mutable_data().begin());
  }
  return model;
}

std::string encode_checkpoint(const Checkpoint& c) {
  json header = {{"model", model_config_json(c.model)},
                 {"train", json::parse(c.train.to_json())},
                 {"epoch", c.epoch},
                 {"validation_auc_bits", std::bit_cast<std::uint64_t>(c.validation_auc)},
                 {"validation_auc", c.validation_auc},
                 {"preprocess", c.preprocess_json}};
  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u64(out, header_text.size());
  out += header_text;
  put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    if (shape_numel(t.shape) != t.values.size()) {
      fail(ErrorCode::kShapeMismatch, "checkpoint tensor '" + t.name + "' has inconsistent shape");
    }
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u64(out, d);
    for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  put_u64(out, fnv1a(out));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    fail(ErrorCode::kFormat, "not a checkpoint file");
  }
  const auto body = bytes.substr(0, bytes.size() - 8);
  Reader tail(bytes.substr(bytes.size() - 8));
  if (tail.u64() != fnv1a(body)) fail(ErrorCode::kFormat, "checkpoint checksum mismatch");

  Reader r(body);
  r.take(sizeof(kMagic));
  const auto version = r.u32();
  if (version != kFormatVersion) {
    fail(ErrorCode::kFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  try {
    const json header = json::parse(r.take(r.u64()));
    c.model = model_config_from(header.at("model"));
    c.train = TrainConfig::from_json(header.at("train").dump());
    c.epoch = header.at("epoch").get<std::size_t>();
    c.validation_auc = std::bit_cast<double>(header.at("validation_auc_bits").get<std::uint64_t>());
    c.preprocess_json = header.at("preprocess").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::kFormat, std::string("checkpoint header: ") + e.what());
  }
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    StoredTensor t;
    t.name = std::string(r.take(r.u32()));
    const auto rank = r.u32();
    for (std::uint32_t d = 0; d < rank; ++d) t.shape.push_back(r.u64());
    const auto count = shape_numel(t.shape);
    if (count > (body.size() - r.position()) / 8) fail(ErrorCode::kFormat, "checkpoint tensor '" + t.name + "' truncated");
    t.values.resize(count);
    for (auto& v : t.values) v = r.f64();
    c.tensors.push_back(std::move(t));
  }
  if (r.position() != body.size()) fail(ErrorCode::kFormat, "trailing bytes in checkpoint");
  return c;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_checkpoint(buf.str());
}

std::vector<double> predict(const Model& model, const std::vector<FeatureSequence>& sequences) {
  std::vector<double> risks;
  risks.reserve(sequences.size());
  for (const auto& s : sequences) risks.push_back(model.risk(s));
  return risks;
}

double evaluate_auc(const Model& model, const std::vector<FeatureSequence>& sequences) {
  const auto risks = predict(model, sequences);
  std::vector<int> labels;
  labels.reserve(sequences.size());
  for (const auto& s : sequences) labels.push_back(s.label);
  return auc(risks, labels);
}

TrainResult train_model(const std::vector<FeatureSequence>& train, const std::vector<FeatureSequence>& validation,
                        const TrainConfig& config, std::uint64_t model_seed, const EpochCallback& on_epoch) {
  config.validate();
  if (!is_trainable(config.variant)) fail(ErrorCode::kInvalidArgument, "the clinical variant is not trained");
  if (train.empty()) fail(ErrorCode::kInvalidArgument, "empty training set");
  require_both_classes(validation, "validation");
  for (const auto* set : {&train, &validation}) {
    if (const auto* s = find_degenerate(*set)) {
      fail(ErrorCode::kNumeric, "non-finite features for patient '" + s->patient_id + "'");
    }
  }
  const std::size_t width = train.front().width();
  for (const auto* set : {&train, &validation})
    for (const auto& s : *set)
      if (s.width() != width) fail(ErrorCode::kShapeMismatch, "patient '" + s.patient_id + "' has a different feature width");

  Model model(config.model_config(width, model_seed));
  ParamList params = model.parameters();
  zero_grads(params);
  std::mt19937_64 rng(splitmix(model_seed ^ 0x5eedULL));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  bool have_best = false;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, config);
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& seq = train[order[i]];
        Tape tape;
        const Tensor logit = model.logit(tape, seq);
        const Tensor loss = ops::bce_with_logits(tape, logit, static_cast<double>(seq.label));
        const double value = loss.item();
        if (!std::isfinite(value)) {
          fail(ErrorCode::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                        std::to_string(start / config.batch_size) + ", patient '" + seq.patient_id + "'");
        }
        loss_sum += value;
        tape.backward(loss);
      }
      sgd_step(params, lr);
    }
    for (const auto& p : params) {
      if (!p.tensor.all_finite()) {
        fail(ErrorCode::kNumeric, "parameter '" + p.name + "' became non-finite at epoch " + std::to_string(epoch));
      }
    }
    EpochLog log{epoch, lr, loss_sum / static_cast<double>(train.size()), evaluate_auc(model, validation)};
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (!have_best || log.validation_auc > result.best.validation_auc) {
      result.best = Checkpoint::capture(model, config, epoch, log.validation_auc);
      have_best = true;
    }
  }
  return result;
}

double CvReport::mean_auc() const {
  if (folds.empty()) return 0.0;
  double s = 0.0;
  for (const auto& f : folds) s += f.test_auc;
  return s / static_cast<double>(folds.size());
}

std::string CvReport::to_json() const {
  json j;
  j["config"] = json::parse(config.to_json());
  j["mean_auc"] = mean_auc();
  j["folds"] = json::array();
  for (const auto& f : folds) {
    j["folds"].push_back({{"fold", f.fold},
                          {"test_auc", f.test_auc},
                          {"validation_auc", f.validation_auc},
                          {"best_epoch", f.best_epoch},
                          {"n_train", f.n_train},
                          {"n_validation", f.n_validation},
                          {"n_test", f.n_test}});
  }
  return j.dump(2);
}

CvReport cross_validate(const std::vector<FeatureSequence>& sequences, const TrainConfig& config) {
  config.validate();
  std::vector<LabeledId> ids;
  std::unordered_map<std::string, const FeatureSequence*> by_id;
  for (const auto& s : sequences) {
    ids.push_back({s.patient_id, s.label});
    by_id[s.patient_id] = &s;
  }
  const FoldSplit split = split_folds(ids, config.folds, config.val_fraction, config.seed);

  auto gather = [&](const std::vector<std::string>& list) {
    std::vector<FeatureSequence> out;
    out.reserve(list.size());
    for (const auto& id : list) out.push_back(*by_id.at(id));
    return out;
  };

  auto run_fold = [&](std::size_t f) {
    const Fold& fold = split.folds[f];
    std::unordered_set<std::string> seen(fold.train.begin(), fold.train.end());
    seen.insert(fold.validation.begin(), fold.validation.end());
    for (const auto& id : fold.test) {
      if (seen.count(id)) fail(ErrorCode::kInvalidArgument, "fold " + std::to_string(f) + ": test patient '" + id + "' leaked");
    }
    const auto test = gather(fold.test);
    FoldResult result{f, 0.0, 0.0, 0, fold.train.size(), fold.validation.size(), fold.test.size()};
    std::optional<Checkpoint> checkpoint;
    if (!is_trainable(config.variant)) {
      const Model clinical(config.model_config(sequences.front().width(), 0));
      result.test_auc = evaluate_auc(clinical, test);
      result.validation_auc = evaluate_auc(clinical, gather(fold.validation));
    } else {
      auto trained = train_model(gather(fold.train), gather(fold.validation), config, fold_seed(config.seed, f));
      result.test_auc = evaluate_auc(trained.best.restore(), test);
      result.validation_auc = trained.best.validation_auc;
      result.best_epoch = trained.best.epoch;
      checkpoint = std::move(trained.best);
    }
    return std::make_pair(result, checkpoint);
  };

  CvReport report;
  report.config = config;
  std::vector<std::pair<FoldResult, std::optional<Checkpoint>>> outcomes(split.folds.size());
  if (config.threads <= 1) {
    for (std::size_t f = 0; f < split.folds.size(); ++f) outcomes[f] = run_fold(f);
  } else {
    for (std::size_t first = 0; first < split.folds.size(); first += config.threads) {
      std::vector<std::future<std::pair<FoldResult, std::optional<Checkpoint>>>> pending;
      const std::size_t last = std::min(split.folds.size(), first + config.threads);
      for (std::size_t f = first; f < last; ++f) pending.push_back(std::async(std::launch::async, run_fold, f));
      for (std::size_t f = first; f < last; ++f) outcomes[f] = pending[f - first].get();
    }
  }
  for (auto& [result, checkpoint] : outcomes) {
    report.folds.push_back(result);
    if (checkpoint) report.checkpoints.push_back(std::move(*checkpoint));
  }
  return report;
}

}  // namespace stattn
