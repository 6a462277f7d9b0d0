#include "stattn/model.hpp"

#include "stattn/error.hpp"

namespace stattn {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::kClinical: return "clinical";
    case Variant::kLstm: return "lstm";
    case Variant::kLstmTemporal: return "lstm-temporal";
    case Variant::kLstmJoint: return "lstm-joint";
    case Variant::kLocalJoint: return "local-joint";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  if (name == "clinical" || name == "clinical-baseline-passthrough") return Variant::kClinical;
  if (name == "lstm") return Variant::kLstm;
  if (name == "lstm-temporal" || name == "lstm+temporal") return Variant::kLstmTemporal;
  if (name == "lstm-joint" || name == "lstm+joint") return Variant::kLstmJoint;
  if (name == "local-joint" || name == "local+joint") return Variant::kLocalJoint;
  fail(ErrorCode::kInvalidArgument, "unknown model variant '" + std::string(name) +
                                        "' (expected clinical, lstm, lstm-temporal, lstm-joint, local-joint)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll{Variant::kClinical, Variant::kLstm, Variant::kLstmTemporal,
                                         Variant::kLstmJoint, Variant::kLocalJoint};
  return kAll;
}

bool is_trainable(Variant v) { return v != Variant::kClinical; }

namespace {

std::uint64_t component_seed(std::uint64_t seed, std::uint64_t component) {
  std::uint64_t z = seed + component * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Model::Model(const ModelConfig& config) : config_(config) {
  if (!is_trainable(config.variant)) return;
  if (config.input_size == 0 || config.hidden_size == 0) {
    fail(ErrorCode::kInvalidArgument, "model input and hidden sizes must be positive");
  }
  // Separate streams per component, so variants that share a component
  // (every head, the stacked encoders) start from identical weights.
  Rng encoder_rng(component_seed(config.seed, 1));
  Rng attention_rng(component_seed(config.seed, 2));
  Rng head_rng(component_seed(config.seed, 3));
  if (config.variant == Variant::kLocalJoint) {
    if (config.window == 0) fail(ErrorCode::kInvalidArgument, "local window must be >= 1");
    encoder_.push_back(LstmCellParams::init(config.input_size, config.hidden_size, encoder_rng));
  } else {
    if (config.num_layers == 0) fail(ErrorCode::kInvalidArgument, "stacked encoder needs >= 1 layer");
    for (std::size_t l = 0; l < config.num_layers; ++l) {
      encoder_.push_back(
          LstmCellParams::init(l == 0 ? config.input_size : config.hidden_size, config.hidden_size, encoder_rng));
    }
  }
  if (config.variant == Variant::kLstmJoint || config.variant == Variant::kLocalJoint) {
    joint_ = JointAttnParams::init(config.hidden_size, config.attn_dim, attention_rng);
  } else if (config.variant == Variant::kLstmTemporal) {
    temporal_ = TemporalAttnParams::init(config.hidden_size, attention_rng);
  }
  head_ = MlpParams::init(config.hidden_size, head_rng);
}

HiddenMap Model::encode(Tape& tape, const FeatureSequence& seq) const {
  if (!is_trainable(config_.variant)) fail(ErrorCode::kInvalidArgument, "clinical variant has no encoder");
  if (config_.variant == Variant::kLocalJoint) {
    return local_lstm_forward(tape, seq.matrix, seq.mask, config_.window, encoder_.front());
  }
  return stacked_lstm_forward(tape, seq.matrix, seq.mask, encoder_);
}

HiddenMap Model::attend(Tape& tape, const HiddenMap& encoded) const {
  if (joint_) return joint_spatiotemporal_attention(tape, encoded, *joint_);
  if (temporal_) return temporal_attention(tape, encoded, *temporal_);
  return encoded;
}

Tensor Model::logit(Tape& tape, const FeatureSequence& seq) const {
  if (!is_trainable(config_.variant)) {
    fail(ErrorCode::kInvalidArgument, "clinical variant is not differentiable; use risk()");
  }
  return mlp_logit(tape, attend(tape, encode(tape, seq)), head_);
}

double Model::risk(const FeatureSequence& seq) const {
  if (!is_trainable(config_.variant)) {
    if (!seq.clinical_risk) {
      fail(ErrorCode::kInvalidArgument, "clinical variant needs a clinical score for patient '" + seq.patient_id + "'");
    }
    return *seq.clinical_risk;
  }
  Tape tape(false);
  return sigmoid(logit(tape, seq).item());
}

ParamList Model::parameters() const {
  ParamList params;
  for (std::size_t l = 0; l < encoder_.size(); ++l) {
    encoder_[l].append_to(params, "encoder." + std::to_string(l) + ".");
  }
  if (joint_) joint_->append_to(params, "joint.");
  if (temporal_) temporal_->append_to(params, "temporal.");
  if (is_trainable(config_.variant)) head_.append_to(params, "head.");
  return params;
}

}  // namespace stattn
