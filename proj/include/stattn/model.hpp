#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "stattn/layers.hpp"
#include "stattn/sequence.hpp"

namespace stattn {

enum class Variant {
  kClinical,
  kLstm,
  kLstmTemporal,
  kLstmJoint,
  kLocalJoint,
};

// Canonical names: clinical, lstm, lstm-temporal, lstm-joint, local-joint.
// Parsing also accepts the '+' spellings (lstm+joint) and
// clinical-baseline-passthrough.
std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
const std::vector<Variant>& all_variants();
bool is_trainable(Variant v);

struct ModelConfig {
  Variant variant = Variant::kLocalJoint;
  std::size_t input_size = 0;
  std::size_t hidden_size = 32;
  std::size_t num_layers = 2;  // stacked encoder only
  std::size_t window = 6;      // local encoder only
  std::size_t attn_dim = 8;    // joint attention only
  std::uint64_t seed = 0;
};

// Encoder -> optional attention -> MLP head, per variant. The clinical
// variant holds no parameters and reads FeatureSequence::clinical_risk.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }

  HiddenMap encode(Tape& tape, const FeatureSequence& seq) const;
  HiddenMap attend(Tape& tape, const HiddenMap& encoded) const;
  Tensor logit(Tape& tape, const FeatureSequence& seq) const;

  // Forward pass without recording; risk in (0, 1).
  double risk(const FeatureSequence& seq) const;

  // Named views of the trainable tensors, in a fixed order.
  ParamList parameters() const;

  std::vector<LstmCellParams>& encoder_layers() { return encoder_; }
  const std::vector<LstmCellParams>& encoder_layers() const { return encoder_; }
  std::optional<JointAttnParams>& joint_attention() { return joint_; }
  std::optional<TemporalAttnParams>& temporal() { return temporal_; }
  MlpParams& head() { return head_; }
  const MlpParams& head() const { return head_; }

 private:
  ModelConfig config_;
  std::vector<LstmCellParams> encoder_;
  std::optional<JointAttnParams> joint_;
  std::optional<TemporalAttnParams> temporal_;
  MlpParams head_;
};

}  // namespace stattn
