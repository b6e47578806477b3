#ifndef PAD_MODEL_HPP_
#define PAD_MODEL_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "pad/manifest.hpp"
#include "pad/nn.hpp"

namespace pad {

enum class Backbone { paper_default, toy_cnn };
enum class HeadSetup { binary_only, binary_plus_multiclass };

std::string to_string(Backbone b);
std::string to_string(HeadSetup h);
Backbone backbone_from_string(const std::string& s);
HeadSetup heads_from_string(const std::string& s);

// Class-index convention, fixed project-wide: index 1 of the binary head is
// the attack class; the multiclass head index equals the AttackType code.
inline constexpr int kBinaryAttackIndex = 1;

struct ModelConfig {
  Backbone backbone = Backbone::toy_cnn;
  int input_size = 224;
  bool pretrained = false;
  HeadSetup heads = HeadSetup::binary_only;
  int n_attack_classes = kNumAttackClasses;
};

struct UaiConfig {
  ModelConfig base;
  int dim_e1 = 128;
  int dim_e2 = 64;
  double dropout_rate = 0.5;
  int decoder_output_size = 0;  // 0 means "same as base.input_size"
};

void validate_model_config(const ModelConfig& config);
void validate_uai_config(const UaiConfig& config);

// Gradient tap at a convolutional layer, for class-activation mapping.
struct CamTap {
  Tensor activation;  // (N, K, h, w)
  Tensor grad;        // d score / d activation, same shape
};

// Backbone + softmax head(s).
class PadModel {
 public:
  PadModel(const ModelConfig& config, uint32_t seed);

  struct Output {
    Tensor binary_logits, binary_probs;
    std::optional<Tensor> mc_logits, mc_probs;
  };
  Output forward(const Tensor& images, bool train);

  // Eval-mode attack probabilities (binary head, attack index).
  std::vector<double> attack_probs(const Tensor& images);

  const ModelConfig& config() const { return config_; }
  int feature_dim() const { return feature_dim_; }
  nn::Sequential& trunk() { return trunk_; }
  nn::Dense& binary_head() { return *binary_head_; }
  nn::Dense* multiclass_head() { return mc_head_.get(); }
  std::vector<nn::Param*> params();

  std::string default_cam_layer() const { return trunk_.last_spatial_layer(); }
  CamTap cam_tap(const Tensor& images, int target_class, bool use_multiclass_head,
                 const std::string& layer);

 private:
  ModelConfig config_;
  int feature_dim_ = 0;
  nn::Sequential trunk_;
  std::unique_ptr<nn::Dense> binary_head_;
  std::unique_ptr<nn::Dense> mc_head_;
};

// Adversarial-invariance assembly: encoder producing two embeddings, a
// predictor on e1, a decoder reconstructing the input from (dropout(e1), e2),
// and two disentanglers that try to reconstruct each embedding from the
// other. MAIN = encoder + predictor + decoder; ADVERSARY = disentanglers.
class UaiModel {
 public:
  UaiModel(const UaiConfig& config, uint32_t seed);

  struct Output {
    Tensor e1, e2;
    Tensor e1_recon;  // disentangler reconstruction of e1 (from e2)
    Tensor e2_recon;  // reconstruction of e2 (from e1)
    Tensor binary_logits, binary_probs;
    std::optional<Tensor> mc_logits, mc_probs;
    Tensor x_recon;
  };
  Output forward(const Tensor& images, bool train);

  struct Embeddings {
    Tensor e1, e2;
  };
  Embeddings embed(const Tensor& images, bool train);

  std::vector<double> attack_probs(const Tensor& images);

  const UaiConfig& config() const { return config_; }
  nn::Sequential& trunk() { return trunk_; }
  nn::Dense& proj_e1() { return *proj_e1_; }
  nn::Dense& proj_e2() { return *proj_e2_; }
  nn::Dense& binary_head() { return *binary_head_; }
  nn::Dense* multiclass_head() { return mc_head_.get(); }
  nn::Dropout& dropout() { return *dropout_; }
  nn::Sequential& decoder() { return decoder_; }
  nn::Sequential& disentangler_f1() { return f1_; }  // e2 -> e1'
  nn::Sequential& disentangler_f2() { return f2_; }  // e1 -> e2'

  std::vector<nn::Param*> main_params();
  std::vector<nn::Param*> adversary_params();
  std::vector<nn::Param*> params();

  std::string default_cam_layer() const { return trunk_.last_spatial_layer(); }
  CamTap cam_tap(const Tensor& images, int target_class, bool use_multiclass_head,
                 const std::string& layer);

 private:
  UaiConfig config_;
  int feature_dim_ = 0;
  nn::Sequential trunk_;
  std::unique_ptr<nn::Dense> proj_e1_, proj_e2_;
  std::unique_ptr<nn::Dense> binary_head_, mc_head_;
  std::unique_ptr<nn::Dropout> dropout_;
  nn::Sequential decoder_;
  nn::Sequential f1_, f2_;
};

PadModel build_classifier(const ModelConfig& config, uint32_t seed);
UaiModel build_uai(const UaiConfig& config, uint32_t seed);

// Attack-class component of the binary softmax, one value per image.
std::vector<double> predict_attack_prob(PadModel& model, const Tensor& images);
std::vector<double> predict_attack_prob(UaiModel& model, const Tensor& images);

// Checkpoint directory: weights.bin + model.json (config and the class-index
// convention).
enum class CheckpointKind { classifier, uai };
void save_checkpoint(const std::filesystem::path& dir, PadModel& model);
void save_checkpoint(const std::filesystem::path& dir, UaiModel& model);
CheckpointKind checkpoint_kind(const std::filesystem::path& dir);
PadModel load_classifier_checkpoint(const std::filesystem::path& dir);
UaiModel load_uai_checkpoint(const std::filesystem::path& dir);

}  // namespace pad

#endif  // PAD_MODEL_HPP_
