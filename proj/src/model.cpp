#include "pad/model.hpp"

#include <cstring>
#include <fstream>

#include "json.hpp"

namespace pad {

namespace {

struct BackbonePlan {
  std::vector<int> channels;
  int feature_dim = 0;
};

BackbonePlan backbone_plan(const ModelConfig& config) {
  switch (config.backbone) {
    case Backbone::toy_cnn:
      return {{8, 16, 32}, 32};
    case Backbone::paper_default:
      return {{16, 32, 64, 128, 256}, 256};
  }
  throw ConfigError("unknown backbone");
}

void build_trunk(nn::Sequential* trunk, const ModelConfig& config, std::mt19937& rng) {
  const BackbonePlan plan = backbone_plan(config);
  const int down = 1 << static_cast<int>(plan.channels.size());
  if (config.input_size < down || config.input_size % down != 0)
    throw ConfigError("input_size " + std::to_string(config.input_size) +
                      " must be a multiple of " + std::to_string(down));
  int in_ch = 3;
  for (size_t i = 0; i < plan.channels.size(); ++i) {
    const std::string idx = std::to_string(i + 1);
    trunk->emplace<nn::Conv2d>("conv" + idx, in_ch, plan.channels[i], 3, 1, 1, rng);
    trunk->emplace<nn::ReLU>("relu" + idx, /*spatial=*/true);
    trunk->emplace<nn::MaxPool2>("pool" + idx);
    in_ch = plan.channels[i];
  }
  trunk->emplace<nn::GlobalAvgPool>("gap");
}

// Decoder geometry: spatial size base * 2^k with base in [4, 7].
struct DecoderPlan {
  int base = 0;
  int ups = 0;
};

DecoderPlan decoder_plan(int target_size) {
  for (int ups = 1; ups < 8; ++ups) {
    const int stride = 1 << ups;
    if (target_size % stride != 0) continue;
    const int base = target_size / stride;
    if (base >= 4 && base <= 7) return {base, ups};
  }
  throw ConfigError("decoder cannot produce output size " + std::to_string(target_size));
}

constexpr char kWeightsMagic[4] = {'P', 'A', 'D', 'W'};

void write_weights(const std::filesystem::path& path, const std::vector<nn::Param*>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError("cannot write weights: " + path.string());
  out.write(kWeightsMagic, 4);
  const uint32_t count = static_cast<uint32_t>(params.size());
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const nn::Param* p : params) {
    const uint32_t name_len = static_cast<uint32_t>(p->name.size());
    out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    out.write(p->name.data(), name_len);
    const uint32_t ndim = static_cast<uint32_t>(p->value.shape().size());
    out.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (int d : p->value.shape()) {
      const int32_t v = d;
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
  }
}

void read_weights(const std::filesystem::path& path, const std::vector<nn::Param*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read weights: " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, kWeightsMagic, 4) != 0)
    throw IngestionError("bad weights file: " + path.string());
  uint32_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != params.size()) throw IngestionError("weights/model parameter count mismatch");
  for (nn::Param* p : params) {
    uint32_t name_len = 0;
    in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != p->name)
      throw IngestionError("weights mismatch: expected " + p->name + ", found " + name);
    uint32_t ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    std::vector<int> shape(ndim);
    for (auto& d : shape) {
      int32_t v = 0;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      d = v;
    }
    if (shape != p->value.shape()) throw IngestionError("weights shape mismatch for " + p->name);
    in.read(reinterpret_cast<char*>(p->value.data()),
            static_cast<std::streamsize>(p->value.numel() * sizeof(float)));
    if (!in) throw IngestionError("truncated weights file: " + path.string());
  }
}

nlohmann::json model_config_json(const ModelConfig& c) {
  return {{"backbone", to_string(c.backbone)},
          {"input_size", c.input_size},
          {"pretrained", c.pretrained},
          {"heads", to_string(c.heads)},
          {"n_attack_classes", c.n_attack_classes}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.backbone = backbone_from_string(j.at("backbone").get<std::string>());
  c.input_size = j.at("input_size").get<int>();
  c.pretrained = j.at("pretrained").get<bool>();
  c.heads = heads_from_string(j.at("heads").get<std::string>());
  c.n_attack_classes = j.at("n_attack_classes").get<int>();
  return c;
}

std::vector<double> probs_to_attack(const Tensor& probs) {
  std::vector<double> out(static_cast<size_t>(probs.dim(0)));
  for (int i = 0; i < probs.dim(0); ++i)
    out[static_cast<size_t>(i)] = static_cast<double>(probs.at(i, kBinaryAttackIndex));
  return out;
}

// Class-score seed for the gradient tap. A 2-way softmax depends only on the
// logit difference, so the binary score is z_target - z_other; wider heads use
// the target logit directly.
Tensor cam_score_seed(const Tensor& logits, int target_class) {
  Tensor seed(logits.shape());
  for (int i = 0; i < seed.dim(0); ++i) {
    seed.at(i, target_class) = 1.0f;
    if (logits.dim(1) == 2) seed.at(i, 1 - target_class) = -1.0f;
  }
  return seed;
}

CamTap tap_from(nn::Sequential& trunk, nn::Dense& head, const Tensor& logits, int target_class,
                const std::string& layer) {
  if (target_class < 0 || target_class >= head.out_dim())
    throw ContractError("cam target class out of range");
  if (!trunk.has_layer(layer)) throw ContractError("no layer named " + layer);
  if (!trunk.layer(layer)->spatial())
    throw ContractError("layer " + layer + " has no spatial feature maps");
  CamTap tap;
  tap.grad = trunk.backward_tap(head.backward(cam_score_seed(logits, target_class)), layer);
  tap.activation = trunk.activation(layer);
  return tap;
}

}  // namespace

std::string to_string(Backbone b) {
  return b == Backbone::toy_cnn ? "toy_cnn" : "paper_default";
}
std::string to_string(HeadSetup h) {
  return h == HeadSetup::binary_only ? "binary_only" : "binary_plus_multiclass";
}

Backbone backbone_from_string(const std::string& s) {
  if (s == "toy_cnn") return Backbone::toy_cnn;
  if (s == "paper_default") return Backbone::paper_default;
  throw ConfigError("unknown backbone: " + s);
}

HeadSetup heads_from_string(const std::string& s) {
  if (s == "binary_only") return HeadSetup::binary_only;
  if (s == "binary_plus_multiclass") return HeadSetup::binary_plus_multiclass;
  throw ConfigError("unknown head setup: " + s);
}

void validate_model_config(const ModelConfig& config) {
  backbone_plan(config);
  if (config.n_attack_classes < 2) throw ConfigError("n_attack_classes must be >= 2");
  if (config.pretrained)
    throw ConfigError(
        "pretrained weights are not bundled with this toolkit; "
        "train from scratch or load a checkpoint");
}

void validate_uai_config(const UaiConfig& config) {
  validate_model_config(config.base);
  if (config.dim_e1 < 1 || config.dim_e2 < 1)
    throw ConfigError("embedding dimensions must be positive");
  if (config.dropout_rate <= 0.0 || config.dropout_rate >= 1.0)
    throw ConfigError("dropout_rate must be in (0,1)");
  const int out = config.decoder_output_size > 0 ? config.decoder_output_size
                                                 : config.base.input_size;
  if (out != config.base.input_size)
    throw ConfigError("decoder output size must equal the model input size");
  decoder_plan(out);
}

PadModel::PadModel(const ModelConfig& config, uint32_t seed) : config_(config) {
  validate_model_config(config);
  std::mt19937 rng(seed);
  build_trunk(&trunk_, config_, rng);
  feature_dim_ = backbone_plan(config_).feature_dim;
  binary_head_ = std::make_unique<nn::Dense>("binary_head", feature_dim_, 2, rng);
  if (config_.heads == HeadSetup::binary_plus_multiclass)
    mc_head_ = std::make_unique<nn::Dense>("multiclass_head", feature_dim_,
                                           config_.n_attack_classes, rng);
}

PadModel::Output PadModel::forward(const Tensor& images, bool train) {
  const Tensor feat = trunk_.forward(images, train);
  Output out;
  out.binary_logits = binary_head_->forward(feat, train);
  out.binary_probs = softmax_rows(out.binary_logits);
  if (mc_head_) {
    out.mc_logits = mc_head_->forward(feat, train);
    out.mc_probs = softmax_rows(*out.mc_logits);
  }
  return out;
}

std::vector<double> PadModel::attack_probs(const Tensor& images) {
  if (!binary_head_) throw ContractError("model lacks a binary head");
  return probs_to_attack(forward(images, false).binary_probs);
}

std::vector<nn::Param*> PadModel::params() {
  std::vector<nn::Param*> out = trunk_.params();
  for (nn::Param* p : binary_head_->params()) out.push_back(p);
  if (mc_head_)
    for (nn::Param* p : mc_head_->params()) out.push_back(p);
  return out;
}

CamTap PadModel::cam_tap(const Tensor& images, int target_class, bool use_multiclass_head,
                         const std::string& layer) {
  if (use_multiclass_head && !mc_head_) throw ContractError("model has no multiclass head");
  const Output out = forward(images, false);
  nn::Dense& head = use_multiclass_head ? *mc_head_ : *binary_head_;
  const Tensor& logits = use_multiclass_head ? *out.mc_logits : out.binary_logits;
  return tap_from(trunk_, head, logits, target_class, layer);
}

UaiModel::UaiModel(const UaiConfig& config, uint32_t seed) : config_(config) {
  validate_uai_config(config);
  std::mt19937 rng(seed);
  build_trunk(&trunk_, config_.base, rng);
  feature_dim_ = backbone_plan(config_.base).feature_dim;
  proj_e1_ = std::make_unique<nn::Dense>("proj_e1", feature_dim_, config_.dim_e1, rng);
  proj_e2_ = std::make_unique<nn::Dense>("proj_e2", feature_dim_, config_.dim_e2, rng);
  binary_head_ = std::make_unique<nn::Dense>("binary_head", config_.dim_e1, 2, rng);
  if (config_.base.heads == HeadSetup::binary_plus_multiclass)
    mc_head_ = std::make_unique<nn::Dense>("multiclass_head", config_.dim_e1,
                                           config_.base.n_attack_classes, rng);
  dropout_ = std::make_unique<nn::Dropout>("e1_dropout", config_.dropout_rate,
                                           mix_seed(seed, 0xD0));

  const int out_size = config_.base.input_size;
  const DecoderPlan plan = decoder_plan(out_size);
  int ch = 64;
  decoder_.emplace<nn::Dense>("dec_fc", config_.dim_e1 + config_.dim_e2,
                              ch * plan.base * plan.base, rng);
  decoder_.emplace<nn::ReLU>("dec_relu0");
  decoder_.emplace<nn::Reshape>("dec_reshape", ch, plan.base, plan.base);
  for (int i = 0; i < plan.ups; ++i) {
    const bool last = i + 1 == plan.ups;
    const int next = last ? 3 : std::max(8, ch / 2);
    decoder_.emplace<nn::ConvTranspose2d>("dec_up" + std::to_string(i + 1), ch, next, rng);
    if (!last) decoder_.emplace<nn::ReLU>("dec_relu" + std::to_string(i + 1));
    ch = next;
  }
  decoder_.emplace<nn::Sigmoid>("dec_sigmoid");

  const int hidden = 128;
  f1_.emplace<nn::Dense>("f1_fc1", config_.dim_e2, hidden, rng);
  f1_.emplace<nn::ReLU>("f1_relu");
  f1_.emplace<nn::Dense>("f1_fc2", hidden, config_.dim_e1, rng);
  f2_.emplace<nn::Dense>("f2_fc1", config_.dim_e1, hidden, rng);
  f2_.emplace<nn::ReLU>("f2_relu");
  f2_.emplace<nn::Dense>("f2_fc2", hidden, config_.dim_e2, rng);
}

UaiModel::Output UaiModel::forward(const Tensor& images, bool train) {
  const Tensor feat = trunk_.forward(images, train);
  Output out;
  out.e1 = proj_e1_->forward(feat, train);
  out.e2 = proj_e2_->forward(feat, train);
  out.binary_logits = binary_head_->forward(out.e1, train);
  out.binary_probs = softmax_rows(out.binary_logits);
  if (mc_head_) {
    out.mc_logits = mc_head_->forward(out.e1, train);
    out.mc_probs = softmax_rows(*out.mc_logits);
  }
  const Tensor noisy_e1 = dropout_->forward(out.e1, train);
  out.x_recon = decoder_.forward(nn::concat_cols(noisy_e1, out.e2), train);
  out.e1_recon = f1_.forward(out.e2, train);
  out.e2_recon = f2_.forward(out.e1, train);
  return out;
}

UaiModel::Embeddings UaiModel::embed(const Tensor& images, bool train) {
  const Tensor feat = trunk_.forward(images, train);
  return {proj_e1_->forward(feat, train), proj_e2_->forward(feat, train)};
}

std::vector<double> UaiModel::attack_probs(const Tensor& images) {
  const Tensor feat = trunk_.forward(images, false);
  const Tensor e1 = proj_e1_->forward(feat, false);
  return probs_to_attack(softmax_rows(binary_head_->forward(e1, false)));
}

std::vector<nn::Param*> UaiModel::main_params() {
  std::vector<nn::Param*> out = trunk_.params();
  for (auto* layer : {proj_e1_.get(), proj_e2_.get(), binary_head_.get()})
    for (nn::Param* p : layer->params()) out.push_back(p);
  if (mc_head_)
    for (nn::Param* p : mc_head_->params()) out.push_back(p);
  for (nn::Param* p : decoder_.params()) out.push_back(p);
  return out;
}

std::vector<nn::Param*> UaiModel::adversary_params() {
  std::vector<nn::Param*> out = f1_.params();
  for (nn::Param* p : f2_.params()) out.push_back(p);
  return out;
}

std::vector<nn::Param*> UaiModel::params() {
  std::vector<nn::Param*> out = main_params();
  for (nn::Param* p : adversary_params()) out.push_back(p);
  return out;
}

CamTap UaiModel::cam_tap(const Tensor& images, int target_class, bool use_multiclass_head,
                         const std::string& layer) {
  if (use_multiclass_head && !mc_head_) throw ContractError("model has no multiclass head");
  const Tensor feat = trunk_.forward(images, false);
  const Tensor e1 = proj_e1_->forward(feat, false);
  nn::Dense& head = use_multiclass_head ? *mc_head_ : *binary_head_;
  const Tensor logits = head.forward(e1, false);
  if (target_class < 0 || target_class >= head.out_dim())
    throw ContractError("cam target class out of range");
  if (!trunk_.has_layer(layer) || !trunk_.layer(layer)->spatial())
    throw ContractError("layer " + layer + " has no spatial feature maps");
  CamTap tap;
  tap.grad = trunk_.backward_tap(
      proj_e1_->backward(head.backward(cam_score_seed(logits, target_class))), layer);
  tap.activation = trunk_.activation(layer);
  return tap;
}

PadModel build_classifier(const ModelConfig& config, uint32_t seed) {
  return PadModel(config, seed);
}

UaiModel build_uai(const UaiConfig& config, uint32_t seed) { return UaiModel(config, seed); }

std::vector<double> predict_attack_prob(PadModel& model, const Tensor& images) {
  return model.attack_probs(images);
}

std::vector<double> predict_attack_prob(UaiModel& model, const Tensor& images) {
  return model.attack_probs(images);
}

namespace {

nlohmann::json convention_json() {
  return {{"binary_attack_index", kBinaryAttackIndex}, {"multiclass_index", "attack_code"}};
}

void save_sidecar(const std::filesystem::path& dir, const nlohmann::json& j) {
  std::ofstream out(dir / "model.json");
  if (!out) throw IngestionError("cannot write model sidecar in " + dir.string());
  out << j.dump(2) << '\n';
}

nlohmann::json load_sidecar(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw IngestionError("no model.json in " + dir.string());
  nlohmann::json j;
  in >> j;
  return j;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, PadModel& model) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["kind"] = "classifier";
  j["model_config"] = model_config_json(model.config());
  j["class_index_convention"] = convention_json();
  save_sidecar(dir, j);
  write_weights(dir / "weights.bin", model.params());
}

void save_checkpoint(const std::filesystem::path& dir, UaiModel& model) {
  std::filesystem::create_directories(dir);
  nlohmann::json j;
  j["kind"] = "uai";
  j["model_config"] = model_config_json(model.config().base);
  j["uai_config"] = {{"dim_e1", model.config().dim_e1},
                     {"dim_e2", model.config().dim_e2},
                     {"dropout_rate", model.config().dropout_rate},
                     {"decoder_output_size", model.config().base.input_size}};
  j["class_index_convention"] = convention_json();
  save_sidecar(dir, j);
  write_weights(dir / "weights.bin", model.params());
}

CheckpointKind checkpoint_kind(const std::filesystem::path& dir) {
  const std::string kind = load_sidecar(dir).at("kind").get<std::string>();
  if (kind == "classifier") return CheckpointKind::classifier;
  if (kind == "uai") return CheckpointKind::uai;
  throw IngestionError("unknown checkpoint kind: " + kind);
}

PadModel load_classifier_checkpoint(const std::filesystem::path& dir) {
  const nlohmann::json j = load_sidecar(dir);
  if (j.at("kind").get<std::string>() != "classifier")
    throw IngestionError("checkpoint is not a classifier: " + dir.string());
  PadModel model(model_config_from_json(j.at("model_config")), 0);
  read_weights(dir / "weights.bin", model.params());
  return model;
}

UaiModel load_uai_checkpoint(const std::filesystem::path& dir) {
  const nlohmann::json j = load_sidecar(dir);
  if (j.at("kind").get<std::string>() != "uai")
    throw IngestionError("checkpoint is not a uai model: " + dir.string());
  UaiConfig config;
  config.base = model_config_from_json(j.at("model_config"));
  config.dim_e1 = j.at("uai_config").at("dim_e1").get<int>();
  config.dim_e2 = j.at("uai_config").at("dim_e2").get<int>();
  config.dropout_rate = j.at("uai_config").at("dropout_rate").get<double>();
  config.decoder_output_size = j.at("uai_config").at("decoder_output_size").get<int>();
  UaiModel model(config, 0);
  read_weights(dir / "weights.bin", model.params());
  return model;
}

}  // namespace pad
