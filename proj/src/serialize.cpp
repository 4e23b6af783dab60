#include "mocotp/serialize.hpp"

#include <nlohmann/json.hpp>

#include "mocotp/augment.hpp"
#include "mocotp/contrast.hpp"
#include "mocotp/data.hpp"
#include "mocotp/probe.hpp"

namespace mocotp::data {

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"num_classes", s.num_classes},
       {"groups_per_class", s.groups_per_class},
       {"views_per_group", s.views_per_group},
       {"image_size", s.image_size},
       {"nuisance_strength", s.nuisance_strength},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  s.num_classes = j.value("num_classes", s.num_classes);
  s.groups_per_class = j.value("groups_per_class", s.groups_per_class);
  s.views_per_group = j.value("views_per_group", s.views_per_group);
  s.image_size = j.value("image_size", s.image_size);
  s.nuisance_strength = j.value("nuisance_strength", s.nuisance_strength);
  s.seed = j.value("seed", s.seed);
}

}  // namespace mocotp::data

namespace mocotp::aug {

void to_json(nlohmann::json& j, const AugmentationConfig& c) {
  j = {{"crop_scale_low", c.crop_scale_low},
       {"crop_scale_high", c.crop_scale_high},
       {"output_size", c.output_size},
       {"color_jitter",
        {{"brightness", c.color_jitter.brightness},
         {"contrast", c.color_jitter.contrast},
         {"saturation", c.color_jitter.saturation},
         {"hue", c.color_jitter.hue}}},
       {"color_jitter_prob", c.color_jitter_prob},
       {"grayscale_prob", c.grayscale_prob},
       {"blur_prob", c.blur_prob},
       {"hflip_prob", c.hflip_prob},
       {"dihedral_enabled", c.dihedral_enabled}};
}

void from_json(const nlohmann::json& j, AugmentationConfig& c) {
  c.crop_scale_low = j.value("crop_scale_low", c.crop_scale_low);
  c.crop_scale_high = j.value("crop_scale_high", c.crop_scale_high);
  c.output_size = j.value("output_size", c.output_size);
  if (j.contains("color_jitter")) {
    const auto& cj = j.at("color_jitter");
    c.color_jitter.brightness = cj.value("brightness", c.color_jitter.brightness);
    c.color_jitter.contrast = cj.value("contrast", c.color_jitter.contrast);
    c.color_jitter.saturation = cj.value("saturation", c.color_jitter.saturation);
    c.color_jitter.hue = cj.value("hue", c.color_jitter.hue);
  }
  c.color_jitter_prob = j.value("color_jitter_prob", c.color_jitter_prob);
  c.grayscale_prob = j.value("grayscale_prob", c.grayscale_prob);
  c.blur_prob = j.value("blur_prob", c.blur_prob);
  c.hflip_prob = j.value("hflip_prob", c.hflip_prob);
  c.dihedral_enabled = j.value("dihedral_enabled", c.dihedral_enabled);
}

}  // namespace mocotp::aug

namespace mocotp::moco {

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"input_size", c.input_size},
       {"stage_channels", c.stage_channels},
       {"proj_hidden", c.proj_hidden},
       {"embedding_dim", c.embedding_dim}};
}

void from_json(const nlohmann::json& j, EncoderConfig& c) {
  c.input_size = j.value("input_size", c.input_size);
  c.stage_channels = j.value("stage_channels", c.stage_channels);
  c.proj_hidden = j.value("proj_hidden", c.proj_hidden);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
}

void to_json(nlohmann::json& j, const ContrastiveConfig& c) {
  j = {{"temperature", c.temperature},
       {"queue_capacity", c.queue_capacity},
       {"ema_momentum", c.ema_momentum},
       {"base_lr", c.base_lr},
       {"schedule", c.schedule},
       {"batch_size", c.batch_size},
       {"optimizer_momentum", c.optimizer_momentum},
       {"weight_decay", c.weight_decay},
       {"epochs", c.epochs},
       {"embedding_dim", c.embedding_dim},
       {"symmetric_loss", c.symmetric_loss}};
}

void from_json(const nlohmann::json& j, ContrastiveConfig& c) {
  c.temperature = j.value("temperature", c.temperature);
  c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
  c.ema_momentum = j.value("ema_momentum", c.ema_momentum);
  c.base_lr = j.value("base_lr", c.base_lr);
  c.schedule = j.value("schedule", c.schedule);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.optimizer_momentum = j.value("optimizer_momentum", c.optimizer_momentum);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.epochs = j.value("epochs", c.epochs);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.symmetric_loss = j.value("symmetric_loss", c.symmetric_loss);
}

}  // namespace mocotp::moco

namespace mocotp::probe {

void to_json(nlohmann::json& j, const ProbeConfig& c) {
  j = {{"mode", to_string(c.mode)},
       {"head_lr", c.head_lr},
       {"backbone_lr", c.backbone_lr},
       {"weight_decay", c.weight_decay},
       {"optimizer_momentum", c.optimizer_momentum},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"label_fraction", c.label_fraction}};
}

void from_json(const nlohmann::json& j, ProbeConfig& c) {
  if (j.contains("mode")) c.mode = probe_mode_from_string(j.at("mode").get<std::string>());
  c.head_lr = j.value("head_lr", c.head_lr);
  c.backbone_lr = j.value("backbone_lr", c.backbone_lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.optimizer_momentum = j.value("optimizer_momentum", c.optimizer_momentum);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.label_fraction = j.value("label_fraction", c.label_fraction);
}

}  // namespace mocotp::probe
