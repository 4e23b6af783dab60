#pragma once

#include <nlohmann/json_fwd.hpp>

// nlohmann ADL hooks for the configuration types. Readers tolerate missing
// keys by keeping the in-code defaults.

namespace mocotp::data {
struct SyntheticSpec;
void to_json(nlohmann::json& j, const SyntheticSpec& s);
void from_json(const nlohmann::json& j, SyntheticSpec& s);
}  // namespace mocotp::data

namespace mocotp::aug {
struct AugmentationConfig;
void to_json(nlohmann::json& j, const AugmentationConfig& c);
void from_json(const nlohmann::json& j, AugmentationConfig& c);
}  // namespace mocotp::aug

namespace mocotp::moco {
struct EncoderConfig;
struct ContrastiveConfig;
void to_json(nlohmann::json& j, const EncoderConfig& c);
void from_json(const nlohmann::json& j, EncoderConfig& c);
void to_json(nlohmann::json& j, const ContrastiveConfig& c);
void from_json(const nlohmann::json& j, ContrastiveConfig& c);
}  // namespace mocotp::moco

namespace mocotp::probe {
struct ProbeConfig;
void to_json(nlohmann::json& j, const ProbeConfig& c);
void from_json(const nlohmann::json& j, ProbeConfig& c);
}  // namespace mocotp::probe
