#pragma once

#include <json.hpp>

#include "yolocam/detector.hpp"

// ADL serializers so nlohmann::json converts the detection-domain types.

namespace yolocam {

void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);

void to_json(nlohmann::json& j, const Provenance& p);
void from_json(const nlohmann::json& j, Provenance& p);

void to_json(nlohmann::json& j, const Detection& d);
void from_json(const nlohmann::json& j, Detection& d);

void to_json(nlohmann::json& j, const Target& t);
void from_json(const nlohmann::json& j, Target& t);

void to_json(nlohmann::json& j, const NeuronAddress& n);
void from_json(const nlohmann::json& j, NeuronAddress& n);

}  // namespace yolocam
