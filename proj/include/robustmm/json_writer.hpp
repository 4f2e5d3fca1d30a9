#pragma once

#include "robustmm/common.hpp"

#include <json.hpp>

#include <string>

namespace robustmm {

using Json = nlohmann::ordered_json;

/// Serializes with every floating-point number printed as %.17g, so output
/// is byte-stable for a given IEEE-754 platform. Non-finite numbers become null.
std::string to_json_text(const Json& value, int indent = 2);

Json to_json(const Vector& v);
Json to_json(const Matrix& m);  // array of rows

}  // namespace robustmm
