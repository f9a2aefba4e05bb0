#pragma once

#include <json.hpp>

#include "gradlite/harness.hpp"

namespace gradlite {

/// null for NaN and infinities, which JSON cannot represent.
nlohmann::ordered_json json_number(double v);
nlohmann::ordered_json problem_json(const ProblemSpec& p);
nlohmann::ordered_json optimizer_json(const OptimizerSpec& o);

}  // namespace gradlite
