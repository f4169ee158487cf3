#pragma once
// Internal: JSON helpers shared by the TATF1 readers/writers, the caches and
// the pipeline config. Requires the vendored nlohmann/json on the include
// path; library sources only.

#include <json.hpp>

#include "tatk/geometry.hpp"

namespace tatk {

nlohmann::json geometry_to_json(const AcquisitionGeometry& g);
AcquisitionGeometry geometry_from_json(const nlohmann::json& j);

}  // namespace tatk
