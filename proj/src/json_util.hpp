#pragma once

#include "kcve/arch.hpp"

#include <json.hpp>

namespace kcve {

nlohmann::json arch_json(const ArchVerdict& arch);

}  // namespace kcve
