#pragma once

#include <string>
#include <string_view>

#include "hvqa/sekd/distill.hpp"

namespace hvqa::sekd {

/*
 * params.bin layout, all integers little-endian:
 *   8 bytes   magic "HVQAPRM1"
 *   u32       format version (1)
 *   u32       metadata length, then that many bytes of JSON
 *   u32       tensor count
 *   per tensor:
 *     u32 name length, name bytes, u32 rows, u32 cols,
 *     rows*cols f64 values, row-major
 * Scorer tensors come first (level1.A ... embed), then projector tensors.
 */
inline constexpr std::string_view kParamsMagic = "HVQAPRM1";
inline constexpr std::uint32_t kParamsVersion = 1;

std::string serialize_params(const Params& params, const Projector<double>& projector, std::string_view metadata_json);

struct LoadedParams {
    Params params;
    Projector<double> projector;
    std::string metadata_json;
};
LoadedParams deserialize_params(std::string_view bytes);

}  // namespace hvqa::sekd
