#pragma once

#include <string>

#include "svcalib/synthetic.hpp"

namespace svcalib::cli {

// Rig description for `svcalib synth --spec`. Every field is optional:
//
//   {
//     "mounts": {"front": {"center": [3.7, 0, 0.7], "yaw_deg": 0, "pitch_deg": 30, "roll_deg": 0}, ...},
//     "intrinsics": {"a1": ..., "a2": ..., "a3": ..., "a4": ..., "u0": ..., "v0": ...,
//                    "width": ..., "height": ..., "theta_max": ...},
//     "image_scale": 0.5,
//     "seed": 0
//   }
//
// "image_scale" shrinks whichever lens is in effect. Throws ParseError.
[[nodiscard]] synthetic::SyntheticRigSpec parse_synth_spec(const std::string& json_text);

}  // namespace svcalib::cli
