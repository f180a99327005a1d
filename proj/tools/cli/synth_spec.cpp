#include "synth_spec.hpp"

#include "json.hpp"
#include "svcalib/error.hpp"

namespace svcalib::cli {

namespace {

using nlohmann::json;

double number_at(const json& obj, const char* key, double fallback, const std::string& path) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ParseError(path + "/" + key, "expected a number");
  return obj[key].get<double>();
}

void require_object(const json& v, const std::string& path) {
  if (!v.is_object()) throw ParseError(path, "expected an object");
}

}  // namespace

synthetic::SyntheticRigSpec parse_synth_spec(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ParseError("", std::string("invalid JSON: ") + e.what());
  }
  require_object(doc, "");
  synthetic::SyntheticRigSpec spec;

  if (doc.contains("mounts")) {
    const json& mounts = doc["mounts"];
    require_object(mounts, "/mounts");
    for (const auto& [name, m] : mounts.items()) {
      const std::string path = "/mounts/" + name;
      const auto id = camera_id_from_string(name);
      if (!id) throw ParseError(path, "unknown camera id");
      require_object(m, path);
      synthetic::CameraMount& mount = spec.mounts[index_of(*id)];
      if (m.contains("center")) {
        const json& c = m["center"];
        if (!c.is_array() || c.size() != 3 || !c[0].is_number() || !c[1].is_number() || !c[2].is_number()) {
          throw ParseError(path + "/center", "expected an array of 3 numbers");
        }
        mount.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
        if (!(mount.center.z() > 0.0)) throw ParseError(path + "/center", "camera height must be positive");
      }
      mount.yaw_deg = number_at(m, "yaw_deg", mount.yaw_deg, path);
      mount.pitch_deg = number_at(m, "pitch_deg", mount.pitch_deg, path);
      mount.roll_deg = number_at(m, "roll_deg", mount.roll_deg, path);
    }
  }

  FisheyeIntrinsics lens = synthetic::default_intrinsics();
  if (doc.contains("intrinsics")) {
    const json& in = doc["intrinsics"];
    require_object(in, "/intrinsics");
    const std::string p = "/intrinsics";
    try {
      lens = FisheyeIntrinsics({number_at(in, "a1", lens.a1(), p), number_at(in, "a2", lens.a2(), p),
                                number_at(in, "a3", lens.a3(), p), number_at(in, "a4", lens.a4(), p)},
                               number_at(in, "u0", lens.u0(), p), number_at(in, "v0", lens.v0(), p),
                               static_cast<int>(number_at(in, "width", lens.width(), p)),
                               static_cast<int>(number_at(in, "height", lens.height(), p)),
                               number_at(in, "theta_max", lens.theta_max(), p));
    } catch (const ParseError&) {
      throw;
    } catch (const Error& e) {
      throw ParseError(p, e.what());
    }
  }
  const double scale = number_at(doc, "image_scale", 1.0, "");
  if (!(scale > 0.0)) throw ParseError("/image_scale", "must be positive");
  if (scale != 1.0) lens = synthetic::scaled_intrinsics(lens, scale);
  spec.intrinsics = lens;

  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw ParseError("/seed", "expected a non-negative integer");
    spec.seed = doc["seed"].get<std::uint64_t>();
  }
  return spec;
}

}  // namespace svcalib::cli
