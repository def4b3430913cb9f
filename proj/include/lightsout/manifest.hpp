#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lightsout/light_model.hpp"
#include "lightsout/region.hpp"

namespace lightsout {

inline constexpr int kManifestSchema = 1;

// One dataset sample: scene-level PNGs plus the per-scenario canvas files.
// Paths are relative to the manifest's directory.
struct ManifestRecord {
  int id = 0;
  std::uint64_t seed = 0;
  std::string scenario;  // "no_light", "incomplete", or "" for a bare pair
  std::string clean_png;
  std::string flared_png;
  std::string canvas_png;
  std::string canvas_mask_png;
  std::string light_mask_png;
  std::string disc_mask_png;
  std::string glare_mask_png;
  std::string streak_mask_png;
  CropBox box;
  LightSourceSet lights;
  std::string skip_reason;
};

inline nlohmann::json box_to_json(const CropBox& b) {
  return {{"left", b.left}, {"right", b.right}, {"top", b.top}, {"bottom", b.bottom}};
}

inline CropBox box_from_json(const nlohmann::json& j) {
  CropBox b;
  b.left = j.at("left").get<int>();
  b.right = j.at("right").get<int>();
  b.top = j.at("top").get<int>();
  b.bottom = j.at("bottom").get<int>();
  return b;
}

inline nlohmann::json lights_to_json(const LightSourceSet& s) {
  nlohmann::json arr = nlohmann::json::array();
  for (std::size_t i = 0; i < s.params.size(); ++i)
    arr.push_back({{"x", s.params[i].x},
                   {"y", s.params[i].y},
                   {"r", s.params[i].r},
                   {"active", s.confidences[i] > 0.5}});
  return arr;
}

inline LightSourceSet lights_from_json(const nlohmann::json& arr) {
  LightSourceSet s;
  for (const auto& j : arr) {
    s.params.push_back({j.at("x").get<double>(), j.at("y").get<double>(), j.at("r").get<double>()});
    s.confidences.push_back(j.at("active").get<bool>() ? 1.0 : 0.0);
  }
  return s;
}

inline nlohmann::json record_to_json(const ManifestRecord& r) {
  return {{"schema", kManifestSchema},
          {"id", r.id},
          {"seed", r.seed},
          {"scenario", r.scenario},
          {"clean", r.clean_png},
          {"flared", r.flared_png},
          {"canvas", r.canvas_png},
          {"canvas_mask", r.canvas_mask_png},
          {"light_mask", r.light_mask_png},
          {"disc_mask", r.disc_mask_png},
          {"glare_mask", r.glare_mask_png},
          {"streak_mask", r.streak_mask_png},
          {"box", box_to_json(r.box)},
          {"lights", lights_to_json(r.lights)},
          {"skip_reason", r.skip_reason}};
}

inline ManifestRecord record_from_json(const nlohmann::json& j) {
  if (j.at("schema").get<int>() != kManifestSchema)
    throw std::runtime_error("manifest: unsupported schema " + j.at("schema").dump());
  ManifestRecord r;
  r.id = j.at("id").get<int>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.scenario = j.at("scenario").get<std::string>();
  r.clean_png = j.at("clean").get<std::string>();
  r.flared_png = j.at("flared").get<std::string>();
  r.canvas_png = j.at("canvas").get<std::string>();
  r.canvas_mask_png = j.at("canvas_mask").get<std::string>();
  r.light_mask_png = j.at("light_mask").get<std::string>();
  r.disc_mask_png = j.at("disc_mask").get<std::string>();
  r.glare_mask_png = j.at("glare_mask").get<std::string>();
  r.streak_mask_png = j.at("streak_mask").get<std::string>();
  r.box = box_from_json(j.at("box"));
  r.lights = lights_from_json(j.at("lights"));
  r.skip_reason = j.at("skip_reason").get<std::string>();
  return r;
}

inline void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
  std::ofstream out(path, std::ios::binary);  // binary keeps line endings stable
  if (!out) throw std::runtime_error("manifest: cannot open for writing: " + path);
  for (const auto& r : records) out << record_to_json(r).dump() << "\n";
  if (!out) throw std::runtime_error("manifest: write failed: " + path);
}

inline std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("manifest: cannot open: " + path);
  std::vector<ManifestRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    records.push_back(record_from_json(nlohmann::json::parse(line)));
  }
  return records;
}

}  // namespace lightsout
