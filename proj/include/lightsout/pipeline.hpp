#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lightsout/denoiser.hpp"
#include "lightsout/hash.hpp"
#include "lightsout/manifest.hpp"
#include "lightsout/metrics.hpp"
#include "lightsout/png_io.hpp"
#include "lightsout/regressor.hpp"
#include "lightsout/sampler.hpp"
#include "lightsout/schedule.hpp"
#include "lightsout/sifr.hpp"
#include "lightsout/synth.hpp"

namespace lightsout {

inline constexpr int kReportSchema = 1;

// ---------------------------------------------------------------------------
// Artifact plumbing: config hashes and per-file metadata sidecars. Reports
// never contain wall-clock values, so a rerun with the same hash and seed can
// be compared byte for byte.
// ---------------------------------------------------------------------------

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::uint64_t file_fnv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string s = ss.str();
  return fnv1a64(s.data(), s.size());
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_sidecar(const std::string& artifact_path, const std::string& config_hash,
                          std::uint64_t seed) {
  const nlohmann::json j{{"schema", kReportSchema}, {"config_hash", config_hash}, {"seed", seed}};
  write_text_file(artifact_path + ".json", j.dump() + "\n");
}

inline std::string idtag(int id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", id);
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

struct GenerateConfig {
  std::string out_dir;
  int count = 100;
  int height = 64, width = 64;
  double lum_threshold = 0.95;  // bright-region threshold for the crop search
  int shift = 15;               // incomplete-scenario shift toward the light
  bool overwrite = false;
  std::uint64_t seed = 0;
};

inline std::string generate_canonical(const GenerateConfig& g) {
  std::ostringstream ss;
  ss << std::setprecision(17) << "command=generate\ncount=" << g.count << "\nheight=" << g.height
     << "\nlum_threshold=" << g.lum_threshold << "\nseed=" << g.seed << "\nshift=" << g.shift
     << "\nwidth=" << g.width << "\n";
  return ss.str();
}

struct GenerateReport {
  std::string config_hash;
  int scenes = 0, records = 0, no_light = 0, incomplete = 0, skipped = 0;
};

inline GenerateReport run_generate(const GenerateConfig& g) {
  namespace fs = std::filesystem;
  if (g.count < 1) throw std::invalid_argument("generate: count must be >= 1");
  const std::string hash = hash_hex(fnv1a64(generate_canonical(g)));

  const fs::path root(g.out_dir);
  const fs::path manifest_path = root / "manifest.jsonl";
  if (fs::exists(manifest_path) && !g.overwrite)
    throw std::runtime_error("generate: " + manifest_path.string() +
                             " exists; pass overwrite to replace it");
  fs::create_directories(root / "scenes");
  fs::create_directories(root / "canvases");

  GenerateReport rep;
  rep.config_hash = hash;
  std::vector<ManifestRecord> records;
  for (int i = 0; i < g.count; ++i) {
    const std::uint64_t seed_i = derive_seed(g.seed, static_cast<std::uint64_t>(i));
    const ScenePair pair = generate_scene(random_scene_spec(seed_i, g.height, g.width));
    const ScenarioSet scen = make_scenarios(pair, g.lum_threshold, g.shift);
    const std::string tag = idtag(i);

    ManifestRecord base;
    base.id = i;
    base.seed = seed_i;
    base.clean_png = "scenes/" + tag + "_clean.png";
    base.flared_png = "scenes/" + tag + "_flared.png";
    base.disc_mask_png = "scenes/" + tag + "_disc.png";
    base.glare_mask_png = "scenes/" + tag + "_glare.png";
    base.streak_mask_png = "scenes/" + tag + "_streak.png";
    base.light_mask_png = "scenes/" + tag + "_light.png";
    base.lights = pair.lights;

    auto put_image = [&](const std::string& rel, const Image& img) {
      write_image_png((root / rel).string(), img);
      write_sidecar((root / rel).string(), hash, seed_i);
    };
    auto put_mask = [&](const std::string& rel, const BinaryMask& m) {
      write_mask_png((root / rel).string(), m);
      write_sidecar((root / rel).string(), hash, seed_i);
    };
    put_image(base.clean_png, pair.clean);
    put_image(base.flared_png, pair.flared);
    put_mask(base.disc_mask_png, pair.disc_mask);
    put_mask(base.glare_mask_png, pair.glare_mask);
    put_mask(base.streak_mask_png, pair.streak_mask);
    write_softmask_png((root / base.light_mask_png).string(),
                       render_light_mask(pair.lights, g.height, g.width));
    write_sidecar((root / base.light_mask_png).string(), hash, seed_i);
    ++rep.scenes;

    if (!scen.skip_reason.empty()) {
      ManifestRecord r = base;
      r.skip_reason = scen.skip_reason;
      records.push_back(r);
      ++rep.records;
      ++rep.skipped;
      continue;
    }
    auto emit = [&](const Scenario& s) {
      ManifestRecord r = base;
      r.scenario = s.name;
      r.box = s.box;
      r.canvas_png = "canvases/" + tag + "_" + s.name + ".png";
      r.canvas_mask_png = "canvases/" + tag + "_" + s.name + "_mask.png";
      put_image(r.canvas_png, s.canvas.masked_image);
      put_mask(r.canvas_mask_png, s.canvas.mask);
      records.push_back(r);
      ++rep.records;
    };
    if (scen.no_light) {
      emit(*scen.no_light);
      ++rep.no_light;
    }
    if (scen.incomplete) {
      emit(*scen.incomplete);
      ++rep.incomplete;
    }
  }
  write_manifest(manifest_path.string(), records);
  write_sidecar(manifest_path.string(), hash, g.seed);

  const nlohmann::json j{{"schema", kReportSchema}, {"command", "generate"},
                         {"config_hash", hash},     {"scenes", rep.scenes},
                         {"records", rep.records},  {"no_light", rep.no_light},
                         {"incomplete", rep.incomplete}, {"skipped", rep.skipped}};
  write_text_file((root / "generate_report.json").string(), j.dump(2) + "\n");
  write_sidecar((root / "generate_report.json").string(), hash, g.seed);
  return rep;
}

// ---------------------------------------------------------------------------
// Dataset loading for the training commands
// ---------------------------------------------------------------------------

inline std::vector<ManifestRecord> usable_records(const std::vector<ManifestRecord>& all,
                                                  const std::string& scenario_filter) {
  std::vector<ManifestRecord> out;
  for (const auto& r : all) {
    if (!r.skip_reason.empty() || r.canvas_png.empty()) continue;
    if (!scenario_filter.empty() && r.scenario != scenario_filter) continue;
    out.push_back(r);
  }
  return out;
}

inline OutpaintCanvas load_canvas(const std::string& dir, const ManifestRecord& rec) {
  OutpaintCanvas c;
  c.masked_image = read_image_png(dir + "/" + rec.canvas_png);
  c.mask = read_mask_png(dir + "/" + rec.canvas_mask_png);
  c.origin_box = rec.box;
  return c;
}

inline std::vector<RegressorSample> load_regressor_dataset(const std::string& dir,
                                                           const std::string& scenario_filter) {
  std::vector<RegressorSample> out;
  for (const auto& rec : usable_records(read_manifest(dir + "/manifest.jsonl"), scenario_filter))
    out.push_back({load_canvas(dir, rec), rec.lights});
  return out;
}

inline std::vector<DenoiserSample> load_denoiser_dataset(const std::string& dir,
                                                         const std::string& scenario_filter) {
  std::vector<DenoiserSample> out;
  for (const auto& rec : usable_records(read_manifest(dir + "/manifest.jsonl"), scenario_filter)) {
    const Image flared = read_image_png(dir + "/" + rec.flared_png);
    const SoftMask light = read_softmask_png(dir + "/" + rec.light_mask_png);
    out.push_back(make_denoiser_sample(flared, load_canvas(dir, rec), light));
  }
  return out;
}

// One pair per scene id; skipped scenes still carry a usable clean/flared pair.
inline std::vector<SifrSample> load_sifr_dataset(const std::string& dir) {
  std::vector<SifrSample> out;
  std::set<int> seen;
  for (const auto& rec : read_manifest(dir + "/manifest.jsonl")) {
    if (!seen.insert(rec.id).second) continue;
    out.push_back({to_float(image_to_tensor(read_image_png(dir + "/" + rec.flared_png))),
                   to_float(image_to_tensor(read_image_png(dir + "/" + rec.clean_png)))});
  }
  return out;
}

// ---------------------------------------------------------------------------
// End-to-end pipeline
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::string data_dir;
  std::string out_dir;
  std::string regressor_weights;
  std::string denoiser_weights;
  std::string scenario;  // "" = every scenario
  SifrBackend sifr;
  SamplerConfig sampler;  // sampler.seed is ignored; per-sample seeds come from `seed`
  bool direct_input = false;
  int limit = -1;
  bool overwrite = false;
  std::uint64_t seed = 0;
};

inline SoftMask predicted_light_mask(LightRegressor& model, const OutpaintCanvas& canvas) {
  return render_light_mask(regressor_forward(model, canvas), canvas.mask.height(),
                           canvas.mask.width(), model.cfg.confidence_threshold);
}

// Weight files and the manifest enter the hash by content, so a hash match
// means the run inputs were really identical, not just identically named.
inline std::string pipeline_canonical(const PipelineConfig& p) {
  std::ostringstream ss;
  ss << std::setprecision(17);
  ss << "command=pipeline\n";
  ss << "blend=" << blend_name(p.sampler.blend) << "\n";
  ss << "data=" << hash_hex(file_fnv(p.data_dir + "/manifest.jsonl")) << "\n";
  ss << "denoiser=" << (p.direct_input ? "none" : hash_hex(file_fnv(p.denoiser_weights))) << "\n";
  ss << "direct=" << (p.direct_input ? 1 : 0) << "\n";
  ss << "eta=" << p.sampler.eta << "\n";
  ss << "guidance=" << p.sampler.guidance << "\n";
  ss << "limit=" << p.limit << "\n";
  ss << "regressor=" << (p.direct_input ? "none" : hash_hex(file_fnv(p.regressor_weights)))
     << "\n";
  ss << "reinject=" << p.sampler.reinject << "\n";
  ss << "scenario=" << p.scenario << "\n";
  ss << "seed=" << p.seed << "\n";
  std::string sifr = sifr_backend_name(p.sifr);
  if (p.sifr.kind == SifrBackend::Kind::toy_unet)
    sifr += ":" + hash_hex(file_fnv(p.sifr.weights));
  ss << "sifr=" << sifr << "\n";
  ss << "steps=" << p.sampler.steps << "\n";
  ss << "timeout=" << p.sifr.timeout_sec << "\n";
  return ss.str();
}

struct SampleOutcome {
  int id = 0;
  std::string scenario;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  int denoiser_calls = 0;
  std::string input_png;       // direct variant: the crop handed to the backend
  std::string light_mask_png;  // ours variant only
  std::string i_out_png;       // ours variant only
  std::string i_free_png;
  std::string i_final_png;
};

struct PipelineReport {
  std::string config_hash;
  std::string variant;  // "ours" | "direct"
  std::string sifr;
  std::string scenario;
  std::uint64_t seed = 0;
  int n_ok = 0, n_failed = 0;
  std::vector<SampleOutcome> samples;
};

inline nlohmann::json pipeline_report_json(const PipelineReport& r) {
  nlohmann::json samples = nlohmann::json::array();
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& s : r.samples) {
    samples.push_back({{"id", s.id},
                       {"scenario", s.scenario},
                       {"seed", s.seed},
                       {"ok", s.ok},
                       {"error", s.error},
                       {"denoiser_calls", s.denoiser_calls},
                       {"input", s.input_png},
                       {"light_mask", s.light_mask_png},
                       {"i_out", s.i_out_png},
                       {"i_free", s.i_free_png},
                       {"i_final", s.i_final_png}});
    if (!s.ok)
      failures.push_back(
          {{"id", s.id}, {"scenario", s.scenario}, {"error", s.error}});
  }
  return {{"schema", kReportSchema}, {"command", "pipeline"},
          {"config_hash", r.config_hash}, {"variant", r.variant},
          {"sifr", r.sifr},               {"scenario", r.scenario},
          {"seed", r.seed},               {"n_ok", r.n_ok},
          {"n_failed", r.n_failed},       {"failures", failures},
          {"samples", samples}};
}

inline PipelineReport run_pipeline(const PipelineConfig& p) {
  namespace fs = std::filesystem;
  const std::string hash = hash_hex(fnv1a64(pipeline_canonical(p)));
  const fs::path root(p.out_dir);
  const fs::path report_path = root / "pipeline_report.json";
  if (fs::exists(report_path) && !p.overwrite)
    throw std::runtime_error("pipeline: " + report_path.string() +
                             " already holds a run; pass overwrite to replace it");
  fs::create_directories(root);

  auto records = usable_records(read_manifest(p.data_dir + "/manifest.jsonl"), p.scenario);
  if (p.limit >= 0 && static_cast<int>(records.size()) > p.limit)
    records.resize(static_cast<std::size_t>(p.limit));
  if (records.empty()) throw std::runtime_error("pipeline: no usable samples in " + p.data_dir);

  LightRegressor reg;
  ToyDenoiser den;
  const NoiseSchedule sched = NoiseSchedule::linear();
  if (!p.direct_input) {
    reg.load(p.regressor_weights);
    den.load(p.denoiser_weights);
  }
  SifrRunner runner(p.sifr);

  PipelineReport rep;
  rep.config_hash = hash;
  rep.variant = p.direct_input ? "direct" : "ours";
  rep.sifr = sifr_backend_name(p.sifr);
  rep.scenario = p.scenario;
  rep.seed = p.seed;

  for (const auto& rec : records) {
    SampleOutcome oc;
    oc.id = rec.id;
    oc.scenario = rec.scenario;
    oc.seed = derive_seed(derive_seed(p.seed, static_cast<std::uint64_t>(rec.id)),
                          fnv1a64(rec.scenario));
    const std::string dir = idtag(rec.id) + "_" + rec.scenario;
    try {
      fs::create_directories(root / dir);
      const OutpaintCanvas canvas = load_canvas(p.data_dir, rec);
      auto put_image = [&](std::string& field, const std::string& name, const Image& img) {
        field = dir + "/" + name;
        write_image_png((root / field).string(), img);
        write_sidecar((root / field).string(), hash, oc.seed);
      };

      auto run_sifr = [&](const std::string& in_rel) {
        const std::string rel = dir + "/I_free.png";
        runner.invoke((root / in_rel).string(), (root / rel).string());
        oc.i_free_png = rel;
        write_sidecar((root / rel).string(), hash, oc.seed);
      };

      if (p.direct_input) {
        put_image(oc.input_png, "I_direct_in.png",
                  crop_image(canvas.masked_image, canvas.origin_box));
        run_sifr(oc.input_png);
        put_image(oc.i_final_png, "I_final.png", read_image_png((root / oc.i_free_png).string()));
      } else {
        const SoftMask ml = predicted_light_mask(reg, canvas);
        SamplerConfig sc = p.sampler;
        sc.seed = oc.seed;
        const SampleResult sr = outpaint(canvas, ml, den, sched, sc);
        oc.denoiser_calls = sr.denoiser_calls;
        for (int y = 0; y < canvas.mask.height(); ++y)
          for (int x = 0; x < canvas.mask.width(); ++x)
            if (!canvas.mask.at(y, x))
              for (int c = 0; c < 3; ++c)
                if (sr.image.at(c, y, x) != canvas.masked_image.at(c, y, x))
                  throw std::runtime_error("pipeline: outpainting modified known pixels");

        oc.light_mask_png = dir + "/M_L.png";
        write_softmask_png((root / oc.light_mask_png).string(), ml);
        write_sidecar((root / oc.light_mask_png).string(), hash, oc.seed);
        put_image(oc.i_out_png, "I_out.png", sr.image);
        run_sifr(oc.i_out_png);
        const Image freed = read_image_png((root / oc.i_free_png).string());
        put_image(oc.i_final_png, "I_final.png", extract_original_region(freed, canvas));
      }
      oc.ok = true;
      ++rep.n_ok;
    } catch (const std::exception& e) {
      oc.ok = false;
      oc.error = e.what();
      ++rep.n_failed;
    }
    rep.samples.push_back(std::move(oc));
  }

  write_text_file(report_path.string(), pipeline_report_json(rep).dump(2) + "\n");
  write_sidecar(report_path.string(), hash, p.seed);
  return rep;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct EvalConfig {
  std::string data_dir;
  std::vector<std::string> runs;  // directories holding pipeline_report.json
  std::string out_dir = ".";
  bool overwrite = false;
};

struct EvalRow {
  int id = 0;
  std::string scenario, sifr, variant;
  double psnr = 0, ssim = 0, gpsnr = 0, spsnr = 0, miou = 0;
  bool has_ssim = false, has_g = false, has_s = false, has_miou = false;
};

struct EvalAggregate {
  std::string scenario, sifr, variant;
  int n = 0, n_ssim = 0, n_g = 0, n_s = 0, n_miou = 0;
  double psnr = 0, ssim = 0, gpsnr = 0, spsnr = 0, miou = 0;
};

// Same-sample comparison of "ours" against "direct" within one
// (scenario, backend) group.
struct EvalPaired {
  std::string scenario, sifr;
  int pairs = 0, wins = 0;
  double mean_delta_psnr = 0;
};

struct EvalReport {
  std::string config_hash;
  std::vector<EvalRow> rows;
  std::vector<EvalAggregate> aggregates;
  std::vector<EvalPaired> paired;
};

namespace detail {

struct RunSamples {
  std::string variant, sifr, config_hash;
  // id, scenario, artifact paths relative to the run dir
  struct Entry {
    int id;
    std::string scenario, light_mask, i_final;
  };
  std::vector<Entry> entries;
};

inline RunSamples read_run(const std::string& run_dir) {
  std::ifstream in(run_dir + "/pipeline_report.json", std::ios::binary);
  if (!in) throw std::runtime_error("evaluate: cannot read " + run_dir + "/pipeline_report.json");
  nlohmann::json j;
  in >> j;
  if (j.at("schema").get<int>() != kReportSchema)
    throw std::runtime_error("evaluate: unsupported report schema in " + run_dir);
  RunSamples run;
  run.variant = j.at("variant").get<std::string>();
  run.sifr = j.at("sifr").get<std::string>();
  run.config_hash = j.at("config_hash").get<std::string>();
  for (const auto& s : j.at("samples")) {
    if (!s.at("ok").get<bool>()) continue;
    run.entries.push_back({s.at("id").get<int>(), s.at("scenario").get<std::string>(),
                           s.at("light_mask").get<std::string>(),
                           s.at("i_final").get<std::string>()});
  }
  return run;
}

}  // namespace detail

inline EvalReport evaluate_runs(const EvalConfig& cfg) {
  std::map<std::pair<int, std::string>, ManifestRecord> index;
  for (const auto& r : read_manifest(cfg.data_dir + "/manifest.jsonl"))
    index[{r.id, r.scenario}] = r;

  std::vector<detail::RunSamples> runs;
  runs.reserve(cfg.runs.size());
  for (const auto& dir : cfg.runs) runs.push_back(detail::read_run(dir));

  // All inputs are checked up front so one error lists every absent file.
  std::vector<std::string> missing;
  auto need = [&](const std::string& path) {
    if (!std::filesystem::exists(path)) missing.push_back(path);
  };
  for (std::size_t ri = 0; ri < runs.size(); ++ri) {
    for (const auto& e : runs[ri].entries) {
      auto it = index.find({e.id, e.scenario});
      if (it == index.end())
        throw std::runtime_error("evaluate: sample " + idtag(e.id) + "_" + e.scenario +
                                 " is not in the manifest at " + cfg.data_dir);
      const ManifestRecord& rec = it->second;
      need(cfg.data_dir + "/" + rec.clean_png);
      need(cfg.data_dir + "/" + rec.glare_mask_png);
      need(cfg.data_dir + "/" + rec.streak_mask_png);
      need(cfg.data_dir + "/" + rec.disc_mask_png);
      need(cfg.runs[ri] + "/" + e.i_final);
      if (!e.light_mask.empty()) need(cfg.runs[ri] + "/" + e.light_mask);
    }
  }
  if (!missing.empty()) {
    std::string msg = "evaluate: missing files:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw std::runtime_error(msg);
  }

  EvalReport report;
  for (std::size_t ri = 0; ri < runs.size(); ++ri) {
    const auto& run = runs[ri];
    for (const auto& e : run.entries) {
      const ManifestRecord& rec = index.at({e.id, e.scenario});
      const Image clean = read_image_png(cfg.data_dir + "/" + rec.clean_png);
      const Image clean_crop = crop_image(clean, rec.box);
      const Image final_img = read_image_png(cfg.runs[ri] + "/" + e.i_final);
      if (final_img.height() != clean_crop.height() || final_img.width() != clean_crop.width())
        throw std::runtime_error("evaluate: " + cfg.runs[ri] + "/" + e.i_final +
                                 " does not match the sample's crop dimensions");

      EvalRow row;
      row.id = e.id;
      row.scenario = e.scenario;
      row.sifr = run.sifr;
      row.variant = run.variant;
      row.psnr = psnr(final_img, clean_crop);
      if (clean_crop.height() >= 11 && clean_crop.width() >= 11) {
        row.ssim = ssim(final_img, clean_crop);
        row.has_ssim = true;
      }
      const BinaryMask glare =
          crop_mask(read_mask_png(cfg.data_dir + "/" + rec.glare_mask_png), rec.box);
      const BinaryMask streak =
          crop_mask(read_mask_png(cfg.data_dir + "/" + rec.streak_mask_png), rec.box);
      auto count = [](const BinaryMask& m) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < m.size(); ++i) n += m.data()[i] != 0;
        return n;
      };
      if (count(glare) > 0) {
        row.gpsnr = masked_psnr(final_img, clean_crop, glare);
        row.has_g = true;
      }
      if (count(streak) > 0) {
        row.spsnr = masked_psnr(final_img, clean_crop, streak);
        row.has_s = true;
      }
      if (!e.light_mask.empty()) {
        const BinaryMask pred =
            binarize(read_softmask_png(cfg.runs[ri] + "/" + e.light_mask), 0.5);
        row.miou = iou(pred, read_mask_png(cfg.data_dir + "/" + rec.disc_mask_png));
        row.has_miou = true;
      }
      report.rows.push_back(std::move(row));
    }
  }

  // aggregates per (scenario, sifr, variant), sorted by key
  std::map<std::tuple<std::string, std::string, std::string>, EvalAggregate> groups;
  for (const auto& r : report.rows) {
    auto& a = groups[{r.scenario, r.sifr, r.variant}];
    a.scenario = r.scenario;
    a.sifr = r.sifr;
    a.variant = r.variant;
    ++a.n;
    a.psnr += r.psnr;
    if (r.has_ssim) {
      a.ssim += r.ssim;
      ++a.n_ssim;
    }
    if (r.has_g) {
      a.gpsnr += r.gpsnr;
      ++a.n_g;
    }
    if (r.has_s) {
      a.spsnr += r.spsnr;
      ++a.n_s;
    }
    if (r.has_miou) {
      a.miou += r.miou;
      ++a.n_miou;
    }
  }
  for (auto& [key, a] : groups) {
    a.psnr /= a.n;
    if (a.n_ssim) a.ssim /= a.n_ssim;
    if (a.n_g) a.gpsnr /= a.n_g;
    if (a.n_s) a.spsnr /= a.n_s;
    if (a.n_miou) a.miou /= a.n_miou;
    report.aggregates.push_back(a);
  }

  // paired ours-vs-direct deltas per (scenario, sifr)
  std::map<std::pair<std::string, std::string>, std::map<int, std::pair<double, double>>> pairs;
  std::map<std::pair<std::string, std::string>, std::pair<std::set<int>, std::set<int>>> seen;
  for (const auto& r : report.rows) {
    auto key = std::make_pair(r.scenario, r.sifr);
    if (r.variant == "ours") {
      pairs[key][r.id].first = r.psnr;
      seen[key].first.insert(r.id);
    } else if (r.variant == "direct") {
      pairs[key][r.id].second = r.psnr;
      seen[key].second.insert(r.id);
    }
  }
  for (const auto& [key, ids] : pairs) {
    EvalPaired p;
    p.scenario = key.first;
    p.sifr = key.second;
    for (const auto& [id, v] : ids) {
      if (!seen[key].first.count(id) || !seen[key].second.count(id)) continue;
      ++p.pairs;
      const double delta = v.first - v.second;
      p.mean_delta_psnr += delta;
      if (delta > 0.0) ++p.wins;
    }
    if (p.pairs == 0) continue;
    p.mean_delta_psnr /= p.pairs;
    report.paired.push_back(p);
  }

  std::string canon = "command=evaluate\ndata=" +
                      hash_hex(file_fnv(cfg.data_dir + "/manifest.jsonl")) + "\nruns=";
  for (std::size_t i = 0; i < runs.size(); ++i)
    canon += (i ? "," : "") + runs[i].config_hash + ":" + runs[i].variant;
  report.config_hash = hash_hex(fnv1a64(canon + "\n"));
  return report;
}

inline nlohmann::json eval_report_json(const EvalReport& r) {
  auto opt = [](bool has, double v) {
    return has ? nlohmann::json(v) : nlohmann::json(nullptr);
  };
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& x : r.rows)
    rows.push_back({{"id", x.id},
                    {"scenario", x.scenario},
                    {"sifr", x.sifr},
                    {"variant", x.variant},
                    {"psnr", x.psnr},
                    {"ssim", opt(x.has_ssim, x.ssim)},
                    {"gpsnr", opt(x.has_g, x.gpsnr)},
                    {"spsnr", opt(x.has_s, x.spsnr)},
                    {"miou", opt(x.has_miou, x.miou)}});
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : r.aggregates)
    aggs.push_back({{"scenario", a.scenario},
                    {"sifr", a.sifr},
                    {"variant", a.variant},
                    {"n", a.n},
                    {"n_ssim", a.n_ssim},
                    {"n_g", a.n_g},
                    {"n_s", a.n_s},
                    {"n_miou", a.n_miou},
                    {"psnr", a.psnr},
                    {"ssim", opt(a.n_ssim > 0, a.ssim)},
                    {"gpsnr", opt(a.n_g > 0, a.gpsnr)},
                    {"spsnr", opt(a.n_s > 0, a.spsnr)},
                    {"miou", opt(a.n_miou > 0, a.miou)}});
  nlohmann::json paired = nlohmann::json::array();
  for (const auto& p : r.paired)
    paired.push_back({{"scenario", p.scenario},
                      {"sifr", p.sifr},
                      {"pairs", p.pairs},
                      {"wins", p.wins},
                      {"mean_delta_psnr", p.mean_delta_psnr}});
  return {{"schema", kReportSchema},
          {"command", "evaluate"},
          {"config_hash", r.config_hash},
          {"mask_source", "generator ground truth"},
          {"rows", rows},
          {"aggregates", aggs},
          {"paired", paired}};
}

inline std::string render_eval_table(const EvalReport& r) {
  std::ostringstream ss;
  auto num = [](bool has, double v, int prec, int width) {
    char buf[32];
    if (has)
      std::snprintf(buf, sizeof buf, "%*.*f", width, prec, v);
    else
      std::snprintf(buf, sizeof buf, "%*s", width, "-");
    return std::string(buf);
  };
  ss << std::left << std::setw(12) << "Setting" << std::setw(22) << "SIFR" << std::setw(14)
     << "Method" << std::right << std::setw(5) << "n" << std::setw(8) << "PSNR" << std::setw(9)
     << "SSIM" << std::setw(8) << "G-PSNR" << std::setw(8) << "S-PSNR" << std::setw(9) << "mIoU"
     << "\n";
  for (const auto& a : r.aggregates) {
    const std::string method = a.variant == "direct" ? "direct input" : a.variant;
    ss << std::left << std::setw(12) << a.scenario << std::setw(22) << a.sifr << std::setw(14)
       << method << std::right << std::setw(5) << a.n << num(true, a.psnr, 2, 8)
       << num(a.n_ssim > 0, a.ssim, 4, 9) << num(a.n_g > 0, a.gpsnr, 2, 8)
       << num(a.n_s > 0, a.spsnr, 2, 8) << num(a.n_miou > 0, a.miou, 4, 9) << "\n";
  }
  for (const auto& p : r.paired) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "paired (%s, %s): pairs=%d wins=%d (%.0f%%) mean dPSNR=%+.2f dB\n",
                  p.scenario.c_str(), p.sifr.c_str(), p.pairs, p.wins,
                  p.pairs ? 100.0 * p.wins / p.pairs : 0.0, p.mean_delta_psnr);
    ss << buf;
  }
  ss << "glare/streak/disc masks: generator ground truth; mIoU is predicted M_L vs disc mask\n";
  return ss.str();
}

inline void write_eval_report(const EvalConfig& cfg, const EvalReport& report) {
  namespace fs = std::filesystem;
  const fs::path root(cfg.out_dir);
  const fs::path json_path = root / "eval_report.json";
  if (fs::exists(json_path) && !cfg.overwrite)
    throw std::runtime_error("evaluate: " + json_path.string() +
                             " exists; pass overwrite to replace it");
  fs::create_directories(root);
  write_text_file(json_path.string(), eval_report_json(report).dump(2) + "\n");
  write_sidecar(json_path.string(), report.config_hash, 0);
  write_text_file((root / "eval_report.txt").string(), render_eval_table(report));
  write_sidecar((root / "eval_report.txt").string(), report.config_hash, 0);
}

}  // namespace lightsout
