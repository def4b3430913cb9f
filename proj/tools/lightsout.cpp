#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "lightsout/config.hpp"
#include "lightsout/pipeline.hpp"

namespace {

template <typename T>
void parse_value(const std::string& key, const std::string& text, T& out) {
  if constexpr (std::is_same_v<T, std::string>) {
    out = text;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes" || text == "on")
      out = true;
    else if (text == "false" || text == "0" || text == "no" || text == "off")
      out = false;
    else
      throw std::invalid_argument("config: " + key + ": expected a boolean, got \"" + text + "\"");
  } else {
    std::istringstream ss(text);
    ss >> out;
    if (ss.fail() || !ss.eof())
      throw std::invalid_argument("config: " + key + ": cannot parse \"" + text + "\"");
  }
}

// One subcommand's options. Every option's long flag doubles as its config
// key; a config file fills in whatever the command line left unset.
struct Sub {
  CLI::App* cmd = nullptr;
  std::string config_path;

  explicit Sub(CLI::App& app, const std::string& name, const std::string& help) {
    cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", config_path, "flat key = value config file");
  }

  template <typename T>
  void opt(const std::string& name, T& var, const std::string& help) {
    binds_.push_back({cmd->add_option("--" + name, var, help), name,
                      [&var, name](const std::string& text) { parse_value(name, text, var); }});
  }

  void flag(const std::string& name, bool& var, const std::string& help) {
    binds_.push_back({cmd->add_flag("--" + name, var, help), name,
                      [&var, name](const std::string& text) { parse_value(name, text, var); }});
  }

  bool parsed() const { return cmd->parsed(); }

  void apply_config() {
    if (config_path.empty()) return;
    const auto cfg = lightsout::FlatConfig::parse_file(config_path);
    for (auto& b : binds_)
      if (b.opt->count() == 0 && cfg.has(b.key)) b.set(cfg.get(b.key));
  }

 private:
  struct Bind {
    CLI::Option* opt;
    std::string key;
    std::function<void(const std::string&)> set;
  };
  std::vector<Bind> binds_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void check_scenario(const std::string& s) {
  require(s.empty() || s == lightsout::kScenarioNoLight || s == lightsout::kScenarioIncomplete,
          "scenario must be no_light or incomplete");
}

lightsout::SamplerConfig::Blend parse_blend(const std::string& s) {
  if (s == "rgb") return lightsout::SamplerConfig::Blend::rgb;
  if (s == "latent") return lightsout::SamplerConfig::Blend::latent;
  throw std::invalid_argument("blend must be rgb or latent");
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_curve(const char* label, const std::vector<double>& curve) {
  if (curve.empty()) return;
  std::printf("%s: first %.6f last %.6f (%zu steps)\n", label, curve.front(), curve.back(),
              curve.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lightsout: light-source prediction, diffusion outpainting, flare-removal handoff"};
  app.require_subcommand(1);

  // ---- generate ----
  Sub g(app, "generate", "write a synthetic flare dataset");
  lightsout::GenerateConfig gen;
  g.opt("out", gen.out_dir, "dataset directory");
  g.opt("count", gen.count, "number of scenes");
  g.opt("height", gen.height, "scene height");
  g.opt("width", gen.width, "scene width");
  g.opt("lum_threshold", gen.lum_threshold, "bright-region luminance threshold");
  g.opt("shift", gen.shift, "incomplete-scenario crop shift");
  g.opt("seed", gen.seed, "global seed");
  g.flag("overwrite", gen.overwrite, "replace an existing dataset");

  // ---- train-regressor ----
  Sub tr(app, "train-regressor", "train the light-source regressor on a dataset");
  struct {
    std::string data, out, scenario;
    double lr = 3e-4;
    int epochs = 30, batch = 32, channels = 16, hidden = 64;
    std::uint64_t seed = 0;
  } treg;
  tr.opt("data", treg.data, "dataset directory");
  tr.opt("out", treg.out, "weights output path");
  tr.opt("scenario", treg.scenario, "restrict training to one scenario");
  tr.opt("lr", treg.lr, "learning rate");
  tr.opt("epochs", treg.epochs, "training epochs");
  tr.opt("batch", treg.batch, "batch size");
  tr.opt("channels", treg.channels, "extractor width");
  tr.opt("hidden", treg.hidden, "head width");
  tr.opt("seed", treg.seed, "global seed");

  // ---- train-denoiser ----
  Sub td(app, "train-denoiser", "train the outpainting denoiser on a dataset");
  struct {
    std::string data, out, scenario, base;
    double lr = 1e-3, lambda_light = 0.1, cond_dropout = 0.1, lora_scale = 1.0;
    int steps = 2000, batch = 8, channels = 12, lora_rank = 4;
    bool lora = false;
    std::uint64_t seed = 0;
  } tden;
  td.opt("data", tden.data, "dataset directory");
  td.opt("out", tden.out, "weights output path");
  td.opt("scenario", tden.scenario, "restrict training to one scenario");
  td.opt("base", tden.base, "initial weights to start from");
  td.opt("lr", tden.lr, "learning rate");
  td.opt("steps", tden.steps, "optimizer steps");
  td.opt("batch", tden.batch, "batch size");
  td.opt("channels", tden.channels, "network width");
  td.opt("lambda_light", tden.lambda_light, "light-mask auxiliary loss weight");
  td.opt("cond_dropout", tden.cond_dropout, "chance to blank the light mask per sample");
  td.flag("lora", tden.lora, "train low-rank adapters only (requires --base)");
  td.opt("lora_rank", tden.lora_rank, "adapter rank");
  td.opt("lora_scale", tden.lora_scale, "adapter scale");
  td.opt("seed", tden.seed, "global seed");

  // ---- train-sifr ----
  Sub ts(app, "train-sifr", "train the toy flare remover on a dataset");
  struct {
    std::string data, out;
    double lr = 1e-3;
    int steps = 1500, batch = 8, channels = 12;
    std::uint64_t seed = 0;
  } tsif;
  ts.opt("data", tsif.data, "dataset directory");
  ts.opt("out", tsif.out, "weights output path");
  ts.opt("lr", tsif.lr, "learning rate");
  ts.opt("steps", tsif.steps, "optimizer steps");
  ts.opt("batch", tsif.batch, "batch size");
  ts.opt("channels", tsif.channels, "network width");
  ts.opt("seed", tsif.seed, "global seed");

  // ---- pipeline ----
  Sub pl(app, "pipeline", "run predict -> outpaint -> flare removal over a dataset");
  lightsout::PipelineConfig pipe;
  std::string pipe_sifr = "identity", pipe_blend = "latent";
  double pipe_timeout = 30.0;
  std::string pipe_sifr_weights;
  pipe.sampler.steps = 12;
  pipe.sampler.reinject = 2;
  pipe.sampler.guidance = 3.0;
  pipe.sampler.eta = 1.0;
  pl.opt("data", pipe.data_dir, "dataset directory");
  pl.opt("out", pipe.out_dir, "run output directory");
  pl.opt("regressor", pipe.regressor_weights, "regressor weights");
  pl.opt("denoiser", pipe.denoiser_weights, "denoiser weights");
  pl.opt("scenario", pipe.scenario, "restrict to one scenario");
  pl.opt("sifr", pipe_sifr, "identity | toy-unet | cmd:<template with {in} and {out}>");
  pl.opt("sifr_weights", pipe_sifr_weights, "weights for the toy-unet backend");
  pl.opt("timeout", pipe_timeout, "backend timeout in seconds");
  pl.opt("blend", pipe_blend, "rgb | latent");
  pl.opt("steps", pipe.sampler.steps, "sampling steps");
  pl.opt("eta", pipe.sampler.eta, "sampler stochasticity");
  pl.opt("guidance", pipe.sampler.guidance, "classifier-free guidance weight");
  pl.opt("reinject", pipe.sampler.reinject, "noise reinjection repeats per step");
  pl.opt("limit", pipe.limit, "process at most this many samples");
  pl.flag("direct", pipe.direct_input, "skip prediction and outpainting (direct input)");
  pl.flag("overwrite", pipe.overwrite, "replace an existing run");
  pl.opt("seed", pipe.seed, "global seed");

  // ---- evaluate ----
  Sub ev(app, "evaluate", "score pipeline runs against ground truth");
  lightsout::EvalConfig eval;
  std::string eval_runs;
  ev.opt("data", eval.data_dir, "dataset directory");
  ev.opt("runs", eval_runs, "comma-separated run directories");
  ev.opt("out", eval.out_dir, "report output directory");
  ev.flag("overwrite", eval.overwrite, "replace existing reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (g.parsed()) {
      g.apply_config();
      require(!gen.out_dir.empty(), "generate: --out is required");
      const auto rep = lightsout::run_generate(gen);
      std::printf("generated %d scenes, %d records (%d no_light, %d incomplete, %d skipped)\n",
                  rep.scenes, rep.records, rep.no_light, rep.incomplete, rep.skipped);
      std::printf("config hash %s -> %s\n", rep.config_hash.c_str(), gen.out_dir.c_str());
      return 0;
    }

    if (tr.parsed()) {
      tr.apply_config();
      require(!treg.data.empty(), "train-regressor: --data is required");
      require(!treg.out.empty(), "train-regressor: --out is required");
      check_scenario(treg.scenario);
      const auto samples = lightsout::load_regressor_dataset(treg.data, treg.scenario);
      if (samples.empty()) throw std::runtime_error("train-regressor: no usable samples");
      lightsout::RegressorConfig rc;
      rc.channels = treg.channels;
      rc.hidden = treg.hidden;
      rc.input_h = samples[0].canvas.mask.height();
      rc.input_w = samples[0].canvas.mask.width();
      rc.n_sources = static_cast<int>(samples[0].gt.params.size());
      lightsout::LightRegressor model;
      model.init(rc, treg.seed);
      lightsout::RegressorTrainConfig tc;
      tc.lr = treg.lr;
      tc.batch = treg.batch;
      tc.epochs = treg.epochs;
      tc.seed = treg.seed;
      const auto result = lightsout::train_regressor(samples, model, tc);
      model.save(treg.out, treg.seed);
      print_curve("loss", result.loss_curve);
      std::printf("saved %s\n", treg.out.c_str());
      return 0;
    }

    if (td.parsed()) {
      td.apply_config();
      require(!tden.data.empty(), "train-denoiser: --data is required");
      require(!tden.out.empty(), "train-denoiser: --out is required");
      require(!tden.lora || !tden.base.empty(), "train-denoiser: --lora requires --base");
      check_scenario(tden.scenario);
      const auto samples = lightsout::load_denoiser_dataset(tden.data, tden.scenario);
      if (samples.empty()) throw std::runtime_error("train-denoiser: no usable samples");
      lightsout::ToyDenoiser model;
      if (!tden.base.empty()) {
        model.load(tden.base);
      } else {
        lightsout::DenoiserConfig dc;
        dc.channels = tden.channels;
        model.init(dc, tden.seed);
      }
      lightsout::DenoiserTrainConfig tc;
      tc.lr = tden.lr;
      tc.batch = tden.batch;
      tc.steps = tden.steps;
      tc.lambda_light = tden.lambda_light;
      tc.cond_dropout = tden.cond_dropout;
      tc.lora_only = tden.lora;
      tc.lora_rank = tden.lora_rank;
      tc.lora_scale = tden.lora_scale;
      tc.seed = tden.seed;
      const auto result =
          lightsout::train_denoiser(samples, model, lightsout::NoiseSchedule::linear(), tc);
      model.save(tden.out, tden.seed);
      print_curve("loss", result.loss_curve);
      print_curve("eps", result.eps_curve);
      std::printf("saved %s\n", tden.out.c_str());
      return 0;
    }

    if (ts.parsed()) {
      ts.apply_config();
      require(!tsif.data.empty(), "train-sifr: --data is required");
      require(!tsif.out.empty(), "train-sifr: --out is required");
      const auto pairs = lightsout::load_sifr_dataset(tsif.data);
      if (pairs.empty()) throw std::runtime_error("train-sifr: no usable pairs");
      lightsout::ToySifr net;
      net.init({tsif.channels}, tsif.seed);
      lightsout::SifrTrainConfig tc;
      tc.lr = tsif.lr;
      tc.batch = tsif.batch;
      tc.steps = tsif.steps;
      tc.seed = tsif.seed;
      const auto curve = lightsout::train_toy_sifr(pairs, net, tc);
      net.save(tsif.out, tsif.seed);
      print_curve("l1", curve);
      std::printf("saved %s\n", tsif.out.c_str());
      return 0;
    }

    if (pl.parsed()) {
      pl.apply_config();
      require(!pipe.data_dir.empty(), "pipeline: --data is required");
      require(!pipe.out_dir.empty(), "pipeline: --out is required");
      check_scenario(pipe.scenario);
      pipe.sampler.blend = parse_blend(pipe_blend);
      pipe.sifr = lightsout::parse_sifr_backend(pipe_sifr);
      pipe.sifr.weights = pipe_sifr_weights;
      pipe.sifr.timeout_sec = pipe_timeout;
      if (!pipe.direct_input) {
        require(!pipe.regressor_weights.empty(), "pipeline: --regressor is required");
        require(!pipe.denoiser_weights.empty(), "pipeline: --denoiser is required");
      }
      const auto rep = lightsout::run_pipeline(pipe);
      std::printf("pipeline %s: %d ok, %d failed -> %s\n", rep.variant.c_str(), rep.n_ok,
                  rep.n_failed, pipe.out_dir.c_str());
      for (const auto& s : rep.samples)
        if (!s.ok)
          std::fprintf(stderr, "failed %s_%s: %s\n", lightsout::idtag(s.id).c_str(),
                       s.scenario.c_str(), s.error.c_str());
      return 0;
    }

    if (ev.parsed()) {
      ev.apply_config();
      require(!eval.data_dir.empty(), "evaluate: --data is required");
      require(!eval.out_dir.empty(), "evaluate: --out is required");
      eval.runs = split_commas(eval_runs);
      require(!eval.runs.empty(), "evaluate: --runs is required");
      const auto report = lightsout::evaluate_runs(eval);
      lightsout::write_eval_report(eval, report);
      std::fputs(lightsout::render_eval_table(report).c_str(), stdout);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
