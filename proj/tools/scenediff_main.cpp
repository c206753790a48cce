#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "scenediff/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  int64_t seed = -1;
  int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration JSON");
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed, "Override the config seed");
  cmd->add_option("--workers", args.workers, "Override the worker count");
}

scenediff::RunConfig resolve_config(const CommonArgs& args) {
  scenediff::RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = scenediff::load_run_config(args.config_path);
  }
  if (args.seed >= 0) cfg.seed = static_cast<uint64_t>(args.seed);
  if (args.workers > 0) cfg.workers = args.workers;
  return cfg;
}

std::string resolve_out(const CommonArgs& args, const char* stage) {
  if (!args.out_dir.empty()) return args.out_dir;
  return (std::filesystem::path(scenediff::default_out_root()) / stage).string();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guided-diffusion driving-scenario generator and evaluator"};
  app.require_subcommand(1);

  CommonArgs train_args, gen_args, conv_args, eval_args, render_args;
  std::string checkpoint, scenes_dir, gen_dir, ref_dir, scene_file;
  int render_t = 0;

  CLI::App* train = app.add_subcommand("train", "Train the trajectory denoiser");
  add_common(train, train_args);

  CLI::App* generate = app.add_subcommand("generate", "Sample guided scenarios");
  add_common(generate, gen_args);
  generate->add_option("--checkpoint", checkpoint, "Denoiser checkpoint")->required();

  CLI::App* convert = app.add_subcommand("convert", "Build ego-centric training instances");
  add_common(convert, conv_args);
  convert->add_option("scenes", scenes_dir, "Directory of scene files")->required();

  CLI::App* eval = app.add_subcommand("eval", "Score generated scenes against a reference");
  add_common(eval, eval_args);
  eval->add_option("gen", gen_dir, "Generated scene directory")->required();
  eval->add_option("ref", ref_dir, "Reference scene directory")->required();

  CLI::App* render = app.add_subcommand("render", "Render a scene to SVG and PGM");
  add_common(render, render_args);
  render->add_option("scene", scene_file, "Scene JSON file")->required();
  render->add_option("--t", render_t, "Timestep to render");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (train->parsed()) {
      const auto out = scenediff::cmd_train(resolve_config(train_args),
                                            resolve_out(train_args, "train"));
      std::cout << "checkpoint: " << out.checkpoint_path << "\n"
                << "loss: " << out.first_window_loss << " -> " << out.last_window_loss
                << " over " << out.steps_done << " steps\n";
    } else if (generate->parsed()) {
      const auto out = scenediff::cmd_generate(resolve_config(gen_args), checkpoint,
                                               resolve_out(gen_args, "scenes"));
      std::cout << out.scene_files.size() << " scenes -> " << out.manifest_path << "\n";
    } else if (convert->parsed()) {
      const auto out = scenediff::cmd_convert(resolve_config(conv_args), scenes_dir,
                                              resolve_out(conv_args, "dataset"));
      std::cout << out.total_instances << " instances (" << out.skipped_scenes
                << " scenes skipped) -> " << out.manifest_path << "\n";
    } else if (eval->parsed()) {
      const auto out = scenediff::cmd_eval(resolve_config(eval_args), gen_dir, ref_dir,
                                           resolve_out(eval_args, "eval"));
      std::cout << "report: " << out.json_path << "\n";
    } else if (render->parsed()) {
      const auto out = scenediff::cmd_render(resolve_config(render_args), scene_file,
                                             resolve_out(render_args, "render"), render_t);
      std::cout << "render: " << out.svg_path << "\n";
    }
  } catch (const scenediff::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const scenediff::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const scenediff::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
