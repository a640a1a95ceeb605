#include "ntks/cli/commands.hpp"

#include <filesystem>
#include <ostream>

#include <CLI11.hpp>

#include "ntks/io.hpp"

namespace ntks::cli {

namespace {

template <class Params, class Parse, class Run>
FileSet execute(ConfigReader& c, Parse parse, Run run) {
  const Params p = parse(c);
  if (c.has("stride")) check_min("stride", c.integer("stride", 1), 1);
  c.text("out", "");
  c.reject_unknown();
  return render(run(p));
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {"linear_demo",   "gmm_spectrum", "train_track",
                                                 "corrupt_sweep", "meta_verify",  "bound_eval",
                                                 "kernel_check"};
  return names;
}

FileSet run_command(const std::string& command, const json& cfg) {
  check_one_of("command", command, command_names());
  ConfigReader c(cfg);
  const std::string declared = c.text("command", command);
  require(declared == command, ErrorCode::InvalidArgument,
          "config declares command \"" + declared + "\" but \"" + command + "\" was requested");

  if (command == "linear_demo")
    return execute<LinearDemoParams>(c, parse_linear_demo, run_linear_demo);
  if (command == "gmm_spectrum")
    return execute<GmmSpectrumParams>(c, parse_gmm_spectrum, run_gmm_spectrum);
  if (command == "train_track")
    return execute<GmmTrainParams>(
        c, [](ConfigReader& r) { return parse_gmm_train(r); }, run_train_track);
  if (command == "corrupt_sweep")
    return execute<CorruptSweepParams>(c, parse_corrupt_sweep, run_corrupt_sweep);
  if (command == "meta_verify")
    return execute<MetaVerifyParams>(c, parse_meta_verify, run_meta_verify);
  if (command == "bound_eval")
    return execute<BoundEvalParams>(c, parse_bound_eval, run_bound_eval);
  return execute<KernelCheckParams>(c, parse_kernel_check, run_kernel_check);
}

void write_files(const std::string& dir, const FileSet& files) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::Io, "cannot create output directory " + dir + ": " + ec.message());
  for (const auto& [name, content] : files)
    write_text_file((fs::path(dir) / (name + ".partial")).string(), content);
  for (const auto& [name, content] : files) {
    (void)content;
    const fs::path final_path = fs::path(dir) / name;
    fs::rename(fs::path(dir) / (name + ".partial"), final_path, ec);
    require(!ec, ErrorCode::Io, "cannot move output into place: " + final_path.string());
  }
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spectral analysis of shallow-network training dynamics"};
  std::string command, config_path, out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> overrides;
  app.add_option("command", command, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(command_names()));
  app.add_option("--config", config_path, "JSON config file")->required();
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  auto* out_opt = app.add_option("--out", out_dir, "Output directory (default: config \"out\" or .)");
  app.add_option("--set", overrides, "Override a config key: key=value (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    json cfg = load_config_file(config_path);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (*seed_opt) cfg["seed"] = seed;
    if (*out_opt) cfg["out"] = out_dir;
    std::string dir = ".";
    if (cfg.contains("out")) {
      require(cfg["out"].is_string(), ErrorCode::InvalidArgument, "out must be a string");
      dir = cfg["out"].get<std::string>();
    }
    const FileSet files = run_command(command, cfg);
    write_files(dir, files);
    for (const auto& [name, content] : files) {
      (void)content;
      out << (std::filesystem::path(dir) / name).string() << "\n";
    }
    return 0;
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return is_numerical(e.code()) ? 3 : 2;
  } catch (const json::exception& e) {
    err << "error [config]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace ntks::cli
