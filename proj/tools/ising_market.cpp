// ising-market: command-line front end. Talks to the library only through
// the C API.

#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "isingmarket/isingmarket.h"

namespace {

struct ConfigHandle {
  im_config* ptr = nullptr;
  ~ConfigHandle() { im_config_destroy(ptr); }
};

int report(im_status s) {
  if (s != IM_OK) std::fprintf(stderr, "ising-market: %s\n", im_last_error());
  return static_cast<int>(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pairwise maximum-entropy models of binarized market returns"};
  app.set_version_flag("--version", std::string(im_version()));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool strict = false;
  app.add_option("--config", config_path, "key=value settings file; flags given on the command line win")
      ->check(CLI::ExistingFile);
  app.add_flag("--strict", strict, "exit with status 4 when any window fails to converge");

  // Every configuration key is also a --key flag.
  std::map<std::string, std::string> values;
  for (std::size_t i = 0; i < im_config_key_count(); ++i) {
    const std::string key = im_config_key(i);
    if (key == "strict") continue;
    app.add_option("--" + key, values[key])->group("Settings");
  }

  std::string chosen;
  for (std::size_t i = 0; i < im_command_count(); ++i) {
    const std::string name = im_command_name(i);
    app.add_subcommand(name)->callback([&chosen, name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : IM_ERR_CONFIG;
  }

  ConfigHandle cfg;
  if (im_status s = im_config_create(&cfg.ptr); s != IM_OK) return report(s);
  if (!config_path.empty())
    if (im_status s = im_config_load_file(cfg.ptr, config_path.c_str()); s != IM_OK) return report(s);
  for (const auto& [key, value] : values) {
    if (app.count("--" + key) == 0) continue;
    if (im_status s = im_config_set(cfg.ptr, key.c_str(), value.c_str()); s != IM_OK) return report(s);
  }
  if (strict)
    if (im_status s = im_config_set(cfg.ptr, "strict", "on"); s != IM_OK) return report(s);

  return report(im_run_command(cfg.ptr, chosen.c_str()));
}
