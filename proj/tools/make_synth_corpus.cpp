// Writes a deterministic procedural landscape corpus, for demo and smoke
// training when no photo dataset is at hand.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "outpaint/image_io.hpp"
#include "outpaint/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic landscape corpus"};
  std::string out_dir = "corpus";
  int count = 60;
  int side = 160;
  uint64_t seed = 0;
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--count", count, "Number of images");
  app.add_option("--side", side, "Image side in pixels");
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out_dir);
  for (int i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d.png", i);
    outpaint::save_png((std::filesystem::path(out_dir) / name).string(),
                       outpaint::synth_landscape(side, seed, i));
  }
  std::cout << "wrote " << count << " images to " << out_dir << "\n";
  return 0;
}
