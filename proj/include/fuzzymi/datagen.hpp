// datagen.hpp - synthetic bar-alignment dataset: a centred white bar on a
// black background, warped by a random 2-DoF pose and re-binarized.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fuzzymi/grid.hpp"
#include "fuzzymi/warp.hpp"

namespace fuzzymi {

// Dataset PRNG, pinned for cross-platform reproducibility: splitmix64
// (Steele et al.'s 64-bit mix), doubles via the top 53 bits.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  double next_double() {  // uniform in [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

 private:
  std::uint64_t state_;
};

struct BarGenConfig {
  int image_width = 640;
  int image_height = 192;
  int bar_width = 125;
  int bar_height = 50;
  double tx_min = -100.0;
  double tx_max = 100.0;
  double theta_min = -40.0;
  double theta_max = 40.0;
};

struct BarSample {
  Grid source;
  Grid target;
  Pose2 gt_pose;
  std::uint64_t seed;
};

// source: black image with the white bar centred; gt_pose drawn uniformly
// (tx first, then theta) from the config ranges via SplitMix64(seed);
// target: warp_rigid(source, gt_pose) re-binarized at 127.5.
BarSample gen_bar_pair(std::uint64_t seed, const BarGenConfig& config = {});

struct DatasetManifestRow {
  int index = 0;
  std::string src;
  std::string tgt;
  double tx = 0.0;
  double theta = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr const char* kManifestName = "manifest.csv";

// Writes count pairs as NNNNN_src.pgm / NNNNN_tgt.pgm plus manifest.csv
// (header index,src,tgt,tx,theta,seed; a '# prng=splitmix64' comment pins
// the generator). Sample i uses seed base_seed + i. Byte-identical reruns.
std::vector<DatasetManifestRow> gen_dataset(int count, std::uint64_t base_seed,
                                            const std::filesystem::path& out_dir,
                                            const BarGenConfig& config = {});

std::vector<DatasetManifestRow> read_manifest(const std::filesystem::path& manifest_csv);

}  // namespace fuzzymi
