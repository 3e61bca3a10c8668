#include "fuzzymi/datagen.hpp"

#include <atomic>
#include <cstdio>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "fuzzymi/csv.hpp"

namespace fuzzymi {

namespace {

Grid make_bar_source(const BarGenConfig& c) {
  if (c.bar_width > c.image_width || c.bar_height > c.image_height)
    throw std::invalid_argument("gen_bar_pair: bar larger than image");
  std::vector<double> data(static_cast<std::size_t>(c.image_width) * c.image_height, 0.0);
  const int x0 = (c.image_width - c.bar_width) / 2;
  const int y0 = (c.image_height - c.bar_height) / 2;
  for (int y = y0; y < y0 + c.bar_height; ++y)
    for (int x = x0; x < x0 + c.bar_width; ++x)
      data[static_cast<std::size_t>(y) * c.image_width + x] = 255.0;
  return Grid(c.image_width, c.image_height, std::move(data));
}

Grid binarize(const Grid& g) {
  std::vector<double> data(g.size());
  const auto s = g.samples();
  for (std::size_t i = 0; i < s.size(); ++i) data[i] = s[i] > 127.5 ? 255.0 : 0.0;
  return Grid(g.width(), g.height(), std::move(data));
}

std::string pair_name(int index, const char* kind) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05d_%s.pgm", index, kind);
  return buf;
}

}  // namespace

BarSample gen_bar_pair(std::uint64_t seed, const BarGenConfig& config) {
  Grid source = make_bar_source(config);
  SplitMix64 rng(seed);
  Pose2 pose;
  pose.tx = rng.uniform(config.tx_min, config.tx_max);
  pose.theta_deg = rng.uniform(config.theta_min, config.theta_max);
  Grid target = binarize(warp_rigid(source, pose));
  return BarSample{std::move(source), std::move(target), pose, seed};
}

std::vector<DatasetManifestRow> gen_dataset(int count, std::uint64_t base_seed,
                                            const std::filesystem::path& out_dir,
                                            const BarGenConfig& config) {
  if (count < 0) throw std::invalid_argument("gen_dataset: negative count");
  std::filesystem::create_directories(out_dir);

  std::vector<DatasetManifestRow> rows(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    while (!failed.load(std::memory_order_relaxed)) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        const BarSample sample = gen_bar_pair(base_seed + static_cast<std::uint64_t>(i), config);
        DatasetManifestRow row;
        row.index = i;
        row.src = pair_name(i, "src");
        row.tgt = pair_name(i, "tgt");
        row.tx = sample.gt_pose.tx;
        row.theta = sample.gt_pose.theta_deg;
        row.seed = sample.seed;
        save_pgm(sample.source, out_dir / row.src);
        save_pgm(sample.target, out_dir / row.tgt);
        rows[static_cast<std::size_t>(i)] = std::move(row);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) first_error = e.what();
      }
    }
  };

  unsigned nthreads = std::max(1u, std::thread::hardware_concurrency());
  nthreads = std::min<unsigned>(nthreads, static_cast<unsigned>(std::max(count, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (failed.load()) throw std::runtime_error("gen_dataset: " + first_error);

  std::string manifest = "# prng=splitmix64\nindex,src,tgt,tx,theta,seed\n";
  char buf[192];
  for (const DatasetManifestRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%s,%s,%.17g,%.17g,%llu\n", row.index,
                  row.src.c_str(), row.tgt.c_str(), row.tx, row.theta,
                  static_cast<unsigned long long>(row.seed));
    manifest += buf;
  }
  csv::atomic_write(out_dir / kManifestName, manifest);
  return rows;
}

std::vector<DatasetManifestRow> read_manifest(const std::filesystem::path& manifest_csv) {
  const auto raw = csv::read_rows(manifest_csv);
  std::vector<DatasetManifestRow> rows;
  for (const auto& fields : raw) {
    if (fields.size() != 6) continue;
    if (fields[0] == "index") continue;  // header
    DatasetManifestRow row;
    row.index = std::stoi(fields[0]);
    row.src = fields[1];
    row.tgt = fields[2];
    row.tx = std::stod(fields[3]);
    row.theta = std::stod(fields[4]);
    row.seed = std::stoull(fields[5]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fuzzymi
