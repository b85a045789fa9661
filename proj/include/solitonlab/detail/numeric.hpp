#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>

#include <fmt/format.h>

namespace solitonlab::detail {

/// Uniform double in [lo, hi), mapped directly from the engine's raw bits so
/// that parameter streams are bit-reproducible across standard libraries.
inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
  return lo + (hi - lo) * u;
}

/// Worker count for parallel loops: SOLITONLAB_THREADS if set (>= 1),
/// otherwise the hardware concurrency.
inline int thread_cap() {
  if (const char* env = std::getenv("SOLITONLAB_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so an interrupted run never leaves a half-written artifact.
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error(
          fmt::format("cannot open '{}' for writing", tmp.string()));
    }
    out << content;
    out.flush();
    if (!out) {
      throw std::runtime_error(fmt::format("write to '{}' failed", tmp.string()));
    }
  }
  fs::rename(tmp, path);
}

}  // namespace solitonlab::detail
