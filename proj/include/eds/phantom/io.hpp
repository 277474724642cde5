#pragma once

#include <filesystem>
#include <vector>

#include "eds/phantom/simulated_object.hpp"
#include "eds/phantom/types.hpp"

namespace eds::io {

// Binary (P5) 8-bit PGM.
void write_gray_pgm(const std::filesystem::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels);
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};
GrayImage read_gray_pgm(const std::filesystem::path& path);

// Gray level of label l is round(l * 255 / phases); a JSON sidecar
// (same stem, ".json") maps levels back to labels.
std::uint8_t label_gray_level(Label label, int phases);
void write_label_pgm(const std::filesystem::path& path, const LabelImage& image, int phases);
// Uses the sidecar when present, otherwise gray levels are the labels.
LabelImage read_label_pgm(const std::filesystem::path& path);

// CSV: "L,M,p" header line, its values, then "phase,index,c0,...,c(p-1)" rows.
// Values use 17 significant digits so a write/read cycle is exact.
void write_library_csv(const std::filesystem::path& path, const PhaseLibrary& library);
PhaseLibrary read_library_csv(const std::filesystem::path& path);

// One spectrum per line, comma separated; blank lines and '#' comments skipped.
std::vector<Spectrum> read_spectra_csv(const std::filesystem::path& path);

// Directory with truth.pgm (+ truth.json), spectra.bin (row-major (y, x, bin)
// little-endian float64) and meta.json.
void save_object(const std::filesystem::path& dir, const SimulatedObject& object);
SimulatedObject load_object(const std::filesystem::path& dir);

}  // namespace eds::io
