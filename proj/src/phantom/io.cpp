#include "eds/phantom/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "eds/binary_io.hpp"

namespace eds::io {

namespace fs = std::filesystem;
using nlohmann::json;

void write_gray_pgm(const fs::path& path, int width, int height,
                    const std::vector<std::uint8_t>& pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw InputError("pgm: pixel count does not match dimensions");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("pgm: cannot open " + path.string() + " for writing");
  os << "P5\n" << width << " " << height << "\n255\n";
  os.write(reinterpret_cast<const char*>(pixels.data()),
           static_cast<std::streamsize>(pixels.size()));
  if (!os) throw InputError("pgm: write failed for " + path.string());
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string pgm_token(std::istream& is) {
  std::string tok;
  char c = 0;
  while (is.get(c)) {
    if (c == '#') {
      std::string skip;
      std::getline(is, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

int parse_int(const std::string& s, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw InputError(what + ": bad integer '" + s + "'");
  return v;
}

double parse_double(std::string_view s, const std::string& what) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw InputError(what + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                       : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path sidecar_path(const fs::path& pgm) {
  fs::path p = pgm;
  p.replace_extension(".json");
  return p;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace

GrayImage read_gray_pgm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("pgm: cannot open " + path.string());
  if (pgm_token(is) != "P5") throw InputError("pgm: " + path.string() + " is not binary P5");
  GrayImage img;
  img.width = parse_int(pgm_token(is), "pgm width");
  img.height = parse_int(pgm_token(is), "pgm height");
  const int maxval = parse_int(pgm_token(is), "pgm maxval");
  if (img.width <= 0 || img.height <= 0 || maxval != 255) {
    throw InputError("pgm: unsupported header in " + path.string());
  }
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  if (!is.read(reinterpret_cast<char*>(img.pixels.data()),
               static_cast<std::streamsize>(img.pixels.size()))) {
    throw InputError("pgm: truncated pixel data in " + path.string());
  }
  return img;
}

std::uint8_t label_gray_level(Label label, int phases) {
  if (phases <= 0) return label;
  return static_cast<std::uint8_t>(std::lround(255.0 * label / phases));
}

void write_label_pgm(const fs::path& path, const LabelImage& image, int phases) {
  if (image.max_label() > phases) throw InputError("label pgm: label exceeds phase count");
  std::vector<std::uint8_t> pixels(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) pixels[i] = label_gray_level(image[i], phases);
  write_gray_pgm(path, image.width(), image.height(), pixels);
  json side;
  side["phases"] = phases;
  json levels = json::array();
  for (int l = 0; l <= phases; ++l) {
    levels.push_back({{"level", label_gray_level(static_cast<Label>(l), phases)}, {"label", l}});
  }
  side["levels"] = levels;
  std::ofstream os(sidecar_path(path));
  if (!os) throw InputError("label pgm: cannot write sidecar for " + path.string());
  os << side.dump(2) << "\n";
}

LabelImage read_label_pgm(const fs::path& path) {
  const GrayImage gray = read_gray_pgm(path);
  std::vector<Label> labels(gray.pixels.begin(), gray.pixels.end());
  const fs::path side = sidecar_path(path);
  if (fs::exists(side)) {
    const json j = read_json(side);
    std::map<int, Label> to_label;
    for (const auto& entry : j.at("levels")) {
      to_label[entry.at("level").get<int>()] = static_cast<Label>(entry.at("label").get<int>());
    }
    for (auto& l : labels) {
      auto it = to_label.find(l);
      if (it == to_label.end()) {
        throw InputError("label pgm: gray level " + std::to_string(l) + " missing from sidecar");
      }
      l = it->second;
    }
  }
  return LabelImage(gray.width, gray.height, std::move(labels));
}

void write_library_csv(const fs::path& path, const PhaseLibrary& library) {
  std::ofstream os(path);
  if (!os) throw InputError("library csv: cannot open " + path.string());
  const std::size_t m = library.min_spectra_per_phase();
  os << "L,M,p\n" << library.phases() << "," << m << "," << library.bins() << "\n";
  for (int l = 1; l <= library.phases(); ++l) {
    const auto& spectra = library.phase(l);
    for (std::size_t i = 0; i < spectra.size(); ++i) {
      os << l << "," << i;
      for (double c : spectra[i].counts) os << "," << format_double(c);
      os << "\n";
    }
  }
  if (!os) throw InputError("library csv: write failed for " + path.string());
}

PhaseLibrary read_library_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("library csv: cannot open " + path.string());
  std::string line;
  if (!std::getline(is, line) || line.rfind("L,M,p", 0) != 0) {
    throw InputError("library csv: missing 'L,M,p' header in " + path.string());
  }
  if (!std::getline(is, line)) throw InputError("library csv: missing header values");
  const auto head = split_commas(line);
  if (head.size() != 3) throw InputError("library csv: header must have 3 values");
  const int phases = static_cast<int>(parse_double(head[0], "library csv L"));
  const auto bins = static_cast<std::size_t>(parse_double(head[2], "library csv p"));
  if (phases < 1 || phases > kMaxPhases) throw InputError("library csv: bad phase count");
  std::vector<std::vector<Spectrum>> per_phase(static_cast<std::size_t>(phases));
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    if (fields.size() != bins + 2) {
      throw InputError("library csv: row has " + std::to_string(fields.size()) +
                       " fields, expected " + std::to_string(bins + 2));
    }
    const int l = static_cast<int>(parse_double(fields[0], "library csv phase"));
    if (l < 1 || l > phases) throw InputError("library csv: phase out of range");
    Spectrum s(bins);
    for (std::size_t i = 0; i < bins; ++i) s.counts[i] = parse_double(fields[i + 2], "library csv");
    per_phase[static_cast<std::size_t>(l - 1)].push_back(std::move(s));
  }
  return PhaseLibrary(bins, std::move(per_phase));
}

std::vector<Spectrum> read_spectra_csv(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("spectra csv: cannot open " + path.string());
  std::vector<Spectrum> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    Spectrum s;
    for (auto field : split_commas(line)) s.counts.push_back(parse_double(field, "spectra csv"));
    if (!out.empty() && s.size() != out.front().size()) {
      throw InputError("spectra csv: rows have differing lengths");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_object(const fs::path& dir, const SimulatedObject& object) {
  fs::create_directories(dir);
  write_label_pgm(dir / "truth.pgm", object.truth(), object.phases());
  {
    std::ofstream os(dir / "spectra.bin", std::ios::binary);
    if (!os) throw InputError("object: cannot write spectra.bin");
    for (std::size_t i = 0; i < object.truth().size(); ++i) {
      binary::write_f64s(os, object.spectrum(i).counts);
    }
    if (!os) throw InputError("object: write failed for spectra.bin");
  }
  json meta;
  meta["format"] = "eds-simulated-object";
  meta["version"] = 1;
  meta["width"] = object.width();
  meta["height"] = object.height();
  meta["bins"] = object.bins();
  meta["phases"] = object.phases();
  meta["seed"] = object.seed();
  meta["base_truth_fingerprint"] = object.base_fingerprint();
  meta["spectra_layout"] = "row-major (y, x, bin) little-endian float64";
  std::ofstream os(dir / "meta.json");
  os << meta.dump(2) << "\n";
}

SimulatedObject load_object(const fs::path& dir) {
  const json meta = read_json(dir / "meta.json");
  if (meta.value("format", "") != "eds-simulated-object") {
    throw InputError("object: " + dir.string() + " is not a simulated object directory");
  }
  LabelImage truth = read_label_pgm(dir / "truth.pgm");
  const auto bins = meta.at("bins").get<std::size_t>();
  if (truth.width() != meta.at("width").get<int>() || truth.height() != meta.at("height").get<int>()) {
    throw InputError("object: truth.pgm dimensions disagree with meta.json");
  }
  return SimulatedObject::from_file(std::move(truth), bins, meta.at("phases").get<int>(),
                                    dir / "spectra.bin", meta.at("seed").get<std::uint64_t>(),
                                    meta.at("base_truth_fingerprint").get<std::uint64_t>());
}

}  // namespace eds::io
