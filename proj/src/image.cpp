#include "homing/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "homing/error.hpp"

namespace homing {

GrayImage::GrayImage(int rows, int cols, float fill) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw ShapeError("GrayImage: negative dimensions");
  pixels_.assign(static_cast<std::size_t>(rows) * cols, fill);
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.cols() << ' ' << image.rows() << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  auto px = image.pixels();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const float v = std::clamp(px[i], 0.0f, 1.0f);
    bytes[i] = static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

namespace {

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  if (next_token(in) != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  int cols = 0, rows = 0, maxval = 0;
  try {
    cols = std::stoi(next_token(in));
    rows = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw FormatError(path.string() + ": malformed PGM header");
  }
  if (cols <= 0 || rows <= 0 || maxval <= 0 || maxval > 255) {
    throw FormatError(path.string() + ": unsupported PGM dimensions or depth");
  }
  std::vector<unsigned char> bytes(static_cast<std::size_t>(rows) * cols);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw FormatError(path.string() + ": truncated PGM data");
  }
  GrayImage image(rows, cols);
  auto px = image.pixels();
  for (std::size_t i = 0; i < bytes.size(); ++i) px[i] = static_cast<float>(bytes[i]) / maxval;
  return image;
}

double mean_absolute_difference(const GrayImage& a, const GrayImage& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("mean_absolute_difference: image sizes differ");
  }
  if (a.empty()) return 0.0;
  double sum = 0.0;
  auto pa = a.pixels();
  auto pb = b.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) sum += std::abs(double(pa[i]) - double(pb[i]));
  return sum / static_cast<double>(pa.size());
}

}  // namespace homing
