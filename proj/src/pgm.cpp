#include "fpdhf/pgm.hpp"

#include <algorithm>
#include <cctype>
#include <cfenv>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpdhf/error.hpp"

namespace fpdhf {

namespace {

[[noreturn]] void fail(const std::filesystem::path& path,
                       const std::string& what) {
  throw std::runtime_error(path.string() + ": " + what);
}

// Reads the next header token, skipping whitespace and '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

long parse_positive(const std::filesystem::path& path, const std::string& tok,
                    const char* field) {
  try {
    std::size_t used = 0;
    const long v = std::stol(tok, &used);
    if (used != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    fail(path, std::string("bad ") + field + " '" + tok + "'");
  }
}

}  // namespace

ImageGrid read_pgm(const std::filesystem::path& path, double x_max) {
  require(x_max > 0.0, "read_pgm: x_max must be positive");
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(path, "cannot open for reading");
  if (next_token(in) != "P5") fail(path, "not a binary PGM (P5) file");
  const long cols = parse_positive(path, next_token(in), "width");
  const long rows = parse_positive(path, next_token(in), "height");
  const long maxval = parse_positive(path, next_token(in), "maxval");
  if (maxval > 65535) fail(path, "maxval exceeds 65535");
  // next_token consumed exactly one whitespace byte after maxval.

  const std::size_t count = static_cast<std::size_t>(rows * cols);
  const std::size_t width = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(count * width);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    fail(path, "truncated pixel data");

  Vector px(static_cast<Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = width == 1 ? raw[i]
                                  : (static_cast<unsigned>(raw[2 * i]) << 8) |
                                        raw[2 * i + 1];
    if (v > static_cast<unsigned>(maxval)) fail(path, "sample exceeds maxval");
    px[static_cast<Index>(i)] = x_max * static_cast<double>(v) /
                                static_cast<double>(maxval);
  }
  return ImageGrid(rows, cols, std::move(px));
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& img,
               double x_max, int maxval) {
  require(x_max > 0.0, "write_pgm: x_max must be positive");
  require(maxval >= 1 && maxval <= 65535, "write_pgm: maxval out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  out << "P5\n" << img.cols() << ' ' << img.rows() << '\n' << maxval << '\n';

  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  std::vector<unsigned char> raw;
  raw.reserve(static_cast<std::size_t>(img.size()) * (maxval > 255 ? 2 : 1));
  for (Index i = 0; i < img.size(); ++i) {
    double v = img.pixels()[i] / x_max * maxval;
    if (!std::isfinite(v)) v = 0.0;
    v = std::clamp(v, 0.0, static_cast<double>(maxval));
    const auto q = static_cast<unsigned>(std::nearbyint(v));
    if (maxval > 255) raw.push_back(static_cast<unsigned char>(q >> 8));
    raw.push_back(static_cast<unsigned char>(q & 0xff));
  }
  std::fesetround(saved);
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) fail(path, "write failed");
}

}  // namespace fpdhf
