#include "afe/raster.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "afe/resample.hpp"

namespace afe {
namespace {

struct PnmHeader {
  char kind = 0;  // '5' or '6'
  std::size_t width = 0;
  std::size_t height = 0;
  unsigned maxval = 0;
};

// Reads the next whitespace-delimited header token, skipping '#' comments.
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

std::size_t parse_extent(const std::string& tok, const std::filesystem::path& path,
                         const char* what) {
  try {
    std::size_t pos = 0;
    const unsigned long v = std::stoul(tok, &pos);
    if (pos != tok.size() || v == 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": bad PNM " + what + " '" + tok + "'");
  }
}

PnmHeader read_header(std::istream& in, const std::filesystem::path& path) {
  PnmHeader h;
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P6") {
    throw IoError(path.string() + ": unsupported raster (expected binary P5/P6)");
  }
  h.kind = magic[1];
  h.width = parse_extent(next_token(in), path, "width");
  h.height = parse_extent(next_token(in), path, "height");
  h.maxval = static_cast<unsigned>(parse_extent(next_token(in), path, "maxval"));
  if (h.maxval != 255) {
    throw IoError(path.string() + ": only maxval 255 is supported");
  }
  return h;
}

void write_bytes(const std::filesystem::path& path, const std::string& header,
                 const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << header;
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

}  // namespace

std::uint8_t to_byte(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

Tensor Image::to_planar() const {
  Tensor t({channels, height, width});
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t h = 0; h < height; ++h) {
      for (std::size_t w = 0; w < width; ++w) t.at(c, h, w) = at(h, w, c);
    }
  }
  return t;
}

Image Image::from_planar(const Tensor& t) {
  Image img{t.height(), t.width(), t.channels(),
            std::vector<float>(t.size())};
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t h = 0; h < img.height; ++h) {
      for (std::size_t w = 0; w < img.width; ++w) img.at(h, w, c) = t.at(c, h, w);
    }
  }
  return img;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), 1));
}

Image read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raster " + path.string());
  const PnmHeader h = read_header(in, path);
  Image img;
  img.height = h.height;
  img.width = h.width;
  img.channels = h.kind == '5' ? 1 : 3;
  const std::size_t n = img.height * img.width * img.channels;
  std::vector<std::uint8_t> bytes(n);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw IoError(path.string() + ": truncated raster payload");
  }
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) img.pixels[i] = static_cast<float>(bytes[i]) / 255.0f;
  return img;
}

void write_pnm(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidArgument("PNM output supports 1 or 3 channels");
  }
  std::ostringstream header;
  header << (image.channels == 1 ? "P5" : "P6") << "\n"
         << image.width << " " << image.height << "\n255\n";
  std::vector<std::uint8_t> bytes(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), bytes.begin(), to_byte);
  write_bytes(path, header.str(), bytes);
}

Mask read_mask(const std::filesystem::path& path) {
  const Image img = read_pnm(path);
  Mask m{img.height, img.width, std::vector<std::uint8_t>(img.height * img.width)};
  for (std::size_t h = 0; h < img.height; ++h) {
    for (std::size_t w = 0; w < img.width; ++w) {
      m.at(h, w) = img.at(h, w, 0) >= 0.5f ? 1 : 0;
    }
  }
  return m;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  std::ostringstream header;
  header << "P5\n" << mask.width << " " << mask.height << "\n255\n";
  std::vector<std::uint8_t> bytes(mask.values.size());
  std::transform(mask.values.begin(), mask.values.end(), bytes.begin(),
                 [](std::uint8_t v) -> std::uint8_t { return v ? 255 : 0; });
  write_bytes(path, header.str(), bytes);
}

void write_heat_preview(const std::filesystem::path& path, const ScoreMap& map) {
  const auto [lo, hi] = std::minmax_element(map.values().begin(), map.values().end());
  const float range = *hi - *lo;
  std::ostringstream header;
  header << "P5\n" << map.width() << " " << map.height() << "\n255\n";
  std::vector<std::uint8_t> bytes(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    const float v = range > 0.0f ? (map.values()[i] - *lo) / range : 0.0f;
    bytes[i] = to_byte(v);
  }
  write_bytes(path, header.str(), bytes);
}

Image resize_image(const Image& image, std::size_t height, std::size_t width) {
  if (image.height == height && image.width == width) return image;
  return Image::from_planar(bilinear_resample(image.to_planar(), height, width));
}

}  // namespace afe
