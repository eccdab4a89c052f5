#include "ssqp/image.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ssqp {
namespace {

constexpr double kLumaR = 0.299;
constexpr double kLumaG = 0.587;
constexpr double kLumaB = 0.114;

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class PgmReader {
 public:
  PgmReader(const std::vector<unsigned char>& bytes, std::string name) : bytes_(bytes), name_(std::move(name)) {}

  GrayImage read() {
    const bool binary = bytes_[1] == '5';
    pos_ = 2;
    const long width = next_int();
    const long height = next_int();
    const long maxval = next_int();
    if (width < 1 || height < 1) throw FormatError(name_ + ": invalid PGM dimensions");
    if (maxval < 1 || maxval > 255) {
      throw FormatError(name_ + ": unsupported PGM maxval " + std::to_string(maxval) + " (only 8-bit is supported)");
    }
    const double scale = 255.0 / static_cast<double>(maxval);
    GrayImage::Matrix px(height, width);
    const auto count = static_cast<std::size_t>(width * height);
    if (binary) {
      // Exactly one whitespace byte separates the header from the raster.
      ++pos_;
      if (pos_ + count > bytes_.size()) throw IoError(name_ + ": truncated PGM raster");
      for (std::size_t i = 0; i < count; ++i) px.data()[i] = sample(bytes_[pos_ + i], maxval, scale);
    } else {
      for (std::size_t i = 0; i < count; ++i) px.data()[i] = sample(next_int(), maxval, scale);
    }
    return GrayImage(std::move(px));
  }

 private:
  double sample(long v, long maxval, double scale) const {
    if (v < 0 || v > maxval) throw FormatError(name_ + ": PGM sample out of range");
    return maxval == 255 ? static_cast<double>(v) : static_cast<double>(v) * scale;
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long next_int() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw IoError(name_ + ": truncated PGM");
    if (!std::isdigit(bytes_[pos_])) throw FormatError(name_ + ": malformed PGM token");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_] - '0');
      if (v > 1'000'000'000) throw FormatError(name_ + ": PGM value overflow");
      ++pos_;
    }
    return v;
  }

  const std::vector<unsigned char>& bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

GrayImage read_png(const std::vector<unsigned char>& bytes, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw FormatError(name + ": " + image.message);
  }
  if (image.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&image);
    throw FormatError(name + ": unsupported PNG bit depth (only 8-bit is supported)");
  }
  const bool color = image.format & PNG_FORMAT_FLAG_COLOR;
  const bool alpha = image.format & PNG_FORMAT_FLAG_ALPHA;
  image.format = color ? (alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB) : (alpha ? PNG_FORMAT_GA : PNG_FORMAT_GRAY);
  const int channels = PNG_IMAGE_SAMPLE_CHANNELS(image.format);
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw IoError(name + ": " + msg);
  }
  GrayImage::Matrix px(image.height, image.width);
  for (Eigen::Index i = 0; i < px.size(); ++i) {
    const png_byte* p = buffer.data() + i * channels;
    px.data()[i] = color ? kLumaR * p[0] + kLumaG * p[1] + kLumaB * p[2] : static_cast<double>(p[0]);
  }
  return GrayImage::clamped(px);
}

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  const std::string name = path.string();
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5')) {
    return PgmReader(bytes, name).read();
  }
  static constexpr std::array<unsigned char, 8> kPngMagic{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  if (bytes.size() >= kPngMagic.size() && std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    return read_png(bytes, name);
  }
  if (bytes.size() < 2) throw IoError(name + ": file too short to be an image");
  throw FormatError(name + ": unsupported image format");
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  for (Eigen::Index i = 0; i < img.pixels().size(); ++i) {
    const double v = std::clamp(std::round(img.pixels().data()[i]), 0.0, 255.0);
    out.put(static_cast<char>(static_cast<unsigned char>(v)));
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace ssqp
