#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "strokewave/error.hpp"
#include "strokewave/image.hpp"

namespace strokewave {

namespace {

using Bytes = std::vector<unsigned char>;

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image '" + path.string() + "'");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

double luma(unsigned r, unsigned g, unsigned b) {
  return std::clamp((0.299 * r + 0.587 * g + 0.114 * b) / 255.0, 0.0, 1.0);
}

Image from_channels(std::size_t w, std::size_t h, const unsigned char* px, int channels) {
  std::vector<double> data(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    const unsigned char* p = px + i * static_cast<std::size_t>(channels);
    data[i] = channels == 1 ? p[0] / 255.0 : luma(p[0], p[1], p[2]);
  }
  return Image(w, h, std::move(data));
}

// --- PGM (P5) ---------------------------------------------------------------

Image decode_pgm(const Bytes& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_uint = [&]() -> std::size_t {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw FormatError("malformed PGM header in '" + name + "'");
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw FormatError("PGM header value too large in '" + name + "'");
      ++pos;
    }
    return v;
  };

  const std::size_t w = read_uint();
  const std::size_t h = read_uint();
  const std::size_t maxval = read_uint();
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("malformed PGM header in '" + name + "'");
  }
  ++pos;  // exactly one whitespace byte before the raster
  if (w == 0 || h == 0) throw FormatError("zero-dimension image '" + name + "'");
  if (maxval == 0 || maxval > 255) {
    throw FormatError("only 8-bit PGM is supported ('" + name + "' has maxval " +
                      std::to_string(maxval) + ")");
  }
  if (bytes.size() - pos < w * h) throw FormatError("truncated PGM raster in '" + name + "'");

  std::vector<double> data(w * h);
  const double scale = 1.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < w * h; ++i) {
    data[i] = std::min(1.0, bytes[pos + i] * scale);
  }
  return Image(w, h, std::move(data));
}

// --- PNG --------------------------------------------------------------------

Image decode_png(const Bytes& bytes, const std::string& name) {
  png_image png;
  std::memset(&png, 0, sizeof(png));
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw FormatError("cannot decode PNG '" + name + "': " + png.message);
  }
  if (png.format & PNG_FORMAT_FLAG_LINEAR) {
    png_image_free(&png);
    throw FormatError("16-bit PNG is not supported ('" + name + "')");
  }
  const bool color = (png.format & PNG_FORMAT_FLAG_COLOR) != 0;
  png.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (png.width == 0 || png.height == 0) {
    png_image_free(&png);
    throw FormatError("zero-dimension image '" + name + "'");
  }
  Bytes raster(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raster.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    throw FormatError("cannot decode PNG '" + name + "': " + msg);
  }
  return from_channels(png.width, png.height, raster.data(), color ? 3 : 1);
}

// --- JPEG -------------------------------------------------------------------

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// No objects with destructors may be created between setjmp and the last
// libjpeg call; the raster buffer is allocated by the caller.
bool jpeg_decode_into(const Bytes& bytes, Bytes& raster, std::size_t& w, std::size_t& h,
                      int& channels, char* message) {
  jpeg_decompress_struct cinfo;
  JpegErrorManager err;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  err.message[0] = '\0';
  if (setjmp(err.jump)) {
    std::strncpy(message, err.message, JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  if (cinfo.jpeg_color_space == JCS_GRAYSCALE) {
    cinfo.out_color_space = JCS_GRAYSCALE;
  } else if (cinfo.jpeg_color_space == JCS_YCbCr || cinfo.jpeg_color_space == JCS_RGB) {
    cinfo.out_color_space = JCS_RGB;
  } else {
    std::strncpy(message, "unsupported JPEG color space", JMSG_LENGTH_MAX);
    jpeg_destroy_decompress(&cinfo);
    return false;
  }
  jpeg_start_decompress(&cinfo);
  w = cinfo.output_width;
  h = cinfo.output_height;
  channels = cinfo.output_components;
  raster.resize(w * h * static_cast<std::size_t>(channels));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = raster.data() + static_cast<std::size_t>(cinfo.output_scanline) * w *
                                       static_cast<std::size_t>(channels);
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Image decode_jpeg(const Bytes& bytes, const std::string& name) {
  Bytes raster;
  std::size_t w = 0;
  std::size_t h = 0;
  int channels = 0;
  char message[JMSG_LENGTH_MAX] = {};
  if (!jpeg_decode_into(bytes, raster, w, h, channels, message)) {
    throw FormatError("cannot decode JPEG '" + name + "': " + message);
  }
  if (w == 0 || h == 0) throw FormatError("zero-dimension image '" + name + "'");
  return from_channels(w, h, raster.data(), channels);
}

}  // namespace

Image load_image(const std::filesystem::path& path) {
  const Bytes bytes = read_file(path);
  const std::string name = path.string();
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, name);
  if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) {
    return decode_jpeg(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, name);
  throw FormatError("unsupported image format: '" + name + "'");
}

void save_pgm(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw InvalidArgument("cannot save an empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<char> raster(img.pixels().size());
  std::transform(img.pixels().begin(), img.pixels().end(), raster.begin(), [](double v) {
    return static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  });
  out.write(raster.data(), static_cast<std::streamsize>(raster.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace strokewave
