#include "far/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>

namespace far {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageU8 load_png_file(std::FILE* f, const std::filesystem::path& path) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw Error("libpng info init failed");
  }
  std::vector<png_bytep> rows;
  ImageU8 img;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ConfigError("undecodable PNG: " + path.string());
  }
  png_init_io(png, f);
  png_read_info(png, info);

  png_set_expand(png);           // palette/gray/1-16bit -> 8-bit
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  img.width = int(png_get_image_width(png, info));
  img.height = int(png_get_image_height(png, info));
  if (png_get_channels(png, info) != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ConfigError("PNG did not normalize to RGB: " + path.string());
  }
  img.rgb.resize(std::size_t(img.width) * img.height * 3);
  rows.resize(std::size_t(img.height));
  for (int y = 0; y < img.height; ++y) {
    rows[std::size_t(y)] = img.rgb.data() + std::size_t(y) * img.width * 3;
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

ImageU8 load_ppm_file(std::FILE* f, const std::filesystem::path& path) {
  auto fail = [&](const char* why) -> ImageU8 {
    throw ConfigError(std::string("bad PPM (") + why + "): " + path.string());
  };
  auto next_token = [&]() -> long {
    int c;
    // skip whitespace and '#' comments
    for (;;) {
      c = std::fgetc(f);
      if (c == '#') {
        while (c != '\n' && c != EOF) c = std::fgetc(f);
      } else if (!std::isspace(c)) {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (c != EOF && std::isdigit(c)) {
      v = v * 10 + (c - '0');
      any = true;
      c = std::fgetc(f);
    }
    if (!any) fail("expected integer");
    return v;
  };

  char magic[2];
  if (std::fread(magic, 1, 2, f) != 2 || magic[0] != 'P' || magic[1] != '6') {
    fail("magic");
  }
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (w <= 0 || h <= 0 || maxval != 255) fail("header");

  ImageU8 img{int(w), int(h)};
  if (std::fread(img.rgb.data(), 1, img.rgb.size(), f) != img.rgb.size()) {
    fail("truncated pixel data");
  }
  return img;
}

}  // namespace

ImageU8 load_image(const std::filesystem::path& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw ConfigError("cannot open image: " + path.string());
  unsigned char sig[8] = {0};
  const std::size_t got = std::fread(sig, 1, 8, f.get());
  std::rewind(f.get());
  if (got >= 8 && png_sig_cmp(sig, 0, 8) == 0) {
    return load_png_file(f.get(), path);
  }
  if (got >= 2 && sig[0] == 'P' && sig[1] == '6') {
    return load_ppm_file(f.get(), path);
  }
  throw ConfigError("unsupported image format (want PNG or PPM): " +
                    path.string());
}

void save_png(const std::filesystem::path& path, const ImageU8& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw ConfigError("cannot open for writing: " + path.string());
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw Error("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error("libpng info init failed");
  }
  std::vector<png_bytep> rows(std::size_t(img.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("PNG write failed: " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    rows[std::size_t(y)] = const_cast<png_bytep>(
        img.rgb.data() + std::size_t(y) * img.width * 3);
  }
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void save_ppm(const std::filesystem::path& path, const ImageU8& img) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw ConfigError("cannot open for writing: " + path.string());
  std::fprintf(f.get(), "P6\n%d %d\n255\n", img.width, img.height);
  if (std::fwrite(img.rgb.data(), 1, img.rgb.size(), f.get()) !=
      img.rgb.size()) {
    throw Error("PPM write failed: " + path.string());
  }
}

Tensor tensor_from_image(const ImageU8& img) {
  Tensor t({1, 3, img.height, img.width});
  for (int c = 0; c < 3; ++c) {
    double* p = t.plane(0, c);
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        p[std::int64_t(y) * img.width + x] = img.at(y, x, c) / 255.0;
      }
    }
  }
  return t;
}

ImageU8 image_from_tensor(const Tensor& t) {
  if (t.n() != 1 || t.c() != 3) {
    throw ShapeError("image_from_tensor: want 1x3xHxW, got " +
                     t.shape().str());
  }
  ImageU8 img(t.w(), t.h());
  for (int c = 0; c < 3; ++c) {
    const double* p = t.plane(0, c);
    for (int y = 0; y < t.h(); ++y) {
      for (int x = 0; x < t.w(); ++x) {
        const double v = std::clamp(p[std::int64_t(y) * t.w() + x], 0.0, 1.0);
        img.at(y, x, c) = std::uint8_t(std::lround(v * 255.0));
      }
    }
  }
  return img;
}

Plane luma_bt601(const ImageU8& img) {
  Plane p(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      p.at(y, x) = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                   0.114 * img.at(y, x, 2);
    }
  }
  return p;
}

ImageU8 center_crop(const ImageU8& img, int size) {
  if (size <= 0 || (img.width == size && img.height == size)) return img;
  if (size > img.width || size > img.height) {
    throw ConfigError("center_crop: image " + std::to_string(img.width) + "x" +
                      std::to_string(img.height) + " smaller than crop " +
                      std::to_string(size));
  }
  const int x0 = (img.width - size) / 2;
  const int y0 = (img.height - size) / 2;
  ImageU8 out(size, size);
  for (int y = 0; y < size; ++y) {
    std::memcpy(out.rgb.data() + std::size_t(y) * size * 3,
                img.rgb.data() + (std::size_t(y0 + y) * img.width + x0) * 3,
                std::size_t(size) * 3);
  }
  return out;
}

namespace {

// Reflection index without edge repetition (PyTorch-style reflect).
int reflect(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i = ((i % period) + period) % period;
  return i < n ? i : period - i;
}

}  // namespace

Tensor reflect_pad_to_multiple(const Tensor& t, int multiple) {
  const int h = t.h();
  const int w = t.w();
  const int nh = (h + multiple - 1) / multiple * multiple;
  const int nw = (w + multiple - 1) / multiple * multiple;
  if (nh == h && nw == w) return t;
  Tensor out({t.n(), t.c(), nh, nw});
  for (int b = 0; b < t.n(); ++b) {
    for (int c = 0; c < t.c(); ++c) {
      const double* ip = t.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < nh; ++y) {
        const int sy = reflect(y, h);
        for (int x = 0; x < nw; ++x) {
          op[std::int64_t(y) * nw + x] =
              ip[std::int64_t(sy) * w + reflect(x, w)];
        }
      }
    }
  }
  return out;
}

Tensor crop_spatial(const Tensor& t, int height, int width) {
  if (height > t.h() || width > t.w()) {
    throw ShapeError("crop_spatial: crop larger than tensor");
  }
  if (height == t.h() && width == t.w()) return t;
  Tensor out({t.n(), t.c(), height, width});
  for (int b = 0; b < t.n(); ++b) {
    for (int c = 0; c < t.c(); ++c) {
      const double* ip = t.plane(b, c);
      double* op = out.plane(b, c);
      for (int y = 0; y < height; ++y) {
        std::memcpy(op + std::int64_t(y) * width, ip + std::int64_t(y) * t.w(),
                    std::size_t(width) * sizeof(double));
      }
    }
  }
  return out;
}

}  // namespace far
