// Minimal JPEG encode/decode helper driven by the experiment harness through
// its command templates. Reads PNG or PPM, writes baseline JPEG via libjpeg
// with selectable 4:2:0 / 4:4:4 chroma subsampling.
//
//   jpegcodec encode <input.png|ppm> <output.jpg> <quality> [420|444]
//   jpegcodec decode <input.jpg> <output.png|ppm>

#include <cstddef>
#include <cstdio>

#include <jpeglib.h>

#include <csetjmp>
#include <cstring>
#include <string>
#include <vector>

#include "far/image.hpp"

namespace {

struct JpegErrorMgr {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
  (*cinfo->err->output_message)(cinfo);
  std::longjmp(err->jump, 1);
}

int encode(const std::string& in_path, const std::string& out_path,
           int quality, bool chroma420) {
  far::ImageU8 img = far::load_image(in_path);

  std::FILE* out = std::fopen(out_path.c_str(), "wb");
  if (!out) {
    std::fprintf(stderr, "jpegcodec: cannot open %s\n", out_path.c_str());
    return 1;
  }

  jpeg_compress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::fclose(out);
    return 1;
  }
  jpeg_create_compress(&cinfo);
  jpeg_stdio_dest(&cinfo, out);
  cinfo.image_width = JDIMENSION(img.width);
  cinfo.image_height = JDIMENSION(img.height);
  cinfo.input_components = 3;
  cinfo.in_color_space = JCS_RGB;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, quality, TRUE);
  if (chroma420) {
    cinfo.comp_info[0].h_samp_factor = 2;
    cinfo.comp_info[0].v_samp_factor = 2;
  } else {
    cinfo.comp_info[0].h_samp_factor = 1;
    cinfo.comp_info[0].v_samp_factor = 1;
  }
  cinfo.comp_info[1].h_samp_factor = 1;
  cinfo.comp_info[1].v_samp_factor = 1;
  cinfo.comp_info[2].h_samp_factor = 1;
  cinfo.comp_info[2].v_samp_factor = 1;

  jpeg_start_compress(&cinfo, TRUE);
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = img.rgb.data() + std::size_t(cinfo.next_scanline) *
                                        img.width * 3;
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  std::fclose(out);
  return 0;
}

int decode(const std::string& in_path, const std::string& out_path) {
  std::FILE* in = std::fopen(in_path.c_str(), "rb");
  if (!in) {
    std::fprintf(stderr, "jpegcodec: cannot open %s\n", in_path.c_str());
    return 1;
  }

  jpeg_decompress_struct cinfo;
  JpegErrorMgr jerr;
  cinfo.err = jpeg_std_error(&jerr.pub);
  jerr.pub.error_exit = jpeg_error_exit;
  if (setjmp(jerr.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(in);
    return 1;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, in);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);

  far::ImageU8 img(int(cinfo.output_width), int(cinfo.output_height));
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.rgb.data() + std::size_t(cinfo.output_scanline) *
                                        img.width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(in);

  if (out_path.size() >= 4 &&
      out_path.compare(out_path.size() - 4, 4, ".ppm") == 0) {
    far::save_ppm(out_path, img);
  } else {
    far::save_png(out_path, img);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const std::string mode = argc > 1 ? argv[1] : "";
    if (mode == "encode" && (argc == 5 || argc == 6)) {
      const int quality = std::atoi(argv[4]);
      if (quality < 1 || quality > 100) {
        std::fprintf(stderr, "jpegcodec: quality must be in [1, 100]\n");
        return 1;
      }
      const bool chroma420 = argc < 6 || std::strcmp(argv[5], "444") != 0;
      return encode(argv[2], argv[3], quality, chroma420);
    }
    if (mode == "decode" && argc == 4) {
      return decode(argv[2], argv[3]);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "jpegcodec: %s\n", e.what());
    return 1;
  }
  std::fprintf(stderr,
               "usage:\n"
               "  jpegcodec encode <in.png|ppm> <out.jpg> <quality 1-100> "
               "[420|444]\n"
               "  jpegcodec decode <in.jpg> <out.png|ppm>\n");
  return 2;
}
