#include "leaflite/image.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <csetjmp>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

// jpeglib.h relies on size_t and FILE being declared first.
#include <jpeglib.h>
#include <png.h>

namespace leaflite {
namespace {

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw FormatError("undecodable PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(img.width), static_cast<int>(img.height));
  if (!png_image_finish_read(&img, nullptr, out.pixels().data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("undecodable PNG " + path.string() + ": " + msg);
  }
  return out;
}

struct JpegErrorManager {
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

// Runs in its own frame so the longjmp never crosses a live C++ object.
bool decode_jpeg_raw(const std::vector<std::uint8_t>& bytes, std::vector<std::uint8_t>* pixels,
                     int* width, int* height, char* message) {
  jpeg_decompress_struct cinfo{};
  JpegErrorManager err{};
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_error_exit;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    std::copy(std::begin(err.message), std::end(err.message), message);
    return false;
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  *width = static_cast<int>(cinfo.output_width);
  *height = static_cast<int>(cinfo.output_height);
  pixels->resize(static_cast<std::size_t>(*width) * static_cast<std::size_t>(*height) * 3);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = pixels->data() + static_cast<std::size_t>(cinfo.output_scanline) *
                                        static_cast<std::size_t>(*width) * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

Image decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::vector<std::uint8_t> pixels;
  int width = 0, height = 0;
  char message[JMSG_LENGTH_MAX] = {};
  if (!decode_jpeg_raw(bytes, &pixels, &width, &height, message)) {
    throw FormatError("undecodable JPEG " + path.string() + ": " + message);
  }
  return Image(width, height, std::move(pixels));
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  static constexpr std::array<std::uint8_t, 8> kPngMagic = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  if (bytes.size() >= kPngMagic.size() && std::equal(kPngMagic.begin(), kPngMagic.end(), bytes.begin())) {
    return decode_png(bytes, path);
  }
  if (bytes.size() >= 3 && bytes[0] == 0xff && bytes[1] == 0xd8 && bytes[2] == 0xff) {
    return decode_jpeg(bytes, path);
  }
  throw FormatError("not a PNG or JPEG file: " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& img) {
  png_image meta{};
  meta.version = PNG_IMAGE_VERSION;
  meta.width = static_cast<png_uint_32>(img.width());
  meta.height = static_cast<png_uint_32>(img.height());
  meta.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&meta, nullptr, &size, 0, img.pixels().data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + meta.message);
  }
  std::vector<std::uint8_t> buffer(size);
  if (!png_image_write_to_memory(&meta, buffer.data(), &size, 0, img.pixels().data(), 0, nullptr)) {
    throw FormatError(std::string("PNG encode failed: ") + meta.message);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(buffer.data()), static_cast<std::streamsize>(size));
  if (!out) throw IoError("short write to " + path.string());
}

bool has_image_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

}  // namespace leaflite
