// SPDX-License-Identifier: Apache-2.0
#include "lowlight/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include "json.hpp"

#include "lowlight/errors.hpp"

namespace lowlight {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Reads the next header token of a PNM file, skipping comments.
std::string pnm_token(std::istream& in) {
  std::string token;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

int pnm_int(std::istream& in, const fs::path& path) {
  const std::string t = pnm_token(in);
  try {
    std::size_t used = 0;
    const int v = std::stoi(t, &used);
    if (used != t.size() || v < 0) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PNM header field '" + t + "'");
  }
}

std::uint8_t to_byte(float v) {
  const double c = std::clamp(double(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

void check_rgb(const ImagePlane& img, const fs::path& path) {
  if (img.channels != 3) throw ShapeError(path.string() + ": only 3-channel images can be written");
  for (float v : img.data)
    if (!std::isfinite(v)) throw NumericError(path.string() + ": image contains non-finite values");
}

void write_png(const fs::path& path, const ImagePlane& img) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), std::fclose);
  if (!file) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  std::vector<png_bytep> rows(img.height);
  for (int y = 0; y < img.height; ++y) rows[y] = bytes.data() + std::size_t(y) * img.width * 3;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // Fixed settings and no timestamp so equal images give equal bytes.
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImagePlane read_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw IoError(path.string() + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> bytes(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr)) {
    png_image_free(&image);
    throw IoError(path.string() + ": " + image.message);
  }
  ImagePlane img = ImagePlane::zeros(image.width, image.height, 3, ColorState::SRGB);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = bytes[i] / 255.0f;
  return img;
}

void write_ppm(const fs::path& path, const ImagePlane& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  std::vector<std::uint8_t> bytes(img.data.size());
  std::transform(img.data.begin(), img.data.end(), bytes.begin(), to_byte);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

ImagePlane read_ppm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  if (pnm_token(in) != "P6") throw IoError(path.string() + ": not a binary PPM (P6) file");
  const int w = pnm_int(in, path), h = pnm_int(in, path), maxval = pnm_int(in, path);
  if (w < 1 || h < 1 || maxval < 1 || maxval > 255) throw IoError(path.string() + ": unsupported PPM header");
  std::vector<std::uint8_t> bytes(std::size_t(w) * h * 3);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError(path.string() + ": truncated PPM data");
  ImagePlane img = ImagePlane::zeros(w, h, 3, ColorState::SRGB);
  for (std::size_t i = 0; i < bytes.size(); ++i) img.data[i] = static_cast<float>(bytes[i]) / maxval;
  return img;
}

}  // namespace

fs::path metadata_path(const fs::path& raw_path) {
  fs::path p = raw_path;
  p.replace_extension(".meta.json");
  return p;
}

RawFrame read_raw(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open raw file " + path.string());
  if (pnm_token(in) != "P5") throw IoError(path.string() + ": not a binary PGM (P5) file");
  RawFrame frame;
  frame.width = pnm_int(in, path);
  frame.height = pnm_int(in, path);
  const int maxval = pnm_int(in, path);
  if (frame.width < 1 || frame.height < 1 || maxval < 1 || maxval > 65535)
    throw IoError(path.string() + ": unsupported PGM header");
  const std::size_t count = std::size_t(frame.width) * frame.height;
  const int bytes_per_sample = maxval > 255 ? 2 : 1;
  std::vector<std::uint8_t> bytes(count * bytes_per_sample);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) throw IoError(path.string() + ": truncated PGM data");
  frame.mosaic.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    frame.mosaic[i] = bytes_per_sample == 2 ? static_cast<std::uint16_t>((bytes[2 * i] << 8) | bytes[2 * i + 1]) : bytes[i];

  const fs::path meta_path = metadata_path(path);
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw MissingMetadataError("raw file " + path.string() + " has no metadata sidecar " + meta_path.string());
  try {
    const json meta = json::parse(meta_in);
    frame.cfa = parse_cfa_pattern(meta.at("cfa_pattern").get<std::string>());
    frame.black_level = meta.at("black_level").get<double>();
    frame.white_level = meta.at("white_level").get<double>();
    frame.wb_gains = meta.at("wb_gains").get<std::array<double, 3>>();
    frame.ccm = meta.at("ccm").get<std::array<double, 9>>();
    frame.exposure_ratio = meta.at("exposure_ratio").get<double>();
  } catch (const json::exception& e) {
    throw MissingMetadataError(meta_path.string() + ": invalid metadata (" + e.what() + ")");
  }
  frame.validate();
  return frame;
}

void write_raw(const fs::path& path, const RawFrame& frame) {
  frame.validate();
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P5\n" << frame.width << ' ' << frame.height << "\n65535\n";
    std::vector<std::uint8_t> bytes(frame.mosaic.size() * 2);
    for (std::size_t i = 0; i < frame.mosaic.size(); ++i) {
      bytes[2 * i] = static_cast<std::uint8_t>(frame.mosaic[i] >> 8);
      bytes[2 * i + 1] = static_cast<std::uint8_t>(frame.mosaic[i] & 0xff);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + path.string());
  }
  json meta = {{"cfa_pattern", to_string(frame.cfa)}, {"black_level", frame.black_level},
               {"white_level", frame.white_level}, {"wb_gains", frame.wb_gains},
               {"ccm", frame.ccm},                  {"exposure_ratio", frame.exposure_ratio}};
  std::ofstream meta_out(metadata_path(path));
  if (!meta_out) throw IoError("cannot write metadata for " + path.string());
  meta_out << meta.dump(2) << '\n';
}

void write_image(const fs::path& path, const ImagePlane& img) {
  check_rgb(img, path);
  const std::string ext = lower_extension(path);
  if (ext == ".png")
    write_png(path, img);
  else if (ext == ".ppm")
    write_ppm(path, img);
  else
    throw ConfigError("unsupported image extension '" + ext + "' (use .png or .ppm)");
}

ImagePlane read_image(const fs::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") return read_png(path);
  if (ext == ".ppm") return read_ppm(path);
  throw ConfigError("unsupported image extension '" + ext + "' (use .png or .ppm)");
}

}  // namespace lowlight
