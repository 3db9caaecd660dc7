#include "flowsub/io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace flowsub::io {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return std::move(buffer).str();
}

// Byte-order helpers; files are little-endian unless a PFM header says
// otherwise.
void put_u32le(std::string& out, std::uint32_t value) {
  char bytes[4];
  bytes[0] = static_cast<char>(value & 0xff);
  bytes[1] = static_cast<char>((value >> 8) & 0xff);
  bytes[2] = static_cast<char>((value >> 16) & 0xff);
  bytes[3] = static_cast<char>((value >> 24) & 0xff);
  out.append(bytes, 4);
}

std::uint32_t get_u32le(const std::string& in, size_t offset) {
  const auto b = [&](size_t i) { return static_cast<std::uint32_t>(
      static_cast<unsigned char>(in[offset + i])); };
  return b(0) | (b(1) << 8) | (b(2) << 16) | (b(3) << 24);
}

void put_f32le(std::string& out, float value) {
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  put_u32le(out, bits);
}

float get_f32le(const std::string& in, size_t offset) {
  const std::uint32_t bits = get_u32le(in, offset);
  float value;
  std::memcpy(&value, &bits, 4);
  return value;
}

float get_f32be(const std::string& in, size_t offset) {
  const auto b = [&](size_t i) { return static_cast<std::uint32_t>(
      static_cast<unsigned char>(in[offset + i])); };
  const std::uint32_t bits = (b(0) << 24) | (b(1) << 16) | (b(2) << 8) | b(3);
  float value;
  std::memcpy(&value, &bits, 4);
  return value;
}

void require_payload(const std::string& bytes, size_t offset, size_t need, const char* what) {
  if (bytes.size() < offset + need) {
    throw TruncatedPayload(std::string(what) + ": expected " + std::to_string(offset + need) +
                           " bytes, file has " + std::to_string(bytes.size()));
  }
}

}  // namespace

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot open " + tmp.string() + " for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw IoError("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

FlowField read_flo(const fs::path& path) {
  const std::string bytes = read_file(path);
  require_payload(bytes, 0, 12, "flo header");
  if (get_f32le(bytes, 0) != kFloMagic) {
    throw BadMagic("bad flo magic in " + path.string());
  }
  const auto width = static_cast<std::int32_t>(get_u32le(bytes, 4));
  const auto height = static_cast<std::int32_t>(get_u32le(bytes, 8));
  if (width < 1 || height < 1 || width > kMaxFloDimension || height > kMaxFloDimension) {
    throw DimensionOverflow("flo dimensions " + std::to_string(width) + "x" +
                            std::to_string(height) + " out of range in " + path.string());
  }
  const ImageShape shape{height, width};
  const size_t count = static_cast<size_t>(shape.flat_size());
  require_payload(bytes, 12, count * 4, "flo payload");

  Eigen::VectorXd data(shape.flat_size());
  for (size_t i = 0; i < count; ++i) {
    data[static_cast<Eigen::Index>(i)] = get_f32le(bytes, 12 + 4 * i);
  }
  return FlowField(shape, std::move(data));
}

void write_flo(const fs::path& path, const FlowField& flow) {
  require_valid(flow.shape);
  if (flow.shape.width > kMaxFloDimension || flow.shape.height > kMaxFloDimension) {
    throw DimensionOverflow("flo dimensions exceed " + std::to_string(kMaxFloDimension));
  }
  std::string bytes;
  bytes.reserve(12 + static_cast<size_t>(flow.shape.flat_size()) * 4);
  put_f32le(bytes, kFloMagic);
  put_u32le(bytes, static_cast<std::uint32_t>(flow.shape.width));
  put_u32le(bytes, static_cast<std::uint32_t>(flow.shape.height));
  for (Eigen::Index i = 0; i < flow.data.size(); ++i) {
    put_f32le(bytes, static_cast<float>(flow.data[i]));
  }
  write_file_atomic(path, bytes);
}

namespace {

// PFM header tokens are whitespace-separated; comments are not part of the
// format.
std::string next_token(const std::string& bytes, size_t& pos) {
  while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  const size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) {
    throw TruncatedPayload("unexpected end of header");
  }
  return bytes.substr(start, pos - start);
}

}  // namespace

ScalarField read_pfm(const fs::path& path) {
  const std::string bytes = read_file(path);
  size_t pos = 0;
  const std::string magic = next_token(bytes, pos);
  if (magic == "PF") {
    throw IoError("color PFM not supported: " + path.string());
  }
  if (magic != "Pf") {
    throw BadMagic("bad PFM magic in " + path.string());
  }
  int width = 0, height = 0;
  double scale = 0.0;
  try {
    width = std::stoi(next_token(bytes, pos));
    height = std::stoi(next_token(bytes, pos));
    scale = std::stod(next_token(bytes, pos));
  } catch (const std::logic_error&) {
    throw IoError("malformed PFM header in " + path.string());
  }
  if (width < 1 || height < 1) {
    throw DimensionOverflow("PFM dimensions out of range in " + path.string());
  }
  if (scale == 0.0) {
    throw IoError("PFM scale must be nonzero in " + path.string());
  }
  ++pos;  // single whitespace byte after the scale token
  const ImageShape shape{height, width};
  const size_t count = static_cast<size_t>(shape.pixel_count());
  require_payload(bytes, pos, count * 4, "PFM payload");

  const bool little_endian = scale < 0.0;
  Eigen::VectorXd values(shape.pixel_count());
  // PFM stores rows bottom-up.
  for (int r = 0; r < height; ++r) {
    const int file_row = height - 1 - r;
    for (int c = 0; c < width; ++c) {
      const size_t offset = pos + 4 * (static_cast<size_t>(file_row) * width + c);
      values[r * width + c] = little_endian ? get_f32le(bytes, offset) : get_f32be(bytes, offset);
    }
  }
  return ScalarField(shape, std::move(values));
}

void write_pfm(const fs::path& path, const ScalarField& field) {
  require_valid(field.shape);
  std::string bytes = "Pf\n" + std::to_string(field.shape.width) + " " +
                      std::to_string(field.shape.height) + "\n-1.0\n";
  for (int r = field.shape.height - 1; r >= 0; --r) {
    for (int c = 0; c < field.shape.width; ++c) {
      put_f32le(bytes, static_cast<float>(field.at(r, c)));
    }
  }
  write_file_atomic(path, bytes);
}

GrayImage read_pgm(const fs::path& path) {
  const std::string bytes = read_file(path);
  size_t pos = 0;
  // PGM headers may contain '#' comment lines between tokens.
  const auto token = [&]() {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
    const size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) {
      throw TruncatedPayload("unexpected end of PGM header");
    }
    return bytes.substr(start, pos - start);
  };

  if (token() != "P5") {
    throw BadMagic("bad PGM magic in " + path.string());
  }
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(token());
    height = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw IoError("malformed PGM header in " + path.string());
  }
  if (width < 1 || height < 1) {
    throw DimensionOverflow("PGM dimensions out of range in " + path.string());
  }
  if (maxval < 1 || maxval > 255) {
    throw IoError("only 8-bit PGM supported: " + path.string());
  }
  ++pos;  // single whitespace after maxval
  const size_t count = static_cast<size_t>(width) * height;
  require_payload(bytes, pos, count, "PGM payload");

  GrayImage image;
  image.shape = ImageShape{height, width};
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
  return image;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  require_valid(image.shape);
  if (image.pixels.size() != static_cast<size_t>(image.shape.pixel_count())) {
    throw std::invalid_argument("write_pgm: pixel count mismatch");
  }
  std::string bytes = "P5\n" + std::to_string(image.shape.width) + " " +
                      std::to_string(image.shape.height) + "\n255\n";
  bytes.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  write_file_atomic(path, bytes);
}

ObjectMask read_mask(const fs::path& path) {
  const GrayImage image = read_pgm(path);
  Eigen::VectorXd values(image.shape.pixel_count());
  for (int p = 0; p < image.shape.pixel_count(); ++p) {
    values[p] = image.pixels[static_cast<size_t>(p)] != 0 ? 1.0 : 0.0;
  }
  return ObjectMask(image.shape, std::move(values));
}

void write_mask(const fs::path& path, const ObjectMask& mask) {
  GrayImage image;
  image.shape = mask.shape;
  image.pixels.resize(static_cast<size_t>(mask.shape.pixel_count()));
  for (int p = 0; p < mask.shape.pixel_count(); ++p) {
    image.pixels[static_cast<size_t>(p)] = mask.values[p] != 0.0 ? 255 : 0;
  }
  write_pgm(path, image);
}

namespace {

void hsv_to_rgb(double h, double s, double v, std::uint8_t rgb[3]) {
  // h in [0, 360), s and v in [0, 1]
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0.0, g = 0.0, b = 0.0;
  if (hp < 1.0) {
    r = c; g = x;
  } else if (hp < 2.0) {
    r = x; g = c;
  } else if (hp < 3.0) {
    g = c; b = x;
  } else if (hp < 4.0) {
    g = x; b = c;
  } else if (hp < 5.0) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  const double m = v - c;
  rgb[0] = static_cast<std::uint8_t>(std::lround(255.0 * (r + m)));
  rgb[1] = static_cast<std::uint8_t>(std::lround(255.0 * (g + m)));
  rgb[2] = static_cast<std::uint8_t>(std::lround(255.0 * (b + m)));
}

}  // namespace

RgbImage colorize_flow(const FlowField& flow, std::optional<double> max_magnitude) {
  double max_mag = 0.0;
  if (max_magnitude) {
    if (!(*max_magnitude > 0.0)) {
      throw std::invalid_argument("colorize_flow: max magnitude must be positive");
    }
    max_mag = *max_magnitude;
  } else {
    for (int p = 0; p < flow.shape.pixel_count(); ++p) {
      max_mag = std::max(max_mag, std::hypot(flow.data[2 * p], flow.data[2 * p + 1]));
    }
    if (max_mag == 0.0) max_mag = 1.0;
  }

  RgbImage image;
  image.shape = flow.shape;
  image.pixels.resize(static_cast<size_t>(flow.shape.pixel_count()) * 3);
  for (int p = 0; p < flow.shape.pixel_count(); ++p) {
    const double du = flow.data[2 * p];
    const double dv = flow.data[2 * p + 1];
    double angle = std::atan2(dv, du) * 180.0 / M_PI;
    if (angle < 0.0) angle += 360.0;
    if (angle >= 360.0) angle = 0.0;
    const double saturation = std::min(1.0, std::hypot(du, dv) / max_mag);
    hsv_to_rgb(angle, saturation, 1.0, &image.pixels[static_cast<size_t>(p) * 3]);
  }
  return image;
}

void write_png(const fs::path& path, const RgbImage& image) {
  require_valid(image.shape);
  if (image.pixels.size() != static_cast<size_t>(image.shape.pixel_count()) * 3) {
    throw std::invalid_argument("write_png: pixel count mismatch");
  }

  const int width = image.shape.width;
  const int height = image.shape.height;

  // Filter byte 0 before each scanline, then one zlib stream in one IDAT.
  std::string raw;
  raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
  for (int r = 0; r < height; ++r) {
    raw.push_back('\0');
    raw.append(reinterpret_cast<const char*>(&image.pixels[static_cast<size_t>(r) * width * 3]),
               static_cast<size_t>(width) * 3);
  }
  uLongf compressed_size = compressBound(static_cast<uLong>(raw.size()));
  std::string compressed(compressed_size, '\0');
  if (compress2(reinterpret_cast<Bytef*>(compressed.data()), &compressed_size,
                reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                Z_BEST_SPEED) != Z_OK) {
    throw IoError("PNG compression failed for " + path.string());
  }
  compressed.resize(compressed_size);

  std::string bytes("\x89PNG\r\n\x1a\n", 8);
  const auto put_u32be = [](std::string& out, std::uint32_t value) {
    out.push_back(static_cast<char>((value >> 24) & 0xff));
    out.push_back(static_cast<char>((value >> 16) & 0xff));
    out.push_back(static_cast<char>((value >> 8) & 0xff));
    out.push_back(static_cast<char>(value & 0xff));
  };
  const auto chunk = [&](const char type[5], const std::string& payload) {
    put_u32be(bytes, static_cast<std::uint32_t>(payload.size()));
    std::string body = std::string(type, 4) + payload;
    bytes += body;
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                           static_cast<uInt>(body.size()));
    put_u32be(bytes, static_cast<std::uint32_t>(crc));
  };

  std::string ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(width));
  put_u32be(ihdr, static_cast<std::uint32_t>(height));
  ihdr += std::string("\x08\x02\x00\x00\x00", 5);  // 8-bit, RGB
  chunk("IHDR", ihdr);
  chunk("IDAT", compressed);
  chunk("IEND", "");
  write_file_atomic(path, bytes);
}

namespace {

std::string field_filename(int index, const std::string& label) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "field_%03d_", index);
  std::string name = buffer;
  for (const char ch : label) {
    name.push_back(ch == '.' ? '_' : ch);
  }
  return name + ".flo";
}

}  // namespace

void write_basis(const fs::path& dir, const FlowBasis& basis, const BasisStackInfo& info) {
  if (basis.fields.empty()) {
    throw std::invalid_argument("write_basis: empty basis");
  }
  fs::create_directories(dir);

  json manifest;
  manifest["height"] = basis.shape.height;
  manifest["width"] = basis.shape.width;
  manifest["family"] = info.family;
  manifest["embed_dim"] = info.embed_dim;
  if (info.disparity_median) {
    manifest["disparity_median"] = *info.disparity_median;
  }
  manifest["fields"] = json::array();
  for (int j = 0; j < basis.size(); ++j) {
    const BasisField& f = basis.fields[j];
    const std::string filename = field_filename(j, f.label);
    write_flo(dir / filename, f.field);
    manifest["fields"].push_back(
        {{"label", f.label},
         {"kind", f.kind == FieldKind::Translational ? "translational" : "rotational"},
         {"embed_index", f.embed_index},
         {"template_norm", f.template_norm},
         {"file", filename}});
  }
  write_file_atomic(dir / "basis.json", manifest.dump(2) + "\n");
}

LoadedBasis read_basis(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "basis.json"));
  } catch (const json::parse_error& e) {
    throw IoError("malformed basis manifest in " + dir.string() + ": " + e.what());
  }

  LoadedBasis out;
  try {
    out.basis.shape = ImageShape{manifest.at("height").get<int>(),
                                 manifest.at("width").get<int>()};
    out.info.family = manifest.value("family", std::string());
    out.info.embed_dim = manifest.value("embed_dim", 0);
    if (manifest.contains("disparity_median")) {
      out.info.disparity_median = manifest["disparity_median"].get<double>();
    }
    for (const auto& entry : manifest.at("fields")) {
      BasisField f;
      f.label = entry.at("label").get<std::string>();
      const std::string kind = entry.at("kind").get<std::string>();
      if (kind == "translational") {
        f.kind = FieldKind::Translational;
      } else if (kind == "rotational") {
        f.kind = FieldKind::Rotational;
      } else {
        throw IoError("unknown basis field kind: " + kind);
      }
      f.embed_index = entry.value("embed_index", -1);
      f.template_norm = entry.value("template_norm", 0.0);
      f.field = read_flo(dir / entry.at("file").get<std::string>());
      out.basis.add(std::move(f));
    }
  } catch (const json::exception& e) {
    throw IoError("malformed basis manifest in " + dir.string() + ": " + e.what());
  }
  return out;
}

void write_embedding(const fs::path& dir, const ObjectEmbedding& phi) {
  fs::create_directories(dir);
  json manifest;
  manifest["height"] = phi.shape.height;
  manifest["width"] = phi.shape.width;
  manifest["dim"] = phi.dim;
  manifest["channels"] = json::array();
  for (int i = 0; i < phi.dim; ++i) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "channel_%02d.pfm", i);
    write_pfm(dir / buffer, ScalarField(phi.shape, phi.values.col(i)));
    manifest["channels"].push_back(buffer);
  }
  write_file_atomic(dir / "embedding.json", manifest.dump(2) + "\n");
}

ObjectEmbedding read_embedding(const fs::path& dir, bool renormalize_input) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "embedding.json"));
  } catch (const json::parse_error& e) {
    throw IoError("malformed embedding manifest in " + dir.string() + ": " + e.what());
  }
  try {
    const ImageShape shape{manifest.at("height").get<int>(), manifest.at("width").get<int>()};
    const int dim = manifest.at("dim").get<int>();
    if (dim < 1 || manifest.at("channels").size() != static_cast<size_t>(dim)) {
      throw IoError("embedding manifest channel count mismatch in " + dir.string());
    }
    Eigen::MatrixXd values(shape.pixel_count(), dim);
    for (int i = 0; i < dim; ++i) {
      const ScalarField channel =
          read_pfm(dir / manifest["channels"][static_cast<size_t>(i)].get<std::string>());
      require_same_shape(shape, channel.shape, "embedding channel");
      values.col(i) = channel.values;
    }
    if (renormalize_input) {
      return renormalize(shape, values);
    }
    // .flo/PFM storage is 32-bit; accept the quantization.
    return ObjectEmbedding(shape, std::move(values), 1e-5);
  } catch (const json::exception& e) {
    throw IoError("malformed embedding manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace flowsub::io
