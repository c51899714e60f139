#include "yolocam/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace yolocam {
namespace {

constexpr std::uint8_t kPngSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) | (std::uint32_t(p[2]) << 8) |
         std::uint32_t(p[3]);
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::uint8_t* data, std::size_t len) {
  append_be32(out, static_cast<std::uint32_t>(len));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  if (len) out.insert(out.end(), data, data + len);
  const uLong crc = crc32(crc32(0L, Z_NULL, 0), out.data() + start,
                          static_cast<uInt>(4 + len));
  append_be32(out, static_cast<std::uint32_t>(crc));
}

std::vector<std::uint8_t> zlib_inflate(const std::uint8_t* data, std::size_t len,
                                       std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  uLongf out_len = static_cast<uLongf>(expected);
  const int rc = uncompress(out.data(), &out_len, data, static_cast<uLong>(len));
  if (rc != Z_OK || out_len != expected) {
    throw Error("png: inflate failed (zlib rc " + std::to_string(rc) + ")");
  }
  return out;
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

std::uint8_t to_byte_round(float v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

ImageU8 decode_png(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kPngSignature, 8) != 0) {
    throw Error("png: bad signature");
  }
  int width = 0, height = 0, bit_depth = 0, color_type = 0;
  std::vector<std::uint8_t> idat;
  std::vector<std::uint8_t> palette;

  std::size_t pos = 8;
  bool saw_end = false;
  while (pos + 8 <= bytes.size() && !saw_end) {
    const std::uint32_t len = read_be32(bytes.data() + pos);
    if (pos + 12 + len > bytes.size()) throw Error("png: truncated chunk");
    const char* type = reinterpret_cast<const char*>(bytes.data() + pos + 4);
    const std::uint8_t* data = bytes.data() + pos + 8;
    if (std::memcmp(type, "IHDR", 4) == 0) {
      if (len != 13) throw Error("png: bad IHDR");
      width = static_cast<int>(read_be32(data));
      height = static_cast<int>(read_be32(data + 4));
      bit_depth = data[8];
      color_type = data[9];
      if (width < 1 || height < 1) throw Error("png: bad dimensions");
      if (bit_depth != 8) throw Error("png: only 8-bit depth supported");
      if (color_type != 0 && color_type != 2 && color_type != 3 && color_type != 4 &&
          color_type != 6) {
        throw Error("png: unsupported color type " + std::to_string(color_type));
      }
      if (data[12] != 0) throw Error("png: interlaced images unsupported");
    } else if (std::memcmp(type, "PLTE", 4) == 0) {
      palette.assign(data, data + len);
    } else if (std::memcmp(type, "IDAT", 4) == 0) {
      idat.insert(idat.end(), data, data + len);
    } else if (std::memcmp(type, "IEND", 4) == 0) {
      saw_end = true;
    }
    pos += 12 + len;  // ancillary chunks skipped
  }
  if (width == 0) throw Error("png: missing IHDR");
  if (idat.empty()) throw Error("png: missing IDAT");

  const int channels = color_type == 2 ? 3 : color_type == 6 ? 4 : color_type == 4 ? 2 : 1;
  const std::size_t row_bytes = static_cast<std::size_t>(width) * channels;
  const std::size_t raw_size = (row_bytes + 1) * height;
  std::vector<std::uint8_t> raw = zlib_inflate(idat.data(), idat.size(), raw_size);

  // unfilter in place, previous row starts as zeros
  std::vector<std::uint8_t> prev(row_bytes, 0);
  ImageU8 img(width, height);
  std::vector<std::uint8_t> row(row_bytes);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* src = raw.data() + static_cast<std::size_t>(y) * (row_bytes + 1);
    const std::uint8_t filter = src[0];
    ++src;
    for (std::size_t i = 0; i < row_bytes; ++i) {
      const int x = src[i];
      const int a = i >= static_cast<std::size_t>(channels) ? row[i - channels] : 0;
      const int b = prev[i];
      const int c = i >= static_cast<std::size_t>(channels) ? prev[i - channels] : 0;
      int v = 0;
      switch (filter) {
        case 0: v = x; break;
        case 1: v = x + a; break;
        case 2: v = x + b; break;
        case 3: v = x + (a + b) / 2; break;
        case 4: v = x + paeth(a, b, c); break;
        default: throw Error("png: unknown filter " + std::to_string(filter));
      }
      row[i] = static_cast<std::uint8_t>(v & 0xff);
    }
    for (int x = 0; x < width; ++x) {
      std::uint8_t* dst = img.at(y, x);
      const std::uint8_t* px = row.data() + static_cast<std::size_t>(x) * channels;
      switch (color_type) {
        case 0:
        case 4: dst[0] = dst[1] = dst[2] = px[0]; break;
        case 2:
        case 6: dst[0] = px[0]; dst[1] = px[1]; dst[2] = px[2]; break;
        case 3: {
          const std::size_t p = static_cast<std::size_t>(px[0]) * 3;
          if (p + 2 >= palette.size()) throw Error("png: palette index out of range");
          dst[0] = palette[p];
          dst[1] = palette[p + 1];
          dst[2] = palette[p + 2];
          break;
        }
      }
    }
    prev = row;
  }
  return img;
}

std::vector<std::uint8_t> encode_png(const ImageU8& img) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
    throw Error("png: cannot encode empty or inconsistent image");
  }
  const std::size_t row_bytes = static_cast<std::size_t>(img.width) * 3;
  std::vector<std::uint8_t> raw((row_bytes + 1) * img.height);
  for (int y = 0; y < img.height; ++y) {
    std::uint8_t* dst = raw.data() + static_cast<std::size_t>(y) * (row_bytes + 1);
    dst[0] = 0;  // filter: None
    std::memcpy(dst + 1, img.pixels.data() + static_cast<std::size_t>(y) * row_bytes, row_bytes);
  }

  uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> comp(comp_len);
  if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()),
                Z_DEFAULT_COMPRESSION) != Z_OK) {
    throw Error("png: deflate failed");
  }
  comp.resize(comp_len);

  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
  std::uint8_t ihdr[13] = {};
  ihdr[0] = static_cast<std::uint8_t>(img.width >> 24);
  ihdr[1] = static_cast<std::uint8_t>(img.width >> 16);
  ihdr[2] = static_cast<std::uint8_t>(img.width >> 8);
  ihdr[3] = static_cast<std::uint8_t>(img.width);
  ihdr[4] = static_cast<std::uint8_t>(img.height >> 24);
  ihdr[5] = static_cast<std::uint8_t>(img.height >> 16);
  ihdr[6] = static_cast<std::uint8_t>(img.height >> 8);
  ihdr[7] = static_cast<std::uint8_t>(img.height);
  ihdr[8] = 8;   // bit depth
  ihdr[9] = 2;   // color type: RGB
  append_chunk(out, "IHDR", ihdr, sizeof(ihdr));
  append_chunk(out, "IDAT", comp.data(), comp.size());
  append_chunk(out, "IEND", nullptr, 0);
  return out;
}

ImageU8 decode_ppm(const std::vector<std::uint8_t>& bytes) {
  // binary P6 only; header tokens separated by whitespace, # comments
  std::size_t pos = 0;
  const auto next_token = [&]() -> std::string {
    std::string tok;
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) return tok;
        ++pos;
        continue;
      }
      tok += c;
      ++pos;
    }
    return tok;
  };

  if (next_token() != "P6") throw Error("ppm: only binary P6 supported");
  const int width = std::stoi(next_token());
  const int height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (width < 1 || height < 1 || maxval != 255) {
    throw Error("ppm: need positive dimensions and maxval 255");
  }
  ++pos;  // single whitespace after maxval
  const std::size_t need = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() - pos < need) throw Error("ppm: truncated pixel data");
  ImageU8 img(width, height);
  std::memcpy(img.pixels.data(), bytes.data() + pos, need);
  return img;
}

ImageU8 load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("image: cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0) {
    return decode_png(bytes);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
    return decode_ppm(bytes);
  }
  throw Error("image: '" + path + "' is neither PNG nor binary PPM");
}

void save_png(const std::string& path, const ImageU8& img) {
  const std::vector<std::uint8_t> bytes = encode_png(img);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("image: cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("image: write to '" + path + "' failed");
}

ImageU8 resize_bilinear(const ImageU8& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw Error("resize: output size must be positive");
  if (img.width == out_w && img.height == out_h) return img;
  ImageU8 out(out_w, out_h);
  const float scale_x = static_cast<float>(img.width) / static_cast<float>(out_w);
  const float scale_y = static_cast<float>(img.height) / static_cast<float>(out_h);
  for (int y = 0; y < out_h; ++y) {
    const float sy = std::clamp((y + 0.5f) * scale_y - 0.5f, 0.0f,
                                static_cast<float>(img.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const float fy = sy - static_cast<float>(y0);
    for (int x = 0; x < out_w; ++x) {
      const float sx = std::clamp((x + 0.5f) * scale_x - 0.5f, 0.0f,
                                  static_cast<float>(img.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const float fx = sx - static_cast<float>(x0);
      for (int c = 0; c < 3; ++c) {
        const float top = (1 - fx) * img.at(y0, x0)[c] + fx * img.at(y0, x1)[c];
        const float bot = (1 - fx) * img.at(y1, x0)[c] + fx * img.at(y1, x1)[c];
        out.at(y, x)[c] = to_byte_round((1 - fy) * top + fy * bot);
      }
    }
  }
  return out;
}

Tensorf image_to_tensor(const ImageU8& img) {
  Tensorf t({3, img.height, img.width});
  const float inv = 1.0f / 255.0f;
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        t.at(c, y, x) = static_cast<float>(img.at(y, x)[c]) * inv;
      }
    }
  }
  return t;
}

}  // namespace yolocam
