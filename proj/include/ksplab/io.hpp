#pragma once

#include "array.hpp"
#include "sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ksplab {

/// Malformed or truncated input. offset() is the byte position where parsing stopped.
class FormatError : public std::runtime_error
{
public:
  FormatError(std::string const& what, std::uint64_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset)
  {
  }
  std::uint64_t offset() const noexcept { return offset_; }

private:
  std::uint64_t offset_;
};

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// KSP container

inline constexpr char kKspMagic[8] = {'K', 'S', 'P', 'L', 'A', 'B', '0', '1'};
inline constexpr int kKspVersion = 1;
/// Header length cap; anything larger is treated as corruption.
inline constexpr std::uint64_t kKspMaxHeader = std::uint64_t{1} << 26;

enum class SampleType { c64, c128 };

inline char const* to_string(SampleType t) { return t == SampleType::c64 ? "c64" : "c128"; }

inline std::size_t sample_bytes(SampleType t) { return t == SampleType::c64 ? 8 : 16; }

/// Container payload. shape is [coils, H, W] or [frames, coils, H, W]; samples are
/// coil-major, row-major, frames outermost.
struct KspContainer
{
  std::vector<std::size_t> shape;
  SampleType dtype = SampleType::c128;
  std::vector<cplx> samples;
  std::optional<SamplingMask> mask;
  nlohmann::json meta = nlohmann::json::object();

  std::size_t frames() const { return shape.size() == 4 ? shape[0] : 1; }
  std::size_t coils() const { return shape.size() == 4 ? shape[1] : shape.at(0); }
  std::size_t height() const { return shape.at(shape.size() - 2); }
  std::size_t width() const { return shape.at(shape.size() - 1); }

  Stack<cplx> frame(std::size_t f) const
  {
    if (f >= frames()) throw std::out_of_range("KspContainer: frame index out of range");
    std::size_t const n = coils() * height() * width();
    auto const first = samples.begin() + std::ptrdiff_t(f * n);
    return Stack<cplx>(coils(), height(), width(), std::vector<cplx>(first, first + std::ptrdiff_t(n)));
  }

  static KspContainer from_stack(Stack<cplx> const& s, SampleType dtype = SampleType::c128)
  {
    KspContainer out;
    out.shape = {s.count(), s.height(), s.width()};
    out.dtype = dtype;
    out.samples = s.values();
    return out;
  }

  static KspContainer from_frames(std::vector<Stack<cplx>> const& frames, SampleType dtype = SampleType::c128)
  {
    if (frames.empty()) throw std::invalid_argument("KspContainer: no frames");
    KspContainer out;
    out.shape = {frames.size(), frames[0].count(), frames[0].height(), frames[0].width()};
    out.dtype = dtype;
    for (auto const& f : frames) {
      if (!f.same_shape(frames[0])) throw std::invalid_argument("KspContainer: frame shapes differ");
      out.samples.insert(out.samples.end(), f.values().begin(), f.values().end());
    }
    return out;
  }

  /// Single complex image stored as one coil.
  static KspContainer from_image(ComplexImage const& img, SampleType dtype = SampleType::c128)
  {
    KspContainer out;
    out.shape = {1, img.height(), img.width()};
    out.dtype = dtype;
    out.samples = img.values();
    out.meta["domain"] = "image";
    return out;
  }
};

inline nlohmann::json mask_to_json(SamplingMask const& m)
{
  nlohmann::json j;
  j["kind"] = to_string(m.kind);
  j["R"] = m.acceleration;
  j["acs"] = m.acs_lines;
  j["seed"] = m.seed ? nlohmann::json(*m.seed) : nlohmann::json(nullptr);
  j["pattern"] = m.pattern;
  j["axis"] = to_string(m.phase_axis);
  j["offset"] = m.offset;
  j["height"] = m.height;
  j["width"] = m.width;
  return j;
}

inline SamplingMask mask_from_json(nlohmann::json const& j)
{
  SamplingMask m;
  m.kind = parse_mask_kind(j.at("kind").get<std::string>());
  m.acceleration = j.at("R").get<int>();
  m.acs_lines = j.at("acs").get<std::size_t>();
  if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<std::uint64_t>();
  m.pattern = j.at("pattern").get<std::vector<std::uint8_t>>();
  m.phase_axis = parse_phase_axis(j.value("axis", std::string("cols")));
  m.offset = j.value("offset", std::size_t{0});
  m.height = j.at("height").get<std::size_t>();
  m.width = j.at("width").get<std::size_t>();
  if (m.pattern.size() != m.axis_length()) throw std::invalid_argument("mask pattern length does not match its axis");
  return m;
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xffu));
}

inline void put_u32(std::string& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_le(unsigned char const* p, int bytes)
{
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t(p[i]) << (8 * i);
  return v;
}

inline std::size_t checked_product(std::vector<std::size_t> const& dims, std::size_t factor, std::uint64_t offset)
{
  std::size_t n = factor;
  for (auto d : dims) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
      throw FormatError("ksp: shape product overflows", offset);
    }
    n *= d;
  }
  return n;
}

} // namespace detail

inline std::string encode_ksp(KspContainer const& c)
{
  if (c.shape.size() != 3 && c.shape.size() != 4) throw std::invalid_argument("ksp: shape must have 3 or 4 dims");
  std::size_t const count = detail::checked_product(c.shape, 1, 0);
  if (count != c.samples.size()) throw std::invalid_argument("ksp: sample count does not match shape");

  nlohmann::json h;
  h["version"] = kKspVersion;
  h["dtype"] = to_string(c.dtype);
  h["shape"] = c.shape;
  if (c.mask) h["mask"] = mask_to_json(*c.mask);
  h["meta"] = c.meta;
  std::string const header = h.dump();

  std::string out(kKspMagic, sizeof kKspMagic);
  detail::put_u64(out, header.size());
  out += header;
  out.reserve(out.size() + count * sample_bytes(c.dtype));
  for (cplx const& z : c.samples) {
    if (c.dtype == SampleType::c128) {
      detail::put_u64(out, std::bit_cast<std::uint64_t>(z.real()));
      detail::put_u64(out, std::bit_cast<std::uint64_t>(z.imag()));
    } else {
      detail::put_u32(out, std::bit_cast<std::uint32_t>(float(z.real())));
      detail::put_u32(out, std::bit_cast<std::uint32_t>(float(z.imag())));
    }
  }
  return out;
}

/// Parses a complete container image. The header is validated against the byte count
/// before the sample buffer is allocated.
inline KspContainer decode_ksp(std::string_view bytes)
{
  auto const* p = reinterpret_cast<unsigned char const*>(bytes.data());
  std::uint64_t const size = bytes.size();
  if (size < sizeof kKspMagic) throw FormatError("ksp: file shorter than magic", size);
  if (!std::equal(kKspMagic, kKspMagic + sizeof kKspMagic, bytes.begin())) {
    throw FormatError("ksp: bad magic", 0);
  }
  if (size < 16) throw FormatError("ksp: truncated header length", size);
  std::uint64_t const hlen = detail::get_le(p + 8, 8);
  if (hlen > kKspMaxHeader || hlen > size - 16) {
    throw FormatError("ksp: header length " + std::to_string(hlen) + " exceeds available bytes", 8);
  }

  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(16, std::size_t(hlen)));
  } catch (nlohmann::json::exception const& e) {
    throw FormatError(std::string("ksp: header is not valid JSON: ") + e.what(), 16);
  }

  KspContainer c;
  try {
    if (h.at("version").get<int>() != kKspVersion) throw FormatError("ksp: unsupported version", 16);
    std::string const dtype = h.at("dtype").get<std::string>();
    if (dtype == "c64") c.dtype = SampleType::c64;
    else if (dtype == "c128") c.dtype = SampleType::c128;
    else throw FormatError("ksp: unknown dtype '" + dtype + "'", 16);
    c.shape = h.at("shape").get<std::vector<std::size_t>>();
    if (h.contains("mask")) c.mask = mask_from_json(h["mask"]);
    if (h.contains("meta")) c.meta = h["meta"];
  } catch (nlohmann::json::exception const& e) {
    throw FormatError(std::string("ksp: malformed header: ") + e.what(), 16);
  } catch (std::invalid_argument const& e) {
    throw FormatError(std::string("ksp: malformed header: ") + e.what(), 16);
  }
  if (c.shape.size() != 3 && c.shape.size() != 4) throw FormatError("ksp: shape must have 3 or 4 dims", 16);
  if (c.mask && (c.mask->height != c.height() || c.mask->width != c.width())) {
    throw FormatError("ksp: mask shape does not match the payload", 16);
  }

  std::uint64_t const body = 16 + hlen;
  std::size_t const count = detail::checked_product(c.shape, 1, 16);
  std::size_t const width = sample_bytes(c.dtype);
  if (count > (size - body) / width || count * width != size - body) {
    throw FormatError("ksp: payload has " + std::to_string(size - body) + " bytes, shape needs " +
                        std::to_string(count) + " x " + std::to_string(width),
                      body);
  }
  c.samples.resize(count);
  unsigned char const* q = p + body;
  for (std::size_t i = 0; i < count; ++i, q += width) {
    if (c.dtype == SampleType::c128) {
      c.samples[i] = {std::bit_cast<double>(detail::get_le(q, 8)), std::bit_cast<double>(detail::get_le(q + 8, 8))};
    } else {
      c.samples[i] = {double(std::bit_cast<float>(std::uint32_t(detail::get_le(q, 4)))),
                      double(std::bit_cast<float>(std::uint32_t(detail::get_le(q + 4, 4))))};
    }
  }
  return c;
}

inline std::string read_file(std::filesystem::path const& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline void write_file(std::filesystem::path const& path, std::string_view bytes)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

inline void write_ksp(std::filesystem::path const& path, KspContainer const& c) { write_file(path, encode_ksp(c)); }

inline KspContainer read_ksp(std::filesystem::path const& path) { return decode_ksp(read_file(path)); }

// ---------------------------------------------------------------------------
// Mask text export: one line per phase-encode index, 1 sampled, 0 skipped.

inline std::string mask_to_text(SamplingMask const& m)
{
  std::string out;
  out.reserve(2 * m.pattern.size());
  for (auto v : m.pattern) {
    out.push_back(v ? '1' : '0');
    out.push_back('\n');
  }
  return out;
}

inline std::vector<std::uint8_t> parse_mask_text(std::string_view text)
{
  std::vector<std::uint8_t> out;
  std::size_t line = 0;
  std::istringstream in{std::string(text)};
  std::string s;
  while (std::getline(in, s)) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    if (s != "0" && s != "1") throw FormatError("mask text: line " + std::to_string(line + 1) + " is not 0 or 1", line);
    out.push_back(s == "1" ? 1 : 0);
    ++line;
  }
  return out;
}

inline void write_mask_text(std::filesystem::path const& path, SamplingMask const& m) { write_file(path, mask_to_text(m)); }

// ---------------------------------------------------------------------------
// 16-bit PGM

enum class PgmScaling { minmax, fixed_range };

struct PgmNormalization
{
  PgmScaling scaling = PgmScaling::minmax;
  /// Used only with fixed_range.
  double low = 0.0;
  double high = 1.0;
};

/// Resolved mapping: value v becomes round((v - low) / (high - low) * 65535), clamped.
/// high <= low maps everything to 0.
struct PgmMapping
{
  PgmScaling scaling = PgmScaling::minmax;
  double low = 0.0;
  double high = 0.0;
};

inline constexpr std::uint16_t kPgmMax = 65535;

inline PgmMapping resolve_pgm_mapping(RealImage const& img, PgmNormalization const& norm)
{
  PgmMapping m{norm.scaling, norm.low, norm.high};
  if (norm.scaling == PgmScaling::minmax) {
    if (img.empty()) return {norm.scaling, 0.0, 0.0};
    auto const [lo, hi] = std::minmax_element(img.begin(), img.end());
    m.low = *lo;
    m.high = *hi;
  }
  return m;
}

inline std::vector<std::uint16_t> quantize_pgm(RealImage const& img, PgmMapping const& m)
{
  std::vector<std::uint16_t> q(img.size(), 0);
  if (!(m.high > m.low)) return q;
  double const scale = double(kPgmMax) / (m.high - m.low);
  for (std::size_t i = 0; i < img.size(); ++i) {
    double const v = std::clamp((img[i] - m.low) * scale, 0.0, double(kPgmMax));
    q[i] = std::uint16_t(std::lround(std::isfinite(v) ? v : 0.0));
  }
  return q;
}

inline std::filesystem::path pgm_sidecar_path(std::filesystem::path const& pgm)
{
  return std::filesystem::path(pgm.string() + ".txt");
}

inline std::string format_double(double v);

/// Writes a binary P5 image (big-endian 16-bit samples) and the normalization sidecar.
inline PgmMapping write_pgm(std::filesystem::path const& path, RealImage const& img, PgmNormalization const& norm = {})
{
  PgmMapping const m = resolve_pgm_mapping(img, norm);
  auto const q = quantize_pgm(img, m);
  std::string out = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n65535\n";
  out.reserve(out.size() + 2 * q.size());
  for (auto v : q) {
    out.push_back(char(v >> 8));
    out.push_back(char(v & 0xff));
  }
  write_file(path, out);
  std::string side = std::string("normalization ") + (m.scaling == PgmScaling::minmax ? "minmax" : "fixed-range") +
                     "\nlow " + format_double(m.low) + "\nhigh " + format_double(m.high) + "\nmaxval 65535\n";
  write_file(pgm_sidecar_path(path), side);
  return m;
}

struct PgmImage
{
  std::size_t width = 0;
  std::size_t height = 0;
  std::uint32_t maxval = 0;
  std::vector<std::uint16_t> pixels;
};

inline PgmImage decode_pgm(std::string_view bytes)
{
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto number = [&]() -> std::uint64_t {
    skip_space();
    std::uint64_t v = 0;
    auto const* b = bytes.data() + pos;
    auto const r = std::from_chars(b, bytes.data() + bytes.size(), v);
    if (r.ec != std::errc{} || r.ptr == b) throw FormatError("pgm: expected a number", pos);
    pos = std::size_t(r.ptr - bytes.data());
    return v;
  };
  if (bytes.size() < 2 || bytes.substr(0, 2) != "P5") throw FormatError("pgm: bad magic", 0);
  pos = 2;
  PgmImage img;
  img.width = std::size_t(number());
  img.height = std::size_t(number());
  std::uint64_t const maxval = number();
  if (maxval == 0 || maxval > 65535) throw FormatError("pgm: maxval out of range", pos);
  img.maxval = std::uint32_t(maxval);
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw FormatError("pgm: missing separator after header", pos);
  }
  ++pos;
  std::size_t const bpp = maxval > 255 ? 2 : 1;
  if (img.width != 0 && img.height > (bytes.size() - pos) / bpp / img.width) {
    throw FormatError("pgm: truncated pixel data", pos);
  }
  std::size_t const n = img.width * img.height;
  if (n * bpp != bytes.size() - pos) throw FormatError("pgm: pixel data length mismatch", pos);
  img.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    img.pixels[i] = bpp == 2 ? std::uint16_t((std::uint8_t(bytes[pos + 2 * i]) << 8) | std::uint8_t(bytes[pos + 2 * i + 1]))
                             : std::uint8_t(bytes[pos + i]);
  }
  return img;
}

inline PgmImage read_pgm(std::filesystem::path const& path) { return decode_pgm(read_file(path)); }

// ---------------------------------------------------------------------------
// CSV report

inline constexpr char const* kReportHeader = "group,acceleration,slice,ssim,psnr,nmse,hf_nmse,eagle,fidelity,reg,total";

/// One report line. slice is free text: a slice index, "all" for aggregates, or an
/// error description for a failed group (metrics empty).
struct ReportRow
{
  std::string group;
  int acceleration = 0;
  std::string slice = "0";
  double ssim = 0.0;
  double psnr = 0.0;
  double nmse = 0.0;
  double hf_nmse = 0.0;
  double eagle = 0.0;
  double fidelity = 0.0;
  double reg = 0.0;
  double total = 0.0;
  bool failed = false;
};

/// Shortest round-trip decimal; non-finite values as inf, -inf, nan.
inline std::string format_double(double v)
{
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto const r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

/// RFC 4180: fields holding a comma, quote, CR or LF are quoted with inner quotes doubled.
inline std::string csv_field(std::string_view s)
{
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += "\"\"";
    else out.push_back(ch);
  }
  out += '"';
  return out;
}

inline std::string format_report(std::vector<ReportRow> const& rows)
{
  std::string out = kReportHeader;
  out += "\r\n";
  for (auto const& r : rows) {
    out += csv_field(r.group);
    out += ',' + std::to_string(r.acceleration) + ',' + csv_field(r.slice);
    for (double v : {r.ssim, r.psnr, r.nmse, r.hf_nmse, r.eagle, r.fidelity, r.reg, r.total}) {
      out += ',';
      if (!r.failed) out += format_double(v);
    }
    out += "\r\n";
  }
  return out;
}

inline void write_report(std::filesystem::path const& path, std::vector<ReportRow> const& rows)
{
  write_file(path, format_report(rows));
}

/// Parses RFC 4180 text into records of fields. Used to read reports back.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text)
{
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    char const ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"') {
      quoted = true;
      any = true;
    } else if (ch == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (ch == '\r' || ch == '\n') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      rec.push_back(std::move(field));
      field.clear();
      records.push_back(std::move(rec));
      rec.clear();
      any = false;
    } else {
      field.push_back(ch);
      any = true;
    }
  }
  if (quoted) throw FormatError("csv: unterminated quoted field", text.size());
  if (any || !field.empty()) {
    rec.push_back(std::move(field));
    records.push_back(std::move(rec));
  }
  return records;
}

/// Aggregate over successful rows: losses are summed, metrics averaged.
inline ReportRow aggregate_rows(std::vector<ReportRow> const& rows, std::string group, int acceleration)
{
  ReportRow agg;
  agg.group = std::move(group);
  agg.acceleration = acceleration;
  agg.slice = "all";
  std::size_t n = 0;
  for (auto const& r : rows) {
    if (r.failed) continue;
    ++n;
    agg.ssim += r.ssim;
    agg.psnr += r.psnr;
    agg.nmse += r.nmse;
    agg.hf_nmse += r.hf_nmse;
    agg.eagle += r.eagle;
    agg.fidelity += r.fidelity;
    agg.reg += r.reg;
    agg.total += r.total;
  }
  if (n == 0) {
    agg.failed = true;
    agg.slice = "error: no successful rows";
    return agg;
  }
  double const inv = 1.0 / double(n);
  agg.ssim *= inv;
  agg.psnr *= inv;
  agg.nmse *= inv;
  agg.hf_nmse *= inv;
  return agg;
}

} // namespace ksplab
