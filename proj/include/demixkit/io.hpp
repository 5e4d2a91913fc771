#pragma once

// File output: CSV reports, the SVG phase heatmap, and PGM images.

#include "demixkit/core.hpp"
#include "demixkit/demos.hpp"
#include "demixkit/geometry.hpp"
#include "demixkit/phase_diagram.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace demixkit {

struct UnsupportedFormat : IoError {
  using IoError::IoError;
};

namespace detail {

inline std::string os_error() { return std::strerror(errno); }

[[noreturn]] inline void io_fail(const std::filesystem::path& path, const std::string& what) {
  throw IoError(path.string() + ": " + what);
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  errno = 0;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) io_fail(path, "cannot open for writing: " + os_error());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) io_fail(path, "write failed: " + os_error());
}

inline std::string read_file(const std::filesystem::path& path) {
  errno = 0;
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open for reading: " + os_error());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) io_fail(path, "read failed: " + os_error());
  return ss.str();
}

}  // namespace detail

/// Shortest text that still round-trips: 17 significant digits.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

using CsvField = std::variant<std::string, double, std::int64_t>;

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add(std::vector<CsvField> row) {
    if (row.size() != header_.size())
      throw InvalidArgument("csv row has " + std::to_string(row.size()) + " fields, header has " +
                            std::to_string(header_.size()));
    rows_.push_back(std::move(row));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&](const auto& fields, auto&& fmt) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out += ',';
        out += fmt(fields[i]);
      }
      out += '\n';
    };
    line(header_, [](const std::string& s) { return s; });
    for (const auto& r : rows_)
      line(r, [](const CsvField& f) {
        return std::visit(
            [](const auto& v) -> std::string {
              using T = std::decay_t<decltype(v)>;
              if constexpr (std::is_same_v<T, std::string>) return v;
              else if constexpr (std::is_same_v<T, double>) return format_double(v);
              else return std::to_string(v);
            },
            f);
      });
    return out;
  }

  void write(const std::filesystem::path& path) const { detail::write_file(path, str()); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<CsvField>> rows_;
};

inline CsvTable phase_csv(const PhaseGridResult& g) {
  CsvTable t({"s_x", "s_y", "success_rate", "delta"});
  for (const auto& c : g.cells)
    t.add({std::int64_t{c.s_x}, std::int64_t{c.s_y}, c.success_rate, c.delta});
  return t;
}

struct SdimRow {
  std::string cone;
  std::int64_t d = 0;
  SdimEstimate estimate;
};

inline CsvTable sdim_csv(const std::vector<SdimRow>& rows) {
  CsvTable t({"cone", "d", "samples", "mean", "stderr"});
  for (const auto& r : rows)
    t.add({r.cone, r.d, std::int64_t{r.estimate.samples}, r.estimate.mean, r.estimate.std_error});
  return t;
}

inline CsvTable doa_csv(const std::vector<BearingRow>& rows) {
  CsvTable t({"method", "theta_true", "theta_est", "error_deg"});
  for (const auto& r : rows) t.add({r.method, r.theta_true, r.theta_est, r.error_deg});
  return t;
}

inline CsvTable waveform_csv(const SpikesSinesReport& r) {
  CsvTable t({"t", "z0", "x0", "y0", "x_hat", "y_hat"});
  for (std::ptrdiff_t i = 0; i < r.z0.size(); ++i)
    t.add({std::int64_t{i}, r.z0(i), r.x0(i), r.y0(i), r.x_hat(i), r.y_hat(i)});
  return t;
}

// ---------------------------------------------------------------- SVG

/// Points where Delta crosses 1, in fractional cell-index coordinates, joined
/// left to right. Delta is increasing in both sparsities, so the level set is
/// a single monotone curve and sorting by x orders it.
inline Polyline delta_one_curve(const PhaseGridResult& g) {
  const auto segs = detail::field_contour(
      g.sx_axis.size(), g.sy_axis.size(),
      [&](std::size_t ix, std::size_t iy) { return g.at(ix, iy).delta; }, 1.0);
  Polyline pts;
  for (const auto& s : segs) pts.insert(pts.end(), s.begin(), s.end());
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a[0] != b[0] ? a[0] < b[0] : a[1] > b[1];
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

inline std::string svg_heatmap(const PhaseGridResult& g, int cell_px = 16) {
  const std::size_t nx = g.sx_axis.size(), ny = g.sy_axis.size();
  const int w = static_cast<int>(nx) * cell_px, h = static_cast<int>(ny) * cell_px;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  // s_x runs left to right, s_y bottom to top.
  for (std::size_t iy = 0; iy < ny; ++iy) {
    for (std::size_t ix = 0; ix < nx; ++ix) {
      const auto& c = g.at(ix, iy);
      const int v = static_cast<int>(std::lround(255.0 * std::clamp(c.success_rate, 0.0, 1.0)));
      s << "<rect x=\"" << ix * cell_px << "\" y=\"" << (ny - 1 - iy) * cell_px << "\" width=\""
        << cell_px << "\" height=\"" << cell_px << "\" fill=\"rgb(" << v << ',' << v << ',' << v
        << ")\"><title>s_x=" << c.s_x << " s_y=" << c.s_y << " rate=" << format_double(c.success_rate)
        << "</title></rect>\n";
    }
  }
  const Polyline curve = delta_one_curve(g);
  if (!curve.empty()) {
    s << "<polyline fill=\"none\" stroke=\"red\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const double px = (curve[i][0] + 0.5) * cell_px;
      const double py = (static_cast<double>(ny) - 0.5 - curve[i][1]) * cell_px;
      if (i) s << ' ';
      s << format_double(px) << ',' << format_double(py);
    }
    s << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void write_svg_heatmap(const PhaseGridResult& g, const std::filesystem::path& path) {
  detail::write_file(path, svg_heatmap(g));
}

// ---------------------------------------------------------------- PGM

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int row, int col) const {
    return pixels[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)];
  }
};

namespace detail {

class PgmLexer {
 public:
  PgmLexer(const std::string& bytes, const std::filesystem::path& path) : b_(bytes), path_(path) {}

  // Skips whitespace and '#' comments.
  void skip() {
    while (pos_ < b_.size()) {
      const char c = b_[pos_];
      if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long number(const char* what) {
    skip();
    const std::size_t start = pos_;
    long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000'000) fail(std::string(what) + " is too large", start);
      ++pos_;
    }
    if (pos_ == start) fail(std::string("expected ") + what, start);
    return v;
  }

  [[noreturn]] void fail(const std::string& what, std::size_t offset) const {
    io_fail(path_, what + " at byte offset " + std::to_string(offset));
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  const std::string& bytes() const { return b_; }

 private:
  const std::string& b_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace detail

/// Reads binary (P5) or ASCII (P2) PGM with maxval <= 255. Samples are
/// rescaled to 0..255 when maxval < 255.
inline GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  detail::PgmLexer lex(bytes, path);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '2'))
    lex.fail("not a P5/P2 PGM file (bad magic number)", 0);
  const bool binary = bytes[1] == '5';
  lex.advance(2);
  GrayImage img;
  img.width = static_cast<int>(lex.number("width"));
  img.height = static_cast<int>(lex.number("height"));
  const std::size_t maxval_at = lex.pos();
  const long maxval = lex.number("maxval");
  if (maxval < 1) lex.fail("maxval must be positive", maxval_at);
  if (maxval > 255)
    throw UnsupportedFormat(path.string() + ": unsupported PGM maxval " + std::to_string(maxval) +
                            " (only 8-bit images are supported) at byte offset " +
                            std::to_string(maxval_at));
  if (img.width < 1 || img.height < 1) lex.fail("image dimensions must be positive", 2);

  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  img.pixels.resize(n);
  auto scale = [&](long v) {
    return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  };
  if (binary) {
    if (lex.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[lex.pos()])))
      lex.fail("expected a single whitespace byte before the raster", lex.pos());
    lex.advance(1);
    const std::size_t start = lex.pos();
    if (bytes.size() - start < n)
      lex.fail("truncated raster: expected " + std::to_string(n) + " bytes, found " +
                   std::to_string(bytes.size() - start),
               bytes.size());
    for (std::size_t i = 0; i < n; ++i) {
      const long v = static_cast<unsigned char>(bytes[start + i]);
      if (v > maxval) lex.fail("sample exceeds maxval", start + i);
      img.pixels[i] = scale(v);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      lex.skip();
      const std::size_t at = lex.pos();
      if (at >= bytes.size()) lex.fail("truncated raster: expected " + std::to_string(n) + " samples", at);
      const long v = lex.number("sample");
      if (v > maxval) lex.fail("sample exceeds maxval", at);
      img.pixels[i] = scale(v);
    }
  }
  return img;
}

inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  if (img.width < 1 || img.height < 1 ||
      img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw InvalidArgument("write_pgm: pixel count does not match the dimensions");
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
  detail::write_file(path, out);
}

/// Linear map [lo, hi] -> [0, 255] with clamping.
inline GrayImage to_gray(const Matrix& m, double lo, double hi) {
  if (!(hi > lo)) throw InvalidArgument("to_gray: need hi > lo");
  GrayImage img{static_cast<int>(m.cols()), static_cast<int>(m.rows()), {}};
  img.pixels.reserve(static_cast<std::size_t>(m.size()));
  for (std::ptrdiff_t r = 0; r < m.rows(); ++r)
    for (std::ptrdiff_t c = 0; c < m.cols(); ++c) {
      const double t = std::clamp((m(r, c) - lo) / (hi - lo), 0.0, 1.0);
      img.pixels.push_back(static_cast<std::uint8_t>(std::lround(255.0 * t)));
    }
  return img;
}

/// Pixel values scaled to [0, 1].
inline Matrix from_gray(const GrayImage& img) {
  Matrix m(img.height, img.width);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) m(r, c) = img.at(r, c) / 255.0;
  return m;
}

}  // namespace demixkit
