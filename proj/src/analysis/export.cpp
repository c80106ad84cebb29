#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>

#include <png.h>

#include "mmii/analysis.hpp"
#include "mmii/error.hpp"

namespace mmii::analysis {

void write_csv(const MelSpectrogram& spec, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error(Errc::io_error, "cannot write " + path.string());
  char buf[32];
  for (Eigen::Index m = 0; m < spec.db.rows(); ++m) {
    for (Eigen::Index t = 0; t < spec.db.cols(); ++t) {
      std::snprintf(buf, sizeof buf, "%.6f", spec.db(m, t));
      if (t) f << ',';
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw Error(Errc::io_error, "write failed: " + path.string());
}

void write_png(const MelSpectrogram& spec, const std::filesystem::path& path, double range_db) {
  const auto rows = static_cast<png_uint_32>(spec.db.rows());
  const auto cols = static_cast<png_uint_32>(spec.db.cols());
  if (rows == 0 || cols == 0) throw Error(Errc::invalid_argument, "empty spectrogram");
  const double top = spec.db.maxCoeff();
  const double bottom = top - range_db;

  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!fp) throw Error(Errc::io_error, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(Errc::io_error, "libpng init failed");
  }
  std::vector<png_byte> row(cols);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::io_error, "libpng write failed");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, cols, rows, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (png_uint_32 r = 0; r < rows; ++r) {
    const Eigen::Index m = static_cast<Eigen::Index>(rows - 1 - r);
    for (png_uint_32 t = 0; t < cols; ++t) {
      const double v = (spec.db(m, static_cast<Eigen::Index>(t)) - bottom) / range_db;
      row[t] = static_cast<png_byte>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace mmii::analysis
