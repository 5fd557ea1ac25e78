#pragma once

// Output plumbing shared by the command-line tool: fixed-format numbers,
// CSV tables, an ordered JSON tree, atomic file writes and log-log SVG plots.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <variant>
#include <vector>

#include <unistd.h>

namespace hslab::io {

/// %.16e, i.e. 17 significant digits. Non-finite values print as nan/inf/-inf.
[[nodiscard]] inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", x);
  return buf;
}

class CsvTable {
 public:
  using Cell = std::variant<double, long long, std::string>;

  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<Cell> row) {
    if (row.size() != header_.size()) throw std::invalid_argument("CsvTable: row width mismatch");
    rows_.push_back(std::move(row));
  }

  [[nodiscard]] std::size_t rows() const noexcept { return rows_.size(); }

  [[nodiscard]] std::string str() const {
    std::string out;
    append_line(out, header_);
    for (const auto& row : rows_) {
      std::vector<std::string> cells;
      cells.reserve(row.size());
      for (const auto& c : row) {
        if (const auto* d = std::get_if<double>(&c)) {
          cells.push_back(format_number(*d));
        } else if (const auto* i = std::get_if<long long>(&c)) {
          cells.push_back(std::to_string(*i));
        } else {
          cells.push_back(std::get<std::string>(c));
        }
      }
      append_line(out, cells);
    }
    return out;
  }

 private:
  static void append_line(std::string& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  }

  std::vector<std::string> header_;
  std::vector<std::vector<Cell>> rows_;
};

/// JSON value whose objects keep insertion order and whose numbers use
/// format_number. Non-finite numbers serialize as null.
class Json {
 public:
  using Array = std::vector<Json>;
  using Object = std::vector<std::pair<std::string, Json>>;

  Json() : v_(nullptr) {}
  Json(std::nullptr_t) : v_(nullptr) {}
  Json(bool b) : v_(b) {}
  Json(int i) : v_(static_cast<long long>(i)) {}
  Json(long i) : v_(static_cast<long long>(i)) {}
  Json(long long i) : v_(i) {}
  Json(unsigned i) : v_(static_cast<long long>(i)) {}
  Json(unsigned long i) : v_(static_cast<long long>(i)) {}
  Json(double d) : v_(d) {}
  Json(const char* s) : v_(std::string(s)) {}
  Json(std::string s) : v_(std::move(s)) {}
  Json(std::string_view s) : v_(std::string(s)) {}
  Json(Array a) : v_(std::make_shared<Array>(std::move(a))) {}
  Json(const std::vector<double>& xs) : v_(std::make_shared<Array>()) {
    for (double x : xs) std::get<std::shared_ptr<Array>>(v_)->emplace_back(x);
  }

  static Json object() { return Json(std::make_shared<Object>()); }
  static Json array() { return Json(Array{}); }

  /// Sets key (replacing an existing entry in place).
  Json& set(const std::string& key, Json value) {
    auto& obj = as_object();
    for (auto& [k, v] : obj) {
      if (k == key) {
        v = std::move(value);
        return *this;
      }
    }
    obj.emplace_back(key, std::move(value));
    return *this;
  }

  Json& push(Json value) {
    as_array().push_back(std::move(value));
    return *this;
  }

  [[nodiscard]] const Json* find(std::string_view key) const {
    const auto* obj = std::get_if<std::shared_ptr<Object>>(&v_);
    if (!obj) return nullptr;
    for (const auto& [k, v] : **obj) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  [[nodiscard]] std::string dump() const {
    std::string out;
    write(out, 0);
    out += '\n';
    return out;
  }

 private:
  explicit Json(std::shared_ptr<Object> o) : v_(std::move(o)) {}

  Object& as_object() {
    auto* obj = std::get_if<std::shared_ptr<Object>>(&v_);
    if (!obj) throw std::logic_error("Json: not an object");
    return **obj;
  }
  Array& as_array() {
    auto* arr = std::get_if<std::shared_ptr<Array>>(&v_);
    if (!arr) throw std::logic_error("Json: not an array");
    return **arr;
  }

  static void escape(std::string& out, const std::string& s) {
    out += '"';
    for (unsigned char c : s) {
      switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
          if (c < 0x20) {
            char buf[8];
            std::snprintf(buf, sizeof buf, "\\u%04x", c);
            out += buf;
          } else {
            out += static_cast<char>(c);
          }
      }
    }
    out += '"';
  }

  void write(std::string& out, int depth) const {
    const std::string pad(2 * static_cast<std::size_t>(depth + 1), ' ');
    const std::string close(2 * static_cast<std::size_t>(depth), ' ');
    if (std::holds_alternative<std::nullptr_t>(v_)) {
      out += "null";
    } else if (const auto* b = std::get_if<bool>(&v_)) {
      out += *b ? "true" : "false";
    } else if (const auto* i = std::get_if<long long>(&v_)) {
      out += std::to_string(*i);
    } else if (const auto* d = std::get_if<double>(&v_)) {
      out += std::isfinite(*d) ? format_number(*d) : "null";
    } else if (const auto* s = std::get_if<std::string>(&v_)) {
      escape(out, *s);
    } else if (const auto* a = std::get_if<std::shared_ptr<Array>>(&v_)) {
      if ((*a)->empty()) {
        out += "[]";
        return;
      }
      out += "[\n";
      for (std::size_t k = 0; k < (*a)->size(); ++k) {
        out += pad;
        (**a)[k].write(out, depth + 1);
        out += k + 1 < (*a)->size() ? ",\n" : "\n";
      }
      out += close + "]";
    } else {
      const auto& o = *std::get<std::shared_ptr<Object>>(v_);
      if (o.empty()) {
        out += "{}";
        return;
      }
      out += "{\n";
      for (std::size_t k = 0; k < o.size(); ++k) {
        out += pad;
        escape(out, o[k].first);
        out += ": ";
        o[k].second.write(out, depth + 1);
        out += k + 1 < o.size() ? ",\n" : "\n";
      }
      out += close + "}";
    }
  }

  std::variant<std::nullptr_t, bool, long long, double, std::string, std::shared_ptr<Array>,
               std::shared_ptr<Object>>
      v_;
};

/// Writes `content` to a temporary file in the target directory and renames
/// it over `path`.
inline void atomic_write(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const fs::path tmp =
      dir / (".tmp." + path.filename().string() + "." + std::to_string(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw std::runtime_error("cannot rename onto " + path.string());
  }
}

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool line = false;  // polyline instead of markers
};

/// Log-log plot of |y| against x. Points with x <= 0 or y == 0 are skipped.
[[nodiscard]] inline std::string svg_loglog(const std::vector<PlotSeries>& series,
                                            const std::string& title, const std::string& xlabel,
                                            const std::string& ylabel) {
  constexpr double W = 640, H = 480, L = 80, R = 20, T = 40, B = 60;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = std::fabs(s.y[i]);
      if (!(s.x[i] > 0.0) || !(y > 0.0) || !std::isfinite(y)) continue;
      xlo = std::min(xlo, std::log10(s.x[i]));
      xhi = std::max(xhi, std::log10(s.x[i]));
      ylo = std::min(ylo, std::log10(y));
      yhi = std::max(yhi, std::log10(y));
    }
  }
  if (xlo > xhi) xlo = 0, xhi = 1;
  if (ylo > yhi) ylo = 0, yhi = 1;
  xlo = std::floor(xlo), xhi = std::max(std::ceil(xhi), xlo + 1);
  ylo = std::floor(ylo), yhi = std::max(std::ceil(yhi), ylo + 1);
  auto px = [&](double lx) { return L + (lx - xlo) / (xhi - xlo) * (W - L - R); };
  auto py = [&](double ly) { return H - B - (ly - ylo) / (yhi - ylo) * (H - T - B); };
  auto f = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"480\" "
         "font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"640\" height=\"480\" fill=\"white\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  out += "<rect x=\"" + f(L) + "\" y=\"" + f(T) + "\" width=\"" + f(W - L - R) + "\" height=\"" +
         f(H - T - B) + "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int d = static_cast<int>(xlo); d <= static_cast<int>(xhi); ++d) {
    out += "<text x=\"" + f(px(d)) + "\" y=\"" + f(H - B + 18) +
           "\" text-anchor=\"middle\">1e" + std::to_string(d) + "</text>\n";
  }
  for (int d = static_cast<int>(ylo); d <= static_cast<int>(yhi); ++d) {
    out += "<text x=\"" + f(L - 6) + "\" y=\"" + f(py(d) + 4) + "\" text-anchor=\"end\">1e" +
           std::to_string(d) + "</text>\n";
  }
  out += "<text x=\"" + f(L + (W - L - R) / 2) + "\" y=\"" + f(H - 16) +
         "\" text-anchor=\"middle\">" + xlabel + "</text>\n";
  out += "<text x=\"18\" y=\"" + f(T + (H - T - B) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         f(T + (H - T - B) / 2) + ")\">" + ylabel + "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const std::string color = colors[k % 5];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = std::fabs(s.y[i]);
      if (!(s.x[i] > 0.0) || !(y > 0.0) || !std::isfinite(y)) continue;
      const double X = px(std::log10(s.x[i]));
      const double Y = py(std::log10(y));
      if (s.line) {
        pts += f(X) + "," + f(Y) + " ";
      } else {
        out += "<circle cx=\"" + f(X) + "\" cy=\"" + f(Y) + "\" r=\"3\" fill=\"" + color + "\"/>\n";
      }
    }
    if (s.line && !pts.empty()) {
      out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\"/>\n";
    }
    out += "<text x=\"" + f(W - R - 8) + "\" y=\"" + f(T + 16 + 16 * static_cast<double>(k)) +
           "\" text-anchor=\"end\" fill=\"" + color + "\">" + s.label + "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace hslab::io
