// Text formats shared across the workbench: an ordered key/value file for
// configs, banks, checkpoints and manifests; CSV emission; PGM images; and a
// content hash for manifest verification. Doubles are printed with 17
// significant digits so every file round-trips bit-exactly.

#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pinnx {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ConfigError("invalid number '" + s + "' for key '" + context + "'");
  }
  return v;
}

inline long parse_long(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw ConfigError("invalid integer '" + s + "' for key '" + context + "'");
  }
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

// Ordered `key = value` file with `#` comments. Lines that are not key/value
// pairs (section bodies such as tables) are kept verbatim in `body`.
class KvFile {
 public:
  KvFile() = default;

  static KvFile parse(std::istream& in) {
    KvFile f;
    std::string line;
    bool in_body = false;
    while (std::getline(in, line)) {
      const std::string t = trim(line);
      if (in_body) {
        f.body_.push_back(line);
        continue;
      }
      if (t.empty() || t[0] == '#') continue;
      if (t == "---") {
        in_body = true;
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("malformed line (expected key = value): '" + t + "'");
      }
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty()) throw ConfigError("empty key in line '" + t + "'");
      f.order_.push_back(key);
      f.map_[key] = value;
    }
    return f;
  }

  static KvFile load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
      return parse(in);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }

  bool has(const std::string& key) const { return map_.count(key) > 0; }

  const std::string& get(const std::string& key) const {
    const auto it = map_.find(key);
    if (it == map_.end()) throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    const auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key) const { return parse_double(get(key), key); }
  double get_double_or(const std::string& key, double fb) const {
    return has(key) ? get_double(key) : fb;
  }
  long get_long(const std::string& key) const { return parse_long(get(key), key); }
  long get_long_or(const std::string& key, long fb) const { return has(key) ? get_long(key) : fb; }

  bool get_bool_or(const std::string& key, bool fb) const {
    if (!has(key)) return fb;
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("invalid boolean '" + v + "' for key '" + key + "'");
  }

  void set(const std::string& key, const std::string& value) {
    if (!map_.count(key)) order_.push_back(key);
    map_[key] = value;
  }
  void set_double(const std::string& key, double v) { set(key, format_double(v)); }
  void set_long(const std::string& key, long v) { set(key, std::to_string(v)); }
  void set_bool(const std::string& key, bool v) { set(key, v ? "true" : "false"); }

  const std::vector<std::string>& keys() const { return order_; }
  std::vector<std::string>& body() { return body_; }
  const std::vector<std::string>& body() const { return body_; }

  void write(std::ostream& out) const {
    for (const auto& k : order_) out << k << " = " << map_.at(k) << "\n";
    if (!body_.empty()) {
      out << "---\n";
      for (const auto& l : body_) out << l << "\n";
    }
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    write(out);
  }

 private:
  std::vector<std::string> order_;
  std::map<std::string, std::string> map_;
  std::vector<std::string> body_;
};

// FNV-1a over file contents; manifests store and verify these.
inline std::uint64_t fnv1a_hash(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string file_hash(const std::filesystem::path& path) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a_hash(read_file(path))));
  return buf;
}

// Grayscale PGM (P2). Values are linearly mapped from [lo, hi] to 0..255.
inline void write_pgm(const std::filesystem::path& path, const std::vector<double>& values,
                      int width, int height, double lo, double hi) {
  if (static_cast<int>(values.size()) != width * height) {
    throw std::invalid_argument("write_pgm: size mismatch");
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P2\n" << width << " " << height << "\n255\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double v = values[r * width + c];
      int g = static_cast<int>(255.0 * (v - lo) / span + 0.5);
      if (g < 0) g = 0;
      if (g > 255) g = 255;
      out << g << (c + 1 == width ? "" : " ");
    }
    out << "\n";
  }
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out << cells[i] << (i + 1 == cells.size() ? "" : ",");
  }
  out << "\n";
}

}  // namespace pinnx
