#pragma once

// CSV tables and the binary shot log.
//
// Every CSV starts with "# negdelay schema=<n> config_hash=<hex>" followed by
// a header row. Shot log layout (little endian):
//   header : "NDSHOTS1" | u32 schema | u32 n_samples | u64 config_hash | u64 seed | u8 has_truth | 7 pad
//   record : u64 cycle | u8 flags (1 clicked, 2 background) | [u32 n_T, u32 n_S, u32 n_det] | n_samples f64

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <variant>
#include <charconv>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "negdelay/errors.hpp"
#include "negdelay/format.hpp"
#include "negdelay/montecarlo.hpp"
#include "negdelay/trace.hpp"

namespace negdelay {

inline constexpr std::uint32_t kSchemaVersion = 1;

static_assert(std::endian::native == std::endian::little, "shot log assumes a little-endian host");

using CsvCell = std::variant<double, std::int64_t, std::string>;

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::uint64_t config_hash, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), path_(path), width_(header.size()) {
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    out_ << "# negdelay schema=" << kSchemaVersion << " config_hash=" << format_hex64(config_hash) << '\n';
    write_cells(header);
  }

  void row(const std::vector<CsvCell>& cells) {
    if (cells.size() != width_) throw Error("csv row width mismatch in '" + path_.string() + "'");
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const auto& c : cells) {
      if (const auto* d = std::get_if<double>(&c)) text.push_back(format_double(*d));
      else if (const auto* i = std::get_if<std::int64_t>(&c)) text.push_back(std::to_string(*i));
      else text.push_back(std::get<std::string>(c));
    }
    write_cells(text);
  }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
    if (!out_) throw Error("write failed for '" + path_.string() + "'");
  }

  std::ofstream out_;
  std::filesystem::path path_;
  std::size_t width_;
};

struct CsvTable {
  std::uint32_t schema = 0;
  std::optional<std::uint64_t> config_hash;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("csv column '" + name + "' missing");
  }

  [[nodiscard]] std::vector<double> numbers(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    for (const auto& r : rows) {
      double v = 0.0;
      const auto& s = r.at(c);
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("csv column '" + name + "': bad number '" + s + "'");
      out.push_back(v);
    }
    return out;
  }
};

inline CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  CsvTable t;
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    return cells;
  };
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream ss(line.substr(1));
      for (std::string tok; ss >> tok;) {
        if (tok.rfind("schema=", 0) == 0) t.schema = static_cast<std::uint32_t>(std::stoul(tok.substr(7)));
        if (tok.rfind("config_hash=", 0) == 0) t.config_hash = std::stoull(tok.substr(12), nullptr, 16);
      }
      continue;
    }
    if (t.header.empty()) t.header = split(line);
    else t.rows.push_back(split(line));
  }
  if (t.schema != kSchemaVersion)
    throw ConfigError("'" + path.string() + "': schema " + std::to_string(t.schema) + ", expected " +
                      std::to_string(kSchemaVersion));
  if (t.header.empty()) throw ConfigError("'" + path.string() + "': missing header row");
  return t;
}

/// Trace CSV with columns t_ns, phi_urad on a uniform grid.
inline void write_trace_csv(const std::filesystem::path& path, std::uint64_t config_hash, const BinGrid& bins,
                            const std::vector<double>& phi_rad) {
  CsvWriter w(path, config_hash, {"t_ns", "phi_urad"});
  for (std::size_t j = 0; j < phi_rad.size(); ++j) w.row({bins.center(j) * 1e9, phi_rad[j] * 1e6});
}

inline Trace read_trace_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto ts = t.numbers("t_ns");
  const auto phi = t.numbers("phi_urad");
  if (ts.size() < 2) throw ConfigError("'" + path.string() + "': trace needs at least 2 rows");
  Trace tr;
  tr.t0 = ts.front() * 1e-9;
  tr.dt = (ts[1] - ts[0]) * 1e-9;
  for (std::size_t i = 1; i < ts.size(); ++i)
    if (std::abs((ts[i] - ts[i - 1]) * 1e-9 - tr.dt) > 1e-6 * std::abs(tr.dt))
      throw ConfigError("'" + path.string() + "': time axis is not uniform");
  tr.values.reserve(phi.size());
  for (double v : phi) tr.values.push_back(v * 1e-6);
  return tr;
}

struct ShotLogHeader {
  std::uint32_t schema = kSchemaVersion;
  std::uint32_t n_samples = 36;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  bool has_truth = false;
};

inline constexpr std::array<char, 8> kShotLogMagic{'N', 'D', 'S', 'H', 'O', 'T', 'S', '1'};

namespace detail {
template <class T>
void put(std::ostream& o, T v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
bool get(std::istream& i, T& v) {
  return static_cast<bool>(i.read(reinterpret_cast<char*>(&v), sizeof v));
}
}  // namespace detail

class ShotLogWriter {
 public:
  ShotLogWriter(const std::filesystem::path& path, const ShotLogHeader& h) : out_(path, std::ios::binary), h_(h) {
    if (!out_) throw ConfigError("cannot write '" + path.string() + "'");
    out_.write(kShotLogMagic.data(), kShotLogMagic.size());
    detail::put(out_, h.schema);
    detail::put(out_, h.n_samples);
    detail::put(out_, h.config_hash);
    detail::put(out_, h.seed);
    detail::put(out_, static_cast<std::uint8_t>(h.has_truth));
    const std::array<char, 7> pad{};
    out_.write(pad.data(), pad.size());
  }

  void write(const ShotRecord& s) {
    if (s.phase_samples.size() != h_.n_samples) throw Error("shot trace length differs from log header");
    detail::put(out_, s.cycle);
    const std::uint8_t flags = (s.clicked ? 1 : 0) | (s.truth.background_clicked ? 2 : 0);
    detail::put(out_, static_cast<std::uint8_t>(h_.has_truth ? flags : flags & 1));
    if (h_.has_truth) {
      detail::put(out_, s.truth.n_transmitted);
      detail::put(out_, s.truth.n_scattered);
      detail::put(out_, s.truth.n_detected);
    }
    out_.write(reinterpret_cast<const char*>(s.phase_samples.data()),
               static_cast<std::streamsize>(s.phase_samples.size() * sizeof(double)));
    ++count_;
  }

  void close() {
    out_.flush();
    if (!out_) throw Error("shot log write failed");
    out_.close();
  }

  [[nodiscard]] std::uint64_t count() const { return count_; }

 private:
  std::ofstream out_;
  ShotLogHeader h_;
  std::uint64_t count_ = 0;
};

class ShotLogReader {
 public:
  explicit ShotLogReader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw ConfigError("cannot open shot log '" + path.string() + "'");
    std::array<char, 8> magic{};
    in_.read(magic.data(), magic.size());
    if (!in_ || magic != kShotLogMagic) throw ConfigError("'" + path.string() + "' is not a negdelay shot log");
    std::uint8_t truth = 0;
    std::array<char, 7> pad{};
    if (!detail::get(in_, h_.schema)) throw ConfigError("truncated shot log header");
    if (h_.schema != kSchemaVersion)
      throw ConfigError("shot log schema " + std::to_string(h_.schema) + ", expected " +
                        std::to_string(kSchemaVersion));
    if (!detail::get(in_, h_.n_samples) || !detail::get(in_, h_.config_hash) || !detail::get(in_, h_.seed) ||
        !detail::get(in_, truth) || !in_.read(pad.data(), pad.size()))
      throw ConfigError("truncated shot log header");
    h_.has_truth = truth != 0;
  }

  [[nodiscard]] const ShotLogHeader& header() const { return h_; }

  /// False at a clean end of file.
  bool next(ShotRecord& s) {
    if (!detail::get(in_, s.cycle)) {
      if (in_.eof() && in_.gcount() == 0) return false;
      throw ConfigError("truncated record in '" + path_.string() + "'");
    }
    std::uint8_t flags = 0;
    bool ok = detail::get(in_, flags);
    s.clicked = flags & 1;
    s.truth = TruthMeta{};
    s.truth.background_clicked = flags & 2;
    if (h_.has_truth)
      ok = ok && detail::get(in_, s.truth.n_transmitted) && detail::get(in_, s.truth.n_scattered) &&
           detail::get(in_, s.truth.n_detected);
    s.phase_samples.resize(h_.n_samples);
    ok = ok && in_.read(reinterpret_cast<char*>(s.phase_samples.data()),
                        static_cast<std::streamsize>(h_.n_samples * sizeof(double)));
    if (!ok) throw ConfigError("truncated record in '" + path_.string() + "'");
    return true;
  }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
  ShotLogHeader h_;
};

}  // namespace negdelay
