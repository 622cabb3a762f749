#include "subat/io.hpp"

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <system_error>

#include "subat/error.hpp"

namespace subat::io {

namespace {

static_assert(std::endian::native == std::endian::little, "artifact IO assumes a little-endian host");

constexpr char kMagic[4] = {'S', 'B', 'A', 'T'};
constexpr std::size_t kHeaderSize = 6;

class Writer {
 public:
  explicit Writer(FileKind kind) {
    bytes_.insert(bytes_.end(), kMagic, kMagic + 4);
    bytes_.push_back(static_cast<std::uint8_t>(kind));
    bytes_.push_back(kFormatVersion);
  }
  template <class T>
  void put(T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    bytes_.insert(bytes_.end(), raw, raw + sizeof(T));
  }
  void put_doubles(std::span<const double> values) {
    const auto* raw = reinterpret_cast<const std::uint8_t*>(values.data());
    bytes_.insert(bytes_.end(), raw, raw + values.size_bytes());
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, FileKind kind) : bytes_(bytes) {
    if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0) {
      throw IoError("not an SBAT artifact (bad magic)");
    }
    if (bytes[4] != static_cast<std::uint8_t>(kind)) {
      throw IoError("artifact kind " + std::to_string(bytes[4]) + ", expected " +
                    std::to_string(static_cast<int>(kind)));
    }
    if (bytes[5] != kFormatVersion) throw IoError("unsupported artifact version " + std::to_string(bytes[5]));
    pos_ = kHeaderSize;
  }
  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::vector<double> get_doubles(std::size_t n) {
    if (n > remaining() / sizeof(double)) throw IoError("artifact payload shorter than its header declares");
    std::vector<double> out(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return out;
  }
  // Checks that `count` items of `size` bytes remain, guarding the
  // multiplication against overflow from a corrupted header.
  void expect_exact(std::uint64_t count, std::uint64_t size) const {
    if (size != 0 && count > remaining() / size) throw IoError("artifact payload shorter than its header declares");
    if (count * size != remaining()) throw IoError("artifact payload length does not match its header");
  }
  void finish() const {
    if (pos_ != bytes_.size()) throw IoError("trailing bytes after artifact payload");
  }

 private:
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) throw IoError("truncated artifact");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

ParamVector to_params(std::vector<double> values) {
  try {
    return ParamVector(std::move(values));
  } catch (const ParameterError& e) {
    throw IoError(std::string("artifact holds invalid values: ") + e.what());
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ParamVector& params) {
  Writer w(FileKind::kCheckpoint);
  w.put<std::uint64_t>(params.size());
  w.put_doubles(params.values());
  return w.take();
}

std::vector<std::uint8_t> encode_trajectory(const Trajectory& trajectory) {
  Writer w(FileKind::kTrajectory);
  w.put<std::uint64_t>(trajectory.size());
  w.put<std::uint64_t>(trajectory.dim());
  for (const ParamVector& s : trajectory.snapshots()) w.put_doubles(s.values());
  for (const SnapshotMeta& m : trajectory.metas()) {
    w.put<std::uint32_t>(m.epoch);
    w.put<std::uint32_t>(m.step);
  }
  return w.take();
}

std::vector<std::uint8_t> encode_basis(const SubspaceBasis& basis) {
  Writer w(FileKind::kBasis);
  w.put<std::uint64_t>(basis.dim());
  w.put<std::uint64_t>(basis.rank());
  w.put_doubles(basis.mean.values());
  for (const ParamVector& c : basis.columns) w.put_doubles(c.values());
  w.put_doubles(basis.sigma);
  return w.take();
}

ParamVector decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, FileKind::kCheckpoint);
  const auto n = r.get<std::uint64_t>();
  r.expect_exact(n, sizeof(double));
  ParamVector out = to_params(r.get_doubles(n));
  r.finish();
  return out;
}

Trajectory decode_trajectory(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, FileKind::kTrajectory);
  const auto t = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  if (n != 0 && t > UINT64_MAX / n) throw IoError("trajectory header overflows");
  // Each snapshot: N doubles plus one (u32, u32) pair.
  r.expect_exact(t, n * sizeof(double) + 8);
  std::vector<ParamVector> rows;
  rows.reserve(t);
  for (std::uint64_t i = 0; i < t; ++i) rows.push_back(to_params(r.get_doubles(n)));
  Trajectory out;
  for (std::uint64_t i = 0; i < t; ++i) {
    SnapshotMeta m;
    m.epoch = r.get<std::uint32_t>();
    m.step = r.get<std::uint32_t>();
    out.append(std::move(rows[i]), m);
  }
  r.finish();
  return out;
}

SubspaceBasis decode_basis(std::span<const std::uint8_t> bytes) {
  Reader r(bytes, FileKind::kBasis);
  const auto n = r.get<std::uint64_t>();
  const auto d = r.get<std::uint64_t>();
  if (n + 1 < n || (d != 0 && (n + 1) > UINT64_MAX / d)) throw IoError("basis header overflows");
  // mean (N) + d columns (N each) + d sigmas.
  r.expect_exact(n + d * (n + 1), sizeof(double));
  SubspaceBasis out;
  out.mean = to_params(r.get_doubles(n));
  for (std::uint64_t j = 0; j < d; ++j) out.columns.push_back(to_params(r.get_doubles(n)));
  out.sigma = r.get_doubles(d);
  r.finish();
  try {
    out.validate();
  } catch (const Error& e) {
    throw IoError(std::string("basis artifact is inconsistent: ") + e.what());
  }
  return out;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  return bytes;
}

void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failure on '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' into place at '" + path.string() + "'");
  }
}

void write_atomic(const std::filesystem::path& path, const std::string& text) {
  write_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_checkpoint(const std::filesystem::path& path, const ParamVector& params) {
  write_atomic(path, encode_checkpoint(params));
}
void write_trajectory(const std::filesystem::path& path, const Trajectory& trajectory) {
  write_atomic(path, encode_trajectory(trajectory));
}
void write_basis(const std::filesystem::path& path, const SubspaceBasis& basis) {
  write_atomic(path, encode_basis(basis));
}

ParamVector read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_bytes(path)); }
Trajectory read_trajectory(const std::filesystem::path& path) { return decode_trajectory(read_bytes(path)); }
SubspaceBasis read_basis(const std::filesystem::path& path) { return decode_basis(read_bytes(path)); }

std::string format_metrics(std::span<const MetricsRecord> metrics) {
  std::string out = kMetricsHeader;
  out += '\n';
  for (const MetricsRecord& r : metrics) {
    out += std::to_string(r.epoch) + ',' + std::to_string(r.step);
    for (double v : {r.lr, r.natural_train_acc, r.natural_val_acc, r.robust_train_acc, r.robust_val_acc,
                     r.batch_grad_norm, r.avg_sample_grad_norm}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<MetricsRecord> parse_metrics(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) throw ParseError("metrics header mismatch", 1);
  std::vector<MetricsRecord> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() != 9) throw ParseError("metrics row needs 9 fields", row);
    auto integer = [&](std::string_view f) {
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size()) throw ParseError("bad integer field", row);
      return v;
    };
    auto real = [&](std::string_view f) {
      double v = 0;
      const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || p != f.data() + f.size()) throw ParseError("bad numeric field", row);
      return v;
    };
    MetricsRecord r;
    r.epoch = integer(fields[0]);
    r.step = integer(fields[1]);
    r.lr = real(fields[2]);
    r.natural_train_acc = real(fields[3]);
    r.natural_val_acc = real(fields[4]);
    r.robust_train_acc = real(fields[5]);
    r.robust_val_acc = real(fields[6]);
    r.batch_grad_norm = real(fields[7]);
    r.avg_sample_grad_norm = real(fields[8]);
    out.push_back(r);
  }
  return out;
}

void write_metrics(const std::filesystem::path& path, std::span<const MetricsRecord> metrics) {
  write_atomic(path, format_metrics(metrics));
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  return parse_metrics(std::string(bytes.begin(), bytes.end()));
}

}  // namespace subat::io
