#include "subat/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "subat/error.hpp"
#include "subat/rng.hpp"

namespace subat {

namespace {

constexpr int kMaxPrototypeTries = 10000;

double parse_number(std::string_view field, std::size_t row) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
    field.remove_suffix(1);
  }
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v)) {
    throw ParseError("non-numeric field '" + std::string(field) + "'", row);
  }
  return v;
}

}  // namespace

void Dataset::validate() const {
  if (labels.empty()) throw DataError("dataset '" + name + "' is empty");
  if (inputs.rank() != 2 || inputs.rows() != labels.size()) {
    throw DimensionError("dataset '" + name + "': inputs do not match label count");
  }
  for (double v : inputs.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw DataError("dataset '" + name + "': input outside [0, 1]");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw DataError("dataset '" + name + "': label " + std::to_string(y) + " out of range");
    }
  }
}

Batch Dataset::gather(std::span<const std::size_t> rows) const {
  const std::size_t d = dim();
  std::vector<double> values;
  values.reserve(rows.size() * d);
  std::vector<int> ys;
  ys.reserve(rows.size());
  for (std::size_t r : rows) {
    const auto src = inputs.row(r);
    values.insert(values.end(), src.begin(), src.end());
    ys.push_back(labels[r]);
  }
  return Batch{Tensor({rows.size(), d}, std::move(values)), std::move(ys)};
}

Batch Dataset::all() const { return Batch{inputs, labels}; }

Dataset gen_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ParameterError("synthetic data needs at least 2 classes");
  if (spec.dim < 2) throw ParameterError("synthetic data needs dimension >= 2");
  if (spec.per_class == 0) throw ParameterError("synthetic data needs per_class >= 1");
  if (!(spec.noise >= 0.0)) throw ParameterError("synthetic noise must be >= 0");

  const RngStream root(spec.seed);
  RngStream proto_rng = root.split(1);
  std::vector<std::vector<double>> prototypes;
  int tries = 0;
  while (prototypes.size() < spec.classes) {
    if (++tries > kMaxPrototypeTries) {
      throw DataError("cannot place " + std::to_string(spec.classes) +
                      " prototypes with l-inf margin " + std::to_string(spec.margin) +
                      " in dimension " + std::to_string(spec.dim));
    }
    std::vector<double> p(spec.dim);
    for (double& v : p) v = proto_rng.uniform(0.2, 0.8);
    const bool separated = std::all_of(prototypes.begin(), prototypes.end(), [&](const auto& q) {
      double dist = 0.0;
      for (std::size_t j = 0; j < spec.dim; ++j) dist = std::max(dist, std::abs(p[j] - q[j]));
      return dist >= spec.margin;
    });
    if (separated) prototypes.push_back(std::move(p));
  }

  const std::size_t m = spec.classes * spec.per_class;
  std::vector<double> values;
  values.reserve(m * spec.dim);
  std::vector<int> labels;
  labels.reserve(m);
  RngStream noise_rng = root.split(2);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      for (std::size_t j = 0; j < spec.dim; ++j) {
        values.push_back(std::clamp(prototypes[c][j] + spec.noise * noise_rng.normal(), 0.0, 1.0));
      }
      labels.push_back(static_cast<int>(c));
    }
  }
  Dataset out{Tensor({m, spec.dim}, std::move(values)), std::move(labels), spec.classes,
              "synthetic(seed=" + std::to_string(spec.seed) + ")"};
  return out;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t width = 0;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string_view> fields;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      fields.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (fields.size() < 2) throw ParseError("row needs a label and at least one pixel", row);
    if (width == 0) width = fields.size() - 1;
    if (fields.size() - 1 != width) {
      throw ParseError("ragged row: expected " + std::to_string(width) + " pixels, got " +
                           std::to_string(fields.size() - 1),
                       row);
    }
    const double label = parse_number(fields[0], row);
    if (label < 0.0 || label != std::floor(label)) throw ParseError("label must be a non-negative integer", row);
    labels.push_back(static_cast<int>(label));
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const double p = parse_number(fields[k], row);
      if (p < 0.0 || p > 255.0) throw ParseError("pixel outside 0..255", row);
      values.push_back(p / 255.0);
    }
  }
  if (labels.empty()) throw DataError("'" + path.string() + "' contains no rows");
  const int max_label = *std::max_element(labels.begin(), labels.end());
  const std::size_t m = labels.size();
  return Dataset{Tensor({m, width}, std::move(values)), std::move(labels),
                 static_cast<std::size_t>(max_label) + 1, path.filename().string()};
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << data.labels[i];
    for (double v : data.inputs.row(i)) out << ',' << static_cast<int>(std::lround(v * 255.0));
    out << '\n';
  }
  std::ofstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot write '" + path.string() + "'");
  file << out.str();
  if (!file) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint64_t key) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  RngStream rng = RngStream(seed).split(key);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("split ratio must lie in (0, 1)");
  const std::size_t m = data.size();
  const auto n_train = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(m)));
  if (n_train == 0 || n_train == m) {
    throw ParameterError("split of " + std::to_string(m) + " rows at ratio " + std::to_string(ratio) +
                         " leaves one side empty");
  }
  const std::vector<std::size_t> order = shuffled_indices(m, seed, 0x73706c6974);  // "split"
  const std::span<const std::size_t> all(order);
  Batch train = data.gather(all.first(n_train));
  Batch val = data.gather(all.subspan(n_train));
  return {Dataset{std::move(train.inputs), std::move(train.labels), data.classes, data.name + "/train"},
          Dataset{std::move(val.inputs), std::move(val.labels), data.classes, data.name + "/val"}};
}

}  // namespace subat
