#include "gcl/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gcl/errors.hpp"
#include "gcl/text.hpp"

namespace gcl {

void validate_dataset(const Dataset& ds) {
  if (ds.features.rows != static_cast<int>(ds.labels.size())) {
    throw DataError("dataset '" + ds.name + "': feature rows and label count differ");
  }
  std::vector<std::int64_t> hist(ds.counts.size(), 0);
  for (int y : ds.labels) {
    if (y < 0 || y >= ds.classes()) {
      throw DataError("dataset '" + ds.name + "': label out of range");
    }
    hist[y] += 1;
  }
  if (hist != ds.counts) {
    throw DataError("dataset '" + ds.name + "': counts do not match the label histogram");
  }
  require_finite(ds.features, "dataset features");
}

std::vector<std::int64_t> longtail_counts(const LongTailSpec& spec) {
  if (spec.classes < 2) throw DomainError("longtail_counts: need at least 2 classes");
  if (!(spec.gamma >= 1.0)) throw DomainError("longtail_counts: gamma must be >= 1");
  if (spec.head < 1) throw DomainError("longtail_counts: head count must be >= 1");
  const double mu = std::pow(spec.gamma, -1.0 / static_cast<double>(spec.classes - 1));
  std::vector<std::int64_t> counts(spec.classes);
  counts[0] = spec.head;
  for (int i = 1; i < spec.classes; ++i) {
    counts[i] = std::llround(static_cast<double>(spec.head) * std::pow(mu, i));
    if (counts[i] < 1) {
      throw DomainError("longtail_counts: class " + std::to_string(i) +
                        " rounds to zero samples (head too small for gamma)");
    }
  }
  return counts;
}

Tensor2 blob_centers(const RngStream& base, const BlobSpec& spec) {
  if (spec.classes < 2) throw DomainError("blobs: need at least 2 classes");
  if (spec.dim < 2) throw DomainError("blobs: dim must be >= 2");
  RngStream rng = base.child("centers");
  Tensor2 centers(spec.classes, spec.dim);
  for (double& v : centers.data) v = rng.next_gaussian(0.0, spec.center_scale);
  return centers;
}

Dataset synth_blobs(const RngStream& base, const BlobSpec& spec,
                    const std::vector<std::int64_t>& counts, std::string_view noise_label) {
  if (static_cast<int>(counts.size()) != spec.classes) {
    throw ShapeError("synth_blobs: counts length does not match class count");
  }
  const Tensor2 centers = blob_centers(base, spec);
  RngStream noise = base.child(noise_label);
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw DomainError("synth_blobs: negative count");
    total += c;
  }
  Dataset ds;
  ds.name = "blobs";
  ds.counts = counts;
  ds.features = Tensor2(static_cast<int>(total), spec.dim);
  ds.labels.resize(static_cast<std::size_t>(total));
  int row = 0;
  for (int j = 0; j < spec.classes; ++j) {
    for (std::int64_t r = 0; r < counts[j]; ++r) {
      for (int d = 0; d < spec.dim; ++d) {
        ds.features.at(row, d) = centers.at(j, d) + noise.next_gaussian(0.0, spec.noise_std);
      }
      ds.labels[row] = j;
      ++row;
    }
  }
  return ds;
}

Dataset balanced_test_split(const RngStream& base, const BlobSpec& spec, int per_class) {
  if (per_class < 1) throw DomainError("balanced_test_split: per_class must be >= 1");
  std::vector<std::int64_t> counts(spec.classes, per_class);
  Dataset ds = synth_blobs(base, spec, counts, "test-noise");
  ds.name = "blobs-test";
  return ds;
}

namespace {

double parse_double_cell(const std::string& cell, const std::string& path, std::size_t line,
                         int col) {
  const std::string_view sv = trim(cell);
  double v = 0.0;
  const auto* first = sv.data();
  const auto* last = sv.data() + sv.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(path + ":" + std::to_string(line) + ": column " + std::to_string(col + 1) +
                     " is not a finite number ('" + cell + "')");
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ":1: empty file");
  const auto header = split(trim(line), ',');
  if (header.size() < 2 || trim(header.back()) != "label") {
    throw ParseError(path + ":1: header must end with a 'label' column");
  }
  const int dim = static_cast<int>(header.size()) - 1;

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view sv = trim(line);
    if (sv.empty()) continue;
    const auto cells = split(sv, ',');
    if (static_cast<int>(cells.size()) != dim + 1) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(dim + 1) + " fields, got " + std::to_string(cells.size()));
    }
    for (int c = 0; c < dim; ++c) values.push_back(parse_double_cell(cells[c], path, line_no, c));
    const std::string_view ls = trim(cells.back());
    long long y = -1;
    const auto* first = ls.data();
    const auto* last = ls.data() + ls.size();
    auto [ptr, ec] = std::from_chars(first, last, y);
    if (ec != std::errc() || ptr != last || y < 0) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": label must be a non-negative integer ('" +
                       std::string(ls) + "')");
    }
    labels.push_back(static_cast<int>(y));
  }
  if (labels.empty()) throw ParseError(path + ": no data rows");

  Dataset ds;
  ds.name = path;
  ds.features = Tensor2(static_cast<int>(labels.size()), dim);
  ds.features.data = std::move(values);
  ds.labels = std::move(labels);
  const int classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  ds.counts.assign(classes, 0);
  for (int y : ds.labels) ds.counts[y] += 1;
  validate_dataset(ds);
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  for (int d = 0; d < ds.dim(); ++d) out << "f" << d << ",";
  out << "label\n";
  for (int i = 0; i < ds.size(); ++i) {
    for (int d = 0; d < ds.dim(); ++d) out << fmt_g17(ds.features.at(i, d)) << ",";
    out << ds.labels[i] << "\n";
  }
  if (!out) throw DataError("write to '" + path + "' failed");
}

double imbalance_ratio(const std::vector<std::int64_t>& counts) {
  if (counts.empty()) throw DomainError("imbalance_ratio: no classes");
  std::int64_t lo = counts[0];
  std::int64_t hi = counts[0];
  for (std::int64_t c : counts) {
    if (c < 1) throw DomainError("imbalance_ratio: empty class");
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return static_cast<double>(hi) / static_cast<double>(lo);
}

double imbalance_ratio(const Dataset& ds) { return imbalance_ratio(ds.counts); }

std::string dataset_summary(const Dataset& ds) {
  std::ostringstream out;
  out << "dataset: " << ds.name << "\n";
  out << "samples: " << ds.size() << "  dim: " << ds.dim() << "  classes: " << ds.classes()
      << "\n";
  out << "imbalance ratio: " << fmt_g17(imbalance_ratio(ds)) << "\n";
  out << "per-class counts:";
  for (std::int64_t c : ds.counts) out << " " << c;
  out << "\n";
  return out.str();
}

}  // namespace gcl
