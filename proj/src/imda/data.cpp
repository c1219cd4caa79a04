#include "imda/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "imda/error.hpp"
#include "imda/rng.hpp"

namespace imda {

Matrix LabeledSet::label_column() const {
  Matrix col(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) col(i, 0) = labels[i];
  return col;
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out{x.gather_rows(indices), {}};
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels[i]);
  return out;
}

std::vector<std::size_t> LabeledSet::class_counts(int num_classes) const {
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int l : labels) counts.at(static_cast<std::size_t>(l))++;
  return counts;
}

UnlabeledSet UnlabeledSet::subset(std::span<const std::size_t> indices) const {
  return {x.gather_rows(indices)};
}

UnlabeledSet strip_labels(const LabeledSet& set) { return {set.x}; }

std::vector<std::size_t> MultiSourceDataset::source_sizes() const {
  std::vector<std::size_t> sizes;
  for (const auto& s : sources) sizes.push_back(s.size());
  return sizes;
}

void MultiSourceDataset::validate() const {
  if (num_classes < 1) throw DataError("dataset: label set is empty");
  if (sources.empty()) throw DataError("dataset: no source domains");
  bool any = false;
  auto check = [&](const Matrix& x, const std::vector<int>* labels, const std::string& name) {
    if (x.rows() > 0 && x.cols() != feature_width)
      throw DataError(name + ": feature width " + std::to_string(x.cols()) + ", expected " +
                      std::to_string(feature_width));
    if (labels == nullptr) return;
    if (labels->size() != x.rows()) throw DataError(name + ": label count mismatch");
    for (int l : *labels)
      if (l < 0 || l >= num_classes)
        throw DataError(name + ": label " + std::to_string(l) + " outside the label set");
  };
  for (std::size_t i = 0; i < sources.size(); ++i) {
    check(sources[i].x, &sources[i].labels, "source " + std::to_string(i + 1));
    any = any || !sources[i].empty();
  }
  if (!any) throw DataError("dataset: every source domain is empty");
  check(target.x, &target.labels, "target");
  check(target_unlabeled.x, nullptr, "unlabeled target");
  check(target_test.x, &target_test.labels, "target test");
}

LabeledSet sample_gaussian_domain(const GaussianDomain& domain, std::size_t size,
                                  std::uint64_t seed, std::uint64_t domain_tag) {
  const std::size_t classes = domain.class_means.size();
  if (classes == 0) throw DataError("gaussian domain: no classes");
  if (domain.class_prior.size() != classes)
    throw DataError("gaussian domain: prior length differs from class count");
  double total = 0.0;
  for (double p : domain.class_prior) {
    if (!(p >= 0.0)) throw DataError("gaussian domain: negative class prior");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw DataError("gaussian domain: prior not on the simplex");
  const std::size_t width = domain.stddev.size();
  for (const auto& m : domain.class_means)
    if (m.size() != width) throw DataError("gaussian domain: mean width differs from stddev");

  Rng rng = make_stream(seed, {kStreamData, domain_tag});
  std::discrete_distribution<int> pick_class(domain.class_prior.begin(), domain.class_prior.end());
  std::normal_distribution<double> normal;
  LabeledSet out{Matrix(size, width), std::vector<int>(size)};
  for (std::size_t i = 0; i < size; ++i) {
    const int c = pick_class(rng);
    out.labels[i] = c;
    auto row = out.x.row(i);
    for (std::size_t f = 0; f < width; ++f)
      row[f] = domain.class_means[static_cast<std::size_t>(c)][f] + domain.stddev[f] * normal(rng);
  }
  return out;
}

MultiSourceDataset gen_gaussian_sources(const GaussianSuiteSpec& spec) {
  if (spec.sources.size() != spec.source_sizes.size())
    throw DataError("gaussian suite: one size per source required");
  MultiSourceDataset ds;
  ds.num_classes = static_cast<int>(spec.target.class_means.size());
  ds.feature_width = spec.target.stddev.size();
  for (std::size_t i = 0; i < spec.sources.size(); ++i) {
    if (spec.sources[i].class_means.size() != spec.target.class_means.size())
      throw DataError("gaussian suite: class count differs between domains");
    ds.sources.push_back(sample_gaussian_domain(spec.sources[i], spec.source_sizes[i], spec.seed, 100 + i));
  }
  ds.target = sample_gaussian_domain(spec.target, spec.target_labeled, spec.seed, 1);
  ds.target_unlabeled =
      strip_labels(sample_gaussian_domain(spec.target, spec.target_unlabeled, spec.seed, 2));
  ds.target_test = sample_gaussian_domain(spec.target, spec.target_test, spec.seed, 3);
  ds.validate();
  return ds;
}

LabeledSet drop_classes(const LabeledSet& set, const ShiftSpec& spec, std::uint64_t set_tag) {
  if (!(spec.drop_rate >= 0.0 && spec.drop_rate < 1.0))
    throw DataError("target shift: drop rate must lie in [0, 1)");
  if (spec.drop_rate == 0.0 || spec.drop_classes.empty()) return set;

  Rng rng = make_stream(spec.seed, {kStreamShift, set_tag});
  std::vector<char> keep(set.size(), 1);
  for (int cls : spec.drop_classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < set.size(); ++i)
      if (set.labels[i] == cls) members.push_back(i);
    if (members.empty()) continue;
    const auto kept = static_cast<std::size_t>(
        std::ceil((1.0 - spec.drop_rate) * static_cast<double>(members.size()) - 1e-9));
    if (kept == 0)
      throw DataError("target shift: class " + std::to_string(cls) + " would become empty");
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = kept; k < members.size(); ++k) keep[members[k]] = 0;
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < set.size(); ++i)
    if (keep[i]) order.push_back(i);
  std::shuffle(order.begin(), order.end(), rng);
  return set.subset(order);
}

MultiSourceDataset apply_target_shift(const MultiSourceDataset& dataset, const ShiftSpec& spec) {
  for (int c : spec.drop_classes)
    if (c < 0 || c >= dataset.num_classes)
      throw DataError("target shift: class " + std::to_string(c) + " outside the label set");
  MultiSourceDataset out = dataset;
  if (spec.apply_to == ShiftTarget::kSources) {
    for (std::size_t i = 0; i < out.sources.size(); ++i)
      out.sources[i] = drop_classes(dataset.sources[i], spec, 100 + i);
  } else {
    out.target = drop_classes(dataset.target, spec, 1);
    out.target_test = drop_classes(dataset.target_test, spec, 3);
  }
  return out;
}

GaussianSuiteSpec SyntheticBenchmark::suite() const {
  if (source_angles_deg.size() != num_sources)
    throw ConfigError("synthetic benchmark: one angle per source required");
  constexpr double kPi = 3.14159265358979323846;
  auto domain = [&](double angle_deg) {
    const double a = angle_deg * kPi / 180.0;
    const double cx = class_separation * std::cos(a);
    const double cy = class_separation * std::sin(a);
    GaussianDomain d;
    d.class_means = {{-cx, -cy}, {cx, cy}};
    d.stddev = {noise, noise};
    d.class_prior = {0.5, 0.5};
    return d;
  };
  GaussianSuiteSpec spec;
  for (double angle : source_angles_deg) {
    spec.sources.push_back(domain(angle));
    spec.source_sizes.push_back(domain_size);
  }
  spec.target = domain(target_angle_deg);
  spec.target_labeled = target_labeled;
  spec.target_unlabeled = target_unlabeled;
  spec.target_test = target_test;
  spec.seed = seed;
  return spec;
}

MultiSourceDataset SyntheticBenchmark::build() const {
  MultiSourceDataset ds = gen_gaussian_sources(suite());
  ShiftSpec shift{drop_classes, drop_rate, shift_apply_to, seed};
  return apply_target_shift(ds, shift);
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& where) {
  const std::string t = trim(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw DataError(where + ": '" + t + "' is not a number");
  }
  if (used != t.size()) throw DataError(where + ": '" + t + "' is not a number");
  return v;
}

struct RawCsv {
  bool has_label = false;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<int> labels;
};

RawCsv read_csv(const std::string& path, bool label_required) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": missing header row");
  auto header = split_fields(line);
  for (auto& h : header) h = trim(h);
  RawCsv raw;
  raw.has_label = !header.empty() && header.front() == "label";
  if (label_required && !raw.has_label)
    throw DataError(path + ":1: header must start with 'label'");
  const std::size_t first_feature = raw.has_label ? 1 : 0;
  raw.width = header.size() - first_feature;
  for (std::size_t f = 0; f < raw.width; ++f)
    if (header[first_feature + f] != "f" + std::to_string(f))
      throw DataError(path + ":1: expected column 'f" + std::to_string(f) + "', found '" +
                      header[first_feature + f] + "'");

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (fields.size() != header.size())
      throw DataError(where + ": " + std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    if (raw.has_label) {
      const double l = parse_double(fields[0], where);
      if (l != std::floor(l) || l < 0 || l > 1e9)
        throw DataError(where + ": label '" + trim(fields[0]) + "' is not a non-negative integer");
      raw.labels.push_back(static_cast<int>(l));
    }
    for (std::size_t f = first_feature; f < fields.size(); ++f)
      raw.values.push_back(parse_double(fields[f], where));
  }
  return raw;
}

}  // namespace

LabeledSet load_csv(const std::string& path, CsvReport* report) {
  RawCsv raw = read_csv(path, true);
  const std::size_t rows = raw.labels.size();
  LabeledSet out{Matrix(rows, raw.width, std::move(raw.values)), std::move(raw.labels)};
  if (report) *report = {rows, raw.width};
  return out;
}

UnlabeledSet load_unlabeled_csv(const std::string& path, CsvReport* report) {
  RawCsv raw = read_csv(path, false);
  const std::size_t rows = raw.width == 0 ? 0 : raw.values.size() / raw.width;
  if (report) *report = {rows, raw.width};
  return {Matrix(rows, raw.width, std::move(raw.values))};
}

void write_csv(const std::string& path, const LabeledSet& set) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.precision(17);
  out << "label";
  for (std::size_t f = 0; f < set.x.cols(); ++f) out << ",f" << f;
  out << "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    out << set.labels[i];
    for (double v : set.x.row(i)) out << "," << v;
    out << "\n";
  }
}

BatchStream::BatchStream(std::size_t set_size, std::size_t batch_size, std::uint64_t seed,
                         std::uint64_t set_tag)
    : set_size_(set_size), batch_size_(batch_size), seed_(seed), set_tag_(set_tag) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (set_size > 0 && batch_size > set_size) {
    batch_size_ = set_size;
    clipped_ = true;
  }
}

std::size_t BatchStream::batches_per_epoch() const {
  if (set_size_ == 0) return 0;
  return (set_size_ + batch_size_ - 1) / batch_size_;
}

std::vector<std::vector<std::size_t>> BatchStream::epoch(std::uint64_t pass) const {
  std::vector<std::size_t> perm(set_size_);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = make_stream(seed_, {kStreamBatches, set_tag_, pass});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < set_size_; start += batch_size_) {
    const std::size_t end = std::min(set_size_, start + batch_size_);
    batches.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start),
                         perm.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

BatchCycler::BatchCycler(std::size_t set_size, std::size_t batch_size, std::uint64_t seed,
                         std::uint64_t set_tag)
    : stream_(set_size, batch_size, seed, set_tag) {
  if (set_size == 0) throw DataError("batch cycler over an empty set");
}

const std::vector<std::size_t>& BatchCycler::next() {
  if (position_ >= current_.size()) {
    current_ = stream_.epoch(pass_++);
    position_ = 0;
  }
  return current_[position_++];
}

}  // namespace imda
