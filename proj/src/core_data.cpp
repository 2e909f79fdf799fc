#include "mmfuse/core_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"

namespace mmfuse {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

double parse_number(const std::string& cell, std::string_view field, const std::string& subject) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw Error(ErrorKind::kConfigError,
                "subject " + subject + ": field " + std::string(field) + " is not a number: '" +
                    cell + "'");
  }
  return v;
}

}  // namespace

ClassLabel parse_label(std::string_view text) {
  const std::string l = lower(text);
  if (l == "benign") return ClassLabel::kBenign;
  if (l == "borderline" || l == "malignant" || l == "borderline_malignant") {
    return ClassLabel::kBorderlineMalignant;
  }
  throw Error(ErrorKind::kConfigError, "unknown label '" + std::string(text) + "'");
}

std::string_view label_name(ClassLabel label) {
  return label == ClassLabel::kBenign ? "BENIGN" : "BORDERLINE_MALIGNANT";
}

int ClinicalSchema::total_dim() const {
  int dim = kNumNumericFeatures;
  for (const auto& c : categorical_specs) dim += static_cast<int>(c.categories.size());
  return dim;
}

int ClinicalSchema::block_offset(std::size_t i) const {
  int off = kNumNumericFeatures;
  for (std::size_t j = 0; j < i; ++j) off += static_cast<int>(categorical_specs[j].categories.size());
  return off;
}

std::vector<std::string> ClinicalSchema::feature_names() const {
  std::vector<std::string> names(numeric_names.begin(), numeric_names.end());
  for (const auto& spec : categorical_specs) {
    for (const auto& cat : spec.categories) names.push_back(spec.name + "=" + cat);
  }
  return names;
}

ClinicalSchema ClinicalSchema::default_schema() {
  ClinicalSchema s;
  s.categorical_specs = {
      {"race", {"white", "black", "other"}},
      {"menopausal_status", {"pre", "post"}},
      {"echogenicity", {"homogeneous", "heterogeneous"}},
  };
  return s;
}

NormalizerStats fit_normalizer(std::span<const SubjectRecord> records) {
  if (records.empty()) throw Error(ErrorKind::kEmptyInput, "fit_normalizer: no records");
  NormalizerStats stats;
  const double n = static_cast<double>(records.size());
  for (int f = 0; f < kNumNumericFeatures; ++f) {
    double sum = 0.0;
    for (const auto& r : records) sum += r.numeric()[f];
    const double mean = sum / n;
    double ss = 0.0;
    for (const auto& r : records) {
      const double d = r.numeric()[f] - mean;
      ss += d * d;
    }
    stats.mean[f] = mean;
    stats.sd[f] = std::sqrt(ss / n);
  }
  return stats;
}

ClinicalVector encode_clinical(const SubjectRecord& record, const ClinicalSchema& schema,
                               const NormalizerStats& stats) {
  if (schema.categorical_specs.size() != 3) {
    throw Error(ErrorKind::kConfigError, "schema must declare exactly three categorical features");
  }
  ClinicalVector out(static_cast<std::size_t>(schema.total_dim()), 0.0);
  const auto numeric = record.numeric();
  for (int f = 0; f < kNumNumericFeatures; ++f) {
    if (!std::isfinite(numeric[f])) {
      throw Error(ErrorKind::kMissingField,
                  "subject " + record.subject_id + ": " + schema.numeric_names[f] + " missing");
    }
    const double sd = stats.sd[f] > 0.0 ? stats.sd[f] : 1.0;
    out[f] = (numeric[f] - stats.mean[f]) / sd;
  }
  const auto cats = record.categorical();
  for (std::size_t c = 0; c < schema.categorical_specs.size(); ++c) {
    const auto& spec = schema.categorical_specs[c];
    if (cats[c].empty()) {
      throw Error(ErrorKind::kMissingField,
                  "subject " + record.subject_id + ": " + spec.name + " missing");
    }
    auto it = std::find(spec.categories.begin(), spec.categories.end(), cats[c]);
    if (it == spec.categories.end()) {
      throw Error(ErrorKind::kUnknownCategory, "subject " + record.subject_id + ": " + spec.name +
                                                   " value '" + std::string(cats[c]) +
                                                   "' not in schema");
    }
    out[schema.block_offset(c) + (it - spec.categories.begin())] = 1.0;
  }
  return out;
}

std::vector<std::string> decode_categoricals(std::span<const double> vector,
                                             const ClinicalSchema& schema) {
  if (static_cast<int>(vector.size()) != schema.total_dim()) {
    throw Error(ErrorKind::kShapeError, "clinical vector length does not match schema");
  }
  std::vector<std::string> out;
  for (std::size_t c = 0; c < schema.categorical_specs.size(); ++c) {
    const auto& spec = schema.categorical_specs[c];
    const int off = schema.block_offset(c);
    std::string value;
    for (std::size_t j = 0; j < spec.categories.size(); ++j) {
      if (vector[off + j] == 1.0) value = spec.categories[j];
    }
    out.push_back(value);
  }
  return out;
}

void validate_subjects(std::span<const SubjectRecord> records, const ClinicalSchema& schema) {
  std::unordered_set<std::string> seen;
  for (const auto& r : records) {
    if (!seen.insert(r.subject_id).second) {
      throw Error(ErrorKind::kConfigError, "duplicate subject_id '" + r.subject_id + "'");
    }
    for (double v : r.numeric()) {
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorKind::kConfigError,
                    "subject " + r.subject_id + ": numeric fields must be finite and non-negative");
      }
    }
    // encode_clinical performs the category membership checks.
    (void)encode_clinical(r, schema, NormalizerStats{{0, 0, 0}, {1, 1, 1}});
  }
}

std::vector<SubjectRecord> load_clinical_csv(const std::filesystem::path& path,
                                             const ClinicalSchema& schema) {
  const CsvTable table = read_csv(path);
  static constexpr std::array<std::string_view, 8> kColumns = {
      "subject_id", "label", "age_years", "bmi", "tumor_size",
      "race", "menopausal_status", "echogenicity"};
  std::array<std::size_t, kColumns.size()> idx{};
  for (std::size_t i = 0; i < kColumns.size(); ++i) {
    auto c = table.column(kColumns[i]);
    if (!c) {
      throw Error(ErrorKind::kMissingField,
                  path.string() + ": missing column '" + std::string(kColumns[i]) + "'");
    }
    idx[i] = *c;
  }
  std::vector<SubjectRecord> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    auto cell = [&](std::size_t i) -> const std::string& {
      static const std::string empty;
      return idx[i] < row.size() ? row[idx[i]] : empty;
    };
    const std::string& id = cell(0);
    for (std::size_t i = 0; i < kColumns.size(); ++i) {
      if (cell(i).empty()) {
        throw Error(ErrorKind::kMissingField, path.string() + ": subject '" + id + "' has no " +
                                                  std::string(kColumns[i]));
      }
    }
    SubjectRecord r;
    r.subject_id = id;
    r.label = parse_label(cell(1));
    r.age_years = parse_number(cell(2), kColumns[2], id);
    r.bmi = parse_number(cell(3), kColumns[3], id);
    r.tumor_size = parse_number(cell(4), kColumns[4], id);
    r.race = cell(5);
    r.menopausal_status = cell(6);
    r.echogenicity = cell(7);
    out.push_back(std::move(r));
  }
  validate_subjects(out, schema);
  return out;
}

void write_clinical_csv(const std::filesystem::path& path, std::span<const SubjectRecord> records) {
  CsvTable t;
  t.header = {"subject_id", "label", "age_years", "bmi", "tumor_size",
              "race", "menopausal_status", "echogenicity"};
  for (const auto& r : records) {
    t.rows.push_back({r.subject_id, is_positive(r.label) ? "malignant" : "benign",
                      format_double(r.age_years), format_double(r.bmi),
                      format_double(r.tumor_size), r.race, r.menopausal_status, r.echogenicity});
  }
  write_csv(path, t);
}

}  // namespace mmfuse
