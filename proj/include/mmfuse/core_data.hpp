#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmfuse {

// Borderline and malignant lesions are merged into one positive class.
enum class ClassLabel : int { kBenign = 0, kBorderlineMalignant = 1 };

inline constexpr int kNumClasses = 2;

inline bool is_positive(ClassLabel label) { return label == ClassLabel::kBorderlineMalignant; }
inline int label_index(ClassLabel label) { return static_cast<int>(label); }

// Accepts "benign", "borderline", "malignant" (case-insensitive) and the
// canonical names "BENIGN" / "BORDERLINE_MALIGNANT". Throws ConfigError.
ClassLabel parse_label(std::string_view text);
std::string_view label_name(ClassLabel label);

inline constexpr int kNumNumericFeatures = 3;

struct SubjectRecord {
  std::string subject_id;
  ClassLabel label = ClassLabel::kBenign;
  double age_years = 0.0;
  double bmi = 0.0;
  double tumor_size = 0.0;  // cm
  std::string race;
  std::string menopausal_status;
  std::string echogenicity;

  std::array<double, kNumNumericFeatures> numeric() const { return {age_years, bmi, tumor_size}; }
  std::array<std::string_view, 3> categorical() const {
    return {race, menopausal_status, echogenicity};
  }
};

struct CategoricalSpec {
  std::string name;
  std::vector<std::string> categories;
};

// Layout of the encoded clinical vector: numeric slots first, then one
// one-hot block per categorical feature, in declaration order.
struct ClinicalSchema {
  std::array<std::string, kNumNumericFeatures> numeric_names{"age_years", "bmi", "tumor_size"};
  std::vector<CategoricalSpec> categorical_specs;

  // 3 + sum of category counts.
  int total_dim() const;
  // Offset of the one-hot block for categorical feature `i`.
  int block_offset(std::size_t i) const;
  // Human-readable slot names ("age_years", "race=white", ...).
  std::vector<std::string> feature_names() const;

  // race (3), menopausal_status (2), echogenicity (2): total_dim == 10.
  static ClinicalSchema default_schema();
};

using ClinicalVector = std::vector<double>;

struct NormalizerStats {
  std::array<double, kNumNumericFeatures> mean{};
  std::array<double, kNumNumericFeatures> sd{};
};

// Population mean / sd of each numeric field. Throws EmptyInput.
NormalizerStats fit_normalizer(std::span<const SubjectRecord> records);

// z-scores numerics (sd 0 treated as 1) and one-hot encodes categoricals.
// Throws UnknownCategory, MissingField.
ClinicalVector encode_clinical(const SubjectRecord& record, const ClinicalSchema& schema,
                               const NormalizerStats& stats);

// Recovers the categorical values from the one-hot blocks of an encoded vector.
std::vector<std::string> decode_categoricals(std::span<const double> vector,
                                             const ClinicalSchema& schema);

// Throws ConfigError on duplicate ids, non-finite or negative numerics, or
// categories outside the schema.
void validate_subjects(std::span<const SubjectRecord> records, const ClinicalSchema& schema);

// Columns: subject_id, label, age_years, bmi, tumor_size, race,
// menopausal_status, echogenicity. Empty cells raise MissingField.
std::vector<SubjectRecord> load_clinical_csv(const std::filesystem::path& path,
                                             const ClinicalSchema& schema);
void write_clinical_csv(const std::filesystem::path& path, std::span<const SubjectRecord> records);

}  // namespace mmfuse
