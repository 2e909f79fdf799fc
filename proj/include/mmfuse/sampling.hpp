#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmfuse/core_data.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

// Subject-level k-fold partition. Images inherit their subject's fold.
struct FoldPlan {
  int k = 0;
  std::map<std::string, int> assignments;  // subject_id -> fold
  // Folds that received no positive subject (cannot produce an AUC).
  std::vector<int> folds_without_positives;

  bool has_warning() const { return !folds_without_positives.empty(); }
  std::vector<std::string> subjects_in_fold(int fold) const;
};

// Stratified assignment: within each class (minority first) subjects are
// shuffled by `seed`, stable-sorted by descending image count, then each is
// dealt to the fold with the fewest subjects of its class, breaking ties by
// fewest subjects overall, then fewest images, then lowest index.
// `image_counts` may omit subjects (counted as 1 image).
FoldPlan make_folds(std::span<const SubjectRecord> subjects, int k, std::uint64_t seed,
                    const std::unordered_map<std::string, int>& image_counts = {});

struct FoldPlanCheck {
  bool partition_ok = true;        // every subject in exactly one valid fold
  bool stratification_ok = true;   // per-class fold counts within +-1
  std::vector<int> folds_without_positives;
  std::vector<std::string> problems;
  bool ok() const { return partition_ok && stratification_ok; }
};

// Independent verifier for the FoldPlan invariants.
FoldPlanCheck check_fold_plan(const FoldPlan& plan, std::span<const SubjectRecord> subjects);

void write_folds_csv(const std::filesystem::path& path, const FoldPlan& plan);
FoldPlan read_folds_csv(const std::filesystem::path& path);

// Two-stage class-aware sampler: a class is drawn uniformly, then the next id
// from that class's shuffled list; a list is reshuffled once exhausted.
class ClassAwareSampler {
 public:
  // `ids_by_class[c]` holds the sample ids of class c. Throws EmptyClass.
  ClassAwareSampler(std::vector<std::vector<std::size_t>> ids_by_class, std::uint64_t seed);

  std::vector<std::size_t> next_batch(std::size_t batch_size);
  std::size_t next();

  std::size_t num_classes() const { return lists_.size(); }
  const std::vector<std::size_t>& class_list(std::size_t c) const { return lists_[c]; }
  std::size_t cursor(std::size_t c) const { return cursors_[c]; }

 private:
  std::vector<std::vector<std::size_t>> lists_;
  std::vector<std::size_t> cursors_;
  Rng rng_;
};

// Groups sample indices by label (class 0 = benign, 1 = positive), dropping
// classes with no samples.
std::vector<std::vector<std::size_t>> group_by_class(std::span<const ClassLabel> labels);

// Plain uniform sampling with replacement; the imbalance control.
class RandomSampler {
 public:
  RandomSampler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {}
  std::vector<std::size_t> next_batch(std::size_t batch_size);

 private:
  std::size_t n_;
  Rng rng_;
};

// ceil(dataset_size / batch_size).
std::size_t epoch_length(std::size_t dataset_size, std::size_t batch_size);

}  // namespace mmfuse
