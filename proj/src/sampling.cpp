#include "mmfuse/sampling.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <numeric>
#include <set>
#include <tuple>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"

namespace mmfuse {

std::vector<std::string> FoldPlan::subjects_in_fold(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : assignments) {
    if (f == fold) out.push_back(id);
  }
  return out;
}

FoldPlan make_folds(std::span<const SubjectRecord> subjects, int k, std::uint64_t seed,
                    const std::unordered_map<std::string, int>& image_counts) {
  if (k < 2) throw Error(ErrorKind::kConfigError, "make_folds: k must be >= 2");
  if (subjects.empty()) throw Error(ErrorKind::kEmptyInput, "make_folds: no subjects");

  struct Entry {
    std::string id;
    int images;
  };
  std::array<std::vector<Entry>, kNumClasses> by_class;
  std::set<std::string> seen;
  for (const auto& s : subjects) {
    if (!seen.insert(s.subject_id).second) {
      throw Error(ErrorKind::kConfigError, "make_folds: duplicate subject " + s.subject_id);
    }
    auto it = image_counts.find(s.subject_id);
    by_class[label_index(s.label)].push_back({s.subject_id, it == image_counts.end() ? 1 : it->second});
  }

  // Minority class first so the majority fill evens out fold sizes.
  std::array<int, kNumClasses> order{0, 1};
  if (by_class[1].size() < by_class[0].size()) order = {1, 0};

  Rng rng(derive_seed(seed, {0x666f6c64ULL}));
  std::vector<std::array<int, kNumClasses>> class_count(k, {0, 0});
  std::vector<int> subject_count(k, 0);
  std::vector<long> image_count(k, 0);

  FoldPlan plan;
  plan.k = k;
  for (int c : order) {
    auto& entries = by_class[c];
    // Shuffle first so equal image counts are ordered by seed, not input order.
    rng.shuffle(std::span<Entry>(entries));
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.images > b.images; });
    for (const auto& e : entries) {
      int best = 0;
      for (int f = 1; f < k; ++f) {
        const auto key = [&](int g) {
          return std::make_tuple(class_count[g][c], subject_count[g], image_count[g]);
        };
        if (key(f) < key(best)) best = f;
      }
      plan.assignments[e.id] = best;
      class_count[best][c] += 1;
      subject_count[best] += 1;
      image_count[best] += e.images;
    }
  }
  for (int f = 0; f < k; ++f) {
    if (class_count[f][1] == 0) plan.folds_without_positives.push_back(f);
  }
  return plan;
}

FoldPlanCheck check_fold_plan(const FoldPlan& plan, std::span<const SubjectRecord> subjects) {
  FoldPlanCheck check;
  if (plan.k < 2) {
    check.partition_ok = false;
    check.problems.push_back("k < 2");
    return check;
  }
  std::vector<std::array<int, kNumClasses>> counts(plan.k, {0, 0});
  std::set<std::string> ids;
  for (const auto& s : subjects) {
    ids.insert(s.subject_id);
    auto it = plan.assignments.find(s.subject_id);
    if (it == plan.assignments.end()) {
      check.partition_ok = false;
      check.problems.push_back("subject " + s.subject_id + " unassigned");
      continue;
    }
    if (it->second < 0 || it->second >= plan.k) {
      check.partition_ok = false;
      check.problems.push_back("subject " + s.subject_id + " has out-of-range fold");
      continue;
    }
    counts[it->second][label_index(s.label)] += 1;
  }
  for (const auto& [id, f] : plan.assignments) {
    if (!ids.count(id)) {
      check.partition_ok = false;
      check.problems.push_back("plan lists unknown subject " + id);
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    int lo = counts[0][c];
    int hi = counts[0][c];
    for (const auto& fc : counts) {
      lo = std::min(lo, fc[c]);
      hi = std::max(hi, fc[c]);
    }
    if (hi - lo > 1) {
      check.stratification_ok = false;
      check.problems.push_back("class " + std::to_string(c) + " fold counts differ by " +
                               std::to_string(hi - lo));
    }
  }
  for (int f = 0; f < plan.k; ++f) {
    if (counts[f][1] == 0) check.folds_without_positives.push_back(f);
  }
  return check;
}

void write_folds_csv(const std::filesystem::path& path, const FoldPlan& plan) {
  CsvTable t;
  t.header = {"subject_id", "fold"};
  for (const auto& [id, f] : plan.assignments) t.rows.push_back({id, std::to_string(f)});
  write_csv(path, t);
}

FoldPlan read_folds_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto id_col = t.column("subject_id");
  const auto fold_col = t.column("fold");
  if (!id_col || !fold_col) {
    throw Error(ErrorKind::kMissingField, path.string() + ": expected subject_id,fold columns");
  }
  FoldPlan plan;
  int max_fold = -1;
  for (const auto& row : t.rows) {
    int f = 0;
    const auto& cell = row.at(*fold_col);
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), f);
    if (ec != std::errc() || f < 0) {
      throw Error(ErrorKind::kConfigError, path.string() + ": bad fold index '" + cell + "'");
    }
    plan.assignments[row.at(*id_col)] = f;
    max_fold = std::max(max_fold, f);
  }
  plan.k = max_fold + 1;
  return plan;
}

ClassAwareSampler::ClassAwareSampler(std::vector<std::vector<std::size_t>> ids_by_class,
                                     std::uint64_t seed)
    : lists_(std::move(ids_by_class)), cursors_(lists_.size(), 0), rng_(seed) {
  if (lists_.empty()) throw Error(ErrorKind::kEmptyClass, "sampler needs at least one class");
  for (std::size_t c = 0; c < lists_.size(); ++c) {
    if (lists_[c].empty()) {
      throw Error(ErrorKind::kEmptyClass, "class " + std::to_string(c) + " has no samples");
    }
    rng_.shuffle(std::span<std::size_t>(lists_[c]));
  }
}

std::size_t ClassAwareSampler::next() {
  const auto c = static_cast<std::size_t>(rng_.below(lists_.size()));
  auto& list = lists_[c];
  if (cursors_[c] == list.size()) {
    rng_.shuffle(std::span<std::size_t>(list));
    cursors_[c] = 0;
  }
  return list[cursors_[c]++];
}

std::vector<std::size_t> ClassAwareSampler::next_batch(std::size_t batch_size) {
  if (batch_size < 1) throw Error(ErrorKind::kConfigError, "batch_size must be >= 1");
  std::vector<std::size_t> batch(batch_size);
  for (auto& id : batch) id = next();
  return batch;
}

std::vector<std::vector<std::size_t>> group_by_class(std::span<const ClassLabel> labels) {
  std::vector<std::vector<std::size_t>> groups(kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) groups[label_index(labels[i])].push_back(i);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

std::vector<std::size_t> RandomSampler::next_batch(std::size_t batch_size) {
  std::vector<std::size_t> batch(batch_size);
  for (auto& id : batch) id = static_cast<std::size_t>(rng_.below(n_));
  return batch;
}

std::size_t epoch_length(std::size_t dataset_size, std::size_t batch_size) {
  if (dataset_size < 1 || batch_size < 1) {
    throw Error(ErrorKind::kConfigError, "epoch_length: sizes must be >= 1");
  }
  return (dataset_size + batch_size - 1) / batch_size;
}

}  // namespace mmfuse
