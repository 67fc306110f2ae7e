#include "mvkm/data.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "mvkm/errors.hpp"
#include "mvkm/rng.hpp"

namespace mvkm {

Dataset::Dataset(std::vector<ViewSpec> views, std::vector<std::string> student_ids,
                 std::vector<InteractionRecord> records)
    : views_(std::move(views)),
      student_ids_(std::move(student_ids)),
      records_(std::move(records)) {
  validate_and_index();
}

void Dataset::validate_and_index() {
  for (std::size_t r = 0; r < views_.size(); ++r) {
    auto& v = views_[r];
    if (v.id != static_cast<int>(r)) {
      throw IntegrityError("view '" + v.name + "' has id " + std::to_string(v.id) +
                           ", expected " + std::to_string(r));
    }
    if (v.num_materials < 1) {
      throw IntegrityError("view '" + v.name + "' has no materials");
    }
    if (v.material_ids.empty()) {
      for (Index p = 0; p < v.num_materials; ++p) v.material_ids.push_back(std::to_string(p));
    }
    if (static_cast<Index>(v.material_ids.size()) != v.num_materials) {
      throw IntegrityError("view '" + v.name + "': material id registry size mismatch");
    }
    for (std::size_t q = 0; q < r; ++q) {
      if (views_[q].name == v.name) throw IntegrityError("duplicate view name '" + v.name + "'");
    }
  }

  const auto num_students = static_cast<Index>(student_ids_.size());
  for (const auto& rec : records_) {
    if (rec.student < 0 || rec.student >= num_students) {
      throw IntegrityError("record student index " + std::to_string(rec.student) +
                           " out of range");
    }
    if (rec.view < 0 || rec.view >= num_views()) {
      throw IntegrityError("record view index " + std::to_string(rec.view) + " out of range");
    }
    const auto& v = views_[rec.view];
    if (rec.material < 0 || rec.material >= v.num_materials) {
      throw IntegrityError("record material index " + std::to_string(rec.material) +
                           " out of range for view '" + v.name + "'");
    }
    if (rec.attempt < 0) throw IntegrityError("negative attempt index");
    if (!std::isfinite(rec.value)) throw RangeError("non-finite value");
    if (v.graded && (rec.value < 0.0 || rec.value > 1.0)) {
      throw RangeError("graded value " + std::to_string(rec.value) + " outside [0,1] in view '" +
                       v.name + "'");
    }
    if (!v.graded && rec.value != 1.0) {
      throw RangeError("non-graded view '" + v.name + "' holds value " +
                       std::to_string(rec.value) + ", expected 1");
    }
  }

  std::stable_sort(records_.begin(), records_.end(), [](const auto& a, const auto& b) {
    return std::tie(a.student, a.attempt) < std::tie(b.student, b.attempt);
  });

  max_attempts_ = 0;
  student_offsets_.assign(static_cast<std::size_t>(num_students) + 1, 0);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const auto& rec = records_[i];
    if (i > 0 && records_[i - 1].student == rec.student &&
        records_[i - 1].attempt == rec.attempt) {
      const auto& sid = student_ids_[static_cast<std::size_t>(rec.student)];
      throw IntegrityError("duplicate (student, attempt) = (" + sid + ", " +
                           std::to_string(rec.attempt) + ")");
    }
    max_attempts_ = std::max(max_attempts_, rec.attempt + 1);
    ++student_offsets_[static_cast<std::size_t>(rec.student) + 1];
  }
  for (std::size_t s = 1; s < student_offsets_.size(); ++s) {
    student_offsets_[s] += student_offsets_[s - 1];
  }
}

const ViewSpec& Dataset::view(int r) const {
  if (r < 0 || r >= num_views()) throw ArgumentError("view index out of range");
  return views_[static_cast<std::size_t>(r)];
}

std::optional<int> Dataset::primary_graded_view() const {
  for (const auto& v : views_) {
    if (v.graded) return v.id;
  }
  return std::nullopt;
}

std::span<const InteractionRecord> Dataset::student_records(Index student) const {
  if (student < 0 || student >= num_students()) throw ArgumentError("student index out of range");
  const auto begin = student_offsets_[static_cast<std::size_t>(student)];
  const auto end = student_offsets_[static_cast<std::size_t>(student) + 1];
  return std::span<const InteractionRecord>(records_).subspan(begin, end - begin);
}

Dataset Dataset::with_records(std::vector<InteractionRecord> records) const {
  return Dataset(views_, student_ids_, std::move(records));
}

LoadOptions LoadOptions::from_views(std::span<const ViewSpec> views) {
  LoadOptions opts;
  for (const auto& v : views) opts.views.push_back({v.name, v.graded, 1.0});
  return opts;
}

std::vector<StudentSplit> split_student_stratified(Index num_students, int folds,
                                                   std::uint64_t seed) {
  if (folds < 2) throw ArgumentError("folds must be at least 2");
  if (folds > num_students) {
    throw ArgumentError("folds (" + std::to_string(folds) + ") exceed number of students (" +
                        std::to_string(num_students) + ")");
  }
  std::vector<Index> order(static_cast<std::size_t>(num_students));
  for (Index s = 0; s < num_students; ++s) order[static_cast<std::size_t>(s)] = s;
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());

  std::vector<int> fold_of(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    fold_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(folds));
  }
  std::vector<StudentSplit> splits(static_cast<std::size_t>(folds));
  for (Index s = 0; s < num_students; ++s) {
    for (int f = 0; f < folds; ++f) {
      auto& split = splits[static_cast<std::size_t>(f)];
      (fold_of[static_cast<std::size_t>(s)] == f ? split.test : split.train).push_back(s);
    }
  }
  return splits;
}

std::vector<StudentSplit> split_student_stratified(const Dataset& ds, int folds,
                                                   std::uint64_t seed) {
  return split_student_stratified(ds.num_students(), folds, seed);
}

PrefixSuffix split_prefix_suffix(const Dataset& ds, Index student, int graded_view,
                                 double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw ArgumentError("fraction must lie in (0, 1)");
  const auto records = ds.student_records(student);

  std::vector<Index> graded_attempts;
  for (const auto& rec : records) {
    if (rec.view == graded_view) graded_attempts.push_back(rec.attempt);
  }
  if (graded_attempts.empty()) {
    throw EmptySequenceError("student '" + ds.student_ids()[static_cast<std::size_t>(student)] +
                             "' has no records in the graded view");
  }
  const auto n = graded_attempts.size();
  auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  keep = std::clamp<std::size_t>(keep, 1, n);
  const Index last_prefix_attempt = graded_attempts[keep - 1];

  PrefixSuffix out;
  for (const auto& rec : records) {
    (rec.attempt <= last_prefix_attempt ? out.prefix : out.suffix).push_back(rec);
  }
  return out;
}

}  // namespace mvkm
