#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mvkm {

using Index = std::int64_t;

/// One learning-material type. Graded views carry scores in [0, 1];
/// non-graded views carry a presence indicator of exactly 1.
struct ViewSpec {
  int id = 0;
  std::string name;
  bool graded = true;
  Index num_materials = 0;
  /// External material ids, position = dense material index.
  std::vector<std::string> material_ids;

  friend bool operator==(const ViewSpec&, const ViewSpec&) = default;
};

struct InteractionRecord {
  Index student = 0;
  Index attempt = 0;
  int view = 0;
  Index material = 0;
  double value = 0.0;

  friend bool operator==(const InteractionRecord&, const InteractionRecord&) = default;
};

/// Immutable, validated collection of interaction records across views.
///
/// Records are sorted by (student, attempt) and every (student, attempt)
/// pair occurs at most once: all views share one attempt timeline per
/// student.
class Dataset {
public:
  Dataset() = default;

  /// Validates, sorts and takes ownership. `num_students` defaults to the
  /// size of `student_ids`; `max_attempts` is always 1 + max attempt index.
  Dataset(std::vector<ViewSpec> views, std::vector<std::string> student_ids,
          std::vector<InteractionRecord> records);

  const std::vector<ViewSpec>& views() const noexcept { return views_; }
  const ViewSpec& view(int r) const;
  const std::vector<std::string>& student_ids() const noexcept { return student_ids_; }
  std::span<const InteractionRecord> records() const noexcept { return records_; }

  Index num_students() const noexcept { return static_cast<Index>(student_ids_.size()); }
  Index max_attempts() const noexcept { return max_attempts_; }
  int num_views() const noexcept { return static_cast<int>(views_.size()); }

  /// Lowest-id graded view, or nullopt if none.
  std::optional<int> primary_graded_view() const;

  /// Half-open range of `records()` belonging to `student`.
  std::span<const InteractionRecord> student_records(Index student) const;

  /// Same registries, different record subset (re-validated).
  Dataset with_records(std::vector<InteractionRecord> records) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;

private:
  void validate_and_index();

  std::vector<ViewSpec> views_;
  std::vector<std::string> student_ids_;
  std::vector<InteractionRecord> records_;
  Index max_attempts_ = 0;
  std::vector<std::size_t> student_offsets_;
};

enum class FileFormat { csv, json };

/// Picks the format from the file extension (".json" or anything else).
FileFormat format_from_path(const std::filesystem::path& path);

/// Per-view ingestion settings.
struct ViewOptions {
  std::string name;
  std::optional<bool> graded;
  /// Raw graded scores are divided by this before range checking.
  double max_score = 1.0;
};

/// Ingestion settings for CSV input.
///
/// Views listed here take ids in list order; unlisted views follow, graded
/// ones first, each group in lexical order. A view whose graded flag is not
/// configured is treated as non-graded iff every value in it equals 1.
struct LoadOptions {
  std::vector<ViewOptions> views;

  static LoadOptions from_views(std::span<const ViewSpec> views);
};

Dataset load_dataset(const std::filesystem::path& path, FileFormat format,
                     const LoadOptions& options = {});
Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

void save_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat format);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

/// Parse from an in-memory CSV document (header required).
Dataset parse_csv(const std::string& text, const LoadOptions& options = {});
std::string to_csv(const Dataset& ds);

struct StudentSplit {
  std::vector<Index> train;
  std::vector<Index> test;
};

/// Shuffles students with `seed` and deals them round-robin into `folds`
/// disjoint test sets. Every student lands in exactly one test set.
std::vector<StudentSplit> split_student_stratified(const Dataset& ds, int folds,
                                                   std::uint64_t seed);
std::vector<StudentSplit> split_student_stratified(Index num_students, int folds,
                                                   std::uint64_t seed);

struct PrefixSuffix {
  std::vector<InteractionRecord> prefix;
  std::vector<InteractionRecord> suffix;
};

/// Splits one student's timeline after the ceil(fraction * n)-th record of
/// `graded_view`. Records of any view at or before that attempt go to the
/// prefix, the rest to the suffix.
PrefixSuffix split_prefix_suffix(const Dataset& ds, Index student, int graded_view,
                                 double fraction);

}  // namespace mvkm
