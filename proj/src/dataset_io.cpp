#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mvkm/data.hpp"
#include "mvkm/errors.hpp"
#include "mvkm/format.hpp"
#include "mvkm/io.hpp"

namespace mvkm {

namespace {

constexpr const char* kCsvHeader = "student_id,attempt,view,material_id,value";

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string_view unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

/// Raw row before registries are built.
struct RawRecord {
  std::string student;
  Index attempt;
  std::string view;
  std::string material;
  double value;
  std::size_t line;
};

/// Builds registries from raw rows and assembles a validated Dataset.
/// Explicit registries (from JSON) take precedence over discovered ids.
Dataset assemble(const std::vector<RawRecord>& raw, const LoadOptions& options,
                 const std::vector<std::string>* explicit_students,
                 const std::vector<ViewSpec>* explicit_views) {
  std::vector<ViewSpec> views;
  std::map<std::string, double> max_score;

  if (explicit_views != nullptr) {
    views = *explicit_views;
  } else {
    std::set<std::string> names;
    std::map<std::string, bool> all_ones;
    for (const auto& r : raw) {
      names.insert(r.view);
      auto [it, inserted] = all_ones.try_emplace(r.view, true);
      if (r.value != 1.0) it->second = false;
    }
    std::vector<std::string> ordered;
    for (const auto& vo : options.views) {
      if (std::find(ordered.begin(), ordered.end(), vo.name) == ordered.end()) {
        ordered.push_back(vo.name);
      }
    }
    auto is_configured = [&](const std::string& name) {
      return std::find(ordered.begin(), ordered.end(), name) != ordered.end();
    };
    auto graded_of = [&](const std::string& name) {
      for (const auto& vo : options.views) {
        if (vo.name == name && vo.graded.has_value()) return *vo.graded;
      }
      const auto it = all_ones.find(name);
      return it == all_ones.end() || !it->second;
    };
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& name : names) {
        if (is_configured(name)) continue;
        if (graded_of(name) == (pass == 0)) ordered.push_back(name);
      }
    }
    for (const auto& name : ordered) {
      ViewSpec v;
      v.id = static_cast<int>(views.size());
      v.name = name;
      v.graded = graded_of(name);
      views.push_back(std::move(v));
    }
  }
  for (const auto& vo : options.views) {
    if (!(vo.max_score > 0.0)) throw ConfigError("max_score for view '" + vo.name + "' must be > 0");
    max_score[vo.name] = vo.max_score;
  }

  std::map<std::string, int> view_index;
  for (const auto& v : views) view_index[v.name] = v.id;

  // Material registries: explicit (JSON) or lexical over observed ids.
  std::vector<std::map<std::string, Index>> material_index(views.size());
  if (explicit_views != nullptr) {
    for (const auto& v : views) {
      for (std::size_t p = 0; p < v.material_ids.size(); ++p) {
        material_index[static_cast<std::size_t>(v.id)][v.material_ids[p]] = static_cast<Index>(p);
      }
    }
  } else {
    std::vector<std::set<std::string>> seen(views.size());
    for (const auto& r : raw) {
      const auto it = view_index.find(r.view);
      if (it != view_index.end()) seen[static_cast<std::size_t>(it->second)].insert(r.material);
    }
    for (auto& v : views) {
      auto& ids = seen[static_cast<std::size_t>(v.id)];
      v.material_ids.assign(ids.begin(), ids.end());
      v.num_materials = static_cast<Index>(v.material_ids.size());
      for (std::size_t p = 0; p < v.material_ids.size(); ++p) {
        material_index[static_cast<std::size_t>(v.id)][v.material_ids[p]] = static_cast<Index>(p);
      }
    }
    // Configured views with no rows are dropped rather than left empty.
    views.erase(std::remove_if(views.begin(), views.end(),
                               [](const ViewSpec& v) { return v.num_materials == 0; }),
                views.end());
    std::vector<std::map<std::string, Index>> kept;
    view_index.clear();
    for (std::size_t i = 0; i < views.size(); ++i) {
      kept.push_back(std::move(material_index[static_cast<std::size_t>(views[i].id)]));
      views[i].id = static_cast<int>(i);
      view_index[views[i].name] = static_cast<int>(i);
    }
    material_index = std::move(kept);
  }

  std::vector<std::string> students;
  if (explicit_students != nullptr) {
    students = *explicit_students;
  } else {
    std::set<std::string> ids;
    for (const auto& r : raw) ids.insert(r.student);
    students.assign(ids.begin(), ids.end());
  }
  std::map<std::string, Index> student_index;
  for (std::size_t s = 0; s < students.size(); ++s) {
    student_index[students[s]] = static_cast<Index>(s);
  }

  std::vector<InteractionRecord> records;
  records.reserve(raw.size());
  for (const auto& r : raw) {
    const auto sv = student_index.find(r.student);
    if (sv == student_index.end()) throw ParseError(r.line, "unknown student id '" + r.student + "'");
    const auto vv = view_index.find(r.view);
    if (vv == view_index.end()) throw ParseError(r.line, "unknown view '" + r.view + "'");
    const auto& mats = material_index[static_cast<std::size_t>(vv->second)];
    const auto mv = mats.find(r.material);
    if (mv == mats.end()) throw ParseError(r.line, "unknown material id '" + r.material + "'");
    double value = r.value;
    const bool graded = views[static_cast<std::size_t>(vv->second)].graded;
    if (const auto ms = max_score.find(r.view); graded && ms != max_score.end()) value /= ms->second;
    if (graded && (value < 0.0 || value > 1.0)) {
      throw RangeError("line " + std::to_string(r.line) + ": graded value " +
                       format_double(r.value) + " outside [0,1] after normalization");
    }
    records.push_back({sv->second, r.attempt, vv->second, mv->second, value});
  }
  return Dataset(std::move(views), std::move(students), std::move(records));
}

}  // namespace

FileFormat format_from_path(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".json" ? FileFormat::json : FileFormat::csv;
}

Dataset parse_csv(const std::string& text, const LoadOptions& options) {
  std::vector<RawRecord> raw;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto content = trim(line);
    if (content.empty()) continue;
    if (!header_seen) {
      auto fields = split_fields(content);
      std::string joined;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) joined += ',';
        joined += unquote(fields[i]);
      }
      if (line_no == 1 && joined.rfind("\xEF\xBB\xBF", 0) == 0) joined.erase(0, 3);
      if (joined != kCsvHeader) {
        throw ParseError(line_no, std::string("expected header '") + kCsvHeader + "'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(content);
    if (fields.size() != 5) {
      throw ParseError(line_no, "expected 5 fields, got " + std::to_string(fields.size()));
    }
    RawRecord r;
    r.line = line_no;
    r.student = std::string(unquote(fields[0]));
    r.view = std::string(unquote(fields[2]));
    r.material = std::string(unquote(fields[3]));
    if (r.student.empty() || r.view.empty() || r.material.empty()) {
      throw ParseError(line_no, "empty identifier");
    }
    const auto attempt = unquote(fields[1]);
    auto [ap, aec] = std::from_chars(attempt.data(), attempt.data() + attempt.size(), r.attempt);
    if (aec != std::errc() || ap != attempt.data() + attempt.size() || r.attempt < 0) {
      throw ParseError(line_no, "invalid attempt '" + std::string(attempt) + "'");
    }
    const auto value = unquote(fields[4]);
    auto [vp, vec] = std::from_chars(value.data(), value.data() + value.size(), r.value);
    if (vec != std::errc() || vp != value.data() + value.size()) {
      throw ParseError(line_no, "invalid value '" + std::string(value) + "'");
    }
    raw.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError(1, "missing header");
  return assemble(raw, options, nullptr, nullptr);
}

std::string to_csv(const Dataset& ds) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& rec : ds.records()) {
    const auto& v = ds.view(rec.view);
    out += ds.student_ids()[static_cast<std::size_t>(rec.student)];
    out += ',';
    out += std::to_string(rec.attempt);
    out += ',';
    out += v.name;
    out += ',';
    out += v.material_ids[static_cast<std::size_t>(rec.material)];
    out += ',';
    out += format_double(rec.value);
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::ordered_json dataset_to_json(const Dataset& ds) {
  nlohmann::ordered_json j;
  j["format"] = "mvkm-dataset";
  j["version"] = 1;
  auto views = nlohmann::ordered_json::array();
  for (const auto& v : ds.views()) {
    views.push_back({{"id", v.id},
                     {"name", v.name},
                     {"graded", v.graded},
                     {"num_materials", v.num_materials},
                     {"material_ids", v.material_ids}});
  }
  j["views"] = std::move(views);
  j["students"] = ds.student_ids();
  auto records = nlohmann::ordered_json::array();
  for (const auto& rec : ds.records()) {
    const auto& v = ds.view(rec.view);
    records.push_back({{"student_id", ds.student_ids()[static_cast<std::size_t>(rec.student)]},
                       {"attempt", rec.attempt},
                       {"view", v.name},
                       {"material_id", v.material_ids[static_cast<std::size_t>(rec.material)]},
                       {"value", rec.value}});
  }
  j["records"] = std::move(records);
  return j;
}

Dataset dataset_from_json(const std::string& text, const LoadOptions& options) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(0, std::string("invalid JSON: ") + e.what());
  }
  try {
    std::vector<ViewSpec> views;
    std::vector<ViewSpec>* explicit_views = nullptr;
    if (j.contains("views")) {
      for (const auto& jv : j.at("views")) {
        ViewSpec v;
        v.id = static_cast<int>(views.size());
        v.name = jv.at("name").get<std::string>();
        v.graded = jv.value("graded", true);
        v.material_ids = jv.value("material_ids", std::vector<std::string>{});
        v.num_materials = jv.value("num_materials", static_cast<Index>(v.material_ids.size()));
        views.push_back(std::move(v));
      }
      explicit_views = &views;
    }
    std::vector<std::string> students;
    std::vector<std::string>* explicit_students = nullptr;
    if (j.contains("students")) {
      students = j.at("students").get<std::vector<std::string>>();
      explicit_students = &students;
    }
    std::vector<RawRecord> raw;
    std::size_t idx = 0;
    for (const auto& jr : j.at("records")) {
      ++idx;
      RawRecord r;
      r.line = idx;
      r.student = jr.at("student_id").get<std::string>();
      r.attempt = jr.at("attempt").get<Index>();
      r.view = jr.at("view").get<std::string>();
      r.material = jr.at("material_id").get<std::string>();
      r.value = jr.at("value").get<double>();
      if (r.attempt < 0) throw ParseError(idx, "negative attempt");
      raw.push_back(std::move(r));
    }
    return assemble(raw, options, explicit_students, explicit_views);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, std::string("malformed dataset JSON: ") + e.what());
  }
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, FileFormat format,
                     const LoadOptions& options) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: '" + path.string() + "'");
  const auto text = read_text_file(path);
  return format == FileFormat::json ? dataset_from_json(text, options) : parse_csv(text, options);
}

Dataset load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  return load_dataset(path, format_from_path(path), options);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat format) {
  if (format == FileFormat::json) {
    write_text_file(path, dataset_to_json(ds).dump(1) + "\n");
  } else {
    write_text_file(path, to_csv(ds));
  }
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  save_dataset(ds, path, format_from_path(path));
}

}  // namespace mvkm
