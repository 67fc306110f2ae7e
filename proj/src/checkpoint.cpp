#include "mvkm/config.hpp"
#include "mvkm/errors.hpp"
#include "mvkm/io.hpp"
#include "mvkm/model.hpp"

namespace mvkm {

namespace {

Json row_major(const Eigen::MatrixXd& m) {
  Json out = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

Json vector_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::MatrixXd matrix_from(const Json& j, Index rows, Index cols, const std::string& what) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows * cols) {
    throw IntegrityError("checkpoint: '" + what + "' should hold " + std::to_string(rows * cols) + " values");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index c = 0; c < cols; ++c) m(i, c) = j[static_cast<std::size_t>(i * cols + c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from(const Json& j, Index n, const std::string& what) {
  return matrix_from(j, n, 1, what).col(0);
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  Json materials = Json::array();
  for (int r = 0; r < p.num_views(); ++r) materials.push_back(p.num_materials(r));

  Json j;
  j["format"] = "mvkm-model";
  j["format_version"] = kCheckpointVersion;
  j["hyperparameters"] = to_json(ckpt.hyper);
  j["shape"] = Json{{"students", p.num_students()},
                    {"latent_dim", p.latent_dim()},
                    {"concepts", p.num_concepts()},
                    {"attempts", p.num_attempts()},
                    {"materials", materials},
                    {"attempt_bias_slots", p.b_a.size()}};
  Json views = Json::array();
  for (const auto& v : ckpt.views) views.push_back(to_json(v));
  j["views"] = views;
  j["students"] = ckpt.student_ids;
  j["view_graded"] = p.view_graded;
  j["shared_attempt_bias"] = p.shared_attempt_bias;
  j["S"] = row_major(p.S);
  Json T = Json::array();
  for (const auto& slice : p.T) T.push_back(row_major(slice));
  j["T"] = T;
  Json Q = Json::array();
  for (const auto& q : p.Q) Q.push_back(row_major(q));
  j["Q"] = Q;
  j["b_s"] = vector_json(p.b_s);
  Json bp = Json::array();
  for (const auto& b : p.b_p) bp.push_back(vector_json(b));
  j["b_p"] = bp;
  Json ba = Json::array();
  for (const auto& b : p.b_a) ba.push_back(vector_json(b));
  j["b_a"] = ba;
  j["mu"] = p.mu;
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string{}) != "mvkm-model") throw IntegrityError("checkpoint: not an mvkm model file");
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw IntegrityError("checkpoint: unsupported format_version " + std::to_string(version));
    }

    Checkpoint ckpt;
    ckpt.hyper = hyper_from_json(j.at("hyperparameters"));
    const auto& shape = j.at("shape");
    const auto M = shape.at("students").get<Index>();
    const auto K = shape.at("latent_dim").get<Index>();
    const auto C = shape.at("concepts").get<Index>();
    const auto A = shape.at("attempts").get<Index>();
    const auto materials = shape.at("materials").get<std::vector<Index>>();
    const auto slots = shape.at("attempt_bias_slots").get<std::size_t>();
    if (M < 0 || K < 1 || C < 1 || A < 0) throw IntegrityError("checkpoint: invalid shape");

    for (const auto& v : j.at("views")) ckpt.views.push_back(view_spec_from_json(v));
    ckpt.student_ids = j.at("students").get<std::vector<std::string>>();
    if (static_cast<Index>(ckpt.student_ids.size()) != M) throw IntegrityError("checkpoint: student id count mismatch");

    auto& p = ckpt.params;
    p.view_graded = j.at("view_graded").get<std::vector<bool>>();
    p.shared_attempt_bias = j.at("shared_attempt_bias").get<bool>();
    if (p.view_graded.size() != materials.size()) throw IntegrityError("checkpoint: view count mismatch");
    if (slots != (p.shared_attempt_bias ? 1 : materials.size())) {
      throw IntegrityError("checkpoint: attempt bias slot count mismatch");
    }
    p.S = matrix_from(j.at("S"), M, K, "S");
    const auto& T = j.at("T");
    if (!T.is_array() || static_cast<Index>(T.size()) != A) throw IntegrityError("checkpoint: T slice count mismatch");
    for (Index a = 0; a < A; ++a) p.T.push_back(matrix_from(T[static_cast<std::size_t>(a)], K, C, "T"));
    const auto& Q = j.at("Q");
    const auto& bp = j.at("b_p");
    if (Q.size() != materials.size() || bp.size() != materials.size()) {
      throw IntegrityError("checkpoint: per-view block count mismatch");
    }
    for (std::size_t r = 0; r < materials.size(); ++r) {
      p.Q.push_back(matrix_from(Q[r], C, materials[r], "Q"));
      p.b_p.push_back(vector_from(bp[r], materials[r], "b_p"));
    }
    p.b_s = vector_from(j.at("b_s"), M, "b_s");
    const auto& ba = j.at("b_a");
    if (ba.size() != slots) throw IntegrityError("checkpoint: b_a slot count mismatch");
    for (std::size_t k = 0; k < slots; ++k) p.b_a.push_back(vector_from(ba[k], A, "b_a"));
    p.mu = j.at("mu").get<double>();
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("checkpoint: malformed field: ") + e.what());
  } catch (const ConfigError& e) {
    throw IntegrityError(std::string("checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_text_file(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(read_text_file(path));
}

}  // namespace mvkm
