#include "kkl/model_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

namespace fs = std::filesystem;

namespace {

Json matrix_rows(const Mat& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Mat matrix_from_rows(const Json& rows, const std::string& what) {
  if (!rows.is_array()) throw IoError(fmt::format("{}: expected an array of rows", what));
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n == 0 ? 0 : static_cast<Eigen::Index>(rows.at(0).size());
  Mat out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Json& row = rows.at(static_cast<std::size_t>(i));
    if (static_cast<Eigen::Index>(row.size()) != m) throw IoError(fmt::format("{}: ragged rows", what));
    for (Eigen::Index j = 0; j < m; ++j) out(i, j) = row.at(static_cast<std::size_t>(j)).get<double>();
  }
  return out;
}

Json vector_json(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vector_from_json(const Json& a) {
  Vec v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a.at(i).get<double>();
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read {}", path.string()));
  return in;
}

double parse_double(std::string_view s, const fs::path& path, std::size_t line) {
  double value = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw IoError(fmt::format("{}:{}: bad number '{}'", path.string(), line, s));
  }
  return value;
}

}  // namespace

Json to_json(const MlpParams& p) {
  Json j;
  j["layer_sizes"] = p.layer_sizes;
  j["activation"] = to_string(p.activation);
  Json weights = Json::array();
  Json biases = Json::array();
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    weights.push_back(matrix_rows(p.weights[l]));
    biases.push_back(vector_json(p.biases[l]));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  return j;
}

MlpParams mlp_from_json(const Json& j) {
  try {
    MlpParams p = zero_params(j.at("layer_sizes").get<std::vector<int>>());
    p.activation = activation_from_string(j.at("activation").get<std::string>());
    const Json& weights = j.at("weights");
    const Json& biases = j.at("biases");
    if (weights.size() != p.num_layers() || biases.size() != p.num_layers()) {
      throw IoError("model: layer count does not match layer_sizes");
    }
    for (std::size_t l = 0; l < p.num_layers(); ++l) {
      p.weights[l] = matrix_from_rows(weights.at(l), fmt::format("weights[{}]", l));
      p.biases[l] = vector_from_json(biases.at(l));
    }
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("model: {}", e.what()));
  }
}

Json to_json(const ObserverMatrices& obs) {
  Json j;
  j["n_z"] = obs.n_z;
  j["eigenvalues"] = vector_json(obs.eigenvalues);
  j["B"] = matrix_rows(obs.B);
  j["cond_V"] = obs.cond_V;
  j["lambda_min"] = obs.lambda_min;
  return j;
}

ObserverMatrices observer_from_json(const Json& j) {
  try {
    ObserverMatrices obs =
        observer_from_eigenvalues(vector_from_json(j.at("eigenvalues")), matrix_from_rows(j.at("B"), "B"));
    if (obs.n_z != j.at("n_z").get<int>()) throw IoError("observer: n_z does not match eigenvalues");
    return obs;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("observer: {}", e.what()));
  }
}

void write_json(const fs::path& path, const Json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

Json read_json(const fs::path& path) {
  auto in = open_in(path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

void write_model(const fs::path& path, const ModelFile& model) {
  Json j = to_json(model.net);
  j["role"] = model.role;
  j["observer"] = to_json(model.observer);
  j["config"] = model.config;
  write_json(path, j);
}

ModelFile read_model(const fs::path& path) {
  const Json j = read_json(path);
  ModelFile model;
  model.role = j.value("role", std::string{});
  model.net = mlp_from_json(j);
  if (!j.contains("observer")) throw IoError(fmt::format("{}: missing observer block", path.string()));
  model.observer = observer_from_json(j.at("observer"));
  model.config = j.value("config", Json::object());
  return model;
}

void write_samples_csv(const fs::path& path, const std::vector<CsvBlock>& blocks) {
  auto out = open_out(path);
  Eigen::Index n = -1;
  bool first = true;
  for (const auto& b : blocks) {
    if (n >= 0 && b.data->cols() != n) throw DimensionError("CSV blocks have different sample counts");
    n = b.data->cols();
    for (Eigen::Index i = 0; i < b.data->rows(); ++i) {
      out << (first ? "" : ",") << b.prefix << (i + 1);
      first = false;
    }
  }
  out << '\n';
  std::string line;
  for (Eigen::Index c = 0; c < std::max<Eigen::Index>(n, 0); ++c) {
    line.clear();
    first = true;
    for (const auto& b : blocks) {
      for (Eigen::Index i = 0; i < b.data->rows(); ++i) {
        if (!first) line += ',';
        line += fmt::format("{:.17g}", (*b.data)(i, c));
        first = false;
      }
    }
    line += '\n';
    out << line;
  }
}

std::vector<Mat> read_samples_csv(const fs::path& path, const std::vector<int>& widths) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(fmt::format("{}: empty file", path.string()));
  int total = 0;
  for (int w : widths) total += w;
  const auto header_cols = static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
  if (header_cols != total) {
    throw IoError(fmt::format("{}: expected {} columns, header has {}", path.string(), total, header_cols));
  }
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t start = 0;
    int cols = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const auto end = comma == std::string::npos ? line.size() : comma;
      values.push_back(parse_double(std::string_view(line).substr(start, end - start), path, line_no));
      ++cols;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols != total) throw IoError(fmt::format("{}:{}: expected {} columns", path.string(), line_no, total));
  }
  const auto n = static_cast<Eigen::Index>(values.size() / static_cast<std::size_t>(std::max(total, 1)));
  std::vector<Mat> out;
  int offset = 0;
  for (int w : widths) {
    Mat m(w, n);
    for (Eigen::Index c = 0; c < n; ++c) {
      for (int i = 0; i < w; ++i) m(i, c) = values[static_cast<std::size_t>(c * total + offset + i)];
    }
    out.push_back(std::move(m));
    offset += w;
  }
  return out;
}

void write_dataset_s1(const fs::path& dir, const DatasetS1& s1, const Json& sidecar) {
  write_samples_csv(dir / "s_data.csv", {{"x", &s1.x_data}, {"z", &s1.z_data}});
  write_samples_csv(dir / "s_pde.csv", {{"x", &s1.x_pde}});
  Json side = sidecar;
  side["n_data"] = s1.n_data();
  side["n_pde"] = s1.n_pde();
  side["p"] = s1.p;
  side["q"] = s1.q;
  side["tau"] = s1.tau;
  side["k_star"] = s1.k_star;
  side["t_star_max"] = s1.t_star_max;
  side["dt"] = s1.dt;
  side["x0"] = matrix_rows(s1.x0.transpose());
  side["z0"] = matrix_rows(s1.z0.transpose());
  write_json(dir / "s1.json", side);
}

DatasetS1 read_dataset_s1(const fs::path& dir) {
  const Json side = read_json(dir / "s1.json");
  DatasetS1 s1;
  try {
    s1.p = side.at("p").get<std::size_t>();
    s1.q = side.at("q").get<std::size_t>();
    s1.tau = side.at("tau").get<std::size_t>();
    s1.k_star = side.at("k_star").get<std::size_t>();
    s1.t_star_max = side.at("t_star_max").get<double>();
    s1.dt = side.at("dt").get<double>();
    s1.x0 = matrix_from_rows(side.at("x0"), "x0").transpose();
    s1.z0 = matrix_from_rows(side.at("z0"), "z0").transpose();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(fmt::format("s1.json: {}", e.what()));
  }
  const auto n_x = static_cast<int>(s1.x0.rows());
  const auto n_z = static_cast<int>(s1.z0.rows());
  auto data = read_samples_csv(dir / "s_data.csv", {n_x, n_z});
  s1.x_data = std::move(data[0]);
  s1.z_data = std::move(data[1]);
  s1.x_pde = std::move(read_samples_csv(dir / "s_pde.csv", {n_x})[0]);
  if (s1.n_data() != side.at("n_data").get<std::size_t>() ||
      s1.n_pde() != side.at("n_pde").get<std::size_t>()) {
    throw IoError("S1 files disagree with the sidecar counts");
  }
  return s1;
}

void write_dataset_s2(const fs::path& dir, const DatasetS2& s2, const Json& sidecar) {
  write_samples_csv(dir / "s2.csv", {{"z", &s2.z}, {"x", &s2.x}});
  Json side = sidecar;
  side["n2"] = s2.size();
  side["n_z"] = s2.z.rows();
  side["n_x"] = s2.x.rows();
  write_json(dir / "s2.json", side);
}

DatasetS2 read_dataset_s2(const fs::path& dir) {
  const Json side = read_json(dir / "s2.json");
  const int n_z = side.at("n_z").get<int>();
  const int n_x = side.at("n_x").get<int>();
  auto data = read_samples_csv(dir / "s2.csv", {n_z, n_x});
  DatasetS2 s2{std::move(data[0]), std::move(data[1])};
  if (s2.size() != side.at("n2").get<std::size_t>()) throw IoError("s2.csv disagrees with s2.json");
  return s2;
}

namespace {

Mat stack(const std::vector<Vec>& cols, Eigen::Index rows) {
  Mat m(rows, static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) m.col(static_cast<Eigen::Index>(k)) = cols[k];
  return m;
}

}  // namespace

void write_run_csv(const fs::path& path, const EstimationRun& run) {
  const auto n_x = run.true_traj.dim();
  const auto n_z = run.z_traj.dim();
  const auto n_y = run.y_clean.empty() ? 0 : run.y_clean.front().size();
  Mat t(1, static_cast<Eigen::Index>(run.true_traj.size()));
  for (std::size_t k = 0; k < run.true_traj.size(); ++k) t(0, static_cast<Eigen::Index>(k)) = run.true_traj.times[k];
  const Mat x = stack(run.true_traj.states, n_x);
  const Mat xh = stack(run.est_traj.states, n_x);
  const Mat z = stack(run.z_traj.states, n_z);
  const Mat zr = stack(run.z_ref.states, n_z);
  const Mat y = stack(run.y_clean, n_y);
  const Mat yn = stack(run.y_noisy, n_y);
  // Single-column blocks are written as "t", "y", "y_noisy" rather than t1.
  auto out = open_out(path);
  std::string header = "t";
  for (Eigen::Index i = 0; i < n_x; ++i) header += fmt::format(",x{}", i + 1);
  for (Eigen::Index i = 0; i < n_x; ++i) header += fmt::format(",xhat{}", i + 1);
  for (Eigen::Index i = 0; i < n_z; ++i) header += fmt::format(",z{}", i + 1);
  for (Eigen::Index i = 0; i < n_z; ++i) header += fmt::format(",zref{}", i + 1);
  for (Eigen::Index i = 0; i < n_y; ++i) header += n_y == 1 ? ",y" : fmt::format(",y{}", i + 1);
  for (Eigen::Index i = 0; i < n_y; ++i) header += n_y == 1 ? ",y_noisy" : fmt::format(",y_noisy{}", i + 1);
  out << header << '\n';
  std::string line;
  for (Eigen::Index c = 0; c < t.cols(); ++c) {
    line = fmt::format("{:.17g}", t(0, c));
    for (const Mat* m : {&x, &xh, &z, &zr, &y, &yn}) {
      for (Eigen::Index i = 0; i < m->rows(); ++i) line += fmt::format(",{:.17g}", (*m)(i, c));
    }
    line += '\n';
    out << line;
  }
}

EstimationRun read_run_csv(const fs::path& path, int n_x, int n_z, int n_y) {
  const auto blocks = read_samples_csv(path, {1, n_x, n_x, n_z, n_z, n_y, n_y});
  EstimationRun run;
  const Eigen::Index n = blocks[0].cols();
  const double dt = n > 1 ? blocks[0](0, 1) - blocks[0](0, 0) : 0.0;
  for (Trajectory* tr : {&run.true_traj, &run.est_traj, &run.z_traj, &run.z_ref}) tr->dt = dt;
  for (Eigen::Index c = 0; c < n; ++c) {
    const double t = blocks[0](0, c);
    run.true_traj.times.push_back(t);
    run.true_traj.states.push_back(blocks[1].col(c));
    run.est_traj.times.push_back(t);
    run.est_traj.states.push_back(blocks[2].col(c));
    run.z_traj.times.push_back(t);
    run.z_traj.states.push_back(blocks[3].col(c));
    run.z_ref.times.push_back(t);
    run.z_ref.states.push_back(blocks[4].col(c));
    run.y_clean.push_back(blocks[5].col(c));
    run.y_noisy.push_back(blocks[6].col(c));
  }
  return run;
}

}  // namespace kkl
