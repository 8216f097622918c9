#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kkl/datagen.hpp"
#include "kkl/estimation.hpp"
#include "kkl/mlp.hpp"
#include "kkl/observer.hpp"

namespace kkl {

using Json = nlohmann::ordered_json;

Json to_json(const MlpParams& p);
MlpParams mlp_from_json(const Json& j);

Json to_json(const ObserverMatrices& obs);
ObserverMatrices observer_from_json(const Json& j);

// A trained map with the filter it was trained against and the resolved
// configuration that produced it.
struct ModelFile {
  std::string role;  // "forward" | "inverse"
  MlpParams net;
  ObserverMatrices observer;
  Json config;
};

void write_model(const std::filesystem::path& path, const ModelFile& model);
ModelFile read_model(const std::filesystem::path& path);

// Pretty-printed with a trailing newline; byte-stable for equal inputs.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

// Column-per-sample matrices as CSV rows. Each block contributes
// block.rows() columns named prefix1..prefixN.
struct CsvBlock {
  std::string prefix;
  const Mat* data;
};
void write_samples_csv(const std::filesystem::path& path, const std::vector<CsvBlock>& blocks);

// Reads a numeric CSV with a header row. Returns one matrix per requested
// block width, samples as columns.
std::vector<Mat> read_samples_csv(const std::filesystem::path& path, const std::vector<int>& widths);

void write_dataset_s1(const std::filesystem::path& dir, const DatasetS1& s1, const Json& sidecar);
DatasetS1 read_dataset_s1(const std::filesystem::path& dir);

void write_dataset_s2(const std::filesystem::path& dir, const DatasetS2& s2, const Json& sidecar);
DatasetS2 read_dataset_s2(const std::filesystem::path& dir);

// `t, x*, xhat*, z*, zref*, y, y_noisy` per sample.
void write_run_csv(const std::filesystem::path& path, const EstimationRun& run);
// Restores trajectories and outputs; noise maxima must be taken from the
// run index.
EstimationRun read_run_csv(const std::filesystem::path& path, int n_x, int n_z, int n_y);

}  // namespace kkl
