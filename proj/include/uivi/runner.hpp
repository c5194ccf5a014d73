#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "uivi/family.hpp"
#include "uivi/hmc.hpp"
#include "uivi/math.hpp"
#include "uivi/sivi.hpp"
#include "uivi/targets.hpp"

namespace uivi {

enum class Method { kUivi, kSivi, kExplicit };

const char* to_string(Method m);
Method method_from_string(const std::string& name);

struct Preprocessing {
  bool divide_255 = false;
  bool standardize = false;
};

// CSV: header row, first column an integer label in [0, K), remaining
// columns real features. K is the number of distinct labels seen unless
// num_classes > 0 is given.
LabeledDataset load_dataset(const std::string& path, const Preprocessing& prep, int num_classes = 0);
void write_dataset_csv(const LabeledDataset& data, const std::string& path);

struct BlobsSpec {
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  int num_classes = 4;
  std::size_t dim = 20;
  double separation = 1.0;
  std::uint64_t seed = 7;
};

struct TargetSpec {
  // banana | multimodal | xshaped | mlr
  std::string kind = "banana";
  // For mlr: CSV paths, or empty train_path to use the blobs generator.
  std::string train_path;
  std::string test_path;
  Preprocessing prep;
  BlobsSpec blobs;
  std::size_t batch_size = 0;  // 0: full data
};

struct RunConfig {
  Method method = Method::kUivi;
  TargetSpec target;
  FamilySpec family;
  long iterations = 50000;
  int samples_per_iter = 1;  // S
  double eta_net = 0.01;
  double eta_scale = 0.002;
  long decay_every = 3000;
  double decay_factor = 0.9;
  HmcConfig hmc;
  SiviConfig sivi;
  std::uint64_t seed = 1;
  long elbo_every = 100;
  std::size_t elbo_samples = 100;
  std::size_t elbo_inner = 10000;
  long testll_every = 1000;
  std::size_t testll_samples = 8000;
  std::size_t posterior_samples = 300;
  std::string output_dir;  // empty: nothing written

  void validate() const;
};

struct MetricsRecord {
  long iteration = 0;
  double wall_clock_seconds = 0.0;
  std::optional<double> elbo;
  std::optional<double> elbo_se;
  std::optional<double> test_loglik;
  std::optional<double> test_loglik_se;
  std::optional<double> hmc_acceptance;
  std::optional<double> step_size;
  std::optional<double> mean_abs_delta_h;
  std::optional<int> sivi_L;
};

struct RunResult {
  SemiImplicitQ initial;
  SemiImplicitQ final_q;
  std::vector<MetricsRecord> records;
  std::optional<Estimate> final_elbo;
  std::optional<Estimate> final_test_loglik;
  double seconds_per_iteration = 0.0;
};

// Target plus held-out data built from a TargetSpec.
struct BuiltTarget {
  std::shared_ptr<const TargetModel> model;
  std::shared_ptr<const LabeledDataset> train;
  std::shared_ptr<const LabeledDataset> test;
};

BuiltTarget build_target(const TargetSpec& spec);

// Family for the configured method; explicit uses eps_dim = 0.
SemiImplicitQ initial_family(const RunConfig& cfg, std::size_t z_dim);

// Runs the training loop. When cfg.output_dir is set, writes config.json,
// metrics.jsonl (deterministic), timing.jsonl (wall clock),
// checkpoint_init.txt, checkpoint_final.txt and posterior_samples.csv.
RunResult run_experiment(const RunConfig& cfg);

struct SweepEntry {
  int n_burn = 0;
  int n_keep = 0;
  RunResult result;
};

struct SweepResult {
  std::vector<SweepEntry> entries;
  double final_elbo_spread = 0.0;  // max - min of the final ELBO estimates
  double max_final_elbo_se = 0.0;
};

// One UIVI run per (n_burn, n_keep) with a shared seed. Each run writes into
// <output_dir>/hmc_<burn>_<keep>/ and a summary goes to sweep_summary.json.
SweepResult sweep_hmc_iterations(const RunConfig& cfg, const std::vector<std::pair<int, int>>& settings);

// Resolves a relative output directory against $UIVI_OUTPUT_ROOT if set.
std::string resolve_output_dir(const std::string& dir);

}  // namespace uivi
