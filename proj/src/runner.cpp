#include "uivi/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "uivi/config_io.hpp"
#include "uivi/error.hpp"
#include "uivi/estimator.hpp"
#include "uivi/evaluation.hpp"
#include "uivi/optimizer.hpp"

namespace uivi {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Method m) {
  switch (m) {
    case Method::kUivi: return "uivi";
    case Method::kSivi: return "sivi";
    case Method::kExplicit: return "explicit";
  }
  return "uivi";
}

Method method_from_string(const std::string& name) {
  if (name == "uivi") return Method::kUivi;
  if (name == "sivi") return Method::kSivi;
  if (name == "explicit") return Method::kExplicit;
  fail(ErrorKind::kConfig, "unknown method '" + name + "' (expected uivi, sivi or explicit)");
}

// ---------------------------------------------------------------------------
// Datasets

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void csv_error(const std::string& path, std::size_t line, const std::string& what) {
  fail(ErrorKind::kParse, path + ":" + std::to_string(line) + ": " + what);
}

void standardize_with_train(LabeledDataset& train, LabeledDataset* test) {
  const std::size_t d = train.dim();
  const std::size_t n = train.size();
  Vec mean(d, 0.0), sd(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += train.features(r, j);
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) sd[j] += std::pow(train.features(r, j) - mean[j], 2);
  }
  // Constant columns keep unit scale.
  for (double& s : sd) s = n > 1 && s > 0.0 ? std::sqrt(s / static_cast<double>(n - 1)) : 1.0;
  auto apply = [&](LabeledDataset& data) {
    for (std::size_t r = 0; r < data.size(); ++r) {
      for (std::size_t j = 0; j < d; ++j) data.features(r, j) = (data.features(r, j) - mean[j]) / sd[j];
    }
    data.preprocessing += data.preprocessing == "none" ? "" : "+";
    if (data.preprocessing == "none") data.preprocessing = "";
    data.preprocessing += "standardize";
  };
  apply(train);
  if (test) apply(*test);
}

}  // namespace

LabeledDataset load_dataset(const std::string& path, const Preprocessing& prep, int num_classes) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kIo, "cannot open dataset '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) csv_error(path, 1, "missing header row");
  ++line_no;
  const auto header = split_csv_line(line);
  if (header.size() < 2) csv_error(path, line_no, "header needs a label column and at least one feature");
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (header[i] == header[j]) csv_error(path, line_no, "duplicate header column '" + header[i] + "'");
    }
  }
  const std::size_t d = header.size() - 1;
  Vec values;
  std::vector<int> labels;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      csv_error(path, line_no, "expected " + std::to_string(header.size()) + " columns, found " +
                                   std::to_string(cells.size()));
    }
    char* end = nullptr;
    const long label = std::strtol(cells[0].c_str(), &end, 10);
    if (cells[0].empty() || *end != '\0') csv_error(path, line_no, "label '" + cells[0] + "' is not an integer");
    if (label < 0 || (num_classes > 0 && label >= num_classes)) {
      csv_error(path, line_no, "label " + std::to_string(label) + " out of range");
    }
    labels.push_back(static_cast<int>(label));
    for (std::size_t j = 1; j < cells.size(); ++j) {
      const double v = std::strtod(cells[j].c_str(), &end);
      if (cells[j].empty() || *end != '\0' || !std::isfinite(v)) {
        csv_error(path, line_no, "column '" + header[j] + "' has a malformed value '" + cells[j] + "'");
      }
      values.push_back(prep.divide_255 ? v / 255.0 : v);
    }
  }
  if (labels.empty()) fail(ErrorKind::kParse, path + ": no data rows");
  LabeledDataset data;
  data.features = Tensor::matrix(labels.size(), d, std::move(values));
  data.labels = std::move(labels);
  int k = num_classes;
  if (k <= 0) {
    for (int y : data.labels) k = std::max(k, y + 1);
  }
  data.num_classes = k;
  data.preprocessing = prep.divide_255 ? "divide_255" : "none";
  if (prep.standardize) standardize_with_train(data, nullptr);
  data.validate();
  return data;
}

void write_dataset_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  os << "label";
  for (std::size_t j = 0; j < data.dim(); ++j) os << ",x" << j;
  os << '\n';
  char buf[40];
  for (std::size_t r = 0; r < data.size(); ++r) {
    os << data.labels[r];
    for (std::size_t j = 0; j < data.dim(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", data.features(r, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Configuration

void RunConfig::validate() const {
  if (target.kind.empty()) fail(ErrorKind::kConfig, "target kind is empty");
  if (target.kind != "banana" && target.kind != "multimodal" && target.kind != "xshaped" && target.kind != "mlr") {
    fail(ErrorKind::kConfig, "unknown target '" + target.kind + "' (expected banana, multimodal, xshaped or mlr)");
  }
  if (iterations < 0) fail(ErrorKind::kConfig, "iterations must be >= 0");
  if (samples_per_iter < 1) fail(ErrorKind::kConfig, "samples_per_iter must be >= 1");
  if (eta_net <= 0.0 || eta_scale <= 0.0) fail(ErrorKind::kConfig, "learning rates must be positive");
  if (decay_factor <= 0.0) fail(ErrorKind::kConfig, "decay_factor must be positive");
  if (sivi.L_final < 1) fail(ErrorKind::kConfig, "sivi L_final must be >= 1");
  if (elbo_samples < 1 || elbo_inner < 1 || testll_samples < 1) {
    fail(ErrorKind::kConfig, "evaluation sample counts must be >= 1");
  }
  if (family.init_scale <= 0.0) fail(ErrorKind::kConfig, "init_scale must be positive");
  for (const auto* p : {&target.train_path, &target.test_path}) {
    if (!p->empty() && !fs::exists(*p)) fail(ErrorKind::kConfig, "file not found: " + *p);
  }
  if (target.kind == "mlr" && target.train_path.empty() && target.blobs.n_train == 0) {
    fail(ErrorKind::kConfig, "mlr target needs a training set");
  }
  try {
    hmc.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
}

std::string resolve_output_dir(const std::string& dir) {
  if (dir.empty()) return dir;
  const fs::path p(dir);
  if (p.is_absolute()) return dir;
  if (const char* root = std::getenv("UIVI_OUTPUT_ROOT"); root && *root) return (fs::path(root) / p).string();
  return dir;
}

BuiltTarget build_target(const TargetSpec& spec) {
  BuiltTarget out;
  if (spec.kind != "mlr") {
    out.model = make_toy_target(spec.kind);
    return out;
  }
  LabeledDataset train;
  LabeledDataset test;
  bool have_test = false;
  if (spec.train_path.empty()) {
    const auto& b = spec.blobs;
    Rng rng(b.seed);
    LabeledDataset all = make_blobs(b.n_train + b.n_test, b.num_classes, b.dim, b.separation, rng);
    std::vector<std::size_t> tr(b.n_train), te(b.n_test);
    for (std::size_t i = 0; i < b.n_train; ++i) tr[i] = i;
    for (std::size_t i = 0; i < b.n_test; ++i) te[i] = b.n_train + i;
    train = all.subset(tr);
    test = all.subset(te);
    train.preprocessing = test.preprocessing = "blobs";
    have_test = b.n_test > 0;
  } else {
    Preprocessing raw = spec.prep;
    raw.standardize = false;
    train = load_dataset(spec.train_path, raw);
    if (!spec.test_path.empty()) {
      test = load_dataset(spec.test_path, raw, train.num_classes);
      have_test = true;
    }
  }
  if (spec.prep.standardize) standardize_with_train(train, have_test ? &test : nullptr);
  out.train = std::make_shared<const LabeledDataset>(std::move(train));
  if (have_test) out.test = std::make_shared<const LabeledDataset>(std::move(test));
  out.model = std::make_shared<MultinomialLogisticTarget>(out.train, spec.batch_size);
  return out;
}

namespace {

// Independent, reproducible streams derived from the run seed.
Rng make_stream(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return Rng(seq);
}

constexpr std::uint32_t kInitStream = 1;
constexpr std::uint32_t kTrainStream = 2;
constexpr std::uint32_t kEvalStream = 3;

class JsonLinesWriter {
 public:
  explicit JsonLinesWriter(const std::string& path) {
    if (!path.empty()) {
      os_.open(path);
      if (!os_) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
    }
  }
  void write(const json& j) {
    if (!os_.is_open()) return;
    os_ << j.dump() << '\n';
    os_.flush();
  }

 private:
  std::ofstream os_;
};

void write_samples_csv(const std::vector<Vec>& samples, std::size_t dim, const std::string& path) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  for (std::size_t j = 0; j < dim; ++j) os << (j ? "," : "") << 'z' << j;
  os << '\n';
  char buf[40];
  for (const auto& z : samples) {
    for (std::size_t j = 0; j < dim; ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", z[j]);
      os << (j ? "," : "") << buf;
    }
    os << '\n';
  }
}

json run_metadata(const RunConfig& cfg, const BuiltTarget& target) {
  json meta;
  meta["initialization"] = "xavier_uniform weights, zero biases";
  meta["scale_parameterization"] = "softplus(scale_raw)";
  meta["learning_rate_decay"] = "applied to eta_net and eta_scale";
  meta["hmc_step_size"] =
      "initial 0.1/sqrt(eps_dim) unless set; each chain runs at a fixed step, and its burn-in acceptances adapt "
      "the step used by the next chain toward target_accept; every iteration scales the step by a uniform "
      "factor in [1 - step_jitter, 1 + step_jitter]";
  meta["sivi_L_schedule"] = "linear from 1 to L_final";
  meta["wall_clock"] = "timing.jsonl";
  if (target.train) meta["train_preprocessing"] = target.train->preprocessing;
  if (cfg.method == Method::kExplicit) meta["family"] = "explicit diagonal gaussian (eps_dim 0)";
  return meta;
}

}  // namespace

SemiImplicitQ initial_family(const RunConfig& cfg, std::size_t z_dim) {
  FamilySpec spec = cfg.family;
  spec.z_dim = z_dim;
  if (cfg.method == Method::kExplicit) spec.eps_dim = 0;
  Rng rng = make_stream(cfg.seed, kInitStream);
  return make_family(spec, rng);
}

RunResult run_experiment(const RunConfig& cfg) {
  cfg.validate();
  const BuiltTarget target = build_target(cfg.target);
  const TargetModel& full = *target.model;

  RunResult result;
  SemiImplicitQ q = initial_family(cfg, full.z_dim());
  result.initial = q;

  const std::string out_dir = resolve_output_dir(cfg.output_dir);
  const bool write = !out_dir.empty();
  auto path = [&](const char* name) { return write ? (fs::path(out_dir) / name).string() : std::string(); };
  if (write) {
    fs::create_directories(out_dir);
    json c;
    c["config"] = to_json(cfg);
    c["metadata"] = run_metadata(cfg, target);
    std::ofstream(path("config.json")) << c.dump(2) << '\n';
    save_checkpoint_file(q, path("checkpoint_init.txt"));
  }
  if (cfg.iterations == 0) {
    result.final_q = q;
    return result;
  }

  JsonLinesWriter metrics(path("metrics.jsonl"));
  JsonLinesWriter timing(path("timing.jsonl"));

  Rng train_rng = make_stream(cfg.seed, kTrainStream);
  Rng eval_rng = make_stream(cfg.seed, kEvalStream);
  RmsPropState opt = make_rmsprop(q.num_params(), q.num_net_params(), cfg.eta_net, cfg.eta_scale, cfg.decay_every,
                                  cfg.decay_factor);
  Vec params = q.flatten();
  HmcConfig hmc = cfg.hmc;

  double train_seconds = 0.0;
  double acc_sum = 0.0, dh_sum = 0.0;
  long diag_count = 0;
  Vec grad(q.num_params());

  for (long t = 0; t < cfg.iterations; ++t) {
    const auto t0 = std::chrono::steady_clock::now();
    int L = 0;
    try {
      const auto batch = full.draw_minibatch(train_rng);
      const TargetModel& tm = batch ? *batch : full;
      if (cfg.method == Method::kSivi) {
        L = l_schedule_linear(t, cfg.iterations - 1, cfg.sivi.L_final);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int s = 0; s < cfg.samples_per_iter; ++s) {
          const SiviEstimate est = sivi_surrogate_gradient(tm, q, L, train_rng);
          for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += est.grad[i] / cfg.samples_per_iter;
        }
      } else {
        const GradEstimate est = elbo_gradient(tm, q, cfg.samples_per_iter, hmc, train_rng);
        if (q.eps_dim > 0) hmc.step_size = est.hmc_step_size;
        acc_sum += est.hmc_acceptance;
        dh_sum += est.hmc_mean_abs_delta_h;
        ++diag_count;
        grad = est.grad;
      }
      for (double g : grad) {
        if (!std::isfinite(g)) fail(ErrorKind::kNonFinite, "non-finite gradient");
      }
      rmsprop_step(opt, params, grad);
      q.assign_from(params);
    } catch (const Error& e) {
      metrics.write({{"iteration", t + 1}, {"error", to_string(e.kind())}, {"message", e.what()}});
      throw;
    }
    train_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const long it = t + 1;
    const bool last = it == cfg.iterations;
    const bool do_elbo = last || (cfg.elbo_every > 0 && it % cfg.elbo_every == 0);
    const bool do_test = target.test && (last || (cfg.testll_every > 0 && it % cfg.testll_every == 0));
    if (!do_elbo && !do_test) continue;

    MetricsRecord rec;
    rec.iteration = it;
    rec.wall_clock_seconds = train_seconds;
    if (do_elbo) {
      const Estimate e = elbo_estimate(full, q, cfg.elbo_samples, cfg.elbo_inner, eval_rng);
      rec.elbo = e.value;
      rec.elbo_se = e.std_error;
      if (last) result.final_elbo = e;
    }
    if (do_test) {
      const Estimate e = mlr_predictive_loglik(q, *target.test, cfg.testll_samples, eval_rng);
      rec.test_loglik = e.value;
      rec.test_loglik_se = e.std_error;
      if (last) result.final_test_loglik = e;
    }
    if (cfg.method == Method::kSivi) {
      rec.sivi_L = L;
    } else if (diag_count > 0) {
      rec.hmc_acceptance = acc_sum / static_cast<double>(diag_count);
      rec.mean_abs_delta_h = dh_sum / static_cast<double>(diag_count);
      rec.step_size = hmc.step_size.value_or(hmc.initial_step_size(q.eps_dim));
      acc_sum = dh_sum = 0.0;
      diag_count = 0;
    }
    metrics.write(to_json(rec, false));
    timing.write({{"iteration", it}, {"wall_clock_seconds", train_seconds}});
    result.records.push_back(rec);
  }

  result.final_q = q;
  result.seconds_per_iteration = train_seconds / static_cast<double>(cfg.iterations);
  if (write) {
    save_checkpoint_file(q, path("checkpoint_final.txt"));
    std::vector<Vec> samples;
    for (std::size_t s = 0; s < cfg.posterior_samples; ++s) samples.push_back(sample(q, eval_rng).z);
    write_samples_csv(samples, q.z_dim, path("posterior_samples.csv"));
  }
  return result;
}

SweepResult sweep_hmc_iterations(const RunConfig& cfg, const std::vector<std::pair<int, int>>& settings) {
  if (settings.empty()) fail(ErrorKind::kConfig, "sweep needs at least one (n_burn, n_keep) setting");
  cfg.validate();
  SweepResult out;
  const std::string base = resolve_output_dir(cfg.output_dir);
  json summary = json::array();
  double lo = 0.0, hi = 0.0;
  for (const auto& [burn, keep] : settings) {
    RunConfig c = cfg;
    c.method = Method::kUivi;
    c.hmc.n_burn = burn;
    c.hmc.n_keep = keep;
    if (!base.empty()) {
      c.output_dir = (fs::path(base) / ("hmc_" + std::to_string(burn) + "_" + std::to_string(keep))).string();
    }
    SweepEntry entry{burn, keep, run_experiment(c)};
    json row = {{"n_burn", burn}, {"n_keep", keep}, {"seconds_per_iteration", entry.result.seconds_per_iteration}};
    if (entry.result.final_elbo) {
      const double v = entry.result.final_elbo->value;
      row["final_elbo"] = v;
      row["final_elbo_se"] = entry.result.final_elbo->std_error;
      if (out.entries.empty()) lo = hi = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      out.max_final_elbo_se = std::max(out.max_final_elbo_se, entry.result.final_elbo->std_error);
    }
    summary.push_back(row);
    out.entries.push_back(std::move(entry));
  }
  out.final_elbo_spread = hi - lo;
  if (!base.empty()) {
    fs::create_directories(base);
    json s = {{"settings", summary},
              {"final_elbo_spread", out.final_elbo_spread},
              {"max_final_elbo_se", out.max_final_elbo_se}};
    std::ofstream((fs::path(base) / "sweep_summary.json").string()) << s.dump(2) << '\n';
  }
  return out;
}

}  // namespace uivi
