#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uivi/config_io.hpp"
#include "uivi/error.hpp"
#include "uivi/evaluation.hpp"
#include "uivi/runner.hpp"

namespace {

using nlohmann::json;
using uivi::ErrorKind;
using uivi::RunConfig;

struct CommonFlags {
  std::string method = "uivi";
  std::string activation = "relu";
  double step_size = 0.0;
  bool no_adapt = false;
  std::string config_path;
  CLI::Option* step_opt = nullptr;
};

void add_run_flags(CLI::App& app, RunConfig& cfg, CommonFlags& f) {
  app.add_option("--config", f.config_path, "JSON config file; its fields override flags");
  app.add_option("--method", f.method, "uivi | sivi | explicit");
  app.add_option("--target", cfg.target.kind, "banana | multimodal | xshaped | mlr");
  app.add_option("--train", cfg.target.train_path, "training CSV for mlr (default: synthetic blobs)");
  app.add_option("--test", cfg.target.test_path, "test CSV for mlr");
  app.add_flag("--divide-255", cfg.target.prep.divide_255, "divide features by 255");
  app.add_flag("--standardize", cfg.target.prep.standardize, "standardize features with training statistics");
  app.add_option("--batch-size", cfg.target.batch_size, "minibatch size (0: full data)");
  app.add_option("--blobs-train", cfg.target.blobs.n_train, "synthetic blobs: training points");
  app.add_option("--blobs-test", cfg.target.blobs.n_test, "synthetic blobs: test points");
  app.add_option("--blobs-classes", cfg.target.blobs.num_classes, "synthetic blobs: classes");
  app.add_option("--blobs-dim", cfg.target.blobs.dim, "synthetic blobs: features");
  app.add_option("--blobs-separation", cfg.target.blobs.separation, "synthetic blobs: center spread");
  app.add_option("--blobs-seed", cfg.target.blobs.seed, "synthetic blobs: generator seed");
  app.add_option("--eps-dim", cfg.family.eps_dim, "mixing noise dimension");
  app.add_option("--hidden", cfg.family.hidden, "hidden layer widths, comma separated")->delimiter(',');
  app.add_option("--hidden-activation", f.activation, "relu | tanh | softplus | identity");
  app.add_option("--init-scale", cfg.family.init_scale, "initial conditional scale");
  app.add_option("--iterations", cfg.iterations, "training iterations");
  app.add_option("--samples-per-iter", cfg.samples_per_iter, "Monte Carlo samples per gradient");
  app.add_option("--eta-net", cfg.eta_net, "network learning rate");
  app.add_option("--eta-scale", cfg.eta_scale, "scale learning rate");
  app.add_option("--decay-every", cfg.decay_every, "learning rate decay period");
  app.add_option("--decay-factor", cfg.decay_factor, "learning rate decay factor");
  app.add_option("--hmc-burn", cfg.hmc.n_burn, "HMC burn-in iterations");
  app.add_option("--hmc-keep", cfg.hmc.n_keep, "HMC kept iterations");
  app.add_option("--hmc-leapfrog", cfg.hmc.leapfrog_steps, "leapfrog steps per HMC iteration");
  f.step_opt = app.add_option("--hmc-step-size", f.step_size, "initial leapfrog step size");
  app.add_flag("--hmc-no-adapt", f.no_adapt, "disable step size adaptation");
  app.add_option("--hmc-target-accept", cfg.hmc.target_accept, "target acceptance rate");
  app.add_option("--hmc-step-jitter", cfg.hmc.step_jitter, "per-iteration relative step size jitter in [0, 1)");
  app.add_option("--sivi-L", cfg.sivi.L_final, "final number of SIVI auxiliary samples");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--elbo-every", cfg.elbo_every, "ELBO evaluation period");
  app.add_option("--elbo-samples", cfg.elbo_samples, "outer samples per ELBO estimate");
  app.add_option("--elbo-inner", cfg.elbo_inner, "mixing samples per density estimate");
  app.add_option("--testll-every", cfg.testll_every, "test log-likelihood period");
  app.add_option("--testll-samples", cfg.testll_samples, "posterior samples per test log-likelihood");
  app.add_option("--posterior-samples", cfg.posterior_samples, "samples in the final posterior dump");
  app.add_option("-o,--output", cfg.output_dir, "output directory (relative paths resolve under $UIVI_OUTPUT_ROOT)");
}

RunConfig finalize(RunConfig cfg, const CommonFlags& f) {
  cfg.method = uivi::method_from_string(f.method);
  cfg.family.hidden_activation = uivi::activation_from_string(f.activation);
  if (f.step_opt && f.step_opt->count() > 0) cfg.hmc.step_size = f.step_size;
  if (f.no_adapt) cfg.hmc.adapt_during_burn = false;
  if (!f.config_path.empty()) cfg = uivi::load_config_file(f.config_path, cfg);
  cfg.validate();
  return cfg;
}

std::vector<std::pair<int, int>> parse_settings(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int b = 0, k = 0;
    char extra = 0;
    if (std::sscanf(item.c_str(), "%d:%d%c", &b, &k, &extra) != 2) {
      uivi::fail(ErrorKind::kConfig, "bad sweep setting '" + item + "' (expected burn:keep)");
    }
    out.emplace_back(b, k);
  }
  if (out.empty()) uivi::fail(ErrorKind::kConfig, "sweep needs at least one burn:keep setting");
  return out;
}

json estimate_json(const uivi::Estimate& e) { return {{"value", e.value}, {"std_error", e.std_error}}; }

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kParse:
    case ErrorKind::kInvalidArgument: return 2;
    case ErrorKind::kNumerical:
    case ErrorKind::kNonFinite: return 3;
    case ErrorKind::kIo: return 4;
    default: return 1;
  }
}

void report(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-implicit variational inference with unbiased gradients"};
  app.require_subcommand(1);

  RunConfig run_cfg;
  CommonFlags run_flags;
  auto* run = app.add_subcommand("run", "train one variational approximation");
  add_run_flags(*run, run_cfg, run_flags);

  RunConfig sweep_cfg;
  CommonFlags sweep_flags;
  std::string settings = "1:1,5:5,25:25";
  auto* sweep = app.add_subcommand("sweep-hmc", "repeat a UIVI run over HMC burn/keep settings");
  add_run_flags(*sweep, sweep_cfg, sweep_flags);
  sweep->add_option("--settings", settings, "comma separated burn:keep pairs");

  RunConfig eval_cfg;
  CommonFlags eval_flags;
  std::string checkpoint;
  std::size_t is_samples = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a saved checkpoint against a target");
  add_run_flags(*eval, eval_cfg, eval_flags);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--is-samples", is_samples, "importance samples for the log-marginal estimate (0: skip)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report("usage", e.what());
    return 2;
  }

  try {
    json out;
    if (run->parsed()) {
      const RunConfig cfg = finalize(run_cfg, run_flags);
      const auto res = uivi::run_experiment(cfg);
      out["output_dir"] = uivi::resolve_output_dir(cfg.output_dir);
      out["iterations"] = cfg.iterations;
      out["seconds_per_iteration"] = res.seconds_per_iteration;
      if (res.final_elbo) out["final_elbo"] = estimate_json(*res.final_elbo);
      if (res.final_test_loglik) out["final_test_loglik"] = estimate_json(*res.final_test_loglik);
    } else if (sweep->parsed()) {
      const RunConfig cfg = finalize(sweep_cfg, sweep_flags);
      const auto res = uivi::sweep_hmc_iterations(cfg, parse_settings(settings));
      out["output_dir"] = uivi::resolve_output_dir(cfg.output_dir);
      out["final_elbo_spread"] = res.final_elbo_spread;
      out["max_final_elbo_se"] = res.max_final_elbo_se;
      for (const auto& e : res.entries) {
        json row = {{"n_burn", e.n_burn}, {"n_keep", e.n_keep}};
        if (e.result.final_elbo) row["final_elbo"] = estimate_json(*e.result.final_elbo);
        out["settings"].push_back(row);
      }
    } else {
      const RunConfig cfg = finalize(eval_cfg, eval_flags);
      const uivi::SemiImplicitQ q = uivi::load_checkpoint_file(checkpoint);
      const auto target = uivi::build_target(cfg.target);
      uivi::require(target.model->z_dim() == q.z_dim, ErrorKind::kConfig,
                    "checkpoint dimension does not match the target");
      uivi::Rng rng(cfg.seed);
      out["elbo"] = estimate_json(uivi::elbo_estimate(*target.model, q, cfg.elbo_samples, cfg.elbo_inner, rng));
      if (target.test) {
        out["test_loglik"] = estimate_json(uivi::mlr_predictive_loglik(q, *target.test, cfg.testll_samples, rng));
      }
      if (is_samples > 0) {
        out["log_marginal"] = estimate_json(uivi::is_log_marginal(*target.model, q, is_samples, cfg.elbo_inner, rng));
      }
    }
    std::cout << out.dump(2) << '\n';
  } catch (const uivi::Error& e) {
    report(uivi::to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    report("internal", e.what());
    return 1;
  }
  return 0;
}
