#include "uivi/config_io.hpp"

#include <fstream>

#include "uivi/error.hpp"

namespace uivi {

using nlohmann::json;

namespace {

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("config field '") + key + "': " + e.what());
  }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) fail(ErrorKind::kConfig, std::string("unknown config key '") + key + "' in " + where);
  }
}

}  // namespace

json to_json(const RunConfig& cfg) {
  json j;
  j["method"] = to_string(cfg.method);
  j["target"] = {
      {"kind", cfg.target.kind},
      {"train_path", cfg.target.train_path},
      {"test_path", cfg.target.test_path},
      {"divide_255", cfg.target.prep.divide_255},
      {"standardize", cfg.target.prep.standardize},
      {"batch_size", cfg.target.batch_size},
      {"blobs",
       {{"n_train", cfg.target.blobs.n_train},
        {"n_test", cfg.target.blobs.n_test},
        {"num_classes", cfg.target.blobs.num_classes},
        {"dim", cfg.target.blobs.dim},
        {"separation", cfg.target.blobs.separation},
        {"seed", cfg.target.blobs.seed}}},
  };
  j["family"] = {
      {"eps_dim", cfg.family.eps_dim},
      {"hidden", cfg.family.hidden},
      {"hidden_activation", to_string(cfg.family.hidden_activation)},
      {"init_scale", cfg.family.init_scale},
  };
  j["iterations"] = cfg.iterations;
  j["samples_per_iter"] = cfg.samples_per_iter;
  j["optimizer"] = {
      {"eta_net", cfg.eta_net},
      {"eta_scale", cfg.eta_scale},
      {"decay_every", cfg.decay_every},
      {"decay_factor", cfg.decay_factor},
  };
  j["hmc"] = {
      {"n_burn", cfg.hmc.n_burn},
      {"n_keep", cfg.hmc.n_keep},
      {"leapfrog_steps", cfg.hmc.leapfrog_steps},
      {"adapt_during_burn", cfg.hmc.adapt_during_burn},
      {"target_accept", cfg.hmc.target_accept},
      {"step_jitter", cfg.hmc.step_jitter},
  };
  j["hmc"]["step_size"] = cfg.hmc.step_size ? json(*cfg.hmc.step_size) : json(nullptr);
  j["sivi"] = {{"L_final", cfg.sivi.L_final}};
  j["seed"] = cfg.seed;
  j["eval"] = {
      {"elbo_every", cfg.elbo_every},
      {"elbo_samples", cfg.elbo_samples},
      {"elbo_inner", cfg.elbo_inner},
      {"testll_every", cfg.testll_every},
      {"testll_samples", cfg.testll_samples},
      {"posterior_samples", cfg.posterior_samples},
  };
  j["output_dir"] = cfg.output_dir;
  return j;
}

void apply_json(RunConfig& cfg, const json& j) {
  if (!j.is_object()) fail(ErrorKind::kConfig, "config must be a JSON object");
  check_keys(j,
             {"method", "target", "family", "iterations", "samples_per_iter", "optimizer", "hmc", "sivi", "seed",
              "eval", "output_dir"},
             "config");
  if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
  if (j.contains("target")) {
    const json& t = j.at("target");
    check_keys(t, {"kind", "train_path", "test_path", "divide_255", "standardize", "batch_size", "blobs"}, "target");
    take(t, "kind", cfg.target.kind);
    take(t, "train_path", cfg.target.train_path);
    take(t, "test_path", cfg.target.test_path);
    take(t, "divide_255", cfg.target.prep.divide_255);
    take(t, "standardize", cfg.target.prep.standardize);
    take(t, "batch_size", cfg.target.batch_size);
    if (t.contains("blobs")) {
      const json& b = t.at("blobs");
      check_keys(b, {"n_train", "n_test", "num_classes", "dim", "separation", "seed"}, "target.blobs");
      take(b, "n_train", cfg.target.blobs.n_train);
      take(b, "n_test", cfg.target.blobs.n_test);
      take(b, "num_classes", cfg.target.blobs.num_classes);
      take(b, "dim", cfg.target.blobs.dim);
      take(b, "separation", cfg.target.blobs.separation);
      take(b, "seed", cfg.target.blobs.seed);
    }
  }
  if (j.contains("family")) {
    const json& f = j.at("family");
    check_keys(f, {"eps_dim", "hidden", "hidden_activation", "init_scale"}, "family");
    take(f, "eps_dim", cfg.family.eps_dim);
    take(f, "hidden", cfg.family.hidden);
    if (f.contains("hidden_activation")) {
      cfg.family.hidden_activation = activation_from_string(f.at("hidden_activation").get<std::string>());
    }
    take(f, "init_scale", cfg.family.init_scale);
  }
  take(j, "iterations", cfg.iterations);
  take(j, "samples_per_iter", cfg.samples_per_iter);
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    check_keys(o, {"eta_net", "eta_scale", "decay_every", "decay_factor"}, "optimizer");
    take(o, "eta_net", cfg.eta_net);
    take(o, "eta_scale", cfg.eta_scale);
    take(o, "decay_every", cfg.decay_every);
    take(o, "decay_factor", cfg.decay_factor);
  }
  if (j.contains("hmc")) {
    const json& h = j.at("hmc");
    check_keys(h, {"n_burn", "n_keep", "leapfrog_steps", "adapt_during_burn", "target_accept", "step_size", "step_jitter"}, "hmc");
    take(h, "n_burn", cfg.hmc.n_burn);
    take(h, "n_keep", cfg.hmc.n_keep);
    take(h, "leapfrog_steps", cfg.hmc.leapfrog_steps);
    take(h, "adapt_during_burn", cfg.hmc.adapt_during_burn);
    take(h, "target_accept", cfg.hmc.target_accept);
    take(h, "step_jitter", cfg.hmc.step_jitter);
    if (h.contains("step_size")) {
      const json& s = h.at("step_size");
      if (s.is_null()) {
        cfg.hmc.step_size.reset();
      } else {
        cfg.hmc.step_size = s.get<double>();
      }
    }
  }
  if (j.contains("sivi")) {
    check_keys(j.at("sivi"), {"L_final"}, "sivi");
    take(j.at("sivi"), "L_final", cfg.sivi.L_final);
  }
  take(j, "seed", cfg.seed);
  if (j.contains("eval")) {
    const json& e = j.at("eval");
    check_keys(e, {"elbo_every", "elbo_samples", "elbo_inner", "testll_every", "testll_samples", "posterior_samples"},
               "eval");
    take(e, "elbo_every", cfg.elbo_every);
    take(e, "elbo_samples", cfg.elbo_samples);
    take(e, "elbo_inner", cfg.elbo_inner);
    take(e, "testll_every", cfg.testll_every);
    take(e, "testll_samples", cfg.testll_samples);
    take(e, "posterior_samples", cfg.posterior_samples);
  }
  take(j, "output_dir", cfg.output_dir);
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::kConfig, "cannot open config file '" + path + "'");
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, "config file '" + path + "' is not valid JSON: " + e.what());
  }
  apply_json(base, j);
  return base;
}

json to_json(const MetricsRecord& rec, bool include_wall_clock) {
  json j;
  j["iteration"] = rec.iteration;
  if (include_wall_clock) j["wall_clock_seconds"] = rec.wall_clock_seconds;
  if (rec.elbo) j["elbo"] = *rec.elbo;
  if (rec.elbo_se) j["elbo_se"] = *rec.elbo_se;
  if (rec.test_loglik) j["test_loglik"] = *rec.test_loglik;
  if (rec.test_loglik_se) j["test_loglik_se"] = *rec.test_loglik_se;
  if (rec.hmc_acceptance) j["hmc_acceptance"] = *rec.hmc_acceptance;
  if (rec.step_size) j["step_size"] = *rec.step_size;
  if (rec.mean_abs_delta_h) j["mean_abs_delta_h"] = *rec.mean_abs_delta_h;
  if (rec.sivi_L) j["sivi_L"] = *rec.sivi_L;
  return j;
}

}  // namespace uivi
