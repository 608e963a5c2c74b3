#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "sorl/config.hpp"
#include "sorl/infer.hpp"
#include "sorl/model_io.hpp"
#include "sorl/verify.hpp"

namespace {

using namespace sorl;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed: " + path);
}

int cmd_gen_data(const std::string& env, int64_t n, uint64_t seed, const std::string& out) {
  const EnvSpec spec = make_env(env);
  if (n < 1) throw std::invalid_argument("gen-data: n must be >= 1");
  Rng rng = Rng(seed).fork(stream::kData);
  Dataset d = generate_dataset(spec, n, rng);
  compute_obs_stats(d);
  save_dataset(d, out);
  std::printf("wrote %s (%lld transitions, env %s)\n", out.c_str(), static_cast<long long>(n),
              env.c_str());
  return 0;
}

int cmd_train(const std::string& config_path) {
  const RunConfig rc = load_run_config(config_path);
  validate(rc.train);
  const EnvSpec spec = make_env(rc.env);
  if (rc.dataset.empty())
    throw std::invalid_argument("config key dataset: a transitions file is required");
  const Dataset data = load_dataset(rc.dataset);
  if (data.spec.name != spec.name)
    throw std::invalid_argument("dataset was generated for env " + data.spec.name +
                                " but the config names " + rc.env);
  std::filesystem::create_directories(rc.out_dir);

  const InferenceConfig icfg{rc.m_inf, rc.n_candidates, rc.eval_episodes, rc.train.seed};
  if (rc.eval_every > 0) validate_inference(icfg, rc.train.m_disc);

  const std::string metrics_path = rc.out_dir + "/metrics.csv";
  std::ofstream mf(metrics_path, std::ios::binary);
  if (!mf) throw std::runtime_error("cannot open for writing: " + metrics_path);
  mf << "step,q_loss,fm_loss,sc_loss,critic_loss,eval_return,success_rate\n";

  // Rows merge when a metrics step and an eval step coincide; metrics always
  // arrive first at a shared step, so one row is held back at a time.
  std::optional<std::pair<int64_t, LossBreakdown>> held;
  const auto loss_fields = [](const LossBreakdown& bd) {
    return fmt_g17(bd.q_loss) + "," + fmt_g17(bd.fm_loss) + "," + fmt_g17(bd.sc_loss) + "," +
           fmt_g17(bd.critic_loss);
  };
  const auto flush_held = [&]() {
    if (!held) return;
    mf << held->first << "," << loss_fields(held->second) << ",,\n";
    held.reset();
  };
  std::vector<std::pair<double, double>> evals;

  TrainHooks hooks;
  hooks.log_every = rc.log_every;
  hooks.eval_every = rc.eval_every;
  hooks.on_metrics = [&](int64_t step, const LossBreakdown& bd) {
    flush_held();
    held = {step, bd};
  };
  hooks.on_eval = [&](int64_t step, const SorlState& s) {
    const EvalSummary es = evaluate(s.policy, s.critic, spec, icfg);
    evals.emplace_back(es.mean_return, es.success_rate);
    if (held && held->first == step) {
      mf << step << "," << loss_fields(held->second) << "," << fmt_g17(es.mean_return) << ","
         << fmt_g17(es.success_rate) << "\n";
      held.reset();
    } else {
      flush_held();
      mf << step << ",,,,," << fmt_g17(es.mean_return) << "," << fmt_g17(es.success_rate) << "\n";
    }
    std::printf("step %lld  eval mean_return %.4f  success_rate %.4f\n",
                static_cast<long long>(step), es.mean_return, es.success_rate);
    std::fflush(stdout);
  };

  const TrainResult res = train(data, rc.train, hooks);
  flush_held();
  mf.close();
  if (!mf) throw std::runtime_error("write failed: " + metrics_path);

  const std::string model_path = rc.out_dir + "/model.txt";
  save_model(res.state, rc.train, model_path);

  if (!evals.empty()) {
    const size_t k = std::min<size_t>(3, evals.size());
    double r = 0.0, s = 0.0;
    for (size_t i = evals.size() - k; i < evals.size(); ++i) {
      r += evals[i].first;
      s += evals[i].second;
    }
    std::printf("final report (avg of last %zu evals): mean_return %.6f success_rate %.6f\n", k,
                r / k, s / k);
  } else {
    std::printf("final report: no evaluations ran (eval_every = 0)\n");
  }
  std::printf("wrote %s and %s\n", metrics_path.c_str(), model_path.c_str());
  return 0;
}

int cmd_eval(const std::string& model, const std::string& env, int m_inf, int n, int episodes,
             uint64_t seed, const std::string& out) {
  const LoadedModel lm = load_model(model);
  const EnvSpec spec = make_env(env);
  if (lm.obs_dim != spec.obs_dim || lm.action_dim != spec.action_dim)
    throw std::invalid_argument("model dimensions (obs " + std::to_string(lm.obs_dim) +
                                ", action " + std::to_string(lm.action_dim) +
                                ") do not match env " + env);
  const InferenceConfig icfg{m_inf, n, episodes, seed};
  validate_inference(icfg, lm.m_disc);
  const EvalSummary s = evaluate(lm.state.policy, lm.state.critic, spec, icfg);
  std::printf("mean_return %s\nsuccess_rate %s\nstderr %s\nepisodes %d\n",
              fmt_g17(s.mean_return).c_str(), fmt_g17(s.success_rate).c_str(),
              fmt_g17(s.stderr_return).c_str(), s.episodes);
  if (!out.empty())
    write_sweep_csv(out, {{m_inf, n, s.mean_return, s.success_rate, s.stderr_return, episodes}});
  return 0;
}

int cmd_sweep(const std::string& model, const std::string& env, const std::vector<int>& m_list,
              const std::vector<int>& n_list, int episodes, uint64_t seed,
              const std::string& out) {
  const LoadedModel lm = load_model(model);
  const EnvSpec spec = make_env(env);
  if (lm.obs_dim != spec.obs_dim || lm.action_dim != spec.action_dim)
    throw std::invalid_argument("model dimensions do not match env " + env);
  const std::vector<SweepRow> rows =
      scaling_sweep(lm.state.policy, lm.state.critic, spec, m_list, n_list, episodes, seed);
  write_sweep_csv(out, rows);
  std::printf("wrote %s (%zu rows)\n", out.c_str(), rows.size());
  return 0;
}

int verify_gradcheck(const std::string& out) {
  std::string report;
  int fails = 0;
  Rng rng(7);
  for (int i = 0; i < 20; ++i) {
    nn::MlpSpec spec;
    spec.input_dim = 1 + static_cast<int>(rng.below(8));
    spec.output_dim = 1 + static_cast<int>(rng.below(8));
    const int depth = static_cast<int>(rng.below(3));
    for (int l = 0; l < depth; ++l) spec.hidden.push_back(1 + static_cast<int>(rng.below(32)));
    spec.layer_norm = rng.below(2) == 1;
    const auto rep = nn::grad_check(spec, 1000 + i, 1e-4);
    report += "mlp " + std::to_string(spec.input_dim) + "->" + std::to_string(spec.output_dim) +
              " depth " + std::to_string(depth) + (spec.layer_norm ? " ln" : "") +
              ": max_rel_err " + fmt_g17(rep.max_rel_err) + (rep.pass ? " pass" : " FAIL") + "\n";
    if (!rep.pass) ++fails;
  }
  for (const int m : {1, 2, 4}) {
    const double err = euler_btt_grad_check(m, 4, 99 + m);
    const bool ok = err < 1e-3;
    report += "euler chain m=" + std::to_string(m) + ": max_rel_err " + fmt_g17(err) +
              (ok ? " pass" : " FAIL") + "\n";
    if (!ok) ++fails;
  }
  std::fputs(report.c_str(), stdout);
  if (!out.empty()) write_text(out, report);
  return fails ? 1 : 0;
}

int verify_ot(const std::string& out) {
  std::string report;
  int fails = 0;
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    const int n = 1 + static_cast<int>(rng.below(7)), d = 1 + static_cast<int>(rng.below(3));
    Tensor p({n, d}), q({n, d});
    rng.fill_normal(p);
    rng.fill_normal(q);
    const double a = w2_exact(p, q), b = w2_brute_force(p, q);
    if (std::fabs(a - b) > 1e-12 * std::max(1.0, b)) {
      report += "instance " + std::to_string(i) + ": exact " + fmt_g17(a) + " != brute " +
                fmt_g17(b) + "\n";
      ++fails;
    }
    if (w2_exact(q, p) != a) {
      report += "instance " + std::to_string(i) + ": asymmetric\n";
      ++fails;
    }
  }
  for (int i = 0; i < 200; ++i) {
    Tensor p({16, 2}), q({16, 2}), r({16, 2});
    rng.fill_normal(p);
    rng.fill_normal(q);
    rng.fill_normal(r);
    if (w2_exact(p, r) > w2_exact(p, q) + w2_exact(q, r) + 1e-9) {
      report += "triple " + std::to_string(i) + ": triangle inequality violated\n";
      ++fails;
    }
  }
  report += fails ? "ot: FAIL\n" : "ot: 200 brute-force instances + 200 triangle triples pass\n";
  std::fputs(report.c_str(), stdout);
  if (!out.empty()) write_text(out, report);
  return fails ? 1 : 0;
}

int verify_lemma3(const std::string& out) {
  std::string csv = "h,eps,measured_rmse,bound,satisfied\n";
  int fails = 0;
  for (const double h : {0.125, 0.25, 0.5, 1.0})
    for (const double eps : {0.0, 0.005, 0.01, 0.02}) {
      const Lemma3Row row = lemma3_contraction_case(h, eps, 256, 4, 42);
      csv += fmt_g17(row.h) + "," + fmt_g17(row.eps) + "," + fmt_g17(row.measured_rmse) + "," +
             fmt_g17(row.bound) + "," + (row.satisfied ? "1" : "0") + "\n";
      if (!row.satisfied) ++fails;
    }
  std::fputs(csv.c_str(), stdout);
  std::printf(fails ? "lemma3: FAIL (%d rows)\n" : "lemma3: all rows satisfied\n", fails);
  if (!out.empty()) write_text(out, csv);
  return fails ? 1 : 0;
}

int verify_theorem1(const std::string& out, int64_t steps, uint64_t seed) {
  const GenProblem prob =
      mixture_problem({{0.5, 0.5}, {0.5, -0.5}, {-0.5, 0.5}, {-0.5, -0.5}}, 0.05);
  GenTrainConfig gc;
  gc.grad_steps = steps;
  gc.seed = seed;
  gc.on_log = [](int64_t step, double fm, double sc) {
    std::printf("step %lld  fm %.5f  sc %.5f\n", static_cast<long long>(step), fm, sc);
    std::fflush(stdout);
  };
  const ShortcutPolicy policy = train_generative(prob, gc);
  Rng rng = Rng(seed).fork(stream::kEval);
  const BoundReport rep = theorem1_report(policy, prob, 256, 2000, rng);
  const std::string csv = bound_report_csv(rep);
  std::fputs(csv.c_str(), stdout);
  Rng floor_rng = Rng(seed).fork(stream::kData);
  std::printf("sampling floor (n=256 self distance): %s\n",
              fmt_g17(self_distance(prob, 256, floor_rng)).c_str());
  if (!out.empty()) write_text(out, csv);
  for (const auto& row : rep.rows)
    if (!std::isfinite(row.w2) || !std::isfinite(row.bound)) return 1;
  return 0;
}

int cmd_verify(const std::string& suite, const std::string& out, int64_t steps, uint64_t seed) {
  if (suite == "gradcheck") return verify_gradcheck(out);
  if (suite == "ot") return verify_ot(out);
  if (suite == "lemma3") return verify_lemma3(out);
  if (suite == "theorem1") return verify_theorem1(out, steps, seed);
  throw std::invalid_argument("unknown verify suite '" + suite +
                              "'; valid suites: gradcheck, ot, lemma3, theorem1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shortcut-policy offline RL: data generation, training, scaled inference, and "
               "bound verification"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a scripted-policy transition dataset");
  std::string gen_env = "reach2goal", gen_out = "dataset.txt";
  int64_t gen_n = 10000;
  uint64_t gen_seed = 0;
  gen->add_option("--env", gen_env, "environment name");
  gen->add_option("--n", gen_n, "number of transitions");
  gen->add_option("--seed", gen_seed, "rng seed");
  gen->add_option("--out", gen_out, "output path");

  auto* tr = app.add_subcommand("train", "train from a config file");
  std::string tr_config;
  tr->add_option("--config", tr_config, "key = value config file")->required();

  auto* ev = app.add_subcommand("eval", "evaluate a saved model");
  std::string ev_model, ev_env = "reach2goal", ev_out;
  int ev_minf = 4, ev_n = 1, ev_episodes = 50;
  uint64_t ev_seed = 0;
  ev->add_option("--model", ev_model, "model file")->required();
  ev->add_option("--env", ev_env, "environment name");
  ev->add_option("--m-inf", ev_minf, "inference step budget");
  ev->add_option("--n", ev_n, "best-of-N candidates");
  ev->add_option("--episodes", ev_episodes, "episode count");
  ev->add_option("--seed", ev_seed, "rng seed");
  ev->add_option("--out", ev_out, "also write a one-row CSV here");

  auto* sw = app.add_subcommand("sweep", "evaluate an inference-scaling grid");
  std::string sw_model, sw_env = "reach2goal", sw_out = "sweep.csv";
  std::vector<int> sw_minf{1, 2, 4, 8}, sw_n{1};
  int sw_episodes = 50;
  uint64_t sw_seed = 0;
  sw->add_option("--model", sw_model, "model file")->required();
  sw->add_option("--env", sw_env, "environment name");
  sw->add_option("--m-inf", sw_minf, "step budgets")->delimiter(',');
  sw->add_option("--n", sw_n, "candidate counts")->delimiter(',');
  sw->add_option("--episodes", sw_episodes, "episodes per cell");
  sw->add_option("--seed", sw_seed, "rng seed");
  sw->add_option("--out", sw_out, "output CSV path");

  auto* vf = app.add_subcommand("verify", "run a verification suite");
  std::string vf_suite, vf_out;
  int64_t vf_steps = 20000;
  uint64_t vf_seed = 0;
  vf->add_option("--suite", vf_suite, "gradcheck | ot | lemma3 | theorem1")->required();
  vf->add_option("--out", vf_out, "report output path");
  vf->add_option("--steps", vf_steps, "training steps for the theorem1 suite");
  vf->add_option("--seed", vf_seed, "rng seed for the theorem1 suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_env, gen_n, gen_seed, gen_out);
    if (tr->parsed()) return cmd_train(tr_config);
    if (ev->parsed()) return cmd_eval(ev_model, ev_env, ev_minf, ev_n, ev_episodes, ev_seed, ev_out);
    if (sw->parsed())
      return cmd_sweep(sw_model, sw_env, sw_minf, sw_n, sw_episodes, sw_seed, sw_out);
    if (vf->parsed()) return cmd_verify(vf_suite, vf_out, vf_steps, vf_seed);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
