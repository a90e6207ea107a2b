// Apache License, Version 2.0, refer to LICENSE.txt
//
// recsurv simulate | fit | summarize | predict. Any failure prints one line to
// stderr, removes the files this run created and exits with status 1.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <thread>

#include "recsurv/recsurv.hpp"

namespace fs = std::filesystem;
using namespace recsurv;

namespace {

// Files and directories created by the current command, newest last.
class Outputs {
 public:
  void directory(const std::string& dir) {
    if (dir.empty()) throw std::invalid_argument("output directory is empty");
    fs::path p(dir);
    std::vector<fs::path> fresh;
    for (fs::path cur = p; !cur.empty() && !fs::exists(cur); cur = cur.parent_path()) fresh.push_back(cur);
    fs::create_directories(p);
    if (!fs::is_directory(p)) throw std::runtime_error(dir + " is not a directory");
    for (auto it = fresh.rbegin(); it != fresh.rend(); ++it) created_.push_back(*it);
  }

  std::string file(const std::string& dir, const std::string& name) {
    fs::path p = fs::path(dir) / name;
    std::lock_guard lock(mutex_);
    created_.push_back(p);
    return p.string();
  }

  void remove_all() noexcept {
    std::error_code ec;
    for (auto it = created_.rbegin(); it != created_.rend(); ++it) {
      if (fs::is_directory(*it, ec)) {
        fs::remove(*it, ec);  // only succeeds when empty
      } else {
        fs::remove(*it, ec);
      }
    }
    created_.clear();
  }

 private:
  std::vector<fs::path> created_;
  std::mutex mutex_;
};

std::string pick(const std::string& flag, const std::string& from_config, const char* what) {
  if (!flag.empty()) return flag;
  if (!from_config.empty()) return from_config;
  throw std::invalid_argument(std::string("no ") + what + " given (flag or config key)");
}

void check_chain_matches(const Chain& chain, const DatasetFile& file) {
  if (chain.individuals != file.data.size() || chain.q != file.data.q) {
    throw std::invalid_argument("chain was fit to " + std::to_string(chain.individuals) + " subjects with q = " +
                                std::to_string(chain.q) + ", data has " + std::to_string(file.data.size()) +
                                " with q = " + std::to_string(file.data.q));
  }
  if (chain.empty()) throw std::invalid_argument("chain holds no samples");
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string config, out;
};

void run_simulate(const SimulateArgs& a, Outputs& outputs) {
  const RunConfig cfg = read_run_config(a.config);
  const SimulationConfig sim = cfg.simulation.value_or(SimulationConfig{});
  const std::string dir = pick(a.out, cfg.out_dir, "output directory");

  Rng rng(sim.seed);
  const SimulatedData full = simulate_dataset(sim, rng);
  const Dataset data = apply_censoring(full, sim.censor_rate, rng);

  outputs.directory(dir);
  write_dataset_csv(outputs.file(dir, "data.csv"), data);
  write_ground_truth(outputs.file(dir, "truth.json"), full.truth);
  const auto s = summarize(data);
  std::cout << "simulated " << s.individuals << " subjects, " << s.total_events << " observed events, "
            << s.censored << " censored -> " << dir << '\n';
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string config, data, out;
  int chains = 1;
  long progress_every = 1000;
};

void run_fit(const FitArgs& a, Outputs& outputs) {
  // Everything is validated before the first sweep.
  const RunConfig cfg = read_run_config(a.config);
  const std::string data_path = pick(a.data, cfg.data_path, "dataset");
  const std::string dir = pick(a.out, cfg.out_dir, "output directory");
  if (a.chains < 1) throw std::invalid_argument("--chains must be at least 1");
  if (a.progress_every < 1) throw std::invalid_argument("--progress-every must be at least 1");
  const DatasetFile file = read_dataset_csv(data_path);
  validate_dataset(file.data);

  outputs.directory(dir);
  const auto k = static_cast<std::size_t>(a.chains);
  std::vector<std::string> chain_paths, log_paths;
  for (std::size_t c = 0; c < k; ++c) {
    const std::string suffix = k == 1 ? "" : "_" + std::to_string(c + 1);
    chain_paths.push_back(outputs.file(dir, "chain" + suffix + ".jsonl"));
    log_paths.push_back(outputs.file(dir, "progress" + suffix + ".csv"));
  }

  std::vector<std::exception_ptr> errors(k);
  auto work = [&](std::size_t c) {
    try {
      Chain header;
      header.config = cfg.sampler;
      header.hyper = cfg.hyper;
      header.stream = c;
      header.q = file.data.q;
      header.individuals = file.data.size();
      ChainWriter writer(chain_paths[c], header, cfg.sampler.stored_samples());
      auto log = io::open_output(log_paths[c]);
      log << "iteration,seconds,clusters,birth_acceptance,death_acceptance,refreshes\n";
      const auto start = std::chrono::steady_clock::now();

      ChainCallbacks cb;
      cb.progress_every = a.progress_every;
      cb.sample = [&](long it, const ModelState& s) { writer.write(it, s); };
      cb.progress = [&](const Progress& p) {
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log << p.iteration << ',' << io::format_double(secs) << ',' << p.clusters << ','
            << io::format_double(p.moves.birth_rate()) << ',' << io::format_double(p.moves.death_rate()) << ','
            << p.moves.refreshes << '\n'
            << std::flush;
      };
      run_chain(file.data, cfg.hyper, cfg.sampler, c, JointModel{}, cb);
      writer.close();
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };

  if (k == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t c = 0; c < k; ++c) threads.emplace_back(work, c);
    for (auto& t : threads) t.join();
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const std::exception& e) {
      throw std::runtime_error((k > 1 ? "chain " + std::to_string(c + 1) + ": " : std::string()) + e.what());
    }
  }
  std::cout << "wrote " << k << " chain(s) of " << cfg.sampler.stored_samples() << " samples -> " << dir << '\n';
}

// ---------------------------------------------------------------- summarize

struct SummarizeArgs {
  std::string chain, data, out;
  double level = 0.95;
  std::size_t effect_draws = 1000;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void run_summarize(const SummarizeArgs& a, Outputs& outputs) {
  if (!(a.level > 0.0 && a.level < 1.0)) throw std::invalid_argument("--level must lie in (0, 1)");
  const Chain chain = read_chain(a.chain);
  const DatasetFile file = read_dataset_csv(a.data);
  check_chain_matches(chain, file);

  const auto estimate = binder_partition(chain);
  Rng rng(a.seed_set ? a.seed : chain.config.seed, 1000 + chain.stream);
  const auto effects = predictive_random_effect_draws(chain, a.effect_draws, rng);

  outputs.directory(a.out);
  write_count_summary(outputs.file(a.out, "counts.csv"), chain, file, a.level);
  write_coefficient_summary(outputs.file(a.out, "coefficients.csv"), chain, a.level);
  write_matrix_csv(outputs.file(a.out, "coclustering.csv"), coclustering_matrix(chain), file.ids);
  write_partition_csv(outputs.file(a.out, "partition.csv"), estimate.partition, file.ids);
  write_cluster_counts_csv(outputs.file(a.out, "cluster_counts.csv"), chain);
  write_kaplan_meier_csv(outputs.file(a.out, "kaplan_meier.csv"), cluster_kaplan_meier(chain, estimate.partition));
  write_effect_draws_csv(outputs.file(a.out, "effect_draws.csv"), effects);
  std::cout << "summarized " << chain.size() << " samples, Binder partition has "
            << estimate.partition.clusters() << " clusters -> " << a.out << '\n';
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string chain, covariates, out;
  std::size_t draws = 1000;
  long max_attempts = 1000000;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool strict = false;
};

void run_predict(const PredictArgs& a, Outputs& outputs) {
  const std::vector<double> x = io::parse_list(a.covariates, "--covariates");
  if (a.max_attempts < 1) throw std::invalid_argument("--max-attempts must be at least 1");
  const Chain chain = read_chain(a.chain);
  Rng rng(a.seed_set ? a.seed : chain.config.seed, 2000 + chain.stream);
  const auto draws = predictive_outcome_draws(chain, x, a.draws, rng, a.max_attempts, !a.strict);

  outputs.directory(a.out);
  write_outcome_draws_csv(outputs.file(a.out, "predictive.csv"), draws);
  const auto incomplete = std::count_if(draws.begin(), draws.end(), [](const auto& d) { return !d.complete; });
  if (incomplete > 0) {
    std::cerr << "recsurv: warning: " << incomplete << " of " << draws.size()
              << " draws hit the rejection cap; their N is kept, S and gaps are left empty\n";
  }
  std::cout << "wrote " << draws.size() << " predictive draws -> " << a.out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint recurrent-event and survival model: simulate, fit, summarize, predict"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate a dataset and its ground truth");
  cmd_sim->add_option("--config", sim.config, "Run configuration file")->required();
  cmd_sim->add_option("--out", sim.out, "Output directory (default: config key 'out')");

  FitArgs fit;
  auto* cmd_fit = app.add_subcommand("fit", "Run the Gibbs sampler and stream the chain to disk");
  cmd_fit->add_option("--config", fit.config, "Run configuration file")->required();
  cmd_fit->add_option("--data", fit.data, "Dataset CSV (default: config key 'data')");
  cmd_fit->add_option("--out", fit.out, "Output directory (default: config key 'out')");
  cmd_fit->add_option("--chains", fit.chains, "Independent chains run concurrently");
  cmd_fit->add_option("--progress-every", fit.progress_every, "Sweeps between progress log lines");

  SummarizeArgs sum;
  auto* cmd_sum = app.add_subcommand("summarize", "Posterior summary tables from a chain file");
  cmd_sum->add_option("--chain", sum.chain, "Chain file")->required();
  cmd_sum->add_option("--data", sum.data, "Dataset CSV the chain was fit to")->required();
  cmd_sum->add_option("--out", sum.out, "Output directory")->required();
  cmd_sum->add_option("--level", sum.level, "Credible interval level");
  cmd_sum->add_option("--effect-draws", sum.effect_draws, "Predictive random-effect draws");
  auto* sum_seed = cmd_sum->add_option("--seed", sum.seed, "Seed for predictive draws (default: chain seed)");

  PredictArgs pred;
  auto* cmd_pred = app.add_subcommand("predict", "Posterior predictive (N, S, gaps) for new covariates");
  cmd_pred->add_option("--chain", pred.chain, "Chain file")->required();
  cmd_pred->add_option("--covariates", pred.covariates, "Comma-separated covariate values")->required();
  cmd_pred->add_option("--draws", pred.draws, "Number of draws");
  cmd_pred->add_option("--out", pred.out, "Output directory")->required();
  cmd_pred->add_option("--max-attempts", pred.max_attempts, "Rejection attempts per draw");
  auto* pred_seed = cmd_pred->add_option("--seed", pred.seed, "Seed (default: chain seed)");
  cmd_pred->add_flag("--strict", pred.strict, "Fail instead of recording draws that hit the rejection cap");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "recsurv: " << e.what() << '\n';
    return 2;
  }
  sum.seed_set = sum_seed->count() > 0;
  pred.seed_set = pred_seed->count() > 0;

  Outputs outputs;
  try {
    if (*cmd_sim) run_simulate(sim, outputs);
    if (*cmd_fit) run_fit(fit, outputs);
    if (*cmd_sum) run_summarize(sum, outputs);
    if (*cmd_pred) run_predict(pred, outputs);
  } catch (const std::exception& e) {
    outputs.remove_all();
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    std::cerr << "recsurv: error: " << msg << '\n';
    return 1;
  }
  return 0;
}
