#include "ssgc/cli.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ssgc/ssgc.hpp"

namespace ssgc {
namespace {

namespace fs = std::filesystem;

struct GlobalOpts {
  std::uint64_t seed = 1;
  bool seed_given = false;
  bool deterministic = false;
  std::size_t threads = 1;
  std::string config;
  std::string out = "out";
};

// Command-line overrides; unset fields leave the config-file value alone.
struct TaskOpts {
  std::optional<std::string> dataset, data, model, feature_transform, prune_method;
  std::vector<std::string> classes;
  std::optional<std::size_t> seg_len, overlap, K, epochs, batch_size, retrain_epochs, per_class, w_inner_steps;
  std::optional<double> near_field_rate, lr, prune_rate, rho, noise, train_ratio;
  std::optional<long> admm_start;
  bool half_spectrum = false;
};

void add_task_options(CLI::App* sc, TaskOpts& o, bool training) {
  sc->add_option("--task,--dataset", o.dataset, "synth | bonn | csv | spectra");
  sc->add_option("--data", o.data, "Dataset root (bonn), record file (csv) or spectrum cache (spectra)");
  sc->add_option("--classes", o.classes, "Bonn subsets in label order, e.g. A,E")->delimiter(',');
  sc->add_option("--seg-len", o.seg_len, "Segment length in samples");
  sc->add_option("--overlap", o.overlap, "Segment overlap in samples");
  sc->add_flag("--half-spectrum", o.half_spectrum, "Keep only the first n/2 spectrum bins");
  sc->add_option("--per-class", o.per_class, "Synthetic segments per class");
  sc->add_option("--noise", o.noise, "Synthetic noise standard deviation");
  if (!training) return;
  auto* k = sc->add_option("--K", o.K, "Maximum connection distance");
  sc->add_option("--near-field-rate", o.near_field_rate, "Connection distance as a fraction of n")->excludes(k);
  sc->add_option("--model", o.model, "ssgcnet | gnn | mlp | mlp5");
  sc->add_option("--epochs", o.epochs, "Training epochs");
  sc->add_option("--batch-size", o.batch_size, "Minibatch size");
  sc->add_option("--lr", o.lr, "Adam learning rate");
  sc->add_option("--train-ratio", o.train_ratio, "Training fraction of the stratified split");
  sc->add_option("--feature-transform", o.feature_transform, "none | standardize | log-standardize");
  sc->add_option("--prune-rate", o.prune_rate, "Connection rate; enables pruning");
  sc->add_option("--prune-method", o.prune_method, "admm | magnitude");
  sc->add_option("--rho", o.rho, "ADMM penalty");
  sc->add_option("--retrain-epochs", o.retrain_epochs, "Masked retraining epochs after pruning");
  sc->add_option("--admm-start", o.admm_start, "First epoch with ADMM active (default: half of --epochs)");
  sc->add_option("--w-steps", o.w_inner_steps, "Adam steps per ADMM w-subproblem");
}

void set(RunConfig& rc, const char* key, const std::string& v) { apply_config_value(rc, key, v); }

template <class T>
std::string str(const T& v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Defaults, then the config file, then command-line flags.
RunConfig resolve(const GlobalOpts& g, const TaskOpts& o) {
  RunConfig rc;
  if (!g.config.empty()) apply_config_file(rc, g.config);
  if (g.seed_given) rc.task.seed = g.seed;
  if (g.deterministic) rc.train.deterministic = true;
  if (g.threads > 1 && !g.deterministic) {
    rc.train.threads = g.threads;
    rc.train.deterministic = false;
  }
  if (o.dataset) set(rc, "dataset", *o.dataset);
  if (o.data) set(rc, "data_path", *o.data);
  if (!o.classes.empty()) rc.task.classes = o.classes;
  if (o.seg_len) rc.task.seg_len = *o.seg_len;
  if (o.overlap) rc.task.overlap = *o.overlap;
  if (o.half_spectrum) rc.task.half_spectrum = true;
  if (o.per_class) rc.task.synth_per_class = *o.per_class;
  if (o.noise) rc.task.synth_noise = *o.noise;
  if (o.K) rc.task.graph = WnfgConfig::with_K(*o.K);
  if (o.near_field_rate) rc.task.graph = WnfgConfig::with_rate(*o.near_field_rate);
  if (o.model) set(rc, "model", *o.model);
  if (o.epochs) rc.train.max_epochs = *o.epochs;
  if (o.batch_size) rc.train.batch_size = *o.batch_size;
  if (o.lr) rc.train.lr = *o.lr;
  if (o.train_ratio) rc.task.train_ratio = *o.train_ratio;
  if (o.feature_transform) set(rc, "feature_transform", *o.feature_transform);
  if (o.prune_rate) set(rc, "prune.connection_rate", str(*o.prune_rate));
  if (o.prune_method) set(rc, "prune.method", *o.prune_method);
  if (!rc.train.prune && (o.rho || o.retrain_epochs || o.admm_start || o.w_inner_steps))
    throw std::invalid_argument("--rho, --retrain-epochs, --admm-start and --w-steps need pruning enabled "
                                "(--prune-rate, --prune-method or prune = true in the config)");
  if (o.rho) set(rc, "prune.rho", str(*o.rho));
  if (o.retrain_epochs) set(rc, "prune.retrain_epochs", str(*o.retrain_epochs));
  if (o.admm_start) set(rc, "prune.admm_start_epoch", str(*o.admm_start));
  if (o.w_inner_steps) set(rc, "prune.w_inner_steps", str(*o.w_inner_steps));
  rc.train.validate();
  return rc;
}

std::string to_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream os;
  fn(os);
  return os.str();
}

/// Writes trace, checkpoint and report (in that order, so the report only
/// names files that exist). Returns the exit code for the run status.
int emit_training_outputs(const TrainResult& res, const fs::path& out_dir, std::ostream& out) {
  nlohmann::json files = nlohmann::json::object();
  if (!res.report.trace.records.empty()) {
    write_file_atomic(out_dir / "admm_trace.csv", render([&](std::ostream& os) { res.report.trace.write_csv(os); }));
    files["admm_trace"] = "admm_trace.csv";
  }
  if (res.report.status == "ok") {
    save_checkpoint(out_dir / "model.ckpt", res.spec, res.params, res.masks);
    files["checkpoint"] = "model.ckpt";
  }
  const auto j = report_json(res.report, files);
  write_file_atomic(out_dir / "report.json", to_text(j));
  print_report(out, j);
  out << "wrote " << (out_dir / "report.json").string() << "\n";
  if (res.report.status != "ok") {
    out << "run status: " << res.report.status << " (" << res.report.error << ")\n";
    return 2;
  }
  return 0;
}

std::vector<double> parse_rates(const std::vector<double>& rates, const char* what) {
  if (rates.empty()) throw std::invalid_argument(std::string(what) + ": no rates given");
  for (double r : rates)
    if (!(r > 0.0 && r <= 1.0)) throw std::invalid_argument(std::string(what) + ": rates must be in (0,1]");
  return rates;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse spectrum graph networks: graph construction, training and ADMM pruning", "ssgc"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", std::string(kToolVersion));

  GlobalOpts g;
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_given = true; });
  app.add_flag("--deterministic", g.deterministic, "Single-threaded, bitwise reproducible execution");
  app.add_option("--threads", g.threads, "Worker threads for gradient evaluation (ignored with --deterministic)");
  app.add_option("--config", g.config, "Flat key = value configuration file");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();

  // ingest
  TaskOpts ingest_o;
  auto* ingest = app.add_subcommand("ingest", "Segment a dataset and write its spectrum cache");
  add_task_options(ingest, ingest_o, false);

  // graph-bench
  std::size_t bench_n = 256, bench_count = 100;
  std::vector<double> bench_rates = {1.0, 0.5, 0.1};
  std::string bench_spectra;
  auto* bench = app.add_subcommand("graph-bench", "Graph size and build time per near-field rate");
  bench->add_option("--n", bench_n, "Spectrum length for synthetic input")->capture_default_str();
  bench->add_option("--count", bench_count, "Number of synthetic spectra")->capture_default_str();
  bench->add_option("--rates", bench_rates, "Near-field rates")->delimiter(',')->capture_default_str();
  bench->add_option("--spectra", bench_spectra, "Use a spectrum cache instead of synthetic input");

  // train
  TaskOpts train_o;
  auto* train = app.add_subcommand("train", "Train a model, optionally pruning it");
  add_task_options(train, train_o, true);

  // prune
  TaskOpts prune_o;
  std::string prune_ckpt;
  std::size_t prune_admm_epochs = 10;
  auto* prune = app.add_subcommand("prune", "Prune a trained checkpoint, then retrain with masks");
  add_task_options(prune, prune_o, true);
  prune->add_option("--checkpoint", prune_ckpt, "Checkpoint written by train")->required()->check(CLI::ExistingFile);
  prune->add_option("--admm-epochs", prune_admm_epochs, "Epochs of ADMM before hard masking")->capture_default_str();

  // sweep-nfr
  TaskOpts nfr_o;
  std::vector<double> nfr_rates = {1.0, 0.5, 0.3, 0.2, 0.1, 0.05};
  auto* nfr = app.add_subcommand("sweep-nfr", "Accuracy and graph size across near-field rates");
  add_task_options(nfr, nfr_o, true);
  nfr->add_option("--rates", nfr_rates, "Near-field rates")->delimiter(',')->capture_default_str();

  // sweep-rate
  TaskOpts sr_o;
  std::vector<double> sr_rates = {0.5, 0.2, 0.1, 0.05};
  std::vector<std::string> sr_methods = {"admm", "magnitude"};
  auto* sr = app.add_subcommand("sweep-rate", "Accuracy across connection rates for each pruning method");
  add_task_options(sr, sr_o, true);
  sr->add_option("--rates", sr_rates, "Connection rates")->delimiter(',')->capture_default_str();
  sr->add_option("--methods", sr_methods, "admm, magnitude")
      ->delimiter(',')
      ->check(CLI::IsMember({"admm", "magnitude"}))
      ->capture_default_str();

  // report
  std::string report_path;
  auto* report = app.add_subcommand("report", "Pretty-print a run report");
  report->add_option("path", report_path, "report.json")->required()->check(CLI::ExistingFile);

  // verify
  auto* verify_cmd = app.add_subcommand("verify", "Run the built-in oracle suites");

  for (auto* sc : app.get_subcommands({})) sc->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  const fs::path out_dir = g.out;
  try {
    if (ingest->parsed()) {
      const auto rc = resolve(g, ingest_o);
      const auto spectra = load_task_spectra(rc.task);
      write_file_atomic(out_dir / "spectra.csv", render([&](std::ostream& os) { write_spectra_csv(os, spectra); }));
      out << "segments " << spectra.size() << ", bins " << (spectra.empty() ? 0 : spectra.front().size()) << "\n";
      out << "wrote " << (out_dir / "spectra.csv").string() << "\n";
      return 0;
    }

    if (bench->parsed()) {
      const auto rates = parse_rates(bench_rates, "graph-bench");
      std::vector<Spectrum> spectra;
      if (!bench_spectra.empty()) {
        spectra = read_spectra_csv(bench_spectra);
      } else {
        if (bench_n < 2 || bench_count == 0) throw std::invalid_argument("graph-bench: need --n >= 2 and --count >= 1");
        SyntheticConfig sc{bench_n, (bench_count + 1) / 2, 0.5, g.seed};
        spectra = make_synthetic_spectra(sc);
        spectra.resize(bench_count);
      }
      const std::size_t n = spectra.front().size();
      std::size_t dense_bytes = 0;
      for (const auto& s : spectra) dense_bytes += build_dense_baseline(s).bytes();
      const std::string csv = render([&](std::ostream& os) {
        os << "rate,K,graphs,nnz_per_graph,bytes_per_graph,bytes_vs_dense,build_seconds_per_graph\n";
        for (double r : rates) {
          const std::size_t K = near_field_rate_to_K(r, n);
          std::size_t nnz = 0, bytes = 0;
          double secs = 0.0;
          for (const auto& s : spectra) {
            const auto [gph, st] = build_wnfg_timed(s, K);
            nnz += st.nnz;
            bytes += st.bytes;
            secs += st.build_seconds;
          }
          const double cnt = static_cast<double>(spectra.size());
          os << r << ',' << K << ',' << spectra.size() << ',' << static_cast<double>(nnz) / cnt << ','
             << static_cast<double>(bytes) / cnt << ',' << static_cast<double>(bytes) / static_cast<double>(dense_bytes)
             << ',' << secs / cnt << '\n';
        }
      });
      write_file_atomic(out_dir / "graph_bench.csv", csv);
      out << csv;
      return 0;
    }

    if (train->parsed()) {
      const auto rc = resolve(g, train_o);
      return emit_training_outputs(run_training(rc.task, rc.train), out_dir, out);
    }

    if (prune->parsed()) {
      auto rc = resolve(g, prune_o);
      if (!rc.train.prune) rc.train.prune = PruneConfig{};
      rc.train.prune->admm_start_epoch = 0;
      const auto spectra = load_task_spectra(rc.task);
      const auto ck = load_checkpoint(prune_ckpt);
      const auto spec = model_for(rc.task, spectra.at(0).size(), std::max<std::size_t>(2, class_count_of(spectra)),
                                  rc.train);
      if (spec.name != ck.model || spec.digest() != ck.digest)
        throw CheckpointError("digest", "checkpoint model '" + ck.model + "' does not match the task's model '" +
                                            spec.name + "'");
      return emit_training_outputs(run_training(spectra, rc.task, rc.train, &ck.params, prune_admm_epochs), out_dir,
                                   out);
    }

    if (nfr->parsed()) {
      const auto rc = resolve(g, nfr_o);
      const auto rows = sweep_near_field_rate(load_task_spectra(rc.task), rc.task, rc.train,
                                              parse_rates(nfr_rates, "sweep-nfr"));
      const auto csv = render([&](std::ostream& os) { write_near_field_csv(os, rows); });
      write_file_atomic(out_dir / "near_field.csv", csv);
      out << csv;
      return 0;
    }

    if (sr->parsed()) {
      const auto rc = resolve(g, sr_o);
      std::vector<PruneMethod> methods;
      for (const auto& m : sr_methods) methods.push_back(m == "admm" ? PruneMethod::Admm : PruneMethod::Magnitude);
      const auto rows = sweep_connection_rate(load_task_spectra(rc.task), rc.task, rc.train,
                                              parse_rates(sr_rates, "sweep-rate"), methods);
      const auto csv = render([&](std::ostream& os) { write_connection_csv(os, rows); });
      write_file_atomic(out_dir / "connection_rate.csv", csv);
      out << csv;
      return 0;
    }

    if (report->parsed()) {
      std::ifstream in(report_path);
      print_report(out, nlohmann::json::parse(in));
      return 0;
    }

    if (verify_cmd->parsed()) {
      bool ok = true;
      for (const auto& r : verify::run_all(g.seed)) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%-4s %-32s cases=%-5zu failures=%-4zu worst=%.3e tol=%.0e\n",
                      r.passed() ? "PASS" : "FAIL", r.name.c_str(), r.cases, r.failures, r.worst, r.tolerance);
        out << buf;
        ok = ok && r.passed();
      }
      return ok ? 0 : 3;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace ssgc
