#include "fairppm/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "fairppm/csv.hpp"
#include "fairppm/dataset_io.hpp"
#include "fairppm/error.hpp"
#include "fairppm/eventlog.hpp"
#include "fairppm/metrics.hpp"
#include "fairppm/run_config.hpp"
#include "fairppm/synthetic.hpp"
#include "fairppm/train.hpp"

namespace fairppm::cli {
namespace {

namespace fs = std::filesystem;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  bool drop_sensitive = false;
  std::optional<std::size_t> max_len;
  std::optional<int> jobs;
  std::optional<double> sinkhorn_eps;
  std::optional<int> sinkhorn_iters;
  std::optional<std::string> out, log, data, checkpoint;
};

RunConfig resolve(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.lambda) cfg.lambda = *o.lambda;
  if (o.drop_sensitive) cfg.drop_sensitive = true;
  if (o.max_len) cfg.max_len = *o.max_len;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.sinkhorn_eps) cfg.sinkhorn.epsilon = *o.sinkhorn_eps;
  if (o.sinkhorn_iters) cfg.sinkhorn.max_iters = *o.sinkhorn_iters;
  if (o.out) cfg.out = *o.out;
  if (o.log) cfg.log = *o.log;
  if (o.data) cfg.data = *o.data;
  if (o.checkpoint) cfg.checkpoint = *o.checkpoint;
  cfg.validate();
  return cfg;
}

std::string provenance_line(const RunConfig& cfg) {
  return "# config_hash=" + cfg.hash() + " seed=" + std::to_string(cfg.seed);
}

nlohmann::json provenance(const RunConfig& cfg) { return {{"config_hash", cfg.hash()}, {"seed", cfg.seed}}; }

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArtifactError("cannot write " + path.string());
  return f;
}

std::string fmt(double v) { return csv::format_double(v); }

struct Dataset {
  EncoderSpec spec;
  std::vector<EncodedPrefix> train, valid, test;
};

EncoderSpec read_encoder(const fs::path& dir) {
  const auto j = read_json(dir / "encoder.json");
  if (!j.contains("encoder")) throw ArtifactError((dir / "encoder.json").string() + " has no encoder");
  return EncoderSpec::from_json(j.at("encoder"));
}

Dataset load_dataset(const fs::path& dir, bool with_test) {
  Dataset d;
  d.spec = read_encoder(dir);
  d.train = read_samples(dir / "train.jsonl").samples;
  d.valid = read_samples(dir / "valid.jsonl").samples;
  if (with_test) d.test = read_samples(dir / "test.jsonl").samples;
  return d;
}

void write_grid_csv(const fs::path& path, const RunConfig& cfg, const train::GridResult& grid) {
  auto f = open_out(path);
  f << provenance_line(cfg) << '\n';
  csv::write_row(f, {"layers", "bidirectional", "hidden", "batch", "lr", "dropout", "valid_auc", "ok"});
  for (const auto& c : grid.cells) {
    csv::write_row(f, {std::to_string(c.hyper.layers), c.hyper.bidirectional ? "true" : "false",
                       std::to_string(c.hyper.hidden), std::to_string(c.hyper.batch), fmt(c.hyper.lr),
                       fmt(c.hyper.dropout), c.ok ? fmt(c.valid_auc) : "nan", c.ok ? "true" : "false"});
  }
}

nn::Hyper choose_hyper(const RunConfig& cfg, const Dataset& d, std::ostream& out) {
  if (!cfg.use_grid) return cfg.hyper;
  const auto grid = train::grid_search(d.spec, d.train, d.valid, cfg.grid, cfg.seed, cfg.train, cfg.jobs);
  write_grid_csv(cfg.out / "grid.csv", cfg, grid);
  out << "grid search: " << grid.cells.size() << " cells, selected " << grid.best.to_json().dump() << '\n';
  return grid.best;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out) {
  const EventLog log = generate_synthetic_log(cfg.synth, cfg.seed);
  const fs::path path = cfg.log.empty() ? cfg.out / "log.csv" : cfg.log;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto f = open_out(path);
  f << provenance_line(cfg) << '\n';
  write_event_log(f, log);
  out << "wrote " << path.string() << " (" << log.traces.size() << " cases)\n";
  return kOk;
}

int cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  if (cfg.log.empty()) throw ConfigError("log: no event log path configured");
  if (!fs::exists(cfg.log)) throw ArtifactError("event log not found: " + cfg.log.string());
  const EventLog log = parse_event_log(cfg.log, cfg.schema);
  auto [train_log, test_log] = split_cases(log, cfg.test_fraction, train::derive_seed(cfg.seed, 10));
  const auto cap = cfg.generation_cap();
  const auto train_all = extract_prefixes(train_log, cfg.target_activity, cfg.sensitive_attr, cap);
  const auto test_raw = extract_prefixes(test_log, cfg.target_activity, cfg.sensitive_attr, cap);
  auto [train_raw, valid_raw] = validation_split(train_all, cfg.valid_fraction, train::derive_seed(cfg.seed, 11));
  const EncoderSpec spec = fit_encoder(train_raw, log.schema, cfg.max_len, cfg.drop_sensitive, cfg.sensitive_attr);

  const fs::path dir = cfg.data_dir();
  fs::create_directories(dir);
  nlohmann::json enc = provenance(cfg);
  enc["encoder"] = spec.to_json();
  enc["warnings"] = spec.warnings;
  write_json(dir / "encoder.json", enc);

  const std::pair<const char*, const std::vector<RawPrefixSample>*> splits[] = {
      {"train", &train_raw}, {"valid", &valid_raw}, {"test", &test_raw}};
  nlohmann::json summary = provenance(cfg);
  auto table = open_out(dir / "summary.csv");
  table << provenance_line(cfg) << '\n';
  csv::write_row(table, {"split", "prefixes", "pct_positive", "pct_s1", "pct_s0_positive", "pct_s1_positive"});
  for (const auto& [name, samples] : splits) {
    nlohmann::json meta = provenance(cfg);
    meta["split"] = name;
    write_samples(dir / (std::string(name) + ".jsonl"), encode_all(spec, *samples), meta);
    const PrefixSummary s = summarize(*samples);
    summary["splits"][name] = to_json(s);
    csv::write_row(table, {name, std::to_string(s.prefixes), fmt(s.pct_positive), fmt(s.pct_s1),
                           fmt(s.pct_s0_positive), fmt(s.pct_s1_positive)});
  }
  summary["cases"] = {{"train", train_log.traces.size()}, {"test", test_log.traces.size()}};
  write_json(dir / "summary.json", summary);
  for (const auto& w : spec.warnings) out << "warning: " << w << '\n';
  out << "ingested " << log.traces.size() << " cases: " << train_raw.size() << " train / " << valid_raw.size()
      << " valid / " << test_raw.size() << " test prefixes\n";
  return kOk;
}

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Dataset d = load_dataset(cfg.data_dir(), false);
  fs::create_directories(cfg.out);
  const nn::Hyper hyper = choose_hyper(cfg, d, out);
  train::Checkpoint ck = train::train_model(d.spec, d.train, d.valid, hyper, cfg.loss(), cfg.seed, cfg.train);
  ck.config_hash = cfg.hash();
  const fs::path path = cfg.checkpoint_path();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  ck.save(path);
  if (ck.empty_group_batches > 0) {
    out << "warning: " << ck.empty_group_batches << " batches lacked one sensitive group; fairness term skipped\n";
  }
  out << "wrote " << path.string() << " (epochs " << ck.epochs << ", best epoch " << ck.best_epoch
      << ", batch " << ck.effective_batch << ")\n";
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  const train::Checkpoint ck = train::Checkpoint::load(cfg.checkpoint_path());
  const fs::path dir = cfg.data_dir();
  if (!(read_encoder(dir) == ck.encoder)) {
    throw ArtifactError("checkpoint was trained on a different encoding than " + dir.string());
  }
  const auto test = read_samples(dir / "test.jsonl").samples;
  const auto scores = nn::predict(ck.params, test);
  std::vector<int> labels, groups;
  for (const auto& s : test) {
    labels.push_back(s.y);
    groups.push_back(s.s);
  }
  const auto report = metrics::evaluate_scores(scores, labels, groups, ck.valid_scores, ck.valid_labels);

  fs::create_directories(cfg.out);
  nlohmann::json j = provenance(cfg);
  j["checkpoint_config_hash"] = ck.config_hash;
  j["lambda"] = ck.loss.lambda;
  j["drop_sensitive"] = ck.encoder.drop_sensitive;
  j["metrics"] = report.to_json();
  write_json(cfg.out / "eval.json", j);

  auto f = open_out(cfg.out / "scores.csv");
  f << provenance_line(cfg) << '\n';
  csv::write_row(f, {"score", "label", "sensitive"});
  for (std::size_t k = 0; k < scores.size(); ++k) {
    csv::write_row(f, {fmt(scores[k]), std::to_string(labels[k]), std::to_string(groups[k])});
  }
  out << "auc " << fmt(report.auc) << " abpc " << fmt(report.abpc) << " abcc " << fmt(report.abcc) << " ddp_c "
      << fmt(report.ddp_c) << '\n';
  return kOk;
}

int cmd_sweep(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const Dataset d = load_dataset(cfg.data_dir(), true);
  fs::create_directories(cfg.out);
  const nn::Hyper hyper = choose_hyper(cfg, d, out);
  const auto points = train::lambda_sweep(d.spec, d.train, d.valid, d.test, hyper, cfg.sweep_lambdas, cfg.loss(),
                                          cfg.seed, cfg.train, cfg.jobs);
  std::vector<bool> on_abpc(points.size()), on_abcc(points.size());
  for (auto k : train::pareto_front(points, train::FairnessKey::abpc)) on_abpc[k] = true;
  for (auto k : train::pareto_front(points, train::FairnessKey::abcc)) on_abcc[k] = true;

  auto f = open_out(cfg.out / "sweep.csv");
  f << provenance_line(cfg) << '\n';
  csv::write_row(f, {"lambda", "auc", "abpc", "abcc", "on_pareto_abpc", "on_pareto_abcc", "seed", "converged"});
  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& p = points[k];
    csv::write_row(f, {fmt(p.lambda), fmt(p.auc), fmt(p.abpc), fmt(p.abcc), on_abpc[k] ? "true" : "false",
                       on_abcc[k] ? "true" : "false", std::to_string(p.seed), p.converged ? "true" : "false"});
    if (p.failed) err << "warning: lambda " << fmt(p.lambda) << " failed: " << p.error << '\n';
  }
  out << "wrote " << (cfg.out / "sweep.csv").string() << " (" << points.size() << " points)\n";
  return kOk;
}

std::string file_label(const std::string& label) {
  std::string s = label;
  std::replace_if(s.begin(), s.end(), [](unsigned char c) { return !std::isalnum(c) && c != '-'; }, '_');
  return s;
}

int cmd_report(const RunConfig& cfg, std::ostream& out) {
  if (cfg.report_runs.empty()) throw ConfigError("report.runs: no runs configured");
  fs::create_directories(cfg.out);
  auto table = open_out(cfg.out / "report.csv");
  table << provenance_line(cfg) << '\n';
  std::vector<std::string> header{"run", "lambda", "drop_sensitive"};
  for (const auto& name : metrics::eval_report_fields()) header.push_back(name);
  csv::write_row(table, header);

  for (const auto& run : cfg.report_runs) {
    const auto j = read_json(run.dir / "eval.json");
    const auto report = metrics::EvalReport::from_json(j.at("metrics"));
    std::vector<std::string> row{run.label, fmt(j.value("lambda", 0.0)), j.value("drop_sensitive", false) ? "true" : "false"};
    for (double v : metrics::eval_report_values(report)) row.push_back(fmt(v));
    csv::write_row(table, row);

    const fs::path scores_path = run.dir / "scores.csv";
    std::ifstream in(scores_path, std::ios::binary);
    if (!in) throw ArtifactError("missing scores file " + scores_path.string());
    csv::Reader reader(in);
    std::vector<double> scores;
    std::vector<int> groups;
    bool header_seen = false;
    while (auto rec = reader.next()) {
      if (!header_seen) {
        header_seen = true;
        continue;
      }
      if (rec->fields.size() != 3) throw ArtifactError(scores_path.string() + ": malformed row");
      scores.push_back(std::stod(rec->fields[0]));
      groups.push_back(std::stoi(rec->fields[2]));
    }
    const auto curve = metrics::density_curve(metrics::group_scores(scores, groups));
    auto dens = open_out(cfg.out / ("density_" + file_label(run.label) + ".csv"));
    metrics::write_density_csv(dens, curve, provenance_line(cfg).substr(2) + " run=" + run.label);
  }
  out << "wrote " << (cfg.out / "report.csv").string() << " (" << cfg.report_runs.size() << " runs)\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fairness-aware outcome prediction for business processes", "fairppm"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "JSON run configuration");
  app.add_option("--seed", o.seed, "root random seed");
  app.add_option("--lambda", o.lambda, "fairness weight in [0, 1]");
  app.add_flag("--drop-sensitive", o.drop_sensitive, "remove the sensitive attribute from the inputs");
  app.add_option("--max-len", o.max_len, "maximum prefix length");
  app.add_option("--jobs", o.jobs, "parallel training runs for sweep and grid search");
  app.add_option("--sinkhorn-eps", o.sinkhorn_eps, "entropic regularisation");
  app.add_option("--sinkhorn-iters", o.sinkhorn_iters, "maximum Sinkhorn iterations");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--log", o.log, "event log CSV");
  app.add_option("--data", o.data, "directory with ingest artifacts (default: --out)");
  app.add_option("--checkpoint", o.checkpoint, "checkpoint path (default: <out>/checkpoint.json)");

  auto* synth = app.add_subcommand("synth", "generate a synthetic biased event log");
  auto* ingest = app.add_subcommand("ingest", "split, extract and encode prefixes");
  auto* train_cmd = app.add_subcommand("train", "train one model and write a checkpoint");
  auto* sweep = app.add_subcommand("sweep", "train across lambda values and mark Pareto points");
  auto* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on the test split");
  auto* report = app.add_subcommand("report", "merge evaluations and write density curves");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfig;
  }

  try {
    const RunConfig cfg = resolve(o);
    if (synth->parsed()) return cmd_synth(cfg, out);
    if (ingest->parsed()) return cmd_ingest(cfg, out);
    if (train_cmd->parsed()) return cmd_train(cfg, out);
    if (sweep->parsed()) return cmd_sweep(cfg, out, err);
    if (evaluate->parsed()) return cmd_evaluate(cfg, out);
    if (report->parsed()) return cmd_report(cfg, out);
    return kConfig;
  } catch (const UndefinedMetricError& e) {
    err << "error: " << e.what() << '\n';
    return kUndefinedMetric;
  } catch (const ArtifactError& e) {
    err << "error: " << e.what() << '\n';
    return kMissingArtifact;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ParseError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const ConsistencyError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const SplitError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace fairppm::cli
