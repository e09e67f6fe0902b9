#include "lmc/cli.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "lmc/errors.hpp"
#include "lmc/evaluation.hpp"

namespace lmc::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> checkpoint;
  std::optional<int> horizon;
  std::optional<int> iterations;
  std::optional<int> index;
  std::optional<fs::path> input;
};

fs::path latest_checkpoint(const RunConfig& c) { return c.paths.checkpoints / "latest.lmck"; }

fs::path numbered_checkpoint(const RunConfig& c, std::int64_t iteration) {
  char name[32];
  std::snprintf(name, sizeof name, "iter-%06lld.lmck", static_cast<long long>(iteration));
  return c.paths.checkpoints / name;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_trained(const RunConfig& c, const Options& o) {
  const fs::path path = o.checkpoint.value_or(latest_checkpoint(c));
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path.string());
  return load_checkpoint(path, c.architecture, c.training);
}

int cmd_generate(RunConfig c, const Options& o, std::ostream& out) {
  if (o.seed) c.data.seed = *o.seed;
  const auto train = data::generate_moving_mnist(c.data.train_options());
  data::save_dataset(c.paths.dataset, train);
  out << "wrote " << train.size() << " sequences to " << c.paths.dataset.string() << '\n';
  if (c.data.test_count > 0) {
    const auto test = data::generate_moving_mnist(c.data.test_options());
    data::save_dataset(c.paths.test_dataset, test);
    out << "wrote " << test.size() << " sequences to " << c.paths.test_dataset.string() << '\n';
  }
  return kOk;
}

int cmd_train(RunConfig c, const Options& o, std::ostream& out) {
  if (o.seed) c.training.seed = *o.seed;
  if (o.iterations) c.training.iterations = *o.iterations;
  c.validate();
  const auto dataset = data::load_dataset(c.paths.dataset);
  if (dataset.empty()) throw ConfigError("paths.dataset", "dataset holds no sequences");

  std::optional<Checkpoint> resumed;
  if (o.checkpoint) resumed.emplace(load_checkpoint(*o.checkpoint, c.architecture, c.training));
  Model<float> model = resumed ? std::move(resumed->model)
                               : Model<float>(c.architecture, c.training.memory_slots,
                                              c.training.query_mode, c.training.seed);
  TrainState state = resumed ? std::move(resumed->state)
                             : TrainState(c.training.seed ^ 0x5bd1e995ULL);
  LossLog log(c.paths.loss_log,
              resumed ? std::optional<std::int64_t>(state.iteration) : std::nullopt);

  const auto start = std::chrono::steady_clock::now();
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationLoss& l) {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.append(l, wall);
  };
  hooks.on_checkpoint = [&](Model<float>& m, const TrainState& s) {
    save_checkpoint(numbered_checkpoint(c, s.iteration), m, s);
    save_checkpoint(latest_checkpoint(c), m, s);
  };
  train(dataset, model, state, c.training, hooks);
  save_checkpoint(latest_checkpoint(c), model, state);
  out << "trained to iteration " << state.iteration << "; phase losses " << state.phase1.last
      << " / " << state.phase2.last << '\n';
  return kOk;
}

int cmd_predict(const RunConfig& c, const Options& o, std::ostream& out) {
  const int horizon = o.horizon.value_or(c.evaluation.horizon);
  if (horizon < 1) throw ConfigError("--horizon", "must be >= 1");
  const fs::path source = o.input.value_or(c.paths.test_dataset);
  const int index = o.index.value_or(0);
  Checkpoint ck = load_trained(c, o);
  const auto dataset = data::load_dataset(source);
  if (index < 0 || static_cast<std::size_t>(index) >= dataset.size()) {
    throw ConfigError("--index", "no sequence " + std::to_string(index) + " in " + source.string());
  }
  const auto& seq = dataset[static_cast<std::size_t>(index)];
  const int n = c.training.short_frames;
  const data::VideoSequence predicted = eval::predict_sequence(ck.model, seq, n, horizon);

  const fs::path base = c.paths.reports / ("prediction-" + std::to_string(index));
  data::save_dataset(fs::path(base.string() + ".lmcd"), {predicted});

  std::vector<data::VideoSequence> rows;
  const std::size_t available = seq.length() - static_cast<std::size_t>(n);
  rows.push_back(seq.slice(static_cast<std::size_t>(n),
                           std::min<std::size_t>(available, static_cast<std::size_t>(horizon))));
  rows.push_back(predicted);
  eval::render_strip(rows, c.evaluation.strip_stride, fs::path(base.string() + ".pgm"));
  out << "wrote " << horizon << " predicted frames to " << base.string() << ".lmcd\n";
  return kOk;
}

int cmd_evaluate(const RunConfig& c, const Options& o, std::ostream& out) {
  const int horizon = o.horizon.value_or(c.evaluation.horizon);
  if (horizon < 1) throw ConfigError("--horizon", "must be >= 1");
  const int last = std::min(c.evaluation.last, horizon);
  Checkpoint ck = load_trained(c, o);
  const auto dataset = data::load_dataset(c.paths.test_dataset);
  if (dataset.empty()) throw ConfigError("paths.test_dataset", "dataset holds no sequences");
  const eval::MetricReport report =
      eval::evaluate(ck.model, dataset, c.training.short_frames, horizon, last);
  const fs::path path = c.paths.reports / "metrics.json";
  write_json(path, eval::to_json(report));
  out << "mean mse " << report.mean.mse << ", psnr " << report.mean.psnr << " dB, ssim "
      << report.mean.ssim << " over " << report.count << " sequences -> " << path.string()
      << '\n';
  return kOk;
}

int cmd_analyze(RunConfig c, const Options& o, std::ostream& out) {
  if (o.seed) c.data.seed = *o.seed;
  Checkpoint ck = load_trained(c, o);
  if (ck.model.query_mode() == QueryMode::none) {
    throw ConfigError("training.query_mode", "memory analysis needs a model with a memory");
  }
  const auto& e = c.evaluation;
  data::MovingMnistOptions base = c.data.test_options();
  base.seed ^= 0xa5a5a5a5ULL;
  base.length = e.long_frames;
  const auto long_clips = eval::motion_pattern_clips(base, e.patterns, e.clips_per_pattern);
  base.seed ^= 0x0f0f0f0fULL;
  base.length = e.short_frames;
  const auto short_clips = eval::motion_pattern_clips(base, e.patterns, e.clips_per_pattern);
  const eval::AlignmentReport report = eval::analyze_alignment(
      ck.model, long_clips, short_clips, eval::motion_pattern_labels(e.patterns));
  const fs::path path = c.paths.reports / "alignment.json";
  write_json(path, eval::to_json(report));
  out << "same-pattern similarity " << report.same_pattern << ", cross-pattern "
      << report.cross_pattern << " -> " << path.string() << '\n';
  return kOk;
}

void one_line(std::ostream& err, const std::string& what) {
  std::string line = what;
  for (auto& ch : line) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  err << "lmc-predict: error: " << line << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, const Environment& env, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Long-term motion context video prediction", "lmc-predict"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "Run configuration (JSON)")->required();
  };
  auto* generate = app.add_subcommand("generate", "Synthesize the training and test datasets");
  add_common(generate);
  generate->add_option("--seed", o.seed, "Overrides data.seed");

  auto* train_cmd = app.add_subcommand("train", "Alternating two-phase training");
  add_common(train_cmd);
  train_cmd->add_option("--seed", o.seed, "Overrides training.seed");
  train_cmd->add_option("--checkpoint", o.checkpoint, "Resume from this checkpoint");
  train_cmd->add_option("--iterations", o.iterations, "Overrides training.iterations");

  auto* predict = app.add_subcommand("predict", "Predict future frames of one sequence");
  add_common(predict);
  predict->add_option("--checkpoint", o.checkpoint, "Defaults to the latest checkpoint");
  predict->add_option("--horizon", o.horizon, "Frames to predict");
  predict->add_option("--index", o.index, "Sequence index in the input dataset");
  predict->add_option("--input", o.input, "Dataset file (defaults to the test set)");
  predict->add_option("--seed", o.seed, "Accepted for uniformity; prediction is deterministic");

  auto* evaluate = app.add_subcommand("evaluate", "MSE / PSNR / SSIM on the test set");
  add_common(evaluate);
  evaluate->add_option("--checkpoint", o.checkpoint, "Defaults to the latest checkpoint");
  evaluate->add_option("--horizon", o.horizon, "Frames to predict");
  evaluate->add_option("--seed", o.seed, "Accepted for uniformity; evaluation is deterministic");

  auto* analyze = app.add_subcommand("analyze-memory", "Addressing similarity across motion patterns");
  add_common(analyze);
  analyze->add_option("--checkpoint", o.checkpoint, "Defaults to the latest checkpoint");
  analyze->add_option("--seed", o.seed, "Overrides the clip generation seed");

  std::vector<std::string> owned{"lmc-predict"};
  owned.insert(owned.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : owned) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    one_line(err, e.what());
    return kUsage;
  }

  try {
    const RunConfig config = load_run_config(o.config, env);
    if (generate->parsed()) return cmd_generate(config, o, out);
    if (train_cmd->parsed()) return cmd_train(config, o, out);
    if (predict->parsed()) return cmd_predict(config, o, out);
    if (evaluate->parsed()) return cmd_evaluate(config, o, out);
    return cmd_analyze(config, o, out);
  } catch (const ConfigError& e) {
    one_line(err, std::string("config ") + e.what());
    return kUsage;
  } catch (const CheckpointError& e) {
    one_line(err, e.what());
    return kUsage;
  } catch (const NumericalError& e) {
    one_line(err, e.what());
    return kNumerical;
  } catch (const IoError& e) {
    one_line(err, e.what());
    return kIo;
  } catch (const FormatError& e) {
    one_line(err, e.what());
    return kIo;
  } catch (const fs::filesystem_error& e) {
    one_line(err, e.what());
    return kIo;
  } catch (const Error& e) {
    one_line(err, e.what());
    return kUsage;
  } catch (const std::exception& e) {
    one_line(err, e.what());
    return 1;
  }
}

}  // namespace lmc::cli
