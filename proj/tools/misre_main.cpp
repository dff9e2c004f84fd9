#include "misre/bench.hpp"
#include "misre/io.hpp"
#include "misre/models.hpp"
#include "misre/pipeline.hpp"
#include "misre/synth.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace misre;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

ScenarioSpec resolve_scenario(const std::string& name_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return preset_scenario(name_or_path);
  if (std::filesystem::exists(name_or_path)) return read_scenario(name_or_path);
  throw InvalidInputError("unknown scenario preset or file: " + name_or_path);
}

void print_structure_table(const EstimationResult& result, int top_k) {
  std::printf("%4s %12s %9s %12s  %s\n", "rank", "scale", "inliers", "strength",
              "flags");
  const int shown = top_k > 0
                        ? std::min<int>(top_k, result.structures.size())
                        : static_cast<int>(result.structures.size());
  for (int i = 0; i < shown; ++i) {
    const Structure& s = result.structures[i];
    std::string flags;
    if (s.sigma_exact) flags += " exact";
    if (s.tls_skipped) flags += " tls-skipped";
    if (s.constraint_fallback) flags += " constraint-fallback";
    std::printf("%4d %12.4g %9zu %12.4g %s\n", i + 1, s.sigma,
                s.inlier_indices.size(), s.strength, flags.c_str());
  }
  if (shown < static_cast<int>(result.structures.size()))
    std::printf("  (%zu more below --top-k)\n",
                result.structures.size() - shown);
}

int cmd_fit(const std::string& model_name, const std::string& input,
            int trials, double epsilon, std::uint64_t seed, int threads,
            const std::string& output, const std::string& svg, int top_k,
            bool trajectories) {
  EstimationConfig config;
  config.model = model_from_string(model_name);
  config.trials = trials;
  config.epsilon = epsilon;
  config.seed = seed;
  config.threads = threads;
  config.trajectory_classification = trajectories;

  const ModelSpec& spec = spec_for(config.model);
  const std::vector<Eigen::VectorXd> points =
      spec.input_dim == 4 ? read_correspondences(input)
                          : read_points(input, spec.input_dim);

  const EstimationResult result = run(points, config);
  if (!output.empty()) write_result(output, result, config);
  if (!svg.empty()) render_svg(svg, points, result);
  print_structure_table(result, top_k);
  std::printf("%zu structures, %zu residual points, %.2f s\n",
              result.structures.size(), result.residual_indices.size(),
              result.total_ms / 1000.0);
  return 0;
}

int cmd_synth(const std::string& scenario, std::uint64_t seed,
              const std::string& output, std::string labels_path) {
  const ScenarioSpec spec = resolve_scenario(scenario);
  const LabeledDataset data = generate(spec, seed);
  const std::filesystem::path out(output);
  if (out.extension() == ".ply")
    write_points_ply(out, data.points);
  else
    write_points_csv(out, data.points);
  if (labels_path.empty())
    labels_path = (out.parent_path() / (out.stem().string() + ".labels.csv")).string();
  write_labels_csv(labels_path, data.labels);
  std::printf("wrote %zu points (%zu planted models, %d outliers) to %s\n",
              data.points.size(), spec.models.size(), spec.outliers,
              output.c_str());
  return 0;
}

int cmd_bench(const std::string& scenario, int repeats, int trials,
              double epsilon, std::uint64_t seed, int threads,
              const std::string& output, bool with_baseline,
              double ransac_threshold) {
  BenchOptions options;
  options.scenario = resolve_scenario(scenario);
  options.repeats = repeats;
  options.config.model = scenario_model(options.scenario);
  options.config.trials = trials;
  options.config.epsilon = epsilon;
  options.config.seed = seed;
  options.rep_threads = threads;
  if (with_baseline) options.baseline = RansacBaselineOptions{ransac_threshold};

  const BenchReport report = run_bench(options);
  if (!output.empty()) {
    std::ofstream out(output);
    if (!out) throw IoError("cannot open " + output);
    out << bench_to_json(report, options).dump(2) << '\n';
  }

  std::printf("scenario %s, %d repetitions, %d trials\n", scenario.c_str(),
              repeats, trials);
  std::printf("all planted models recovered in %d/%d runs; mean %.2f s/run\n",
              report.all_recovered_count, report.repeats, report.mean_wall_s);
  std::printf("%6s %9s %12s %12s %14s\n", "model", "success", "mean scale",
              "(std)", "mean inliers");
  for (size_t m = 0; m < report.per_model.size(); ++m) {
    const auto& pm = report.per_model[m];
    std::printf("%6zu %6d/%-3d %12.4g %12.4g %14.5g\n", m, pm.success_count,
                report.repeats, pm.mean_scale, pm.std_scale, pm.mean_inliers);
  }
  if (report.baseline) {
    std::printf("ransac baseline (threshold %.3g):\n", ransac_threshold);
    for (size_t m = 0; m < report.baseline->size(); ++m)
      std::printf("%6zu %6d/%d\n", m, (*report.baseline)[m].success_count,
                  report.repeats);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiple-inlier-structure robust estimation"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "Segment a dataset into structures");
  std::string model, input, output, svg;
  int trials = 1000, threads = 0, top_k = 0;
  double epsilon = 5.0;
  std::uint64_t seed = 0;
  bool trajectories = false;
  fit->add_option("--model", model,
                  "line2d|plane3d|ellipse2d|sphere3d|cylinder3d|fundamental|homography")
      ->required();
  fit->add_option("--input", input, "points file (CSV; ascii PLY for 3D)")
      ->required();
  fit->add_option("--trials,-M", trials, "number of random elemental subsets")
      ->check(CLI::PositiveNumber);
  fit->add_option("--epsilon", epsilon, "initial set size, percent")
      ->check(CLI::Range(1.0, 20.0));
  fit->add_option("--seed", seed, "RNG seed");
  fit->add_option("--threads", threads, "worker count (0: MISRE_THREADS or auto)");
  fit->add_option("--output", output, "result document path (JSON)");
  fit->add_option("--svg", svg, "overlay rendering path");
  fit->add_option("--top-k", top_k, "display filter for the printed table");
  fit->add_flag("--trajectory-classification", trajectories,
                "diagnostic per-point mean-shift trajectory claiming");

  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  std::string scenario, s_output, s_labels;
  std::uint64_t s_seed = 0;
  synth->add_option("--scenario", scenario, "preset name or scenario JSON file")
      ->required();
  synth->add_option("--seed", s_seed, "RNG seed");
  synth->add_option("--output", s_output, "points file (CSV, or PLY for 3D)")
      ->required();
  synth->add_option("--labels", s_labels,
                    "labels file (default <output>.labels.csv)");

  auto* bench = app.add_subcommand("bench", "Repeated-trial recovery benchmark");
  std::string b_scenario, b_output;
  int repeats = 100, b_trials = 1000, b_threads = 0;
  double b_epsilon = 5.0, ransac_threshold = 3.0;
  std::uint64_t b_seed = 0;
  bool baseline = false;
  bench->add_option("--scenario", b_scenario, "preset name or scenario JSON file")
      ->required();
  bench->add_option("--repeats,-R", repeats, "independent repetitions")
      ->check(CLI::PositiveNumber);
  bench->add_option("--trials,-M", b_trials, "trials per estimation")
      ->check(CLI::PositiveNumber);
  bench->add_option("--epsilon", b_epsilon, "initial set size, percent");
  bench->add_option("--seed", b_seed, "root RNG seed");
  bench->add_option("--threads", b_threads, "workers across repetitions");
  bench->add_option("--output", b_output, "report path (JSON)");
  bench->add_flag("--baseline", baseline,
                  "also run the fixed-threshold RANSAC contrast");
  bench->add_option("--ransac-threshold", ransac_threshold,
                    "inlier band for the baseline, source units");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (fit->parsed())
      return cmd_fit(model, input, trials, epsilon, seed, threads, output, svg,
                     top_k, trajectories);
    if (synth->parsed()) return cmd_synth(scenario, s_seed, s_output, s_labels);
    if (bench->parsed())
      return cmd_bench(b_scenario, repeats, b_trials, b_epsilon, b_seed,
                       b_threads, b_output, baseline, ransac_threshold);
  } catch (const InvalidInputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
