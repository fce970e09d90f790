// Command-line front end: phantom, prep, train, infer, eval, sweep.
// Exit codes: 0 success, 1 runtime error, 2 usage error.
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clade/diagnostics.hpp"
#include "clade/error.hpp"
#include "clade/inference.hpp"
#include "clade/metrics.hpp"
#include "clade/phantom.hpp"
#include "clade/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw clade::FormatError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw clade::FormatError("'" + path.string() + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  clade::write_file_bytes(path, text);
}

void print_warnings(const clade::Warnings& w) {
  for (const auto& m : w.messages) std::cerr << "warning: " << m << "\n";
}

// --- phantom ---------------------------------------------------------------

struct PhantomArgs {
  std::string spec;
  std::string out;
  std::int64_t random_seed = -1;
  std::size_t dims = 64;
  std::size_t factor = 4;
};

int run_phantom(const PhantomArgs& a) {
  clade::PhantomSpec spec;
  if (!a.spec.empty()) {
    spec = clade::phantom_spec_from_json(read_json_file(a.spec));
  } else {
    spec = clade::random_phantom_spec(static_cast<std::uint64_t>(a.random_seed), {a.dims, a.dims, a.dims}, 1.0,
                                      a.factor);
  }
  const auto [hr, lr] = clade::generate_phantom(spec);
  fs::create_directories(a.out);
  clade::save_volume(hr, fs::path(a.out) / "hr.vol");
  clade::save_volume(lr, fs::path(a.out) / "lr.vol");
  write_text(fs::path(a.out) / "spec.json", clade::phantom_spec_to_json(spec).dump(2) + "\n");
  std::cout << "wrote " << (fs::path(a.out) / "hr.vol").string() << " and lr.vol (" << spec.primitives.size()
            << " primitives)\n";
  return 0;
}

// --- prep ------------------------------------------------------------------

struct PrepArgs {
  std::vector<std::string> inputs;
  std::string out;
  std::size_t patches_per_slice = 4;
  std::uint64_t seed = 0;
};

int run_prep(const PrepArgs& a) {
  clade::PatchSet x{clade::Domain::X_lowres, {}, {}, 0};
  clade::PatchSet y{clade::Domain::Y_highres, {}, {}, 0};
  clade::Warnings warnings;
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    const clade::Volume3D v = clade::load_volume(a.inputs[i]);
    const auto c = clade::prepare_training_corpora(v, a.patches_per_slice, a.seed + i, i, &warnings);
    x.append(c.x);
    y.append(c.y);
  }
  print_warnings(warnings);
  clade::save_patch_set(x, (fs::path(a.out) / "X" / "patches.vol").string());
  clade::save_patch_set(y, (fs::path(a.out) / "Y" / "patches.vol").string());
  std::cout << "X: " << x.size() << " patches (" << x.skipped_slices << " slices skipped)\n"
            << "Y: " << y.size() << " patches (" << y.skipped_slices << " slices skipped)\n";
  return 0;
}

// --- train / sweep -----------------------------------------------------------

clade::PatchSet load_corpus(const std::string& dir, clade::Domain d) {
  return clade::load_patch_set((fs::path(dir) / "patches.vol").string(), d);
}

struct TrainArgs {
  std::string config;
  std::string x;
  std::string y;
  std::string out;
  std::string resume;
  bool quiet = false;
};

clade::TrainingHooks progress_hooks(bool quiet) {
  clade::TrainingHooks h;
  if (quiet) return h;
  h.on_step = [](std::uint64_t step, const clade::LossBreakdown& b) {
    if (step % 50 == 0) std::cerr << "step " << step << " total " << b.total << "\n";
  };
  h.on_epoch = [](const clade::EpochEval& e) {
    std::cerr << "epoch " << e.epoch << " score " << e.score_mean << " +- " << e.score_std << "\n";
  };
  return h;
}

std::optional<clade::Volume3D> eval_volume_for(const clade::TrainingConfig& c) {
  if (c.eval_volume.empty()) return std::nullopt;
  return clade::load_volume(c.eval_volume);
}

int run_train(const TrainArgs& a) {
  const auto config = clade::TrainingConfig::from_json(read_json_file(a.config));
  const auto x = load_corpus(a.x, clade::Domain::X_lowres);
  const auto y = load_corpus(a.y, clade::Domain::Y_highres);
  const auto eval = eval_volume_for(config);
  std::optional<fs::path> resume;
  if (!a.resume.empty()) resume = a.resume;
  const auto r = clade::run_training(config, x, y, a.out, eval ? &*eval : nullptr, resume, progress_hooks(a.quiet));
  std::cout << "selected epoch " << r.selected_epoch << ": " << r.selected_checkpoint.string() << "\n";
  return 0;
}

struct SweepArgs {
  std::string config;
  std::string x;
  std::string y;
  std::string out;
  std::vector<double> cyc{1.0};
  std::vector<double> ident{1.0};
  std::vector<double> gmap{5.0};
  bool quiet = false;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

int run_sweep(const SweepArgs& a) {
  const auto base = clade::TrainingConfig::from_json(read_json_file(a.config));
  const auto x = load_corpus(a.x, clade::Domain::X_lowres);
  const auto y = load_corpus(a.y, clade::Domain::Y_highres);
  const auto eval = eval_volume_for(base);
  struct Row {
    double c, i, g, mean, std;
    std::size_t epoch;
    std::string dir;
  };
  std::vector<Row> rows;
  for (double c : a.cyc) {
    for (double i : a.ident) {
      for (double g : a.gmap) {
        clade::TrainingConfig cfg = base;
        cfg.weights = {c, i, g};
        const std::string name = "cyc" + fmt(c) + "_ident" + fmt(i) + "_gmap" + fmt(g);
        const auto r = clade::run_training(cfg, x, y, fs::path(a.out) / name, eval ? &*eval : nullptr,
                                           std::nullopt, progress_hooks(a.quiet));
        const auto& e = r.evals.at(r.selected_epoch - 1);
        rows.push_back({c, i, g, e.score_mean, e.score_std, r.selected_epoch, name});
      }
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& p, const Row& q) { return p.mean < q.mean; });
  std::ostringstream csv;
  csv.precision(8);
  csv << "lambda_cyc,lambda_ident,lambda_gmap,score_mean,score_std,selected_epoch,run\n";
  for (const Row& r : rows)
    csv << r.c << ',' << r.i << ',' << r.g << ',' << r.mean << ',' << r.std << ',' << r.epoch << ',' << r.dir << "\n";
  write_text(fs::path(a.out) / "sweep.csv", csv.str());
  std::cout << csv.str();
  return 0;
}

// --- infer -------------------------------------------------------------------

struct InferArgs {
  std::string checkpoint;
  std::string in;
  std::string out;
  std::size_t stride = 12;
  std::size_t batch = 16;
  std::vector<std::size_t> sweep;
  std::string sweep_csv;
  std::size_t repeats = 3;
};

int run_infer(const InferArgs& a) {
  const auto g = clade::load_generator<float>(a.checkpoint, "G_X");
  const clade::Volume3D v = clade::load_volume(a.in);
  const clade::PatchMapper mapper = clade::generator_mapper(g);
  clade::InferenceOptions opt;
  opt.stride = a.stride;
  opt.batch = a.batch;
  if (!a.sweep.empty()) {
    const auto rows = clade::stride_sweep(v, mapper, a.sweep, a.repeats, opt);
    const std::string csv = clade::stride_sweep_csv(rows);
    if (!a.sweep_csv.empty()) write_text(a.sweep_csv, csv);
    std::cout << csv;
  }
  if (!a.out.empty()) {
    clade::Warnings warnings;
    const clade::Volume3D out = clade::super_resolve_volume(v, mapper, opt, &warnings);
    print_warnings(warnings);
    clade::save_volume(out, a.out);
    std::cout << "wrote " << a.out << "\n";
  }
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string in;
  std::string ref;
  std::string report;
  std::string csv;
  std::string phantom_spec;
  std::string plane = "lr_primary";
  std::string model = "volume";
  std::string signal_roi;
  std::string noise_roi;
  std::size_t grid_stride = 0;
  std::vector<double> window;
};

int run_eval(const EvalArgs& a) {
  const clade::Volume3D v = clade::load_volume(a.in);
  std::optional<clade::Volume3D> ref;
  if (!a.ref.empty()) ref = clade::load_volume(a.ref);

  double lo, hi;
  if (a.window.size() == 2) {
    lo = a.window[0];
    hi = a.window[1];
  } else {
    const clade::Volume3D& basis = ref ? *ref : v;
    lo = clade::percentile(basis.data, 0.5);
    hi = clade::percentile(basis.data, 99.5);
    if (!(hi > lo)) hi = lo + 1.0;
  }
  const clade::Plane plane = clade::parse_plane(a.plane);

  clade::QualityReport rep;
  rep.model = a.model;
  rep.orientation = clade::plane_name(plane);
  rep.nr = clade::nr_score_volume(v, plane, lo, hi);
  if (!a.phantom_spec.empty()) {
    const auto spec = clade::phantom_spec_from_json(read_json_file(a.phantom_spec));
    for (const auto& p : clade::phantom_edge_profiles(v, spec, v.lr_axis)) {
      clade::LineProfile scaled = p;
      for (double& s : scaled.samples) s = (s - lo) / (hi - lo);
      rep.edge_sharpness.push_back(clade::edge_sharpness(scaled));
    }
    double sum = 0;
    for (double e : rep.edge_sharpness) sum += e;
    if (!rep.edge_sharpness.empty()) rep.edge_sharpness_mean = sum / static_cast<double>(rep.edge_sharpness.size());
  }
  if (!a.signal_roi.empty() && !a.noise_roi.empty()) {
    rep.roi = clade::snr(v, clade::parse_box(a.signal_roi), clade::parse_box(a.noise_roi));
  }
  // Peak is the window width, i.e. PSNR on the [0,1]-windowed scale.
  if (ref) rep.psnr_db = clade::psnr(v, *ref, hi - lo);
  if (a.grid_stride > 0) {
    double sum = 0;
    const auto slices = clade::extract_slices(v, plane);
    for (const auto& s : slices) sum += clade::detect_block_artifacts(s, clade::build_patch_grid(s.rows, s.cols, a.grid_stride));
    rep.block_artifacts = sum / static_cast<double>(slices.size());
  }
  json j = rep.to_json();
  j["window"] = {lo, hi};
  if (!a.report.empty()) write_text(a.report, j.dump(2) + "\n");
  if (!a.csv.empty()) write_text(a.csv, clade::QualityReport::csv_header() + "\n" + rep.csv_row() + "\n");
  std::cout << clade::QualityReport::csv_header() << "\n" << rep.csv_row() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clade: unpaired patch-based super-resolution of anisotropic volumes"};
  app.require_subcommand(1);

  PhantomArgs pa;
  auto* phantom = app.add_subcommand("phantom", "Render a synthetic phantom (hr.vol, lr.vol, spec.json)");
  auto* spec_opt = phantom->add_option("--spec", pa.spec, "Phantom spec JSON")->check(CLI::ExistingFile);
  auto* rand_opt = phantom->add_option("--random-seed", pa.random_seed, "Generate a random abdominal-like phantom");
  spec_opt->excludes(rand_opt);
  phantom->add_option("--dims", pa.dims, "Cube edge for --random-seed")->check(CLI::Range(32, 512));
  phantom->add_option("--factor", pa.factor, "Through-plane factor for --random-seed")->check(CLI::Range(1, 16));
  phantom->add_option("--out", pa.out, "Output directory")->required();

  PrepArgs pr;
  auto* prep = app.add_subcommand("prep", "Extract unpaired X (lr_primary) and Y (hr) patch corpora");
  prep->add_option("--in", pr.inputs, "Input volume(s)")->required()->check(CLI::ExistingFile);
  prep->add_option("--out", pr.out, "Output directory")->required();
  prep->add_option("--patches-per-slice", pr.patches_per_slice, "Random patches per slice")->check(CLI::Range(1, 1024));
  prep->add_option("--seed", pr.seed, "Sampling seed");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train the cycle GAN and select an epoch");
  train->add_option("--config", ta.config, "Training config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--x", ta.x, "X corpus directory (from prep)")->required()->check(CLI::ExistingDirectory);
  train->add_option("--y", ta.y, "Y corpus directory (from prep)")->required()->check(CLI::ExistingDirectory);
  train->add_option("--out", ta.out, "Run directory")->required();
  train->add_option("--resume", ta.resume, "Training checkpoint to continue from")->check(CLI::ExistingFile);
  train->add_flag("--quiet", ta.quiet, "No progress output");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Super-resolve a volume with a trained G_X");
  infer->add_option("--checkpoint", ia.checkpoint, "Generator or training checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--in", ia.in, "Input (anisotropic) volume")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", ia.out, "Output volume");
  infer->add_option("--stride", ia.stride, "Patch stride")->check(CLI::Range(1, 32));
  infer->add_option("--batch", ia.batch, "Patches per forward call")->check(CLI::Range(1, 4096));
  infer->add_option("--sweep", ia.sweep, "Run a stride sweep over these strides")->check(CLI::Range(1, 32));
  infer->add_option("--sweep-csv", ia.sweep_csv, "Where to write the sweep CSV");
  infer->add_option("--repeats", ia.repeats, "Timing repeats per stride")->check(CLI::Range(1, 100));

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Quality report for a volume");
  eval->add_option("--in", ea.in, "Volume to score")->required()->check(CLI::ExistingFile);
  eval->add_option("--ref", ea.ref, "Reference volume for PSNR")->check(CLI::ExistingFile);
  eval->add_option("--grid-stride", ea.grid_stride, "Score block artifacts for this stitching stride")
      ->check(CLI::Range(1, 32));
  eval->add_option("--report", ea.report, "JSON report path");
  eval->add_option("--csv", ea.csv, "One-row CSV path");
  eval->add_option("--phantom-spec", ea.phantom_spec, "Phantom spec for edge-sharpness profiles")
      ->check(CLI::ExistingFile);
  eval->add_option("--plane", ea.plane, "hr | lr_primary | lr_secondary")
      ->check(CLI::IsMember({"hr", "lr_primary", "lr_secondary"}));
  eval->add_option("--model", ea.model, "Model label for the report");
  eval->add_option("--signal-roi", ea.signal_roi, "i0,j0,k0,i1,j1,k1");
  eval->add_option("--noise-roi", ea.noise_roi, "i0,j0,k0,i1,j1,k1");
  eval->add_option("--window", ea.window, "Intensity window lo hi mapped to [0,1]")->expected(2);

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep", "Train over a grid of loss weights");
  sweep->add_option("--config", sa.config, "Base training config JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--x", sa.x, "X corpus directory")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--y", sa.y, "Y corpus directory")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--out", sa.out, "Sweep directory")->required();
  sweep->add_option("--lambda-cyc", sa.cyc, "Cycle weights")->check(CLI::NonNegativeNumber);
  sweep->add_option("--lambda-ident", sa.ident, "Identity weights")->check(CLI::NonNegativeNumber);
  sweep->add_option("--lambda-gmap", sa.gmap, "Gradient-mapping weights")->check(CLI::NonNegativeNumber);
  sweep->add_flag("--quiet", sa.quiet, "No progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (phantom->parsed() && pa.spec.empty() && pa.random_seed < 0) {
    std::cerr << "phantom: one of --spec or --random-seed is required\n";
    return 2;
  }

  try {
    if (phantom->parsed()) return run_phantom(pa);
    if (prep->parsed()) return run_prep(pr);
    if (train->parsed()) return run_train(ta);
    if (infer->parsed()) {
      if (ia.out.empty() && ia.sweep.empty()) {
        std::cerr << "infer: give --out and/or --sweep\n";
        return 2;
      }
      return run_infer(ia);
    }
    if (eval->parsed()) return run_eval(ea);
    if (sweep->parsed()) return run_sweep(sa);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
