#include <doctest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "clade/volume.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string output;  // stdout and stderr
};

Run clade_cli(const std::string& args) {
  const std::string cmd = std::string(CLADE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / "clade_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Small 2-primitive phantom, isotropic when factor is 1.
std::string phantom_spec(std::size_t dims, double lr_spacing) {
  nlohmann::json j = {{"seed", 3},
                      {"dims", {dims, dims, dims}},
                      {"spacing", {1.0, 1.0, 1.0}},
                      {"lr_axis", 2},
                      {"lr_spacing_mm", lr_spacing},
                      {"noise_std", 0.01},
                      {"edge_blur_mm", 0.5},
                      {"primitives",
                       {{{"kind", "ellipsoid"}, {"center_mm", {16, 15, 17}}, {"radii_mm", {10, 8, 9}}, {"intensity", 0.7}},
                        {{"kind", "ellipsoid"}, {"center_mm", {14, 18, 16}}, {"radii_mm", {4, 3, 5}}, {"intensity", 0.3}}}}};
  return j.dump();
}

}  // namespace

TEST_CASE("usage and help") {
  Run r = clade_cli("--help");
  CHECK(r.code == 0);
  for (const char* sub : {"phantom", "prep", "train", "infer", "eval", "sweep"})
    CHECK(r.output.find(sub) != std::string::npos);
  r = clade_cli("infer --help");
  CHECK(r.code == 0);
  for (const char* flag : {"--checkpoint", "--in", "--out", "--stride", "--batch", "--sweep", "--sweep-csv", "--repeats"})
    CHECK(r.output.find(flag) != std::string::npos);
  CHECK(clade_cli("").code == 2);
  CHECK(clade_cli("frobnicate").code == 2);
  CHECK(clade_cli("phantom --out /tmp/x --bogus").code == 2);
  CHECK(clade_cli("phantom --out " + fresh_dir("nospec").string()).code == 2);
  CHECK(clade_cli("infer --checkpoint /nonexistent.ckpt --in /nonexistent.vol --out o.vol").code == 2);
}

TEST_CASE("phantom command") {
  const fs::path d = fresh_dir("phantom");
  write(d / "bad.json", "{\"dims\": [32, 32,");
  Run r = clade_cli("phantom --spec " + (d / "bad.json").string() + " --out " + (d / "bad").string());
  CHECK(r.code == 1);
  CHECK(r.output.find("error") != std::string::npos);

  write(d / "empty.json", "{}");
  r = clade_cli("phantom --spec " + (d / "empty.json").string() + " --out " + (d / "empty").string());
  CHECK(r.code == 0);
  const auto hr = clade::load_volume((d / "empty" / "hr.vol").string());
  for (double v : hr.data) CHECK(v == 0.0);
  CHECK(fs::exists(d / "empty" / "lr.vol"));

  CHECK(clade_cli("phantom --random-seed 4 --dims 32 --factor 4 --out " + (d / "a").string()).code == 0);
  CHECK(clade_cli("phantom --random-seed 4 --dims 32 --factor 4 --out " + (d / "b").string()).code == 0);
  CHECK(slurp(d / "a" / "hr.vol") == slurp(d / "b" / "hr.vol"));
  CHECK(slurp(d / "a" / "lr.vol") == slurp(d / "b" / "lr.vol"));
  CHECK_FALSE(slurp(d / "a" / "lr.vol").empty());
  const auto lr = clade::load_volume((d / "a" / "lr.vol").string());
  CHECK(lr.dims == std::array<std::size_t, 3>{32, 32, 8});
}

TEST_CASE("prep command") {
  const fs::path d = fresh_dir("prep");
  write(d / "iso.json", phantom_spec(32, 1.0));
  REQUIRE(clade_cli("phantom --spec " + (d / "iso.json").string() + " --out " + (d / "iso").string()).code == 0);
  const std::string in = (d / "iso" / "hr.vol").string();
  Run r = clade_cli("prep --in " + in + " --out " + (d / "c1").string() + " --patches-per-slice 4 --seed 9");
  CHECK(r.code == 0);
  // 32 eligible 32x32 slices in each plane, 4 patches each.
  CHECK(r.output.find("X: 128 patches") != std::string::npos);
  CHECK(r.output.find("Y: 128 patches") != std::string::npos);
  CHECK(clade_cli("prep --in " + in + " --out " + (d / "c2").string() + " --patches-per-slice 4 --seed 9").code == 0);
  CHECK(slurp(d / "c1" / "X" / "patches.vol") == slurp(d / "c2" / "X" / "patches.vol"));
  CHECK(slurp(d / "c1" / "Y" / "patches.vol") == slurp(d / "c2" / "Y" / "patches.vol"));
}

TEST_CASE("train, infer and eval end to end") {
  const fs::path d = fresh_dir("e2e");
  write(d / "spec.json", phantom_spec(32, 4.0));
  REQUIRE(clade_cli("phantom --spec " + (d / "spec.json").string() + " --out " + (d / "ph").string()).code == 0);
  const std::string lr = (d / "ph" / "lr.vol").string(), hr = (d / "ph" / "hr.vol").string();
  REQUIRE(clade_cli("prep --in " + lr + " --out " + (d / "corpus").string() + " --seed 1").code == 0);
  write(d / "cfg.json",
        R"({"epochs": 2, "batch_size": 2, "base_channels": 2, "disc_base_channels": 2, "n_residual_blocks": 1,
            "max_steps_per_epoch": 2, "seed": 7})");
  const std::string train_args = "train --quiet --config " + (d / "cfg.json").string() + " --x " +
                                 (d / "corpus" / "X").string() + " --y " + (d / "corpus" / "Y").string();
  Run r = clade_cli(train_args + " --out " + (d / "run1").string());
  REQUIRE(r.code == 0);
  CHECK(r.output.find("selected epoch") != std::string::npos);
  REQUIRE(clade_cli(train_args + " --out " + (d / "run2").string()).code == 0);
  CHECK(slurp(d / "run1" / "losses.csv") == slurp(d / "run2" / "losses.csv"));
  CHECK(slurp(d / "run1" / "checkpoints" / "epoch_002.ckpt") == slurp(d / "run2" / "checkpoints" / "epoch_002.ckpt"));

  // Resume from epoch 1 with the same result.
  REQUIRE(clade_cli(train_args + " --out " + (d / "run3").string() + " --resume " +
                    (d / "run1" / "checkpoints" / "epoch_001.ckpt").string())
              .code == 0);
  CHECK(slurp(d / "run1" / "checkpoints" / "epoch_002.ckpt") == slurp(d / "run3" / "checkpoints" / "epoch_002.ckpt"));

  const std::string out = (d / "sr.vol").string();
  r = clade_cli("infer --checkpoint " + (d / "run1" / "generator_best.ckpt").string() + " --in " + lr + " --out " +
                out + " --stride 12");
  REQUIRE(r.code == 0);
  const auto sr = clade::load_volume(out);
  CHECK(sr.dims == std::array<std::size_t, 3>{32, 32, 32});
  // Training checkpoints are accepted too.
  CHECK(clade_cli("infer --checkpoint " + (d / "run1" / "checkpoints" / "epoch_001.ckpt").string() + " --in " + lr +
                  " --sweep 12 32 --repeats 1 --sweep-csv " + (d / "sweep.csv").string())
            .code == 0);
  CHECK(slurp(d / "sweep.csv").rfind("stride,score_mean,score_std,seconds_mean,seconds_std\n", 0) == 0);

  r = clade_cli("eval --in " + out + " --ref " + hr + " --grid-stride 12 --phantom-spec " + (d / "spec.json").string() +
                " --signal-roi 12,12,12,20,20,20 --noise-roi 0,0,0,4,4,4 --report " + (d / "rep.json").string() +
                " --csv " + (d / "rep.csv").string() + " --model clade");
  REQUIRE(r.code == 0);
  const auto rep = nlohmann::json::parse(slurp(d / "rep.json"));
  CHECK(rep.at("model") == "clade");
  CHECK(rep.at("nr_score").at("per_slice").size() == 32);
  CHECK(rep.at("psnr_db").is_number());
  CHECK(rep.contains("block_artifacts"));
  CHECK(rep.at("edge_sharpness").at("profiles").size() > 0);
  CHECK(slurp(d / "rep.csv").rfind("model,orientation,score_mean,score_std,es_mean,signal,noise,snr,psnr_db\nclade,", 0) ==
        0);

  // Runtime failures exit 1.
  CHECK(clade_cli("eval --in " + out + " --ref " + lr).code == 1);
  CHECK(clade_cli("infer --checkpoint " + (d / "cfg.json").string() + " --in " + lr + " --out " + out).code == 1);
}

TEST_CASE("sweep command") {
  const fs::path d = fresh_dir("sweep");
  write(d / "spec.json", phantom_spec(32, 4.0));
  REQUIRE(clade_cli("phantom --spec " + (d / "spec.json").string() + " --out " + (d / "ph").string()).code == 0);
  REQUIRE(clade_cli("prep --in " + (d / "ph" / "lr.vol").string() + " --out " + (d / "corpus").string()).code == 0);
  write(d / "cfg.json",
        R"({"epochs": 1, "batch_size": 2, "base_channels": 2, "disc_base_channels": 2, "n_residual_blocks": 1,
            "max_steps_per_epoch": 1})");
  const Run r = clade_cli("sweep --quiet --config " + (d / "cfg.json").string() + " --x " + (d / "corpus" / "X").string() +
                          " --y " + (d / "corpus" / "Y").string() + " --out " + (d / "out").string() +
                          " --lambda-gmap 0 5");
  REQUIRE(r.code == 0);
  std::istringstream csv(slurp(d / "out" / "sweep.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "lambda_cyc,lambda_ident,lambda_gmap,score_mean,score_std,selected_epoch,run");
  std::vector<double> scores;
  while (std::getline(csv, line)) {
    std::istringstream row(line);
    std::string cell;
    for (int i = 0; i < 4; ++i) std::getline(row, cell, ',');
    scores.push_back(std::stod(cell));
  }
  REQUIRE(scores.size() == 2);
  CHECK(scores[0] <= scores[1]);
  CHECK(clade_cli("sweep --config " + (d / "cfg.json").string() + " --x " + (d / "corpus" / "X").string() + " --y " +
                  (d / "corpus" / "Y").string() + " --out " + (d / "neg").string() + " --lambda-cyc -1")
            .code == 2);
}
