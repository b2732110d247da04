#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "dreamkit/config.hpp"
#include "dreamkit/fingerprint.hpp"

using namespace dreamkit;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cli");

namespace {

fs::path work_dir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() /
                     ("dreamkit_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DREAMKIT_CLI_PATH) + " " + args +
                            " >" + (work_dir() / "stdout.txt").string() + " 2>" +
                            (work_dir() / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    if (status == -1) return -1;
    return WEXITSTATUS(status);
}

std::string cli_stdout() {
    std::ifstream is(work_dir() / "stdout.txt");
    return std::string((std::istreambuf_iterator<char>(is)), {});
}

ToolkitConfig micro_config() {
    ToolkitConfig cfg = default_config();
    cfg.seed = 515;
    cfg.data.domain_count = 3;
    cfg.data.class_count = 3;
    cfg.data.image_side = 10;
    cfg.data.train_per_class = 25;
    cfg.data.val_per_class = 6;
    cfg.zoo.models_per_domain = 9;
    cfg.zoo.epochs = 2;
    cfg.zoo.conv_channels = 4;
    cfg.zoo.fc_width = 12;
    cfg.zoo.split_train = 6;
    cfg.zoo.split_val = 1;
    cfg.zoo.split_test = 2;
    cfg.n_queries = 8;
    cfg.dream.epochs = 15;
    cfg.dream.batch = 6;
    cfg.dream.alpha = 1e-3;
    cfg.dream.beta = 5e-3;
    cfg.dream.lambda_grid = {0.1};
    cfg.baseline.epochs = 15;
    cfg.baseline.batch = 6;
    cfg.baseline.lr = 5e-3;
    cfg.harness.trials = 1;
    cfg.harness.methods = {"dream", "kennen", "random"};
    cfg.harness.jobs = 2;
    return cfg;
}

}  // namespace

TEST_CASE("cli pipeline: gen-data, train-zoo, fingerprint, train, eval, report") {
    const fs::path dir = work_dir();
    const std::string cfg_path = (dir / "config.json").string();
    save_config(micro_config(), cfg_path);
    const std::string base = "--config " + cfg_path + " --out-dir " +
                             (dir / "ws").string() + " ";

    CHECK(run_cli(base + "gen-data") == 0);
    CHECK(fs::exists(dir / "ws" / "data" / "domain_0.dkd"));

    CHECK(run_cli(base + "train-zoo") == 0);
    CHECK(fs::exists(dir / "ws" / "zoo" / "manifest.txt"));

    CHECK(run_cli(base + "fingerprint --target 0") == 0);
    const fs::path train_fp = dir / "ws" / "fp" / "target_0" / "train.fp";
    REQUIRE(fs::exists(train_fp));

    CHECK(run_cli(base + "train-dream --train-fp " + train_fp.string() + " --out " +
                  (dir / "dream.pipe").string() + " --history " +
                  (dir / "hist.csv").string()) == 0);
    CHECK(fs::exists(dir / "dream.pipe"));
    CHECK(fs::exists(dir / "hist.csv"));

    CHECK(run_cli(base + "train-baseline --method kennen --train-fp " +
                  train_fp.string() + " --out " + (dir / "kennen.pipe").string()) == 0);
    CHECK(run_cli(base + "train-baseline --method svm --train-fp " +
                  train_fp.string() + " --out " + (dir / "svm.ckpt").string()) == 0);

    CHECK(run_cli(base + "eval --target 0") == 0);
    CHECK(cli_stdout().find("Random") != std::string::npos);
    const fs::path results = dir / "ws" / "runs" / "results.csv";
    REQUIRE(fs::exists(results));

    CHECK(run_cli(base + "report --results " + results.string()) == 0);
    CHECK(cli_stdout().find("39.81") != std::string::npos);

    CHECK(run_cli(base + "export-embeddings --pipeline " + (dir / "dream.pipe").string() +
                  " --fingerprints " + train_fp.string() + " --out " +
                  (dir / "emb.csv").string()) == 0);
    CHECK(fs::exists(dir / "emb.csv"));

    const fs::path val_fp = dir / "ws" / "fp" / "target_0" / "val.fp";
    CHECK(run_cli(base + "probe --train-fp " + train_fp.string() + " --test-fp " +
                  val_fp.string() + " --pipeline " + (dir / "dream.pipe").string()) == 0);
    CHECK(cli_stdout().find("raw_probe_accuracy=") != std::string::npos);
    CHECK(cli_stdout().find("embedding_probe_accuracy=") != std::string::npos);
}

TEST_CASE("cli exit codes distinguish validation from incompatibility") {
    const fs::path dir = work_dir();
    // validation error: unknown config key
    const std::string bad_cfg = (dir / "bad.json").string();
    {
        std::ofstream os(bad_cfg);
        os << "{\"zeed\": 1}\n";
    }
    CHECK(run_cli("--config " + bad_cfg + " gen-data") == 2);

    // validation error: missing results file
    CHECK(run_cli("report --results " + (dir / "nope.csv").string()) == 2);

    // incompatibility: embeddings against a fingerprint file with other dims
    const std::string weird_fp = (dir / "weird.fp").string();
    {
        fp::FingerprintSet set;
        fp::Fingerprint row;
        row.model_id = "x";
        row.domain = "0";
        row.class_count = 3;
        row.n_queries = 4;  // pipeline above was trained with N=8
        row.values.assign(12, 1.0 / 3.0);
        set.add(row);
        fp::write_fingerprints(weird_fp, set);
    }
    REQUIRE(fs::exists(dir / "dream.pipe"));  // built by the previous case
    CHECK(run_cli("export-embeddings --pipeline " + (dir / "dream.pipe").string() +
                  " --fingerprints " + weird_fp + " --out " +
                  (dir / "emb2.csv").string()) == 3);

    fs::remove_all(dir);
}

TEST_SUITE_END();
