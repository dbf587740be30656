#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#ifndef COLLOSSL_CLI_PATH
#error "COLLOSSL_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    const fs::path log = fs::temp_directory_path() / "collossl_cli_out.txt";
    const std::string command =
        std::string(COLLOSSL_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(command.c_str());
    RunResult result;
    result.exit_code = WEXITSTATUS(status);
    std::ifstream in(log);
    std::stringstream buf;
    buf << in.rdbuf();
    result.output = buf.str();
    return result;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("collossl_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

// Small synthetic dataset settings shared by the commands under test.
const std::string kTinySynth =
    " --set synth.devices=3 --set synth.classes=3 --set synth.subjects=2"
    " --set synth.windows_per_subject_per_class=4";

}  // namespace

TEST_CASE("synth-gen writes the dataset layout and a run summary") {
    const auto dir = fresh_dir("synthgen");
    auto result = run_cli("synth-gen --windowed --out " + dir.string() + kTinySynth);
    CHECK(result.exit_code == 0);
    CHECK(fs::exists(dir / "manifest"));
    CHECK(fs::exists(dir / "data" / "dev0.csv"));
    CHECK(fs::exists(dir / "labels.csv"));
    CHECK(fs::exists(dir / "windows" / "dev0.f32"));
    CHECK(fs::exists(dir / "windows" / "dev0.shape"));
    CHECK(fs::exists(dir / "run.json"));

    nlohmann::json summary;
    std::ifstream(dir / "run.json") >> summary;
    CHECK(summary["command"] == "synth-gen");
    CHECK(summary["fingerprint"].get<std::string>().size() == 16);
    fs::remove_all(dir);
}

TEST_CASE("outputs are idempotent: a second run without --overwrite refuses to clobber") {
    const auto dir = fresh_dir("idempotent");
    CHECK(run_cli("synth-gen --out " + dir.string() + kTinySynth).exit_code == 0);
    auto second = run_cli("synth-gen --out " + dir.string() + kTinySynth);
    CHECK(second.exit_code == 2);
    CHECK(second.output.find("--overwrite") != std::string::npos);
    auto forced = run_cli("synth-gen --overwrite --out " + dir.string() + kTinySynth);
    CHECK(forced.exit_code == 0);
    fs::remove_all(dir);
}

TEST_CASE("unknown config keys exit with the config error code") {
    const auto dir = fresh_dir("badkey");
    auto result = run_cli("synth-gen --out " + dir.string() + " --set synth.bogus=1");
    CHECK(result.exit_code == 2);
    CHECK(result.output.find("unknown config key") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("a missing dataset exits with the data error code") {
    const auto dir = fresh_dir("nodataset");
    auto result = run_cli("mmd-report --out " + dir.string() +
                          " --set data.dataset=/nonexistent/path");
    CHECK(result.exit_code == 3);
    fs::remove_all(dir);
}

TEST_CASE("pretraining a 1-device dataset exits 2 and names the requirement") {
    const auto data_dir = fresh_dir("one_device_data");
    CHECK(run_cli("synth-gen --windowed --out " + data_dir.string() + kTinySynth +
                  " --set synth.devices=2")
              .exit_code == 0);
    // strip the manifest down to one device
    {
        std::ifstream in(data_dir / "manifest");
        std::stringstream buf;
        buf << in.rdbuf();
        std::string manifest = buf.str();
        const auto pos = manifest.find("devices = dev0:pos0,dev1:pos1");
        REQUIRE(pos != std::string::npos);
        manifest.replace(pos, std::string("devices = dev0:pos0,dev1:pos1").size(),
                         "devices = dev0:pos0");
        std::ofstream out(data_dir / "manifest", std::ios::trunc);
        out << manifest;
    }
    const auto out_dir = fresh_dir("one_device_out");
    auto result = run_cli("pretrain --out " + out_dir.string() +
                          " --set data.dataset=" + data_dir.string() +
                          " --set train.batch_size=8 --set train.max_epochs=1");
    CHECK(result.exit_code == 2);
    CHECK(result.output.find(">= 2 devices") != std::string::npos);
    fs::remove_all(data_dir);
    fs::remove_all(out_dir);
}

TEST_CASE("mmd-report emits a per-device CSV table") {
    const auto dir = fresh_dir("mmdrep");
    auto result = run_cli("mmd-report --out " + dir.string() + kTinySynth);
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("anchor,device,mmd,bandwidth,n") != std::string::npos);
    CHECK(result.output.find("dev0,dev1,") != std::string::npos);
    CHECK(fs::exists(dir / "mmd.csv"));
    fs::remove_all(dir);
}

TEST_CASE("pretrain then finetune then export runs through checkpoints") {
    const auto pre_dir = fresh_dir("pipe_pre");
    const std::string speed =
        " --set train.batch_size=16 --set train.max_epochs=2 --set train.pretrain_lr=1e-3";
    auto pre = run_cli("pretrain --out " + pre_dir.string() + kTinySynth + speed);
    CHECK(pre.exit_code == 0);
    REQUIRE(fs::exists(pre_dir / "extractor.ckpt"));
    CHECK(fs::exists(pre_dir / "trainlog.csv"));

    const auto fit_dir = fresh_dir("pipe_fit");
    auto fit = run_cli("finetune --checkpoint " + (pre_dir / "extractor.ckpt").string() +
                       " --out " + fit_dir.string() + kTinySynth + speed);
    CHECK(fit.exit_code == 0);
    CHECK(fs::exists(fit_dir / "model.ckpt"));

    const auto emb_dir = fresh_dir("pipe_emb");
    auto emb = run_cli("export-embeddings --checkpoint " +
                       (pre_dir / "extractor.ckpt").string() + " --out " + emb_dir.string() +
                       kTinySynth);
    CHECK(emb.exit_code == 0);
    CHECK(fs::exists(emb_dir / "embeddings.f32"));
    CHECK(fs::exists(emb_dir / "embeddings.labels.csv"));

    const auto grad_dir = fresh_dir("pipe_grad");
    auto grad = run_cli("export-embeddings --model " + (fit_dir / "model.ckpt").string() +
                        " --out " + grad_dir.string() + kTinySynth);
    CHECK(grad.exit_code == 0);
    CHECK(fs::exists(grad_dir / "embeddings.f32"));
    CHECK(fs::exists(grad_dir / "input_gradients.f32"));
    CHECK(fs::exists(grad_dir / "input_gradients.shape"));

    fs::remove_all(pre_dir);
    fs::remove_all(fit_dir);
    fs::remove_all(emb_dir);
    fs::remove_all(grad_dir);
}

TEST_CASE("ablate maps arms onto strategy and sampling overrides") {
    const auto dir = fresh_dir("ablate");
    const std::string speed =
        " --set train.batch_size=16 --set train.max_epochs=1 --set eval.num_groups=2"
        " --set eval.max_folds=1";
    auto result = run_cli("ablate --strategy random --out " + dir.string() + kTinySynth + speed);
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("ablation arm random") != std::string::npos);
    CHECK(fs::exists(dir / "report.json"));
    fs::remove_all(dir);
}

TEST_CASE("robustness accepts a misalignment shift grid") {
    const auto dir = fresh_dir("robust");
    const std::string speed =
        " --set train.batch_size=16 --set train.max_epochs=1 --set eval.num_groups=2"
        " --set eval.max_folds=1 --set eval.method=random_frozen --set run.plots=0";
    auto result = run_cli("robustness --kind misalignment --shifts 0.25 --out " + dir.string() +
                          kTinySynth + speed);
    CHECK(result.exit_code == 0);
    CHECK(fs::exists(dir / "robustness.csv"));
    std::ifstream csv(dir / "robustness.csv");
    std::stringstream buf;
    buf << csv.rdbuf();
    CHECK(buf.str().find("misalignment,0,") != std::string::npos);
    CHECK(buf.str().find("misalignment,0.25,") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("inject writes a perturbed windowed dataset") {
    const auto data_dir = fresh_dir("inject_data");
    CHECK(run_cli("synth-gen --windowed --out " + data_dir.string() + kTinySynth).exit_code == 0);
    const auto out_dir = fresh_dir("inject_out");
    auto result = run_cli("inject --kind heterogeneity --level 0.1 --out " + out_dir.string() +
                          " --set data.dataset=" + data_dir.string());
    CHECK(result.exit_code == 0);
    CHECK(fs::exists(out_dir / "windows" / "dev0.f32"));
    fs::remove_all(data_dir);
    fs::remove_all(out_dir);
}

TEST_CASE("config files and flag overrides merge with flags winning") {
    const auto dir = fresh_dir("cfgfile");
    const fs::path cfg = fs::temp_directory_path() / "collossl_cli_test.cfg";
    {
        std::ofstream out(cfg, std::ios::trunc);
        out << "[synth]\n"
            << "devices = 3\n"
            << "classes = 3\n"
            << "subjects = 2\n"
            << "windows_per_subject_per_class = 4\n"
            << "noise_std = 0.9\n";
    }
    auto result = run_cli("synth-gen --config " + cfg.string() + " --out " + dir.string() +
                          " --set synth.noise_std=0.1");
    CHECK(result.exit_code == 0);
    nlohmann::json summary;
    std::ifstream(dir / "run.json") >> summary;
    const std::string canonical = summary["config"].get<std::string>();
    CHECK(canonical.find("synth.noise_std = 0.1") != std::string::npos);
    fs::remove(cfg);
    fs::remove_all(dir);
}

TEST_CASE("config fingerprints are stable across runs") {
    const auto a = fresh_dir("fp_a");
    const auto b = fresh_dir("fp_b");
    CHECK(run_cli("synth-gen --out " + a.string() + kTinySynth).exit_code == 0);
    CHECK(run_cli("synth-gen --out " + b.string() + kTinySynth).exit_code == 0);
    nlohmann::json ja, jb;
    std::ifstream(a / "run.json") >> ja;
    std::ifstream(b / "run.json") >> jb;
    // run.out differs between the two configs, so compare the canonical text
    // minus that key.
    std::string ca = ja["config"].get<std::string>();
    std::string cb = jb["config"].get<std::string>();
    const auto strip = [](std::string text, const std::string& key) {
        const auto pos = text.find(key);
        const auto end = text.find('\n', pos);
        text.erase(pos, end - pos + 1);
        return text;
    };
    CHECK(strip(ca, "run.out") == strip(cb, "run.out"));
    fs::remove_all(a);
    fs::remove_all(b);
}
