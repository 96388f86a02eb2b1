#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>

#include "doctest.h"
#include "mgs/checkpoint.hpp"
#include "mgs/io.hpp"
#include "mgs/metrics.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "mgs_cli_tests";

int run(const std::string& args) {
    const std::string cmd = std::string(MGAUSS_BIN) + " " + args + " >" + (kWork / "stdout.txt").string() + " 2>" +
                            (kWork / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return mgs::read_file(p); }

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

const char* kTinyConfig =
    "phantom_size = 24\n"
    "slice_thickness = 2\n"
    "motion_sigma = 0.5\n"
    "resolution_schedule = 0:6, 4:8\n"
    "total_iters = 8\n"
    "nrf_activation_iter = 4\n"
    "batch_points = 512\n";

struct Workspace {
    Workspace() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
        write(kWork / "tiny.cfg", kTinyConfig);
    }
};

}  // namespace

TEST_CASE("usage errors exit with 1") {
    Workspace ws;
    CHECK(run("") == 1);
    CHECK(run("frobnicate") == 1);
    CHECK(run("reconstruct") == 1);
    CHECK(run("simulate --iters -3") == 1);
    CHECK(run("simulate") == 1);  // missing --out
    CHECK(run("--help") == 0);
}

TEST_CASE("configuration and data errors exit with 2") {
    Workspace ws;
    write(kWork / "bad.cfg", "learning_rate = 3\n");
    CHECK(run("--config " + (kWork / "bad.cfg").string() + " simulate --out " + (kWork / "x").string()) == 2);
    CHECK(slurp(kWork / "stderr.txt").find("UnknownKey") != std::string::npos);
    write(kWork / "junk.nii", std::string(400, 'j'));
    CHECK(run("evaluate " + (kWork / "junk.nii").string() + " " + (kWork / "junk.nii").string()) == 2);
    CHECK(slurp(kWork / "stderr.txt").find("BadMagic") != std::string::npos);
}

TEST_CASE("simulate, reconstruct, resume and evaluate") {
    Workspace ws;
    const std::string cfg = "--config " + (kWork / "tiny.cfg").string();
    const fs::path sim = kWork / "sim";
    REQUIRE(run(cfg + " simulate --out " + sim.string()) == 0);
    CHECK(fs::exists(sim / "gt.nii"));
    CHECK(fs::exists(sim / "stack_2_sagittal.json"));
    const std::string manifest = slurp(sim / "manifest.txt");
    CHECK(manifest.find(mgs::sha256_hex(slurp(sim / "gt.nii"))) != std::string::npos);

    // Same seed, same bytes.
    REQUIRE(run(cfg + " simulate --out " + (kWork / "sim2").string()) == 0);
    CHECK(slurp(kWork / "sim2" / "manifest.txt") == manifest);

    const fs::path full = kWork / "full";
    REQUIRE(run(cfg + " --strict-deterministic reconstruct " + sim.string() + " --out " + full.string()) == 0);
    for (const char* f : {"recon.nii", "checkpoint.mgss", "loss_log.txt", "runtime.txt", "metrics.txt", "metrics.json"}) {
        CHECK(fs::exists(full / f));
    }
    CHECK(mgs::checkpoint_params_per_primitive(slurp(full / "checkpoint.mgss")) == 11);
    const std::string log = slurp(full / "loss_log.txt");
    CHECK(std::count(log.begin(), log.end(), '\n') == 8);

    const fs::path part = kWork / "part";
    REQUIRE(run(cfg + " --strict-deterministic --iters 3 reconstruct " + sim.string() + " --out " + part.string()) == 0);
    const fs::path resumed = kWork / "resumed";
    REQUIRE(run(cfg + " --strict-deterministic --resume " + (part / "checkpoint.mgss").string() + " reconstruct " +
                sim.string() + " --out " + resumed.string()) == 0);
    CHECK(slurp(resumed / "recon.nii") == slurp(full / "recon.nii"));
    CHECK(slurp(resumed / "checkpoint.mgss") == slurp(full / "checkpoint.mgss"));

    const fs::path segmented = kWork / "segmented";
    REQUIRE(run(cfg + " reconstruct " + sim.string() + " --checkpoint-every 3 --out " + segmented.string()) == 0);
    CHECK(slurp(segmented / "recon.nii") == slurp(full / "recon.nii"));

    REQUIRE(run("evaluate --json " + (full / "recon.nii").string() + " " + (sim / "gt.nii").string()) == 0);
    const mgs::MetricReport m = mgs::report_from_json(slurp(kWork / "stdout.txt"));
    const mgs::MetricReport logged = mgs::report_from_json(slurp(full / "metrics.json"));
    CHECK(m.psnr_db == logged.psnr_db);
    CHECK(m.ssim == logged.ssim);

    REQUIRE(run("evaluate " + (sim / "gt.nii").string() + " " + (sim / "gt.nii").string()) == 0);
    CHECK(slurp(kWork / "stdout.txt").find("psnr_db=inf") != std::string::npos);
}
