#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qled/csv.hpp"

// Exercises the installed command-line tool end to end through a shell, the
// way a user would drive it. Paths come in as compile definitions.
#ifndef QLED_BIN
#error "QLED_BIN must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code = -1;
    std::string out, err;
};

const fs::path& work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "qled_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    REQUIRE(out.good());
    out << text;
}

RunResult run(const std::string& args) {
    const fs::path out_file = work_dir() / "stdout.txt";
    const fs::path err_file = work_dir() / "stderr.txt";
    const std::string cmd = std::string(QLED_BIN) + " " + args + " >" + out_file.string() +
                            " 2>" + err_file.string();
    const int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out_file);
    r.err = slurp(err_file);
    return r;
}

// Small scenario the CLI tests share; written once into the work dir.
const std::string kScenarioText =
    "[source]\n"
    "fss_uev = 17.7\n"
    "x_lifetime_ps = 1000\n"
    "xx_lifetime_ps = 500\n"
    "cycle_rate_hz = 2e6\n"
    "background_fraction = 0.1733333\n"
    "[measurement]\n"
    "basis_xx = hv\n"
    "basis_x = hv\n"
    "duration_s = 0.05\n"
    "seed = 414213\n"
    "[detector.xx_plus]\nchannel = 0\nefficiency = 0.5\n"
    "[detector.xx_minus]\nchannel = 1\nefficiency = 0.5\n"
    "[detector.x_plus]\nchannel = 2\nefficiency = 0.5\n"
    "[detector.x_minus]\nchannel = 3\nefficiency = 0.5\n"
    "[temperature]\n"
    "row = 44 1000 0.1733333\n"
    "row = 99 90 0.78\n";

const fs::path& scenario_conf() {
    static const fs::path p = [] {
        const fs::path path = work_dir() / "scenario.conf";
        spill(path, kScenarioText);
        return path;
    }();
    return p;
}

double csv_cell(const std::string& csv_text, std::size_t row, std::size_t col) {
    std::istringstream in(csv_text);
    std::string line;
    std::size_t r = 0;
    while (std::getline(in, line)) {
        if (r++ != row + 1) continue;  // +1 skips the header
        std::istringstream cells(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(cells, cell, ',')) {
            if (c++ == col) return std::stod(cell);
        }
    }
    FAIL("csv cell not found");
    return 0.0;
}

}  // namespace

TEST_CASE("help and usage errors") {
    CHECK(run("--help").code == 0);
    CHECK(run("").code == 2);              // a subcommand is required
    CHECK(run("frobnicate").code == 2);    // unknown subcommand
    CHECK(run("simulate").code == 2);      // missing --config
    CHECK(run("simulate --config /nonexistent.conf --out x.qtt").code == 2);
}

TEST_CASE("simulation is reproducible byte for byte") {
    const fs::path a = work_dir() / "rep_a.qtt";
    const fs::path b = work_dir() / "rep_b.qtt";
    const std::string base = "simulate --config " + scenario_conf().string() + " --out ";
    REQUIRE(run(base + a.string()).code == 0);
    REQUIRE(run(base + b.string()).code == 0);
    CHECK(slurp(a) == slurp(b));

    // the run writes a manifest naming the effective parameters
    const std::string manifest = slurp(a.string() + ".manifest");
    CHECK(manifest.find("seed = 414213") != std::string::npos);
    CHECK(manifest.find("fss_uev = 17.7") != std::string::npos);

    // a different seed changes the bytes
    const fs::path c = work_dir() / "rep_c.qtt";
    REQUIRE(run(base + c.string() + " --seed 7").code == 0);
    CHECK(slurp(c) != slurp(a));
}

TEST_CASE("a zero-duration acquisition is a valid empty file") {
    std::string text = kScenarioText;
    text.replace(text.find("duration_s = 0.05"), 17, "duration_s = 0");
    const fs::path conf = work_dir() / "zero.conf";
    spill(conf, text);
    const fs::path out = work_dir() / "zero.qtt";
    REQUIRE(run("simulate --config " + conf.string() + " --out " + out.string()).code == 0);

    // correlating the empty stream reports an empty result, not an error
    const fs::path csv = work_dir() / "zero_g2.csv";
    const RunResult g2 = run("g2 --in " + out.string() + " --a x_plus --b x_plus --out " +
                             csv.string());
    CHECK(g2.code == 0);
    CHECK(g2.out.find("empty stream") != std::string::npos);
    CHECK(slurp(csv) == "delay_ps,value,sigma\n");
}

TEST_CASE("channels resolve by label or number, and bad names are listed") {
    const fs::path stream = work_dir() / "xc.qtt";
    REQUIRE(run("simulate --config " + scenario_conf().string() + " --out " + stream.string())
                .code == 0);
    const fs::path by_label = work_dir() / "xc_label.csv";
    const fs::path by_number = work_dir() / "xc_number.csv";
    REQUIRE(run("xcorr --in " + stream.string() + " --a xx_plus --b x_plus --out " +
                by_label.string())
                .code == 0);
    REQUIRE(run("xcorr --in " + stream.string() + " --a 0 --b 2 --out " + by_number.string())
                .code == 0);
    CHECK(slurp(by_label) == slurp(by_number));

    const RunResult bad =
        run("xcorr --in " + stream.string() + " --a nonsense --b 2 --out /dev/null");
    CHECK(bad.code == 2);
    CHECK(bad.err.find("xx_plus") != std::string::npos);  // lists what exists
}

TEST_CASE("the pair cascade shows antibunched same-channel statistics") {
    const fs::path stream = work_dir() / "g2run.qtt";
    REQUIRE(run("simulate --config " + scenario_conf().string() + " --out " + stream.string())
                .code == 0);
    const fs::path csv = work_dir() / "g2run.csv";
    const RunResult r =
        run("g2 --in " + stream.string() + " --a x_plus --b x_plus --out " + csv.string());
    CHECK(r.code == 0);
    CHECK(r.out.find("g2(0) = ") != std::string::npos);
    // one photon per cascade and a 500 ns cycle: the zero-delay bin is empty
    const double g2_0 = std::stod(r.out.substr(r.out.find("= ") + 2));
    CHECK(g2_0 < 0.5);
}

TEST_CASE("the fidelity pipeline runs from basis set to peak summary") {
    const fs::path dir = work_dir() / "fidset";
    REQUIRE(run("simulate --config " + scenario_conf().string() + " --fidelity-set --out-dir " +
                dir.string())
                .code == 0);
    for (const char* name : {"hv.qtt", "da.qtt", "lr.qtt", "elderra.qtt", "elaerd.qtt",
                             "manifest.txt"})
        CHECK(fs::exists(dir / name));

    const fs::path csv = work_dir() / "fid.csv";
    const RunResult r = run("fidelity --in-dir " + dir.string() +
                            " --fss-uev 17.7 --bin-ps 8 --window-ns 1.0 --out " + csv.string());
    CHECK(r.code == 0);  // 0.87 plateau is far beyond 4 sigma here
    CHECK(r.out.find("peak fidelity ") != std::string::npos);
    const double peak = std::stod(r.out.substr(r.out.find("fidelity ") + 9));
    CHECK(peak > 0.8);
    CHECK(peak < 0.95);

    // removing one basis run fails with a list of what is missing and found
    fs::remove(dir / "lr.qtt");
    const RunResult broken = run("fidelity --in-dir " + dir.string() +
                                 " --fss-uev 17.7 --out /dev/null");
    CHECK(broken.code == 3);
    CHECK(broken.err.find("lr.qtt") != std::string::npos);
    CHECK(broken.err.find("hv.qtt") != std::string::npos);
}

TEST_CASE("an overwhelmed source fails the significance gate with exit 1") {
    std::string text = kScenarioText;
    text.replace(text.find("background_fraction = 0.1733333"), 30,
                 "background_fraction = 0.95");
    const fs::path conf = work_dir() / "noisy.conf";
    spill(conf, text);
    const fs::path dir = work_dir() / "noisy_set";
    REQUIRE(run("simulate --config " + conf.string() + " --fidelity-set --out-dir " +
                dir.string())
                .code == 0);
    const RunResult r = run("fidelity --in-dir " + dir.string() +
                            " --fss-uev 17.7 --out " + (work_dir() / "noisy.csv").string());
    CHECK(r.code == 1);
    CHECK(r.out.find("not significantly above") != std::string::npos);
}

TEST_CASE("a sweep row and a direct fidelity run agree on the same seed") {
    // row 0 of the sweep simulates with the scenario seed itself, so an
    // explicit fidelity-set run at the same temperature must reproduce it
    const fs::path sweep_csv = work_dir() / "sweep.csv";
    const RunResult sweep = run("tempsweep --config " + scenario_conf().string() +
                                " --temps 44 --out " + sweep_csv.string());
    REQUIRE(sweep.code == 0);
    const double sweep_peak = csv_cell(slurp(sweep_csv), 0, 1);
    CHECK(csv_cell(slurp(sweep_csv), 0, 4) == 1000.0);  // interpolated lifetime echoed

    const fs::path dir = work_dir() / "sweep_set";
    REQUIRE(run("simulate --config " + scenario_conf().string() +
                " --fidelity-set --temperature 44 --out-dir " + dir.string())
                .code == 0);
    const RunResult fid = run("fidelity --in-dir " + dir.string() +
                              " --fss-uev 17.7 --bin-ps 8 --window-ns 1.0 --out " +
                              (work_dir() / "sweep_fid.csv").string());
    REQUIRE(fid.code == 0);
    const double direct_peak = std::stod(fid.out.substr(fid.out.find("fidelity ") + 9));
    CHECK(direct_peak == doctest::Approx(sweep_peak).epsilon(1e-9));
}

TEST_CASE("sweep input validation maps to the config exit code") {
    CHECK(run("tempsweep --config " + scenario_conf().string() + " --temps '' --out /dev/null")
              .code == 2);
    CHECK(run("tempsweep --config " + scenario_conf().string() +
              " --temps 30 --out /dev/null")
              .code == 2);  // below the calibrated range
    CHECK(run("tempsweep --config " + scenario_conf().string() +
              " --temps 44,abc --out /dev/null")
              .code == 2);
}

TEST_CASE("splitting synthesis and fitting round trip through files") {
    const fs::path conf = work_dir() / "scan.conf";
    spill(conf,
          "[qwp]\ns_uev = 17.7\ntheta_rad = 0.35\nphi_rad = 1.1\np = 0\nepsilon_uev = -0.4\n"
          "[sweep]\nn_points = 512\nchi_span_rad = 6.283185307179586\nnoise_uev = 0.3\n"
          "seed = 271828\n");
    const fs::path series = work_dir() / "scan.csv";
    REQUIRE(run("fss synth --config " + conf.string() + " --out " + series.string()).code == 0);
    const auto rows = qled::read_numeric_csv(series.string(),
                                             {"chi_rad", "delta_e_ueV", "sigma_ueV"});
    REQUIRE(rows.size() == 512);
    CHECK(rows.front()[0] == 0.0);
    CHECK(rows.back()[0] == doctest::Approx(6.283185307179586));

    const fs::path fit_csv = work_dir() / "scan_fit.csv";
    const RunResult fit = run("fss fit --in " + series.string() + " --out " + fit_csv.string());
    CHECK(fit.code == 0);
    CHECK(fit.out.find("s = ") != std::string::npos);
    const std::string table = slurp(fit_csv);
    CHECK(table.find("parameter,estimate,sigma") != std::string::npos);
    CHECK(table.find("status,resolved") != std::string::npos);
    const double s_hat = csv_cell(table, 0, 1);
    CHECK(std::abs(s_hat - 17.7) < 0.3);
}

TEST_CASE("a flat series is reported unresolved with the degenerate exit code") {
    std::ostringstream flat;
    flat << "chi_rad,delta_e_ueV,sigma_ueV\n";
    for (int k = 0; k < 16; ++k)
        flat << (6.283185307179586 * k / 15) << ",1.5,0.3\n";
    const fs::path series = work_dir() / "flat.csv";
    spill(series, flat.str());
    const fs::path out = work_dir() / "flat_fit.csv";
    const RunResult r = run("fss fit --in " + series.string() + " --out " + out.string());
    CHECK(r.code == 4);
    CHECK(r.out.find("unresolved") != std::string::npos);
    CHECK(slurp(out).find("status,unresolved,") != std::string::npos);
}

TEST_CASE("missing inputs and invalid configs use distinct exit codes") {
    CHECK(run("xcorr --in /nonexistent.qtt --a 0 --b 1 --out /dev/null").code == 3);
    CHECK(run("fss fit --in /nonexistent.csv --out /dev/null").code == 3);

    const fs::path conf = work_dir() / "broken.conf";
    spill(conf, "[source]\nfss_uev = -2\n[measurement]\nduration_s = 0.001\n");
    const RunResult r = run("simulate --config " + conf.string() + " --out /dev/null");
    CHECK(r.code == 2);
    CHECK(r.err.find("config invalid") != std::string::npos);

    // not a stream file: refuse with the I/O code
    const fs::path junk = work_dir() / "junk.qtt";
    spill(junk, "this is not a stream");
    CHECK(run("g2 --in " + junk.string() + " --a 0 --b 0 --out /dev/null").code == 3);
}

#ifdef QLED_DATA_DIR
TEST_CASE("synthesized series bytes stay frozen for a pinned configuration") {
    const fs::path golden_conf = fs::path(QLED_DATA_DIR) / "golden_scan.conf";
    const fs::path golden_csv = fs::path(QLED_DATA_DIR) / "golden_scan.csv";
    REQUIRE(fs::exists(golden_conf));
    REQUIRE(fs::exists(golden_csv));
    const fs::path series = work_dir() / "golden_out.csv";
    REQUIRE(run("fss synth --config " + golden_conf.string() + " --out " + series.string())
                .code == 0);
    CHECK(slurp(series) == slurp(golden_csv));
}

TEST_CASE("correlation output bytes stay frozen for a pinned acquisition") {
    const fs::path golden_conf = fs::path(QLED_DATA_DIR) / "golden_run.conf";
    const fs::path golden_csv = fs::path(QLED_DATA_DIR) / "golden_run_g2.csv";
    REQUIRE(fs::exists(golden_conf));
    REQUIRE(fs::exists(golden_csv));
    const fs::path stream = work_dir() / "golden_run.qtt";
    REQUIRE(run("simulate --config " + golden_conf.string() + " --out " + stream.string())
                .code == 0);
    const fs::path csv = work_dir() / "golden_run_g2.csv";
    REQUIRE(run("g2 --in " + stream.string() +
                " --a xx_plus --b x_plus --bin-ps 64 --window-ns 4 --out " + csv.string())
                .code == 0);
    CHECK(slurp(csv) == slurp(golden_csv));
}
#endif
