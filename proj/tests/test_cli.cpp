#include <array>
#include <cstdio>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "prefrec/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    std::string cmd = std::string(PREFREC_CLI_PATH) + " " + args + " 2>&1";
    std::array<char, 4096> buf;
    RunResult result;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    while (std::size_t n = fread(buf.data(), 1, buf.size(), pipe)) result.output.append(buf.data(), n);
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("prefrec_cli_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("cli pipeline: synth, train, evaluate, build-prefs, metrics") {
    TempDir dir;
    std::string out = dir / "run";
    std::string corpus = out + "/corpus.json";

    auto synth = run_cli("synth --dialogues 12 --turns-per-dialogue 1 --candidates 4 --seed 7 "
                         "--profile synthetic --out " + out);
    INFO(synth.output);
    REQUIRE(synth.exit_code == 0);
    CHECK(fs::exists(corpus));
    CHECK(fs::exists(out + "/synth_manifest.json"));

    auto train = run_cli("train-scorer --corpus " + corpus +
                         " --profile synthetic --hash-dim 12 --epochs 8 --out " + out);
    INFO(train.output);
    REQUIRE(train.exit_code == 0);
    CHECK(fs::exists(out + "/scorer.json"));
    json manifest = json::parse(prefrec::read_file(out + "/train-scorer_manifest.json"));
    CHECK(manifest.contains("feature_cfg_hash"));
    CHECK(manifest.at("config_hash").get<std::string>().size() == 64);

    // Baseline with an explicitly configured rec-info backend: report has one
    // cell per (metric, k) and the ignored backend draws a warning.
    auto eval1 = run_cli("evaluate --variant baseline --recinfo-backend mock --corpus " + corpus +
                         " --profile synthetic --model " + out + "/scorer.json --ks 1,3,5 --out " +
                         out);
    INFO(eval1.output);
    REQUIRE(eval1.exit_code == 0);
    CHECK(eval1.output.find("warning") != std::string::npos);
    json report = json::parse(prefrec::read_file(out + "/report.json"));
    CHECK(report.at("hr").size() == 3);
    CHECK(report.at("mrr").size() == 3);
    CHECK(report.at("variant") == "baseline");
    std::string report_bytes = prefrec::read_file(out + "/report.json");
    std::string manifest_bytes = prefrec::read_file(out + "/evaluate_manifest.json");

    // Identical config -> byte-identical artifacts and manifest.
    auto eval2 = run_cli("evaluate --variant baseline --recinfo-backend mock --corpus " + corpus +
                         " --profile synthetic --model " + out + "/scorer.json --ks 1,3,5 --out " +
                         out);
    REQUIRE(eval2.exit_code == 0);
    CHECK(prefrec::read_file(out + "/report.json") == report_bytes);
    CHECK(prefrec::read_file(out + "/evaluate_manifest.json") == manifest_bytes);

    auto prefs = run_cli("build-prefs --kind summary --k 4 --corpus " + corpus +
                         " --profile synthetic --model " + out + "/scorer.json --out " + out);
    INFO(prefs.output);
    REQUIRE(prefs.exit_code == 0);
    CHECK(fs::exists(out + "/prefs_summary.jsonl"));
    CHECK(fs::exists(out + "/dpo_trainer_summary.json"));
    json stub = json::parse(prefrec::read_file(out + "/dpo_trainer_summary.json"));
    CHECK(stub.at("beta").get<double>() == doctest::Approx(0.1768));
    json pm = json::parse(prefrec::read_file(out + "/build-prefs_manifest.json"));
    CHECK(pm.at("stage") == "build-prefs");

    auto recinfo_prefs = run_cli("build-prefs --kind recinfo --j 4 --corpus " + corpus +
                                 " --profile synthetic --model " + out + "/scorer.json --out " + out);
    INFO(recinfo_prefs.output);
    REQUIRE(recinfo_prefs.exit_code == 0);
    CHECK(fs::exists(out + "/prefs_recinfo.jsonl"));

    auto summarize = run_cli("summarize --corpus " + corpus + " --profile synthetic --split all "
                             "--out " + out);
    REQUIRE(summarize.exit_code == 0);
    CHECK(fs::exists(out + "/summaries.jsonl"));

    auto metrics = run_cli("metrics --texts " + out + "/summaries.jsonl --tokenizer word --out " +
                           out);
    INFO(metrics.output);
    REQUIRE(metrics.exit_code == 0);
    json mj = json::parse(prefrec::read_file(out + "/metrics.json"));
    CHECK(mj.at("tokenizer") == "word");
    CHECK(mj.at("avg_len").get<double>() > 0.0);

    auto dpo = run_cli("dpo-check --pairs " + out + "/prefs_summary.jsonl --curve curve.csv --out " +
                       out);
    INFO(dpo.output);
    REQUIRE(dpo.exit_code == 0);
    CHECK(dpo.output.find("[PASS]") != std::string::npos);
    CHECK(dpo.output.find("[FAIL]") == std::string::npos);
    CHECK(fs::exists(out + "/curve.csv"));
}

TEST_CASE("cli usage errors exit 2") {
    auto missing = run_cli("evaluate --ks 1");
    CHECK(missing.exit_code == 2);
    CHECK(missing.output.find("usage") != std::string::npos);

    auto unknown = run_cli("evaluate --definitely-not-a-flag 1");
    CHECK(unknown.exit_code == 2);

    auto no_sub = run_cli("");
    CHECK(no_sub.exit_code == 2);

    auto help = run_cli("--help");
    CHECK(help.exit_code == 0);
    CHECK(help.output.find("prefrec") != std::string::npos);
}

TEST_CASE("cli stage failures exit 1 with a structured error") {
    TempDir dir;
    std::string bogus = dir / "bogus.json";
    prefrec::write_file(bogus, "{broken");
    auto result = run_cli("evaluate --corpus " + bogus + " --model nope.json --out " + (dir / "o"));
    CHECK(result.exit_code == 1);
    CHECK(result.output.find("\"error\"") != std::string::npos);
    CHECK(result.output.find("ParseError") != std::string::npos);
}

TEST_CASE("cli score subcommand prints a probability") {
    TempDir dir;
    std::string out = dir / "run";
    auto synth = run_cli("synth --dialogues 6 --turns-per-dialogue 1 --candidates 3 "
                         "--profile synthetic --out " + out);
    REQUIRE(synth.exit_code == 0);
    auto train = run_cli("train-scorer --corpus " + out + "/corpus.json --profile synthetic "
                         "--hash-dim 10 --epochs 4 --out " + out);
    REQUIRE(train.exit_code == 0);

    auto score = run_cli("score --model " + out + "/scorer.json --summary \"I like onsen\" "
                         "--description \"famous for onsen\" --out " + out);
    REQUIRE(score.exit_code == 0);
    double value = std::stod(score.output);
    CHECK(value > 0.0);
    CHECK(value < 1.0);
    CHECK(fs::exists(out + "/score_manifest.json"));
}

TEST_CASE("evaluate refuses a scorer with a drifted feature config") {
    TempDir dir;
    std::string out = dir / "run";
    auto synth = run_cli("synth --dialogues 6 --turns-per-dialogue 1 --candidates 3 "
                         "--profile synthetic --out " + out);
    REQUIRE(synth.exit_code == 0);
    REQUIRE(run_cli("train-scorer --corpus " + out + "/corpus.json --profile synthetic "
                    "--hash-dim 10 --epochs 2 --out " + out)
                .exit_code == 0);

    // A second model trained with a different hash dimension, dropped next to
    // the first training manifest.
    std::string other = dir / "other";
    REQUIRE(run_cli("synth --dialogues 6 --turns-per-dialogue 1 --candidates 3 "
                    "--profile synthetic --out " + other)
                .exit_code == 0);
    REQUIRE(run_cli("train-scorer --corpus " + other + "/corpus.json --profile synthetic "
                    "--hash-dim 11 --epochs 2 --out " + other)
                .exit_code == 0);
    fs::copy_file(other + "/scorer.json", out + "/scorer.json",
                  fs::copy_options::overwrite_existing);

    auto eval = run_cli("evaluate --corpus " + out + "/corpus.json --profile synthetic --model " +
                        out + "/scorer.json --out " + out);
    CHECK(eval.exit_code == 1);
    CHECK(eval.output.find("ConfigError") != std::string::npos);
    CHECK(eval.output.find("feature_cfg") != std::string::npos);
}

TEST_CASE("cli config file values are overridden by flags") {
    TempDir dir;
    std::string out = dir / "run";
    auto synth = run_cli("synth --dialogues 6 --turns-per-dialogue 1 --candidates 3 "
                         "--profile synthetic --out " + out);
    REQUIRE(synth.exit_code == 0);

    std::string cfg_path = dir / "cfg.json";
    prefrec::write_file(cfg_path, json{{"k", 4},
                                       {"profile", "synthetic"},
                                       {"corpus_path", out + "/corpus.json"},
                                       {"out_dir", out}}
                                      .dump());
    REQUIRE(run_cli("train-scorer --config " + cfg_path + " --hash-dim 10 --epochs 2").exit_code ==
            0);
    // Flag --k 6 overrides the config's 4; the manifest echoes the winner.
    auto prefs = run_cli("build-prefs --config " + cfg_path + " --kind summary --k 6 --model " +
                         out + "/scorer.json");
    INFO(prefs.output);
    REQUIRE(prefs.exit_code == 0);
    json manifest = json::parse(prefrec::read_file(out + "/build-prefs_manifest.json"));
    CHECK(manifest.at("config").at("k").get<int>() == 6);
}
