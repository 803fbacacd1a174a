#include "cli.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using syncrec::cli::run_command;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_command(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "syncrec_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

std::size_t count_lines(const std::string& text) {
    return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("help output matches the golden files") {
    const std::pair<std::vector<std::string>, const char*> cases[] = {
        {{"--help"}, "help.txt"},
        {{"experiment", "case1", "--help"}, "help_experiment_case1.txt"},
        {{"epoch", "--help"}, "help_epoch.txt"},
    };
    for (const auto& [args, golden] : cases) {
        CAPTURE(golden);
        const auto r = run(args);
        CHECK(r.code == 0);
        CHECK(r.out == slurp(fs::path(SYNCREC_GOLDEN_DIR) / golden));
    }
}

TEST_CASE("version") {
    const auto r = run({"--version"});
    CHECK(r.code == 0);
    CHECK(r.out == "syncrec 0.1.0\n");
}

TEST_CASE("usage errors exit with 1") {
    auto r = run({"experiment", "case1", "--task", "5"});
    CHECK(r.code == 1);
    CHECK(r.err.find("task must be 1..4") != std::string::npos);
    r = run({"experiment", "case1"});
    CHECK(r.code == 1);
    CHECK(r.err.find("--task") != std::string::npos);
    CHECK(run({"teleport"}).code == 1);
    CHECK(run({"epoch", "--in", "/nonexistent.srec", "--marker", "x", "--pre", "1", "--post", "1", "--out", "o"}).code == 1);
    CHECK(run({"sim", "eeg"}).code == 1);
}

TEST_CASE("runtime errors exit with 2") {
    const auto junk = scratch("junk.srec");
    std::ofstream(junk) << "not a recording";
    const auto r = run({"inspect", "--in", junk.string()});
    CHECK(r.code == 2);
    CHECK(r.err.rfind("error [", 0) == 0);
}

TEST_CASE("case I, epoch and inspect end to end") {
    const auto rec = scratch("case1.srec");
    const auto epochs = scratch("case1_epochs.jsonl");
    auto r = run({"experiment", "case1", "--task", "1", "--config", SYNCREC_CONFIG_DIR "/case1.json", "--out", rec.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("task 1: acceleration Normal, trajectory Fixed") != std::string::npos);
    CHECK(r.out.find("recording: " + rec.string()) != std::string::npos);
    REQUIRE(fs::exists(rec));

    r = run({"epoch", "--in", rec.string(), "--marker", "Robot approaching", "--pre", "1", "--post", "2", "--out",
             epochs.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out == "8 epochs written to " + epochs.string() + "\n");
    CHECK(count_lines(slurp(epochs)) == 8);

    r = run({"epoch", "--glob", "--in", rec.string(), "--marker", "Pick up *", "--pre", "0.5", "--post", "0.5", "--out",
             epochs.string()});
    REQUIRE(r.code == 0);
    // Three empty-plate polls, then the loaded one.
    CHECK(r.out.rfind("4 epochs", 0) == 0);

    r = run({"inspect", "--in", rec.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("subject = S01") != std::string::npos);
    CHECK(r.out.find("Task 1 init") != std::string::npos);
    CHECK(r.out.find("(raw timestamps") == std::string::npos);
}

TEST_CASE("case II inspect shows the state changes") {
    const auto rec = scratch("case2.srec");
    auto r = run({"experiment", "case2", "--config", SYNCREC_CONFIG_DIR "/case2.json", "--out", rec.string(), "--seed", "4", "--subject", "S09"});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("place events: 10") != std::string::npos);
    r = run({"inspect", "--in", rec.string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("Robot state change") != std::string::npos);
    CHECK(r.out.find("Robot is stopping") != std::string::npos);
    CHECK(r.out.find("seed = 4") != std::string::npos);
    CHECK(r.out.find("subject = S09") != std::string::npos);
}

}
