// End-to-end tests driving the cslm binary. CSLM_BIN is injected by CMake.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <string>

#include "test_util.hpp"

using testutil::run_command;
using testutil::slurp;
using testutil::spit;
using testutil::TempDir;

namespace {

const std::string bin = CSLM_BIN;

std::string q(const std::string& s) { return "'" + s + "'"; }

// a small deterministic dataset shared by the CLI tests
struct Dataset {
    TempDir dir{"cli_data"};
    Dataset() {
        const auto r = run_command(bin + " synth --out " + q(dir.path.string()) +
                                   " --seed 9 --states 3 --words-per-lang 12"
                                   " --tokens-per-lang 1500 --cs-tokens 500");
        REQUIRE(r.exit_code == 0);
    }
    std::string l1() const { return dir.file("l1.txt"); }
    std::string l2() const { return dir.file("l2.txt"); }
    std::string cs() const { return dir.file("cs_test.txt"); }
};

std::string small_train_flags(int epochs = 1) {
    return " --epochs " + std::to_string(epochs) +
           " --batch-size 5 --bptt 8 --emb-dim 8 --hidden-dim 10 --seed 3";
}

} // namespace

TEST_CASE("synth is byte-deterministic and writes a manifest") {
    TempDir a("synth_a"), b("synth_b");
    const std::string flags = " --seed 77 --states 3 --words-per-lang 9 --tokens-per-lang 800"
                              " --cs-tokens 300";
    REQUIRE(run_command(bin + " synth --out " + q(a.path.string()) + flags).exit_code == 0);
    REQUIRE(run_command(bin + " synth --out " + q(b.path.string()) + flags).exit_code == 0);
    for (const char* f : {"l1.txt", "l2.txt", "cs_test.txt", "manifest.txt"})
        CHECK(slurp(a.file(f)) == slurp(b.file(f)));
    CHECK(slurp(a.file("manifest.txt")).find("oracle_bits_per_token_cs=") != std::string::npos);
}

TEST_CASE("train writes a reloadable checkpoint; reruns are bit-identical") {
    Dataset data;
    TempDir out1("train_1"), out2("train_2");
    const std::string cmd = " train --l1 " + q(data.l1()) + " --l2 " + q(data.l2()) +
                            small_train_flags();
    REQUIRE(run_command(bin + cmd + " --out " + q(out1.path.string())).exit_code == 0);
    REQUIRE(run_command(bin + cmd + " --out " + q(out2.path.string())).exit_code == 0);
    CHECK(slurp(out1.file("model.cslm")) == slurp(out2.file("model.cslm")));
    CHECK(slurp(out1.file("epochs.csv")) == slurp(out2.file("epochs.csv")));
    CHECK(slurp(out1.file("vocab.tsv")) == slurp(out2.file("vocab.tsv")));

    // eval before/after a save-load cycle is the same number
    const auto e1 = run_command(bin + " eval --ckpt " + q(out1.file("model.cslm")) + " --vocab " +
                                q(out1.file("vocab.tsv")) + " --test " + q(data.cs()) +
                                " --bptt 8");
    REQUIRE(e1.exit_code == 0);
    const auto e2 = run_command(bin + " eval --ckpt " + q(out2.file("model.cslm")) + " --vocab " +
                                q(out2.file("vocab.tsv")) + " --test " + q(data.cs()) +
                                " --bptt 8");
    REQUIRE(e2.exit_code == 0);
    CHECK(e1.output == e2.output);
    CHECK(e1.output.find("perplexity") != std::string::npos);
}

TEST_CASE("epochs zero saves the initialized model") {
    Dataset data;
    TempDir out("train_zero");
    const auto r = run_command(bin + " train --l1 " + q(data.l1()) + " --l2 " + q(data.l2()) +
                               small_train_flags(0) + " --out " + q(out.path.string()));
    REQUIRE(r.exit_code == 0);
    CHECK(std::filesystem::exists(out.file("model.cslm")));
    CHECK(slurp(out.file("epochs.csv")) == "epoch,lr,train_ce,train_mse,val_ppl\n");
}

TEST_CASE("eval refuses the wrong vocabulary and corrupt checkpoints") {
    Dataset data;
    TempDir out("train_guard");
    REQUIRE(run_command(bin + " train --l1 " + q(data.l1()) + " --l2 " + q(data.l2()) +
                        small_train_flags() + " --out " + q(out.path.string())).exit_code == 0);

    // vocabulary from a different corpus pair -> hash mismatch
    TempDir other("other_data");
    REQUIRE(run_command(bin + " synth --out " + q(other.path.string()) +
                        " --seed 4242 --states 3 --words-per-lang 10 --tokens-per-lang 900"
                        " --cs-tokens 300").exit_code == 0);
    TempDir out2("train_guard2");
    REQUIRE(run_command(bin + " train --l1 " + q(other.file("l1.txt")) + " --l2 " +
                        q(other.file("l2.txt")) + small_train_flags() + " --out " +
                        q(out2.path.string())).exit_code == 0);
    const auto bad = run_command(bin + " eval --ckpt " + q(out.file("model.cslm")) + " --vocab " +
                                 q(out2.file("vocab.tsv")) + " --test " + q(data.cs()));
    CHECK(bad.exit_code != 0);
    CHECK(bad.output.find("vocabulary") != std::string::npos);

    const std::string full = slurp(out.file("model.cslm"));
    spit(out.file("trunc.cslm"), full.substr(0, full.size() - 100));
    const auto corrupt = run_command(bin + " eval --ckpt " + q(out.file("trunc.cslm")) +
                                     " --vocab " + q(out.file("vocab.tsv")) + " --test " +
                                     q(data.cs()));
    CHECK(corrupt.exit_code != 0);
    CHECK(corrupt.output.find("corrupt") != std::string::npos);
}

TEST_CASE("flag precedence: command line beats config file beats defaults") {
    Dataset data;
    TempDir out("precedence");
    spit(out.file("run.cfg"), "epochs=2\nbatch_size=5\nbptt_steps=8\nemb_dim=8\n"
                              "hidden_dim=10\nseed=3\n");
    // config file alone: 2 epochs
    REQUIRE(run_command(bin + " train --l1 " + q(data.l1()) + " --l2 " + q(data.l2()) +
                        " --config " + q(out.file("run.cfg")) + " --out " +
                        q(out.path.string())).exit_code == 0);
    std::string csv = slurp(out.file("epochs.csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3); // header + 2 rows

    // explicit flag wins over the file
    REQUIRE(run_command(bin + " train --l1 " + q(data.l1()) + " --l2 " + q(data.l2()) +
                        " --config " + q(out.file("run.cfg")) + " --epochs 1 --out " +
                        q(out.path.string())).exit_code == 0);
    csv = slurp(out.file("epochs.csv"));
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);

    spit(out.file("bad.cfg"), "momentum=0.9\n");
    const auto bad = run_command(bin + " train --l1 " + q(data.l1()) + " --l2 " + q(data.l2()) +
                                 " --config " + q(out.file("bad.cfg")));
    CHECK(bad.exit_code != 0);
    CHECK(bad.output.find("unknown key") != std::string::npos);
}

TEST_CASE("bench emits the report files with Table labels") {
    Dataset data;
    TempDir out("bench");
    const auto r = run_command(bin + " bench --l1 " + q(data.l1()) + " --l2 " + q(data.l2()) +
                               " --test " + q(data.cs()) + " --out " + q(out.path.string()) +
                               small_train_flags() + " --jobs 2");
    REQUIRE(r.exit_code == 0);
    const std::string table = slurp(out.file("bench.txt"));
    for (const char* label : {"Spanish data only", "English data only",
                              "Spanish + English data (*)", "MSE (+)"})
        CHECK(table.find(label) != std::string::npos);
    const std::string chart = slurp(out.file("chart.csv"));
    CHECK(std::count(chart.begin(), chart.end(), '\n') == 5); // header + 4 rows
    CHECK(chart.rfind("regime,perplexity\n", 0) == 0);
    CHECK(std::filesystem::exists(out.file("bench.csv")));
    CHECK(std::filesystem::exists(out.file("epochs_alternate-mse.csv")));
}

TEST_CASE("gradcheck exits zero normally, nonzero with the corrupted fixture") {
    const auto ok = run_command(bin + " gradcheck");
    CHECK(ok.exit_code == 0);
    CHECK(ok.output.find("gradcheck passed") != std::string::npos);
    const auto bad = run_command(bin + " gradcheck --corrupt-fixture");
    CHECK(bad.exit_code != 0);
    CHECK(bad.output.find("FAIL") != std::string::npos);
}

TEST_CASE("missing inputs produce actionable errors") {
    const auto r = run_command(bin + " train --l1 /nonexistent/a.txt --l2 /nonexistent/b.txt");
    CHECK(r.exit_code != 0);
    CHECK(r.output.find("cannot open") != std::string::npos);
    const auto sub = run_command(bin + " frobnicate");
    CHECK(sub.exit_code != 0);
}
