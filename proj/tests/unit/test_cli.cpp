#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>

#include "quarry/project.hpp"
#include "support/csv.hpp"
#include "support/files.hpp"

namespace qt = quarry::testing;

namespace {

struct Run {
    int rc = -1;
    std::string out;
    std::string err;
};

Run cli(const qt::TempDir& tmp, const std::string& args) {
    const auto out = tmp.path() / "stdout.txt";
    const auto err = tmp.path() / "stderr.txt";
    const std::string cmd = std::string("\"") + QUARRY_CLI + "\" " + args + " >\"" + out.string() + "\" 2>\"" +
                            err.string() + "\"";
    const int status = std::system(cmd.c_str());
    Run r;
    r.rc = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = qt::read_file(out);
    r.err = qt::read_file(err);
    return r;
}

}  // namespace

TEST_CASE("cli end to end") {
    qt::TempDir tmp;
    const auto dir = (tmp.path() / "p").string();
    auto r = cli(tmp, "init \"" + dir + "\"");
    CHECK(r.rc == 0);
    CHECK(std::filesystem::exists(tmp.path() / "p" / "project.json"));
    CHECK(cli(tmp, "init \"" + dir + "\"").rc == 2);

    r = cli(tmp, "-C \"" + dir + "\" ingest --input \"" + qt::desk_corpus_path().string() + "\"");
    CHECK(r.rc == 0);
    const auto oracle = qt::read_json(qt::source_dir() / "tests" / "oracles" / "frozen" / "desk_counts.json");
    CHECK(r.out.find("n_documents=200 ") != std::string::npos);
    CHECK(r.out.find("n_text_edges=" + std::to_string(oracle["n_text_edges"].get<std::uint64_t>())) !=
          std::string::npos);

    r = cli(tmp, "-C \"" + dir + "\" fit --seed 3 --restarts 1 --sweeps 5 --levels 3");
    CHECK(r.rc == 0);
    CHECK(r.out.find("snapshot_id=0") != std::string::npos);
    CHECK(r.out.find("level 0: words=") != std::string::npos);
    CHECK(r.out.find("level 3:") == std::string::npos);
    const auto dl_line = r.out.substr(r.out.find("dl_total="), r.out.find('\n', r.out.find("dl_total=")) - r.out.find("dl_total="));

    r = cli(tmp, "-C \"" + dir + "\" fit --seed 3 --restarts 1 --sweeps 5 --levels 3");
    CHECK(r.rc == 0);
    CHECK(r.out.find("snapshot_id=1") != std::string::npos);
    CHECK(r.out.find(dl_line) != std::string::npos);

    {
        quarry::Project p(tmp.path() / "p");
        p.annotations().create_highlight({"r000", {0, 12}, "from cli test", {}, "a, \"quoted\" memo"});
    }
    const auto csv_path = (tmp.path() / "out.csv").string();
    r = cli(tmp, "-C \"" + dir + "\" export --format csv --out \"" + csv_path + "\"");
    CHECK(r.rc == 0);
    const auto rows = qt::parse_csv(qt::read_file(csv_path));
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][5] == "from cli test");
    CHECK(rows[1][8] == "a, \"quoted\" memo");
}

TEST_CASE("cli errors") {
    qt::TempDir tmp;
    auto r = cli(tmp, "-C \"" + (tmp.path() / "none").string() + "\" fit");
    CHECK(r.rc == 2);
    CHECK(r.err.find("error [") != std::string::npos);
    CHECK(cli(tmp, "").rc == 1);
    CHECK(cli(tmp, "bogus").rc == 1);
    CHECK(cli(tmp, "ingest --input /definitely/missing.jsonl").rc == 1);
    CHECK(cli(tmp, "export --format xml --out x").rc == 1);
    CHECK(cli(tmp, "--help").rc == 0);

    const auto dir = (tmp.path() / "p").string();
    REQUIRE(cli(tmp, "init \"" + dir + "\"").rc == 0);
    qt::write_file(tmp.path() / "bad.jsonl", "{\"id\":\"a\",\"title\":\"\",\"body\":\"x\"}\n{broken\n");
    r = cli(tmp, "-C \"" + dir + "\" ingest --input \"" + (tmp.path() / "bad.jsonl").string() + "\"");
    CHECK(r.rc == 2);
    CHECK(r.err.find("MalformedRecord") != std::string::npos);
}
