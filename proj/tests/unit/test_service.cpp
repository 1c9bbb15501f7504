#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "quarry/service.hpp"
#include "quarry/utf8.hpp"
#include "support/csv.hpp"
#include "support/files.hpp"

using namespace quarry;
namespace qt = quarry::testing;
using nlohmann::json;

namespace {

struct Server {
    qt::TempDir tmp;
    std::unique_ptr<Project> project;
    std::unique_ptr<Service> service;
    std::thread thread;
    int port = 0;

    Server() {
        const auto dir = tmp.path() / "proj";
        Project::init(dir);
        Project::ingest(dir, {qt::desk_corpus_path(), {}, {}, {}});
        auto j = qt::read_json(dir / "project.json");
        j["inference"]["restarts"] = 1;
        j["inference"]["sweeps"] = 20;
        qt::write_file(dir / "project.json", j.dump(2));
        project = std::make_unique<Project>(dir);
        project->ensure_initial_snapshot();
        service = std::make_unique<Service>(*project);
        port = service->bind_any_port("127.0.0.1");
        thread = std::thread([this] { service->run(); });
        service->wait_until_ready();
    }
    ~Server() {
        service->stop();
        thread.join();
    }
};

Server& server() {
    static Server s;
    return s;
}

httplib::Client client() {
    httplib::Client c("127.0.0.1", server().port);
    c.set_read_timeout(60, 0);
    return c;
}

json body_of(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

std::string error_code(const httplib::Result& r) { return body_of(r)["error"]["code"].get<std::string>(); }

json post(const std::string& path, const json& body, int expect) {
    auto r = client().Post(path, body.dump(), "application/json");
    REQUIRE(r);
    CHECK(r->status == expect);
    return json::parse(r->body);
}

}  // namespace

TEST_CASE("error codes map to HTTP statuses") {
    CHECK(http_status(ErrorCode::NotFound) == 404);
    CHECK(http_status(ErrorCode::Busy) == 409);
    CHECK(http_status(ErrorCode::OverlappingHighlight) == 409);
    CHECK(http_status(ErrorCode::KeywordConflict) == 409);
    CHECK(http_status(ErrorCode::DuplicateId) == 409);
    CHECK(http_status(ErrorCode::IntegrityError) == 500);
    CHECK(http_status(ErrorCode::Io) == 500);
    CHECK(http_status(ErrorCode::InvalidLevel) == 400);
    CHECK(http_status(ErrorCode::SampleTooLarge) == 400);
}

TEST_CASE("read endpoints") {
    auto c = client();
    const auto stats = body_of(c.Get("/api/corpus/stats"));
    CHECK(stats["n_documents"] == 200);
    CHECK(stats["n_text_edges"] == server().project->corpus()->stats().n_text_edges);
    CHECK(stats["mean_doc_length"].get<double>() == server().project->corpus()->stats().mean_doc_length);

    auto map1 = c.Get("/api/map?snapshot=0&level=0");
    auto map2 = c.Get("/api/map?snapshot=0&level=0");
    REQUIRE(map1);
    REQUIRE(map2);
    CHECK(map1->status == 200);
    CHECK(map1->body == map2->body);
    const auto m = json::parse(map1->body);
    CHECK(m["order"] == 3);
    CHECK(m["hexes"].size() == 200);
    CHECK(m["boundaries"].size() == 1);
    const auto bad_level = c.Get("/api/map?level=99");
    CHECK(bad_level->status == 400);
    CHECK(error_code(bad_level) == "InvalidLevel");
    CHECK(c.Get("/api/map?snapshot=77")->status == 404);

    const auto doc = body_of(c.Get("/api/documents/r005?preview=50"));
    CHECK(doc["id"] == "r005");
    const auto full = server().project->corpus()->find("r005");
    CHECK(doc["body"] == utf8::slice(full->body, 0, 50));
    CHECK(doc["truncated"] == (full->body_length > 50));
    CHECK(doc["title"] == full->title);
    const auto whole = body_of(c.Get("/api/documents/r005"));
    CHECK(whole["body"] == full->body);
    CHECK(whole["highlights"].is_array());
    const auto missing = c.Get("/api/documents/zzz");
    CHECK(missing->status == 404);
    CHECK(error_code(missing) == "NotFound");

    const auto snaps = body_of(c.Get("/api/snapshots"));
    CHECK(snaps["snapshots"].size() >= 1);
    CHECK(snaps["snapshots"][0]["snapshot_id"] == 0);

    const auto unknown = c.Get("/api/nothing");
    CHECK(unknown->status == 404);
    CHECK(error_code(unknown) == "NotFound");

    const auto cand = body_of(c.Get("/api/keywords/candidates?doc=r001&start=0&end=40"));
    CHECK(cand["candidates"].is_array());
    CHECK(c.Get("/api/keywords/candidates?doc=r001")->status == 400);
}

TEST_CASE("sampling endpoints") {
    const auto a = post("/api/sample/random", {{"n", 10}, {"seed", 5}}, 200);
    const auto b = post("/api/sample/random", {{"n", 10}, {"seed", 5}}, 200);
    CHECK(a["doc_ids"].size() == 10);
    CHECK(a == b);
    CHECK(post("/api/sample/random", {{"n", 3}}, 200)["seed"].is_number_unsigned());
    const auto excl = post("/api/sample/random", {{"n", 190}, {"seed", 1}, {"exclude", a["doc_ids"]}}, 200);
    for (const auto& id : excl["doc_ids"]) {
        for (const auto& x : a["doc_ids"]) CHECK(id != x);
    }
    CHECK(post("/api/sample/random", {{"n", 201}}, 400)["error"]["code"] == "SampleTooLarge");
    CHECK(post("/api/sample/random", {{"n", "ten"}}, 400)["error"]["code"] == "InvalidArgument");
    auto raw = client().Post("/api/sample/random", "{broken", "application/json");
    CHECK(raw->status == 400);

    const auto snapshot = server().project->snapshots().get(0);
    const auto cluster = snapshot->composed(0)[0];
    const auto ranked = post("/api/sample/cluster", {{"snapshot", 0}, {"cluster_id", cluster}, {"level", 0}}, 200);
    CHECK(ranked["documents"].size() <= 30);
    double prev = 2.0;
    for (const auto& d : ranked["documents"]) {
        CHECK(d["probability"].get<double>() <= prev);
        prev = d["probability"].get<double>();
        CHECK(d["title"].is_string());
    }
    CHECK(post("/api/sample/cluster", {{"snapshot", 0}, {"cluster_id", cluster}, {"level", 0}, {"k", 3}}, 200)["documents"]
              .size() <= 3);
    post("/api/sample/cluster", {{"snapshot", 0}, {"cluster_id", 100000}, {"level", 0}}, 404);
}

TEST_CASE("annotation endpoints") {
    auto c = client();
    const auto before = body_of(c.Get("/api/highlights"))["version"].get<std::uint64_t>();
    const auto cands = body_of(c.Get("/api/keywords/candidates?doc=r010&start=0&end=60"))["candidates"];
    REQUIRE(cands.size() >= 2);
    const auto created = post("/api/highlights",
                              {{"doc_id", "r010"},
                               {"start", 0},
                               {"end", 60},
                               {"code", "Service code"},
                               {"keywords", json::array({cands[0]["stem"]})},
                               {"memo", "first"}},
                              201);
    CHECK(created["version"] == before + 1);
    const auto id = created["highlight"]["id"].get<std::string>();
    CHECK(created["highlight"]["keyword_stems"].size() == 1);

    // overlapping selection in the same document
    CHECK(post("/api/highlights", {{"doc_id", "r010"}, {"start", 10}, {"end", 20}, {"code", "x"}}, 409)["error"]["code"] ==
          "OverlappingHighlight");
    // the same keyword claimed by another code
    const WordId taken = cands[0]["word_ids"][0].get<WordId>();
    const Document* other = nullptr;
    for (const auto& d : server().project->corpus()->documents()) {
        if (d.id != "r010" && std::find(d.tokens.begin(), d.tokens.end(), taken) != d.tokens.end()) other = &d;
    }
    REQUIRE(other != nullptr);
    CHECK(post("/api/highlights",
               {{"doc_id", other->id},
                {"start", 0},
                {"end", other->body_length},
                {"code", "other"},
                {"keywords", cands[0]["word_ids"]}},
               409)["error"]["code"] == "KeywordConflict");

    const auto listed = body_of(c.Get("/api/highlights?doc=r010"));
    REQUIRE(listed["highlights"].size() == 1);
    CHECK(listed["highlights"][0]["id"] == id);
    CHECK(body_of(c.Get("/api/highlights?doc=r999"))["highlights"].empty());

    auto patched = c.Patch("/api/highlights/" + id, json{{"memo", "second"}, {"start", 0}, {"end", 30}}.dump(),
                           "application/json");
    REQUIRE(patched);
    CHECK(patched->status == 200);
    const auto pj = json::parse(patched->body);
    CHECK(pj["highlight"]["memo"] == "second");
    CHECK(pj["highlight"]["end"] == 30);
    CHECK(pj["version"] == before + 2);

    const auto codes = body_of(c.Get("/api/codes"));
    std::string code_id;
    for (const auto& code : codes["codes"]) {
        if (code["label"] == "Service code") code_id = code["code_id"].get<std::string>();
    }
    REQUIRE_FALSE(code_id.empty());
    const auto cat = post("/api/codes/" + code_id + "/category", {{"label", "Theme A"}}, 200);
    CHECK(cat["category"]["label"] == "Theme A");
    CHECK(cat["category"]["color"].get<std::string>().front() == '#');
    CHECK(cat["version"] == before + 3);
    post("/api/codes/nope/category", {{"label", "x"}}, 404);

    const auto tree = body_of(c.Get("/api/words/tree?codes=" + code_id));
    CHECK(tree["roots"].size() == 1);
    CHECK(body_of(c.Get("/api/words/tree"))["roots"].empty());

    const auto pins = body_of(c.Get("/api/map?codes=" + code_id))["pins"];
    REQUIRE(pins.size() == 1);
    CHECK(pins[0]["doc_id"] == "r010");
    CHECK(pins[0]["unique_category_count"] == 1);
    CHECK(body_of(c.Get("/api/map?codes="))["pins"].empty());

    auto csv = c.Get("/api/export.csv");
    REQUIRE(csv);
    CHECK(csv->status == 200);
    const auto rows = qt::parse_csv(csv->body);
    REQUIRE(rows.size() == 2);
    CHECK(rows[1][0] == "r010");
    CHECK(rows[1][4] == utf8::slice(server().project->corpus()->find("r010")->body, 0, 30));

    auto del = c.Delete("/api/highlights/" + id);
    REQUIRE(del);
    CHECK(del->status == 200);
    CHECK(json::parse(del->body)["version"] == before + 4);
    CHECK(c.Delete("/api/highlights/" + id)->status == 404);
}

TEST_CASE("model update jobs") {
    auto c = client();
    auto first = c.Post("/api/model/update", "", "application/json");
    REQUIRE(first);
    CHECK(first->status == 202);
    const auto job = json::parse(first->body)["job"];
    auto second = c.Post("/api/model/update", "", "application/json");
    REQUIRE(second);
    CHECK(second->status == 409);
    CHECK(error_code(second) == "Busy");
    // reads and writes keep working while the job runs
    CHECK(c.Get("/api/corpus/stats")->status == 200);
    post("/api/highlights", {{"doc_id", "r050"}, {"start", 0}, {"end", 10}, {"code", "during update"}}, 201);

    const auto path = "/api/jobs/" + std::to_string(job["job_id"].get<std::uint64_t>());
    double last = 0.0;
    json status;
    for (int i = 0; i < 6000; ++i) {
        status = body_of(c.Get(path))["job"];
        CHECK(status["progress"].get<double>() >= last);
        last = status["progress"].get<double>();
        if (status["state"] == "done" || status["state"] == "failed") break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    CHECK(status["state"] == "done");
    const auto sid = status["snapshot_id"].get<std::uint64_t>();
    const auto listed = body_of(c.Get("/api/snapshots"))["snapshots"];
    CHECK(listed.back()["snapshot_id"] == sid);
    CHECK(body_of(c.Get("/api/map"))["snapshot_id"] == sid);
    CHECK(c.Get("/api/jobs/999")->status == 404);
}
