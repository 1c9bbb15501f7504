#include "quarry/service.hpp"

#include <random>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "quarry/layout.hpp"
#include "quarry/sampler.hpp"
#include "quarry/utf8.hpp"

namespace quarry {

using json = nlohmann::json;

int http_status(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::DuplicateId:
        case ErrorCode::OverlappingHighlight:
        case ErrorCode::KeywordConflict:
        case ErrorCode::Busy: return 409;
        case ErrorCode::IntegrityError:
        case ErrorCode::Io: return 500;
        default: return 400;
    }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, json{{"error", {{"code", to_string(code)}, {"message", message}}}}, http_status(code));
}

json parse_body(const httplib::Request& req) {
    try {
        auto j = json::parse(req.body.empty() ? "{}" : req.body);
        if (!j.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed JSON body: ") + e.what());
    }
}

std::uint64_t to_u64(const std::string& s, const char* name) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw Error(ErrorCode::InvalidArgument, std::string("parameter '") + name + "' must be a non-negative integer");
    }
}

std::optional<std::uint64_t> query_u64(const httplib::Request& req, const char* name) {
    if (!req.has_param(name)) return std::nullopt;
    return to_u64(req.get_param_value(name), name);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T>
T field(const json& j, const char* name) {
    if (!j.contains(name)) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + name + "'");
    try {
        return j.at(name).get<T>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::InvalidArgument, std::string("field '") + name + "' has the wrong type");
    }
}

/// Keywords given as stems (strings) or word ids (numbers).
std::set<WordId> keyword_ids(const Corpus& corpus, const json& list) {
    if (!list.is_array()) throw Error(ErrorCode::InvalidArgument, "'keywords' must be an array");
    std::set<WordId> out;
    for (const auto& k : list) {
        if (k.is_number_unsigned()) {
            out.insert(k.get<WordId>());
        } else if (k.is_string()) {
            const auto ids = corpus.stems().words_for(k.get<std::string>());
            if (ids.empty()) {
                throw Error(ErrorCode::InvalidArgument, "unknown keyword stem '" + k.get<std::string>() + "'");
            }
            out.insert(ids.begin(), ids.end());
        } else {
            throw Error(ErrorCode::InvalidArgument, "keywords must be stems or word ids");
        }
    }
    return out;
}

json highlight_json(const Highlight& h, const Corpus& corpus) {
    auto j = to_json(h);
    std::set<std::string> stems;
    for (WordId w : h.keywords) {
        if (w < corpus.vocabulary().size()) stems.insert(corpus.stems().stem_of(w));
    }
    j["keyword_stems"] = std::vector<std::string>(stems.begin(), stems.end());
    return j;
}

}  // namespace

struct Service::Impl {
    explicit Impl(Project& p) : project(p) { routes(); }

    Project& project;
    httplib::Server server;

    std::shared_ptr<const ModelSnapshot> snapshot_for(const httplib::Request& req) {
        if (auto id = query_u64(req, "snapshot")) return project.snapshots().get(*id);
        auto latest = project.snapshots().latest();
        if (!latest) throw Error(ErrorCode::NotFound, "no model snapshot yet");
        return latest;
    }

    template <typename Fn>
    httplib::Server::Handler wrap(Fn fn) {
        return [fn](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                send_error(res, e.code(), e.what());
            } catch (const std::exception& e) {
                send_error(res, ErrorCode::IntegrityError, e.what());
            }
        };
    }

    void routes() {
        auto& s = server;
        const Corpus& corpus = *project.corpus();

        s.Get("/api/corpus/stats", wrap([&](const auto&, auto& res) {
                  const auto& st = corpus.stats();
                  send_json(res, {{"n_documents", st.n_documents},
                                  {"n_words", st.n_words},
                                  {"n_text_edges", st.n_text_edges},
                                  {"mean_doc_length", st.mean_doc_length}});
              }));

        s.Get("/api/map", wrap([&](const auto& req, auto& res) {
                  const auto snapshot = snapshot_for(req);
                  const auto layout = project.layout(snapshot->snapshot_id);
                  std::optional<std::size_t> level;
                  if (auto l = query_u64(req, "level")) {
                      if (*l >= layout->levels()) {
                          throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(*l) + " out of range");
                      }
                      level = *l;
                  }
                  PinFilter filter = PinFilter::all();
                  if (req.has_param("codes")) {
                      const auto v = req.get_param_value("codes");
                      filter = v.empty() ? PinFilter::none() : PinFilter::only({});
                      if (filter.mode == PinFilter::Mode::Codes) {
                          for (auto& c : split_list(v)) filter.codes.insert(c);
                      }
                  }
                  const auto view = project.annotations().view();
                  auto payload = map_payload(*layout, level, pin_overlay(*layout, *view, filter));
                  payload["annotation_version"] = view->version;
                  send_json(res, payload);
              }));

        s.Get(R"(/api/documents/([^/]+))", wrap([&](const auto& req, auto& res) {
                  const std::string id = req.matches[1];
                  const Document* doc = corpus.find(id);
                  if (doc == nullptr) throw Error(ErrorCode::NotFound, "unknown document '" + id + "'");
                  json j{{"id", doc->id},
                         {"title", doc->title},
                         {"body_length", doc->body_length},
                         {"in_model", doc->in_model()}};
                  if (auto n = query_u64(req, "preview")) {
                      const auto end = std::min<std::size_t>(*n, doc->body_length);
                      j["body"] = utf8::slice(doc->body, 0, end);
                      j["truncated"] = end < doc->body_length;
                  } else {
                      j["body"] = doc->body;
                      j["truncated"] = false;
                      json hl = json::array();
                      for (const auto* h : project.annotations().view()->highlights_for_document(id)) {
                          hl.push_back(highlight_json(*h, corpus));
                      }
                      j["highlights"] = hl;
                  }
                  send_json(res, j);
              }));

        s.Post("/api/sample/random", wrap([&](const auto& req, auto& res) {
                   const auto body = parse_body(req);
                   const auto n = field<std::size_t>(body, "n");
                   std::uint64_t seed;
                   if (body.contains("seed")) {
                       seed = field<std::uint64_t>(body, "seed");
                   } else {
                       seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) | std::random_device{}();
                   }
                   std::set<std::string> exclude;
                   if (body.contains("exclude")) {
                       for (auto& id : field<std::vector<std::string>>(body, "exclude")) exclude.insert(id);
                   }
                   send_json(res, {{"doc_ids", random_sample(corpus, n, seed, exclude)}, {"seed", seed}});
               }));

        s.Post("/api/sample/cluster", wrap([&](const auto& req, auto& res) {
                   const auto body = parse_body(req);
                   const auto snapshot = project.snapshots().get(field<std::uint64_t>(body, "snapshot"));
                   const auto k = body.contains("k") ? field<std::size_t>(body, "k") : kClusterSampleSize;
                   const auto ranked = sample_by_word_cluster(*snapshot, corpus, field<BlockId>(body, "cluster_id"),
                                                              field<std::size_t>(body, "level"), k);
                   json docs = json::array();
                   for (const auto& r : ranked) {
                       auto j = to_json(r);
                       j["title"] = corpus.find(r.doc_id)->title;
                       docs.push_back(std::move(j));
                   }
                   send_json(res, {{"snapshot_id", snapshot->snapshot_id}, {"documents", docs}});
               }));

        s.Get("/api/words/tree", wrap([&](const auto& req, auto& res) {
                  const auto snapshot = snapshot_for(req);
                  const auto codes = split_list(req.has_param("codes") ? req.get_param_value("codes") : "");
                  const auto view = project.annotations().view();
                  json roots = json::array();
                  for (const auto& node : pruned_word_tree(*snapshot, corpus, *view, codes)) roots.push_back(to_json(node));
                  send_json(res, {{"snapshot_id", snapshot->snapshot_id}, {"roots", roots}});
              }));

        s.Get("/api/highlights", wrap([&](const auto& req, auto& res) {
                  const auto view = project.annotations().view();
                  json list = json::array();
                  const bool by_doc = req.has_param("doc");
                  const auto doc = by_doc ? req.get_param_value("doc") : std::string();
                  for (const auto& h : view->highlights) {
                      if (!by_doc || h.doc_id == doc) list.push_back(highlight_json(h, corpus));
                  }
                  send_json(res, {{"version", view->version}, {"highlights", list}});
              }));

        s.Post("/api/highlights", wrap([&](const auto& req, auto& res) {
                   const auto body = parse_body(req);
                   HighlightInput in;
                   in.doc_id = field<std::string>(body, "doc_id");
                   in.span = Span{field<std::size_t>(body, "start"), field<std::size_t>(body, "end")};
                   in.code_label = field<std::string>(body, "code");
                   if (body.contains("keywords")) in.keywords = keyword_ids(corpus, body.at("keywords"));
                   if (body.contains("memo")) in.memo = field<std::string>(body, "memo");
                   auto& store = project.annotations();
                   const auto h = store.create_highlight(in);
                   send_json(res, {{"highlight", highlight_json(h, corpus)}, {"version", store.version()}}, 201);
               }));

        s.Patch(R"(/api/highlights/([^/]+))", wrap([&](const auto& req, auto& res) {
                    const auto body = parse_body(req);
                    HighlightPatch patch;
                    if (body.contains("start") || body.contains("end")) {
                        patch.span = Span{field<std::size_t>(body, "start"), field<std::size_t>(body, "end")};
                    }
                    if (body.contains("code")) patch.code_label = field<std::string>(body, "code");
                    if (body.contains("keywords")) patch.keywords = keyword_ids(corpus, body.at("keywords"));
                    if (body.contains("memo")) patch.memo = field<std::string>(body, "memo");
                    auto& store = project.annotations();
                    const auto h = store.update_highlight(std::string(req.matches[1]), patch);
                    send_json(res, {{"highlight", highlight_json(h, corpus)}, {"version", store.version()}});
                }));

        s.Delete(R"(/api/highlights/([^/]+))", wrap([&](const auto& req, auto& res) {
                     auto& store = project.annotations();
                     const std::string id = req.matches[1];
                     store.delete_highlight(id);
                     send_json(res, {{"deleted", id}, {"version", store.version()}});
                 }));

        s.Get("/api/codes", wrap([&](const auto&, auto& res) {
                  const auto view = project.annotations().view();
                  std::vector<std::string> ids;
                  for (const auto& c : view->codes) ids.push_back(c.id);
                  json codes = json::array();
                  for (const auto& summary : code_summary(*view, corpus, ids)) codes.push_back(to_json(summary));
                  json categories = json::array();
                  for (const auto& c : view->categories) {
                      auto j = to_json(c);
                      j["color"] = category_color(c.color_index);
                      categories.push_back(std::move(j));
                  }
                  send_json(res, {{"version", view->version}, {"codes", codes}, {"categories", categories}});
              }));

        s.Post(R"(/api/codes/([^/]+)/category)", wrap([&](const auto& req, auto& res) {
                   const auto body = parse_body(req);
                   auto& store = project.annotations();
                   const auto cat = store.assign_category(std::string(req.matches[1]), field<std::string>(body, "label"));
                   auto j = to_json(cat);
                   j["color"] = category_color(cat.color_index);
                   send_json(res, {{"code_id", std::string(req.matches[1])}, {"category", j}, {"version", store.version()}});
               }));

        s.Post("/api/model/update", wrap([&](const auto&, auto& res) {
                   send_json(res, {{"job", to_json(project.updates().request_update())}}, 202);
               }));

        s.Get(R"(/api/jobs/(\d+))", wrap([&](const auto& req, auto& res) {
                  send_json(res, {{"job", to_json(project.updates().status(to_u64(req.matches[1], "id")))}});
              }));

        s.Get("/api/snapshots", wrap([&](const auto&, auto& res) {
                  json list = json::array();
                  for (const auto& info : project.snapshots().list()) list.push_back(to_json(info));
                  send_json(res, {{"snapshots", list}});
              }));

        s.Get("/api/export.csv", wrap([&](const auto&, auto& res) {
                  res.set_content(export_csv(*project.annotations().view(), corpus), "text/csv; charset=utf-8");
              }));

        s.Get("/api/keywords/candidates", wrap([&](const auto& req, auto& res) {
                  if (!req.has_param("doc")) throw Error(ErrorCode::InvalidArgument, "missing parameter 'doc'");
                  const auto start = query_u64(req, "start"), end = query_u64(req, "end");
                  if (!start || !end) throw Error(ErrorCode::InvalidArgument, "missing parameter 'start' or 'end'");
                  json list = json::array();
                  for (const auto& c : corpus.candidates_for(req.get_param_value("doc"), Span{*start, *end})) {
                      list.push_back({{"stem", c.stem}, {"surface_forms", c.surface_forms}, {"word_ids", c.word_ids}});
                  }
                  send_json(res, {{"candidates", list}});
              }));

        s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
            if (res.body.empty()) {
                send_error(res, res.status == 404 ? ErrorCode::NotFound : ErrorCode::InvalidArgument,
                           res.status == 404 ? "no such endpoint" : "bad request");
            }
        });
    }
};

Service::Service(Project& project) : impl_(std::make_unique<Impl>(project)) {}
Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
void Service::run() { impl_->server.listen_after_bind(); }
void Service::stop() {
    if (impl_->server.is_running()) impl_->server.stop();
}
void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace quarry
