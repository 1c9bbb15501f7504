#include "quarry/project.hpp"

#include <fstream>
#include <sstream>

#include "quarry/error.hpp"

namespace quarry {

namespace fs = std::filesystem;

namespace {

constexpr const char* kConfigFile = "project.json";
constexpr const char* kCorpusFile = "corpus.jsonl";
constexpr const char* kStopwordFile = "stopwords.txt";
constexpr const char* kAnnotationFile = "annotations.json";
constexpr const char* kSnapshotDir = "snapshots";

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IntegrityError, "cannot parse " + path.string() + ": " + e.what());
    }
}

void require_project(const fs::path& dir) {
    if (!fs::exists(dir / kConfigFile)) {
        throw Error(ErrorCode::NotFound, "no project at " + dir.string() + " (run `quarry init` first)");
    }
}

}  // namespace

nlohmann::json to_json(const ProjectConfig& config) {
    nlohmann::json tokenizer{{"min_length", config.tokenizer.min_length}, {"stemming", config.tokenizer.stemming}};
    tokenizer["stopwords"] = config.tokenizer.stopword_file ? nlohmann::json(kStopwordFile) : nlohmann::json(nullptr);
    return {{"tokenizer", tokenizer}, {"inference", to_json(config.inference)}};
}

ProjectConfig project_config_from_json(const nlohmann::json& j, const fs::path& dir) {
    ProjectConfig c;
    try {
        if (j.contains("tokenizer")) {
            const auto& t = j.at("tokenizer");
            c.tokenizer.min_length = t.value("min_length", c.tokenizer.min_length);
            c.tokenizer.stemming = t.value("stemming", c.tokenizer.stemming);
            if (t.contains("stopwords") && t.at("stopwords").is_string()) {
                c.tokenizer.stopword_file = dir / t.at("stopwords").get<std::string>();
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad project config: ") + e.what());
    }
    if (j.contains("inference")) c.inference = inference_config_from_json(j.at("inference"));
    return c;
}

void Project::init(const fs::path& dir) {
    if (fs::exists(dir / kConfigFile)) {
        throw Error(ErrorCode::InvalidArgument, "a project already exists at " + dir.string());
    }
    fs::create_directories(dir / kSnapshotDir);
    write_atomic(dir / kConfigFile, to_json(ProjectConfig{}).dump(2) + "\n");
}

CorpusStats Project::ingest(const fs::path& dir, const IngestOptions& options) {
    require_project(dir);
    auto config = project_config_from_json(read_json(dir / kConfigFile), dir);
    if (options.min_length) config.tokenizer.min_length = *options.min_length;
    if (options.stemming) config.tokenizer.stemming = *options.stemming;
    if (options.stopwords) config.tokenizer.stopword_file = *options.stopwords;

    // Validate before touching the project.
    const Corpus corpus = ingest_corpus_file(options.input, config.tokenizer);

    std::ifstream in(options.input, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    write_atomic(dir / kCorpusFile, buf.str());
    if (options.stopwords) {
        std::ifstream sw(*options.stopwords, std::ios::binary);
        std::stringstream sbuf;
        sbuf << sw.rdbuf();
        write_atomic(dir / kStopwordFile, sbuf.str());
        config.tokenizer.stopword_file = dir / kStopwordFile;
    }
    write_atomic(dir / kConfigFile, to_json(config).dump(2) + "\n");
    return corpus.stats();
}

Project::Project(fs::path dir) : dir_(std::move(dir)) {
    require_project(dir_);
    config_ = project_config_from_json(read_json(dir_ / kConfigFile), dir_);
    if (!fs::exists(dir_ / kCorpusFile)) {
        throw Error(ErrorCode::NotFound, "project at " + dir_.string() + " has no corpus (run `quarry ingest`)");
    }
    corpus_ = std::make_shared<const Corpus>(ingest_corpus_file(dir_ / kCorpusFile, config_.tokenizer));
    annotations_ = std::make_unique<AnnotationStore>(corpus_, dir_ / kAnnotationFile);
    snapshots_ = std::make_unique<SnapshotStore>(dir_ / kSnapshotDir);
    updates_ = std::make_unique<UpdateManager>(corpus_, *annotations_, *snapshots_, config_.inference,
                                               [this](const ModelSnapshot& s) { remember_layout(s); });
}

Project::~Project() { updates_.reset(); }

std::shared_ptr<const ModelSnapshot> Project::fit(const InferenceConfig& config, const ProgressFn& progress) {
    const bool first = snapshots_->empty();
    const auto view = annotations_->view();
    const AnnotationSet unconstrained = AnnotationSet::empty();
    const AnnotationSet& annotations = first ? unconstrained : *view;
    auto snapshot = std::make_shared<const ModelSnapshot>(
        fit_snapshot(*corpus_, annotations, config, snapshots_->next_id(), progress));
    snapshots_->add(snapshot);
    remember_layout(*snapshot);
    return snapshot;
}

std::shared_ptr<const ModelSnapshot> Project::ensure_initial_snapshot() {
    if (auto latest = snapshots_->latest()) return latest;
    return fit();
}

void Project::remember_layout(const ModelSnapshot& snapshot) {
    auto layout = std::make_shared<const GosperLayout>(layout_documents(snapshot));
    std::lock_guard lock(layout_mutex_);
    layouts_[snapshot.snapshot_id] = std::move(layout);
}

std::shared_ptr<const GosperLayout> Project::layout(std::uint64_t snapshot_id) {
    {
        std::lock_guard lock(layout_mutex_);
        if (auto it = layouts_.find(snapshot_id); it != layouts_.end()) return it->second;
    }
    const auto snapshot = snapshots_->get(snapshot_id);
    auto layout = std::make_shared<const GosperLayout>(layout_documents(*snapshot));
    std::lock_guard lock(layout_mutex_);
    return layouts_.emplace(snapshot_id, std::move(layout)).first->second;
}

}  // namespace quarry
