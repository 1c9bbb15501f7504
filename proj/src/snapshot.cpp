#include "quarry/snapshot.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "quarry/error.hpp"
#include "quarry/multinet.hpp"

namespace quarry {

namespace {

const char* type_key(std::size_t t) {
    static constexpr const char* kKeys[] = {"words", "docs", "codes", "categories"};
    return kKeys[t];
}

}  // namespace

// --- ModelSnapshot --------------------------------------------------------------

std::uint32_t ModelSnapshot::word_node(WordId w) const {
    if (w >= words.size()) throw Error(ErrorCode::NotFound, "word #" + std::to_string(w) + " is not in the snapshot");
    return w;
}

std::optional<std::uint32_t> ModelSnapshot::doc_node(std::string_view doc_id) const {
    auto it = doc_index_.find(std::string(doc_id));
    if (it == doc_index_.end()) return std::nullopt;
    return it->second;
}

void ModelSnapshot::index() {
    doc_index_.clear();
    for (std::size_t i = 0; i < docs.size(); ++i) {
        doc_index_.emplace(docs[i], static_cast<std::uint32_t>(words.size() + i));
    }
}

BlockId word_cluster_of(const ModelSnapshot& snapshot, WordId word, std::size_t level) {
    return snapshot.partition.cluster_of(snapshot.word_node(word), level);
}

BlockId doc_cluster_of(const ModelSnapshot& snapshot, std::string_view doc_id, std::size_t level) {
    const auto node = snapshot.doc_node(doc_id);
    if (!node) throw Error(ErrorCode::NotFound, "document '" + std::string(doc_id) + "' is not in the snapshot");
    return snapshot.partition.cluster_of(*node, level);
}

std::map<BlockId, std::vector<WordId>> word_clusters(const ModelSnapshot& snapshot, std::size_t level) {
    const auto c = snapshot.partition.composed(level);
    std::map<BlockId, std::vector<WordId>> out;
    for (WordId w = 0; w < snapshot.words.size(); ++w) out[c[w]].push_back(w);
    return out;
}

// --- JSON -----------------------------------------------------------------------

nlohmann::json to_json(const ObjectiveValue& objective) {
    nlohmann::json breakdown = nlohmann::json::array();
    for (std::size_t l = 0; l < objective.levels.size(); ++l) {
        const auto& level = objective.levels[l];
        nlohmann::json blocks;
        for (std::size_t t = 0; t < kNodeTypes; ++t) blocks[type_key(t)] = level.blocks[t];
        nlohmann::json entry{{"level", l}, {"blocks", blocks}};
        for (std::size_t a = 0; a < kLayers; ++a) {
            entry[std::string(to_string(static_cast<Layer>(a)))] = {{"likelihood", level.layers[a].likelihood},
                                                                     {"penalty", level.layers[a].penalty}};
        }
        breakdown.push_back(std::move(entry));
    }
    return {{"total", objective.total}, {"breakdown", breakdown}};
}

namespace {

ObjectiveValue objective_from_json(const nlohmann::json& j) {
    ObjectiveValue o;
    o.total = j.at("total").get<double>();
    for (const auto& entry : j.at("breakdown")) {
        LevelTerms level;
        for (std::size_t t = 0; t < kNodeTypes; ++t) level.blocks[t] = entry.at("blocks").at(type_key(t)).get<std::size_t>();
        for (std::size_t a = 0; a < kLayers; ++a) {
            const auto& layer = entry.at(std::string(to_string(static_cast<Layer>(a))));
            level.layers[a].likelihood = layer.at("likelihood").get<double>();
            level.layers[a].penalty = layer.at("penalty").get<double>();
        }
        o.levels.push_back(level);
    }
    return o;
}

}  // namespace

nlohmann::json to_json(const ModelSnapshot& s) {
    nlohmann::json levels = nlohmann::json::array();
    for (std::size_t l = 0; l < s.partition.height(); ++l) levels.push_back(s.partition.composed(l));
    return {{"snapshot_id", s.snapshot_id},
            {"created_at", s.created_at},
            {"annotation_version", s.annotation_version},
            {"objective", to_json(s.objective)},
            {"levels", levels},
            {"node_order", {{"words", s.words}, {"docs", s.docs}, {"codes", s.codes}, {"categories", s.categories}}},
            {"duration_s", s.duration_s},
            {"config_digest", s.config_digest}};
}

ModelSnapshot snapshot_from_json(const nlohmann::json& j) {
    ModelSnapshot s;
    try {
        s.snapshot_id = j.at("snapshot_id").get<std::uint64_t>();
        s.created_at = j.at("created_at").get<std::string>();
        s.annotation_version = j.at("annotation_version").get<std::uint64_t>();
        s.objective = objective_from_json(j.at("objective"));
        const auto& order = j.at("node_order");
        s.words = order.at("words").get<std::vector<std::string>>();
        s.docs = order.at("docs").get<std::vector<std::string>>();
        s.codes = order.at("codes").get<std::vector<std::string>>();
        s.categories = order.at("categories").get<std::vector<std::string>>();
        s.duration_s = j.at("duration_s").get<double>();
        s.config_digest = j.at("config_digest").get<std::string>();
        std::vector<NodeType> types(s.words.size(), NodeType::Word);
        types.insert(types.end(), s.docs.size(), NodeType::Document);
        types.insert(types.end(), s.codes.size(), NodeType::Code);
        types.insert(types.end(), s.categories.size(), NodeType::Category);
        s.partition = from_composed(std::move(types), j.at("levels").get<std::vector<std::vector<BlockId>>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IntegrityError, std::string("malformed snapshot: ") + e.what());
    } catch (const Error& e) {
        throw Error(ErrorCode::IntegrityError, std::string("malformed snapshot: ") + e.what());
    }
    s.index();
    return s;
}

std::string canonical_json(const ModelSnapshot& snapshot) { return to_json(snapshot).dump(2) + "\n"; }

nlohmann::json to_json(const SnapshotInfo& info) {
    return {{"snapshot_id", info.snapshot_id},   {"created_at", info.created_at},
            {"annotation_version", info.annotation_version}, {"dl_total", info.dl_total},
            {"duration_s", info.duration_s},     {"height", info.height}};
}

// --- SnapshotStore ----------------------------------------------------------------

SnapshotStore::SnapshotStore(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
    if (!dir_) return;
    std::filesystem::create_directories(*dir_);
    for (const auto& entry : std::filesystem::directory_iterator(*dir_)) {
        if (entry.path().extension() != ".json") continue;
        std::ifstream in(entry.path());
        std::stringstream buf;
        buf << in.rdbuf();
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(buf.str());
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::IntegrityError, "unreadable snapshot " + entry.path().string() + ": " + e.what());
        }
        auto snap = std::make_shared<ModelSnapshot>(snapshot_from_json(j));
        const auto id = snap->snapshot_id;
        snapshots_.emplace(id, std::move(snap));
    }
}

std::vector<SnapshotInfo> SnapshotStore::list() const {
    std::lock_guard lock(mutex_);
    std::vector<SnapshotInfo> out;
    for (const auto& [id, s] : snapshots_) {
        out.push_back({id, s->created_at, s->annotation_version, s->objective.total, s->duration_s, s->height()});
    }
    return out;
}

std::shared_ptr<const ModelSnapshot> SnapshotStore::get(std::uint64_t id) const {
    std::lock_guard lock(mutex_);
    auto it = snapshots_.find(id);
    if (it == snapshots_.end()) throw Error(ErrorCode::NotFound, "unknown snapshot " + std::to_string(id));
    return it->second;
}

std::shared_ptr<const ModelSnapshot> SnapshotStore::latest() const {
    std::lock_guard lock(mutex_);
    return snapshots_.empty() ? nullptr : snapshots_.rbegin()->second;
}

std::uint64_t SnapshotStore::next_id() const {
    std::lock_guard lock(mutex_);
    return snapshots_.empty() ? 0 : snapshots_.rbegin()->first + 1;
}

bool SnapshotStore::empty() const {
    std::lock_guard lock(mutex_);
    return snapshots_.empty();
}

void SnapshotStore::add(std::shared_ptr<const ModelSnapshot> snapshot) {
    std::lock_guard lock(mutex_);
    if (!snapshots_.empty() && snapshot->snapshot_id <= snapshots_.rbegin()->first) {
        throw Error(ErrorCode::InvalidArgument, "snapshot ids must increase");
    }
    if (dir_) write_atomic(*dir_ / (std::to_string(snapshot->snapshot_id) + ".json"), canonical_json(*snapshot));
    snapshots_.emplace(snapshot->snapshot_id, std::move(snapshot));
}

// --- Fitting pipeline ---------------------------------------------------------------

ModelSnapshot fit_snapshot(const Corpus& corpus, const AnnotationSet& annotations, const InferenceConfig& config,
                           std::uint64_t snapshot_id, const ProgressFn& progress) {
    const auto start = std::chrono::steady_clock::now();
    auto network = std::make_shared<const MultilayerNetwork>(build_network(corpus, annotations, config.network()));
    const auto contracted = contract_atoms(network);
    auto fit = fit_hierarchy(contracted, config, progress);

    std::vector<std::vector<BlockId>> expanded;
    const auto n = network->graph.node_count();
    for (std::size_t l = 0; l < fit.partition.height(); ++l) {
        const auto c = fit.partition.composed(l);
        std::vector<BlockId> level(n);
        for (std::uint32_t i = 0; i < n; ++i) level[i] = c[contracted.contracted_node(i)];
        expanded.push_back(std::move(level));
    }

    ModelSnapshot s;
    s.snapshot_id = snapshot_id;
    s.created_at = iso8601_utc(std::chrono::system_clock::now());
    s.annotation_version = annotations.version;
    s.partition = from_composed(network->graph.node_types, expanded);
    s.words = network->word_terms;
    s.docs = network->doc_ids;
    s.codes = network->code_ids;
    s.categories = network->category_ids;
    s.objective = std::move(fit.objective);
    s.config_digest = config_digest(config);
    s.duration_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    s.index();
    return s;
}

// --- Jobs ---------------------------------------------------------------------------

std::string_view to_string(JobState state) noexcept {
    switch (state) {
        case JobState::Queued: return "queued";
        case JobState::Running: return "running";
        case JobState::Done: return "done";
        case JobState::Failed: return "failed";
    }
    return "?";
}

nlohmann::json to_json(const UpdateJob& job) {
    nlohmann::json j{{"job_id", job.job_id},
                     {"state", to_string(job.state)},
                     {"progress", job.progress},
                     {"annotation_version", job.annotation_version}};
    j["snapshot_id"] = job.snapshot_id ? nlohmann::json(*job.snapshot_id) : nlohmann::json(nullptr);
    if (!job.error.empty()) j["error"] = job.error;
    return j;
}

UpdateManager::UpdateManager(std::shared_ptr<const Corpus> corpus, const AnnotationStore& annotations,
                             SnapshotStore& snapshots, InferenceConfig config, SnapshotHook on_snapshot)
    : corpus_(std::move(corpus)),
      annotations_(annotations),
      snapshots_(snapshots),
      config_(std::move(config)),
      on_snapshot_(std::move(on_snapshot)) {
    config_.validate();
}

UpdateManager::~UpdateManager() {
    if (worker_.joinable()) worker_.join();
}

UpdateJob UpdateManager::request_update() {
    std::unique_lock lock(mutex_);
    if (active_) {
        std::uint64_t running = 0;
        for (const auto& [id, job] : jobs_) {
            if (!job.terminal()) running = id;
        }
        throw Error(ErrorCode::Busy, "an update is already in progress (job " + std::to_string(running) + ")");
    }
    if (worker_.joinable()) worker_.join();
    active_ = true;
    UpdateJob job;
    job.job_id = next_job_++;
    auto view = annotations_.view();
    job.annotation_version = view->version;
    jobs_[job.job_id] = job;
    const auto snapshot_id = snapshots_.next_id();
    worker_ = std::thread(&UpdateManager::run, this, job.job_id, std::move(view), snapshot_id);
    return job;
}

void UpdateManager::run(std::uint64_t job_id, std::shared_ptr<const AnnotationSet> annotations,
                        std::uint64_t snapshot_id) {
    {
        std::lock_guard lock(mutex_);
        jobs_[job_id].state = JobState::Running;
    }
    changed_.notify_all();
    try {
        auto snapshot = std::make_shared<ModelSnapshot>(
            fit_snapshot(*corpus_, *annotations, config_, snapshot_id, [&](double p) {
                std::lock_guard lock(mutex_);
                auto& job = jobs_[job_id];
                job.progress = std::max(job.progress, std::min(p, 0.99));
            }));
        snapshots_.add(snapshot);
        if (on_snapshot_) on_snapshot_(*snapshot);
        std::lock_guard lock(mutex_);
        auto& job = jobs_[job_id];
        job.state = JobState::Done;
        job.progress = 1.0;
        job.snapshot_id = snapshot_id;
        active_ = false;
    } catch (const std::exception& e) {
        std::lock_guard lock(mutex_);
        auto& job = jobs_[job_id];
        job.state = JobState::Failed;
        job.error = e.what();
        active_ = false;
    }
    changed_.notify_all();
}

UpdateJob UpdateManager::status(std::uint64_t job_id) const {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "unknown job " + std::to_string(job_id));
    return it->second;
}

UpdateJob UpdateManager::wait(std::uint64_t job_id) const {
    std::unique_lock lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw Error(ErrorCode::NotFound, "unknown job " + std::to_string(job_id));
    changed_.wait(lock, [&] { return jobs_.at(job_id).terminal(); });
    return jobs_.at(job_id);
}

}  // namespace quarry
