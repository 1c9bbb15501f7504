#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "quarry/annotations.hpp"
#include "quarry/blockmodel.hpp"
#include "quarry/corpus.hpp"
#include "quarry/inference.hpp"

namespace quarry {

/// A fitted model over the expanded network: node i of the partition is
/// word i for i < words.size(), then documents, codes and categories in
/// node_order.
struct ModelSnapshot {
    std::uint64_t snapshot_id = 0;
    std::string created_at;
    std::uint64_t annotation_version = 0;
    HierarchicalPartition partition;
    std::vector<std::string> words;
    std::vector<std::string> docs;
    std::vector<std::string> codes;
    std::vector<std::string> categories;
    ObjectiveValue objective;
    double duration_s = 0.0;
    std::string config_digest;

    std::size_t height() const noexcept { return partition.height(); }
    std::uint32_t word_node(WordId w) const;
    /// Node of a document, or nullopt for documents outside the model.
    std::optional<std::uint32_t> doc_node(std::string_view doc_id) const;
    std::vector<BlockId> composed(std::size_t level) const { return partition.composed(level); }

    /// Rebuilds the document lookup; call after filling `docs`.
    void index();

private:
    std::unordered_map<std::string, std::uint32_t> doc_index_;
};

/// Throws Error{NotFound} for unknown words, Error{InvalidLevel} for bad levels.
BlockId word_cluster_of(const ModelSnapshot& snapshot, WordId word, std::size_t level);
BlockId doc_cluster_of(const ModelSnapshot& snapshot, std::string_view doc_id, std::size_t level);

/// Level-`level` word clusters in id order, each listing its member words.
std::map<BlockId, std::vector<WordId>> word_clusters(const ModelSnapshot& snapshot, std::size_t level);

nlohmann::json to_json(const ModelSnapshot& snapshot);
nlohmann::json to_json(const ObjectiveValue& objective);
ModelSnapshot snapshot_from_json(const nlohmann::json& j);
std::string canonical_json(const ModelSnapshot& snapshot);

/// Snapshot metadata for listings.
struct SnapshotInfo {
    std::uint64_t snapshot_id = 0;
    std::string created_at;
    std::uint64_t annotation_version = 0;
    double dl_total = 0.0;
    double duration_s = 0.0;
    std::size_t height = 0;
};
nlohmann::json to_json(const SnapshotInfo& info);

/// snapshots/<id>.json files; in-memory only when no directory is given.
class SnapshotStore {
public:
    explicit SnapshotStore(std::optional<std::filesystem::path> dir = std::nullopt);

    std::vector<SnapshotInfo> list() const;
    std::shared_ptr<const ModelSnapshot> get(std::uint64_t id) const;  // Error{NotFound}
    std::shared_ptr<const ModelSnapshot> latest() const;                // nullptr when empty
    std::uint64_t next_id() const;
    bool empty() const;
    /// Persists atomically, then publishes. Ids must strictly increase.
    void add(std::shared_ptr<const ModelSnapshot> snapshot);

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::mutex mutex_;
    std::map<std::uint64_t, std::shared_ptr<const ModelSnapshot>> snapshots_;
};

/// Network build, atom contraction, fit and atom expansion for one
/// annotation version.
ModelSnapshot fit_snapshot(const Corpus& corpus, const AnnotationSet& annotations, const InferenceConfig& config,
                           std::uint64_t snapshot_id, const ProgressFn& progress = {});

enum class JobState { Queued, Running, Done, Failed };
std::string_view to_string(JobState state) noexcept;

struct UpdateJob {
    std::uint64_t job_id = 0;
    JobState state = JobState::Queued;
    double progress = 0.0;
    std::optional<std::uint64_t> snapshot_id;
    std::uint64_t annotation_version = 0;
    std::string error;

    bool terminal() const noexcept { return state == JobState::Done || state == JobState::Failed; }
};
nlohmann::json to_json(const UpdateJob& job);

/// Runs at most one model update at a time on a background thread.
class UpdateManager {
public:
    using SnapshotHook = std::function<void(const ModelSnapshot&)>;

    UpdateManager(std::shared_ptr<const Corpus> corpus, const AnnotationStore& annotations, SnapshotStore& snapshots,
                  InferenceConfig config, SnapshotHook on_snapshot = {});
    ~UpdateManager();
    UpdateManager(const UpdateManager&) = delete;
    UpdateManager& operator=(const UpdateManager&) = delete;

    /// Throws Error{Busy} while another job has not finished.
    UpdateJob request_update();
    UpdateJob status(std::uint64_t job_id) const;  // Error{NotFound}
    /// Blocks until the job is terminal and returns its final state.
    UpdateJob wait(std::uint64_t job_id) const;
    const InferenceConfig& config() const noexcept { return config_; }

private:
    void run(std::uint64_t job_id, std::shared_ptr<const AnnotationSet> annotations, std::uint64_t snapshot_id);

    std::shared_ptr<const Corpus> corpus_;
    const AnnotationStore& annotations_;
    SnapshotStore& snapshots_;
    InferenceConfig config_;
    SnapshotHook on_snapshot_;

    mutable std::mutex mutex_;
    mutable std::condition_variable changed_;
    std::map<std::uint64_t, UpdateJob> jobs_;
    std::uint64_t next_job_ = 1;
    bool active_ = false;
    std::thread worker_;
};

}  // namespace quarry
