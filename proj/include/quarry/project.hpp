#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>

#include <json.hpp>

#include "quarry/annotations.hpp"
#include "quarry/corpus.hpp"
#include "quarry/inference.hpp"
#include "quarry/layout.hpp"
#include "quarry/snapshot.hpp"

namespace quarry {

struct ProjectConfig {
    TokenizerConfig tokenizer;
    InferenceConfig inference;
};

nlohmann::json to_json(const ProjectConfig& config);
ProjectConfig project_config_from_json(const nlohmann::json& j, const std::filesystem::path& dir);

struct IngestOptions {
    std::filesystem::path input;
    std::optional<std::filesystem::path> stopwords;
    std::optional<std::size_t> min_length;
    std::optional<bool> stemming;
};

/// A project directory:
///   project.json       tokenizer and inference settings
///   corpus.jsonl       the ingested corpus
///   stopwords.txt      optional custom stop-word list
///   annotations.json   coding state
///   snapshots/<id>.json
class Project {
public:
    /// Creates the directory and a default project.json. Throws
    /// Error{InvalidArgument} if a project already exists there.
    static void init(const std::filesystem::path& dir);
    /// Validates and copies the corpus (and stop-word list) into the project.
    static CorpusStats ingest(const std::filesystem::path& dir, const IngestOptions& options);

    explicit Project(std::filesystem::path dir);
    ~Project();

    const std::filesystem::path& dir() const noexcept { return dir_; }
    const ProjectConfig& config() const noexcept { return config_; }
    std::shared_ptr<const Corpus> corpus() const noexcept { return corpus_; }
    AnnotationStore& annotations() noexcept { return *annotations_; }
    const AnnotationStore& annotations() const noexcept { return *annotations_; }
    SnapshotStore& snapshots() noexcept { return *snapshots_; }
    UpdateManager& updates() noexcept { return *updates_; }

    /// Fits synchronously and stores the result. The first fit of a project
    /// is unconstrained (snapshot 0); later fits use the current annotations.
    std::shared_ptr<const ModelSnapshot> fit(const InferenceConfig& config, const ProgressFn& progress = {});
    std::shared_ptr<const ModelSnapshot> fit() { return fit(config_.inference); }
    /// Runs the initial fit if the project has no snapshot yet.
    std::shared_ptr<const ModelSnapshot> ensure_initial_snapshot();

    /// Cached layout of a snapshot. Throws Error{NotFound}.
    std::shared_ptr<const GosperLayout> layout(std::uint64_t snapshot_id);

private:
    void remember_layout(const ModelSnapshot& snapshot);

    std::filesystem::path dir_;
    ProjectConfig config_;
    std::shared_ptr<const Corpus> corpus_;
    std::unique_ptr<AnnotationStore> annotations_;
    std::unique_ptr<SnapshotStore> snapshots_;
    std::mutex layout_mutex_;
    std::map<std::uint64_t, std::shared_ptr<const GosperLayout>> layouts_;
    std::unique_ptr<UpdateManager> updates_;
};

}  // namespace quarry
