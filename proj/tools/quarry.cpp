#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "quarry/error.hpp"
#include "quarry/project.hpp"
#include "quarry/service.hpp"

namespace fs = std::filesystem;

namespace {

void print_stats(const quarry::CorpusStats& s) {
    std::printf("n_documents=%zu n_words=%zu n_text_edges=%llu mean_doc_length=%.17g\n", s.n_documents, s.n_words,
                static_cast<unsigned long long>(s.n_text_edges), s.mean_doc_length);
}

void print_snapshot(const quarry::ModelSnapshot& s) {
    std::printf("snapshot_id=%llu\n", static_cast<unsigned long long>(s.snapshot_id));
    std::printf("dl_total=%.17g\n", s.objective.total);
    for (std::size_t l = 0; l < s.height(); ++l) {
        const auto c = s.partition.type_block_counts(l);
        std::printf("level %zu: words=%zu docs=%zu codes=%zu categories=%zu\n", l, c[0], c[1], c[2], c[3]);
    }
    std::printf("duration_s=%.3f\n", s.duration_s);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"quarry: machine-in-the-loop qualitative coding"};
    app.require_subcommand(1);
    std::string project_dir = ".";
    app.add_option("-C,--project", project_dir, "Project directory");

    auto* init = app.add_subcommand("init", "Create a project directory");
    std::string init_dir;
    init->add_option("dir", init_dir, "Directory to create")->required();

    auto* ingest = app.add_subcommand("ingest", "Validate and load a JSON-lines corpus");
    std::string input, stopwords;
    std::size_t min_len = 0;
    bool no_stem = false;
    ingest->add_option("--input", input, "Corpus file (JSON lines)")->required()->check(CLI::ExistingFile);
    auto* sw_opt = ingest->add_option("--stopwords", stopwords, "Stop-word list")->check(CLI::ExistingFile);
    auto* min_opt = ingest->add_option("--min-len", min_len, "Minimum token length");
    ingest->add_flag("--no-stem", no_stem, "Disable Porter stemming");

    auto* fit = app.add_subcommand("fit", "Fit a model snapshot");
    quarry::InferenceConfig fit_config;
    std::size_t levels = 0;
    auto* seed_opt = fit->add_option("--seed", fit_config.seed, "Random seed");
    auto* restarts_opt = fit->add_option("--restarts", fit_config.restarts, "Independent restarts");
    auto* sweeps_opt = fit->add_option("--sweeps", fit_config.sweeps, "Metropolis sweeps per level");
    auto* levels_opt = fit->add_option("--levels", levels, "Maximum hierarchy depth");
    auto* omega_opt = fit->add_option("--omega", fit_config.omega, "Keyword edge multiplicity");

    auto* serve = app.add_subcommand("serve", "Serve the JSON API");
    int port = 8080;
    std::string host = "127.0.0.1";
    serve->add_option("--port", port, "TCP port")->check(CLI::Range(0, 65535));
    serve->add_option("--host", host, "Bind address");

    auto* exp = app.add_subcommand("export", "Export highlights");
    std::string format = "csv", out;
    exp->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv"}));
    exp->add_option("--out", out, "Output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*init) {
            quarry::Project::init(init_dir);
            std::printf("initialized %s\n", init_dir.c_str());
        } else if (*ingest) {
            quarry::IngestOptions options;
            options.input = input;
            if (*sw_opt) options.stopwords = fs::path(stopwords);
            if (*min_opt) options.min_length = min_len;
            if (no_stem) options.stemming = false;
            print_stats(quarry::Project::ingest(project_dir, options));
        } else if (*fit) {
            quarry::Project project(project_dir);
            auto config = project.config().inference;
            if (*seed_opt) config.seed = fit_config.seed;
            if (*restarts_opt) config.restarts = fit_config.restarts;
            if (*sweeps_opt) config.sweeps = fit_config.sweeps;
            if (*omega_opt) config.omega = fit_config.omega;
            if (*levels_opt) {
                config.max_levels = levels;
                config.min_levels = std::min(config.min_levels, levels);
            }
            config.validate();
            print_snapshot(*project.fit(config));
        } else if (*serve) {
            quarry::Project project(project_dir);
            project.ensure_initial_snapshot();
            quarry::Service service(project);
            std::printf("serving %s on http://%s:%d\n", project_dir.c_str(), host.c_str(), port);
            std::fflush(stdout);
            if (!service.listen(host, port)) {
                std::fprintf(stderr, "error: cannot bind %s:%d\n", host.c_str(), port);
                return 2;
            }
        } else if (*exp) {
            quarry::Project project(project_dir);
            const auto csv = quarry::export_csv(*project.annotations().view(), *project.corpus());
            quarry::write_atomic(out, csv);
        }
    } catch (const quarry::Error& e) {
        std::fprintf(stderr, "error [%s]: %s\n", std::string(quarry::to_string(e.code())).c_str(), e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 3;
    }
    return 0;
}
