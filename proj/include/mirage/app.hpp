#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mirage/bench.hpp"
#include "mirage/bridge.hpp"
#include "mirage/chat.hpp"
#include "mirage/eval.hpp"
#include "mirage/fusion.hpp"
#include "mirage/orchestrator.hpp"
#include "mirage/scene.hpp"

namespace mirage {

/// Fully resolved configuration of one command. Serialized with every
/// default materialized so a run directory can be replayed.
struct RunConfig {
    /// "oracle" or "bridge:<url>"
    std::string backend = "oracle";
    int steps = 50;
    double rho = 0.6;
    Strategy strategy = Strategy::both;
    std::uint64_t seed = 0;
    int vae_factor = 1;
    int patch = 1;
    bool trace = false;
    bool parallel_branches = true;
    std::filesystem::path out = "out";
    /// Directory of <role>.json transcripts; roles without a file get the
    /// offline echo responder.
    std::optional<std::filesystem::path> mock;
    /// "box" or "bridge:<url>"
    std::string segmenter = "box";
    bool judge_enabled = false;
    int judge_repeats = 3;
    int bench_image_size = 128;
    ChatClientConfig parser;
    ChatClientConfig grounder;
    ChatClientConfig judge;
    ChatClientConfig generator;
    /// Edit inputs, recorded so config.json alone reproduces a run.
    std::optional<std::filesystem::path> image;
    std::optional<std::string> instruction;

    void validate() const;
    nlohmann::json to_json() const;
    /// Unknown keys are rejected; missing keys keep their defaults.
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig load(const std::filesystem::path& path);
};

struct Clients {
    std::unique_ptr<ChatClient> parser;
    std::unique_ptr<ChatClient> grounder;
    std::unique_ptr<ChatClient> judge;
    std::unique_ptr<ChatClient> generator;
};

/// Mock mode uses transcripts or the echo responder; otherwise HTTP clients
/// for roles with an endpoint. The judge is absent unless enabled.
Clients make_clients(const RunConfig& config);

std::shared_ptr<const DenoiserBackend> make_backend(const RunConfig& config, GridShape latent_shape);

struct RegionRecord {
    DecompositionPair pair;
    BoundingBox grounded;
    BoundingBox aligned;
    int retries = 0;
    std::vector<std::string> warnings;
};

struct EditOutcome {
    std::filesystem::path run_dir;
    std::filesystem::path image_path;
    std::filesystem::path report_path;
    PixelImage reference;
    PixelImage image;
    std::vector<RegionRecord> regions;
    int parse_retries = 0;
    RunReport report;
    nlohmann::json report_json;
};

nlohmann::json to_json(const RunReport& report);

/// decompose -> ground -> align -> rasterize -> session -> run -> finalize.
/// Writes edited.png, report.json, config.json and, with trace on,
/// trace/step_NNN.png plus trace/manifest.json into config.out. Errors carry
/// the stage that raised them.
EditOutcome cmd_edit(const std::filesystem::path& image_path, const std::string& instruction, const RunConfig& config,
                     Clients& clients);

struct EvalOutcome {
    std::vector<EvalRow> rows;
    std::vector<std::string> skipped;
    std::filesystem::path out_dir;
};

/// Evaluates edited images named <results>/<id>.png or <results>/<id>/edited.png
/// against a bench manifest. Writes eval/<id>.json, background.csv,
/// scores.csv (judge only) and summary.json under config.out.
EvalOutcome cmd_eval(const std::filesystem::path& manifest_path, const std::filesystem::path& results_dir,
                     const RunConfig& config, Clients& clients);

BenchBuildResult cmd_bench_build(int n, const RunConfig& config, Clients& clients);

struct InspectOutcome {
    std::filesystem::path sheet_path;
    int tiles = 0;
    int region_tiles = 0;
    int global_tiles = 0;
};

/// Contact sheet of the traced steps: one tile per recorded latent framed in
/// orange (region phase) or blue (global phase) with its index and s.
InspectOutcome cmd_inspect(const std::filesystem::path& run_dir);

/// Synthetic square scene plus scene.json with the object boxes.
void cmd_synth(const std::filesystem::path& out_png, const SceneSpec& spec);

}  // namespace mirage
