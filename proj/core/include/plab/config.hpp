#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "plab/mitigate.hpp"
#include "plab/synthworld.hpp"
#include "plab/train.hpp"

namespace plab {

/// Sizes and seeds of the generated splits.
struct DataConfig {
    int pretrain_rows = 5000;
    int poison_count = 50;
    int templates_per_class = 8;
    int clean_rows = 1000;
    int residual_poison = 0;
    std::uint64_t clean_seed = 7001;
};

struct EvalConfig {
    int rows = 1000;
    std::uint64_t seed = 9001;
    std::uint64_t asr_seed = 9002;
};

struct TriggerConfig {
    int patch_len = 16;
    Placement placement = Placement::RandomOffset;
    int fixed_offset = 0;
    int target_class = 0;
    std::uint64_t seed = 4242;
};

struct ShrinkPerturbConfig {
    bool enabled = false;
    double lambda = 1.0;
    double sigma = 0.0;
    bool include_log_tau = true;
    std::uint64_t seed = 3131;
};

struct EncoderConfig {
    std::vector<int> image_dims{64, 128, 32};
    std::vector<int> text_dims{48, 128, 32};
    std::uint64_t seed = 1001;
};

/// Pretrain model-selection rule.
struct SelectConfig {
    SelectRule::Kind kind = SelectRule::MaxAccuracy;
    double target = 0.0;
};

struct RunConfig {
    std::string output_dir = "runs/out";
    WorldSpec world;
    TriggerConfig trigger;
    DataConfig data;
    EvalConfig eval;
    EncoderConfig encoder;
    PretrainConfig pretrain;
    SelectConfig select;
    CleanConfig clean;
    ShrinkPerturbConfig shrink_perturb;
    std::string clean_checkpoint; // starting checkpoint for `clean`; empty = pretrain output
};

/// Named grids over the cleaning stage. Absent axes keep the base value.
struct SweepConfig {
    RunConfig base;
    std::uint64_t master_seed = 1;
    int parallelism = 1;
    std::vector<double> lr;
    std::vector<double> ssl_weight;
    std::vector<double> l2_weight;
    std::vector<double> lambda;
    std::vector<double> sigma;
    std::vector<int> residual_poison;
    std::vector<int> clean_rows;
    std::vector<int> epochs;

    std::size_t cell_count() const;
};

/// Parses the JSON document at `path` and applies dotted-path overrides of
/// the form key.path=value. Unknown keys and malformed values are errors.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides = {});
SweepConfig load_sweep_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides = {});

RunConfig parse_run_config(const std::string& json_text, const std::string& origin,
                           const std::vector<std::string>& overrides = {});
SweepConfig parse_sweep_config(const std::string& json_text, const std::string& origin,
                               const std::vector<std::string>& overrides = {});

/// Canonical JSON dump (sorted keys); fingerprint is its FNV-1a 64 in hex.
std::string run_config_json(const RunConfig& cfg);
std::string sweep_config_json(const SweepConfig& cfg);
std::string config_fingerprint(const RunConfig& cfg);

} // namespace plab
