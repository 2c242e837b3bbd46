#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "epcgaze/evaluation.hpp"
#include "epcgaze/model.hpp"
#include "epcgaze/synthetic.hpp"
#include "epcgaze/trainer.hpp"

namespace epcgaze {

/// Everything a CLI run needs. The generator's input dimension is not a
/// separate field: it always equals model.input_dim.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    GeneratorConfig generator;

    std::uint64_t seed = 20211;
    std::size_t threads = 0;
    /// Dataset CSV; empty means "generate from the [generator] section".
    std::string data;
    std::string checkpoint;
    std::string out = ".";
    int held_out_subject = 1;
    /// Joint-stage checkpoint every N iterations; 0 writes only at stage ends.
    std::size_t checkpoint_interval = 0;
    std::string ablate_axis = "mu";
    std::vector<std::string> ablate_values{"0.05", "0.15", "0.3"};

    /// Propagates shared fields (seed, input_dim) and validates every part.
    void finalize();
    ExperimentConfig experiment() const;
};

/// One settable field: `key` is unique across sections, and the CLI flag is
/// its kebab-case spelling.
struct ConfigField {
    std::string section;
    std::string key;
    std::string help;
};

const std::vector<ConfigField>& config_fields();
std::string flag_name(const std::string& key);

/// Sets one field from its text form. Throws ConfigError on an unknown key or
/// a malformed value.
void set_field(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_field(const RunConfig& cfg, const std::string& key);

// File format: `[section]` headers, `key = value` lines, `#` or `;` starts a
// comment line. Keys must appear under their own section. Lists are comma
// separated; `lambda_reg = auto` selects the trace-relative default.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "<text>");
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Complete resolved config in the file format above; feeding it back
/// reproduces every field exactly.
std::string config_to_text(const RunConfig& cfg);
void write_config_snapshot(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace epcgaze
