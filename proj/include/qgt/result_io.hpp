#pragma once

// Config parsing (strict JSON), content hashing, and bit-stable result /
// trace file writing shared by the CLI commands.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "qgt/protocols.hpp"

namespace qgt {

struct SimSettings {
    EvolveMode mode = EvolveMode::rwa;
    int dt_divisor = 64;     // dt = (2 pi / omega) / dt_divisor
    int sample_stride = 4;
    int record_len = 4096;
};

struct ProtocolSettings {
    std::string which;                 // rabi | prep | tomo | extract | lz | check-rwa
    double t_max = 0.0;                // plan bound, 0 = automatic
    MeasureMode measure_mode = MeasureMode::branch;
    unsigned long seed = 0;
    long shots = 10000;
    std::vector<int> partition;        // prep: even/odd assignment, empty = {0,1,...}
    Eigen::Index state_index = 0;      // lz: QGT eigenpair label
    int band = -1;
};

struct LZSettings {
    std::vector<double> alphas;        // sweep rates
    bool alpha_relative = true;        // true: alphas are multiples of |V|^2
    double window_factor = 30.0;
};

struct RunConfig {
    std::string model_name;
    ModelSettings model_settings;
    ParameterPoint lambda;
    DrivePulse drive;
    bool resonant = true;              // omega = "resonant" or omitted
    SimSettings sim;
    ProtocolSettings protocol;
    LZSettings lz;
    std::string out_dir = ".";
    std::vector<std::string> formats = {"json", "tsv"};
    std::string raw_text;              // exact file content, hashed
};

// Strict parse: unknown keys at any level, non-finite numbers and malformed
// values throw ConfigError before any computation happens.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// FNV-1a 64-bit over the exact config file content, hex encoded.
std::string content_hash(const std::string& text);

// Serialize with every number at 17 significant digits, 2-space indent,
// object keys in sorted order (nlohmann::json default).
std::string dump_json17(const nlohmann::json& j);

nlohmann::json complex_to_json(const Complex& z);
nlohmann::json matrix_to_json(const Matrix& m);
nlohmann::json real_vector_to_json(const RealVector& v);

// Result bundle: "# run <timestamp>" header line (the only non-reproducible
// byte), then the JSON body with schema tag and config echo added.
void write_result_file(const std::filesystem::path& path, const RunConfig& config,
                       nlohmann::json body);

// Delimited trace: header row, 12 significant digits, columns
// t, pop_minus, pop_plus, pop_state_1 ... pop_state_K, norm.
void write_trace_file(const std::filesystem::path& path, const PopulationTrace& trace);

// write-temp-then-rename in the target directory.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace qgt
