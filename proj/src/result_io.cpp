#include "qgt/result_io.hpp"

#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace qgt {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const json& table, const std::string& name,
                const std::set<std::string>& allowed) {
    if (!table.is_object()) fail("'" + name + "' must be a table");
    for (const auto& item : table.items())
        if (!allowed.count(item.key()))
            fail("unknown key '" + item.key() + "' in '" + name + "'");
}

double finite_number(const json& v, const std::string& where) {
    if (!v.is_number()) fail("'" + where + "' must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail("'" + where + "' must be finite");
    return x;
}

long integer(const json& v, const std::string& where) {
    if (!v.is_number_integer()) fail("'" + where + "' must be an integer");
    return v.get<long>();
}

Eigen::MatrixXd table_2d(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty() || !v[0].is_array())
        fail("'" + where + "' must be a 2D array");
    const Eigen::Index rows = static_cast<Eigen::Index>(v.size());
    const Eigen::Index cols = static_cast<Eigen::Index>(v[0].size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(v[r].size()) != cols)
            fail("'" + where + "' rows differ in length");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(r, c) = finite_number(v[r][c], where);
    }
    return m;
}

void parse_model(const json& table, RunConfig& cfg) {
    check_keys(table, "model", {"name", "mass", "coeff_seed", "c", "e", "delta"});
    if (!table.contains("name") || !table["name"].is_string()) fail("model.name required");
    cfg.model_name = table["name"].get<std::string>();
    if (table.contains("mass")) cfg.model_settings["mass"] = finite_number(table["mass"], "model.mass");
    if (table.contains("delta")) cfg.model_settings["delta"] = finite_number(table["delta"], "model.delta");
    if (table.contains("coeff_seed"))
        cfg.model_settings["coeff_seed"] = integer(table["coeff_seed"], "model.coeff_seed");
    if (table.contains("c")) cfg.model_settings["c"] = table_2d(table["c"], "model.c");
    if (table.contains("e")) cfg.model_settings["e"] = table_2d(table["e"], "model.e");
}

void parse_drive(const json& table, RunConfig& cfg) {
    check_keys(table, "drive",
               {"j", "k", "amplitude", "omega", "phase", "duration", "ratio_max"});
    if (!table.contains("j")) fail("drive.j required");
    cfg.drive.j = integer(table["j"], "drive.j");
    if (table.contains("k")) cfg.drive.k = integer(table["k"], "drive.k");
    if (!table.contains("amplitude")) fail("drive.amplitude required");
    cfg.drive.amplitude = finite_number(table["amplitude"], "drive.amplitude");
    if (cfg.drive.amplitude < 0.0) fail("drive.amplitude must be >= 0");
    if (table.contains("omega")) {
        if (table["omega"].is_string()) {
            if (table["omega"].get<std::string>() != "resonant")
                fail("drive.omega must be a number or \"resonant\"");
            cfg.resonant = true;
        } else {
            cfg.drive.omega = finite_number(table["omega"], "drive.omega");
            if (cfg.drive.omega <= 0.0) fail("drive.omega must be > 0");
            cfg.resonant = false;
        }
    }
    if (table.contains("phase")) cfg.drive.phase = finite_number(table["phase"], "drive.phase");
    if (table.contains("duration")) {
        cfg.drive.duration = finite_number(table["duration"], "drive.duration");
        if (cfg.drive.duration < 0.0) fail("drive.duration must be >= 0");
    }
    if (table.contains("ratio_max")) {
        cfg.drive.ratio_max = finite_number(table["ratio_max"], "drive.ratio_max");
        if (cfg.drive.ratio_max <= 0.0) fail("drive.ratio_max must be > 0");
    }
}

void parse_sim(const json& table, RunConfig& cfg) {
    check_keys(table, "sim", {"mode", "dt_divisor", "sample_stride", "record_len"});
    if (table.contains("mode")) {
        const std::string mode = table["mode"].is_string() ? table["mode"].get<std::string>() : "";
        if (mode == "full")
            cfg.sim.mode = EvolveMode::full;
        else if (mode == "full_exact_modulation")
            cfg.sim.mode = EvolveMode::full_exact_modulation;
        else if (mode == "rwa")
            cfg.sim.mode = EvolveMode::rwa;
        else
            fail("sim.mode must be full | full_exact_modulation | rwa");
    }
    if (table.contains("dt_divisor")) {
        cfg.sim.dt_divisor = static_cast<int>(integer(table["dt_divisor"], "sim.dt_divisor"));
        if (cfg.sim.dt_divisor < 16) fail("sim.dt_divisor must be >= 16");
    }
    if (table.contains("sample_stride")) {
        cfg.sim.sample_stride =
            static_cast<int>(integer(table["sample_stride"], "sim.sample_stride"));
        if (cfg.sim.sample_stride < 1) fail("sim.sample_stride must be >= 1");
    }
    if (table.contains("record_len")) {
        cfg.sim.record_len = static_cast<int>(integer(table["record_len"], "sim.record_len"));
        if (cfg.sim.record_len < 16) fail("sim.record_len must be >= 16");
    }
}

void parse_protocol(const json& table, RunConfig& cfg) {
    check_keys(table, "protocol",
               {"which", "t_max", "measure_mode", "seed", "shots", "partition", "state_index",
                "band"});
    if (table.contains("which")) {
        if (!table["which"].is_string()) fail("protocol.which must be a string");
        cfg.protocol.which = table["which"].get<std::string>();
    }
    if (table.contains("t_max")) {
        cfg.protocol.t_max = finite_number(table["t_max"], "protocol.t_max");
        if (cfg.protocol.t_max < 0.0) fail("protocol.t_max must be >= 0");
    }
    if (table.contains("measure_mode")) {
        const std::string mm =
            table["measure_mode"].is_string() ? table["measure_mode"].get<std::string>() : "";
        if (mm == "branch")
            cfg.protocol.measure_mode = MeasureMode::branch;
        else if (mm == "sample")
            cfg.protocol.measure_mode = MeasureMode::sample;
        else
            fail("protocol.measure_mode must be branch | sample");
    }
    if (table.contains("seed")) {
        const long s = integer(table["seed"], "protocol.seed");
        if (s < 0) fail("protocol.seed must be >= 0");
        cfg.protocol.seed = static_cast<unsigned long>(s);
    }
    if (table.contains("shots")) {
        cfg.protocol.shots = integer(table["shots"], "protocol.shots");
        if (cfg.protocol.shots < 1) fail("protocol.shots must be >= 1");
    }
    if (table.contains("partition")) {
        if (!table["partition"].is_array()) fail("protocol.partition must be an array");
        for (const auto& v : table["partition"]) {
            const long p = integer(v, "protocol.partition");
            if (p != 0 && p != 1) fail("protocol.partition entries must be 0 or 1");
            cfg.protocol.partition.push_back(static_cast<int>(p));
        }
    }
    if (table.contains("state_index"))
        cfg.protocol.state_index = integer(table["state_index"], "protocol.state_index");
    if (table.contains("band")) {
        const long b = integer(table["band"], "protocol.band");
        if (b != -1 && b != 1) fail("protocol.band must be -1 or +1");
        cfg.protocol.band = static_cast<int>(b);
    }
}

void parse_lz(const json& table, RunConfig& cfg) {
    check_keys(table, "lz", {"alphas", "alpha_units", "window_factor"});
    if (table.contains("alphas")) {
        if (!table["alphas"].is_array() || table["alphas"].empty())
            fail("lz.alphas must be a non-empty array");
        for (const auto& v : table["alphas"]) {
            const double a = finite_number(v, "lz.alphas");
            if (a <= 0.0) fail("lz.alphas entries must be > 0");
            cfg.lz.alphas.push_back(a);
        }
    }
    if (table.contains("alpha_units")) {
        const std::string u =
            table["alpha_units"].is_string() ? table["alpha_units"].get<std::string>() : "";
        if (u == "absolute")
            cfg.lz.alpha_relative = false;
        else if (u == "v_squared")
            cfg.lz.alpha_relative = true;
        else
            fail("lz.alpha_units must be absolute | v_squared");
    }
    if (table.contains("window_factor")) {
        cfg.lz.window_factor = finite_number(table["window_factor"], "lz.window_factor");
        if (cfg.lz.window_factor < 2.0) fail("lz.window_factor must be >= 2");
    }
}

void parse_output(const json& table, RunConfig& cfg) {
    check_keys(table, "output", {"directory", "formats"});
    if (table.contains("directory")) {
        if (!table["directory"].is_string()) fail("output.directory must be a string");
        cfg.out_dir = table["directory"].get<std::string>();
    }
    if (table.contains("formats")) {
        if (!table["formats"].is_array()) fail("output.formats must be an array");
        cfg.formats.clear();
        for (const auto& v : table["formats"]) {
            const std::string f = v.is_string() ? v.get<std::string>() : "";
            if (f != "json" && f != "tsv") fail("output.formats entries must be json | tsv");
            cfg.formats.push_back(f);
        }
    }
}

std::string format_sig(double x, int digits) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*g", digits, x);
    return buf;
}

void dump17(const json& j, std::string& out, int indent) {
    const std::string pad(static_cast<size_t>(indent) * 2, ' ');
    const std::string pad_in(static_cast<size_t>(indent + 1) * 2, ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (const auto& item : j.items()) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in + json(item.key()).dump() + ": ";
                dump17(item.value(), out, indent + 1);
            }
            out += "\n" + pad + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            out += "[\n";
            bool first = true;
            for (const auto& v : j) {
                if (!first) out += ",\n";
                first = false;
                out += pad_in;
                dump17(v, out, indent + 1);
            }
            out += "\n" + pad + "]";
            return;
        }
        case json::value_t::number_float:
            out += format_sig(j.get<double>(), 17);
            return;
        default:
            out += j.dump();
            return;
    }
}

} // namespace

RunConfig parse_config_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        fail(std::string("parse error: ") + e.what());
    }
    check_keys(root, "<root>", {"model", "lambda", "drive", "sim", "protocol", "lz", "output"});
    if (!root.contains("model")) fail("'model' table required");
    if (!root.contains("lambda")) fail("'lambda' array required");

    RunConfig cfg;
    cfg.raw_text = text;
    parse_model(root["model"], cfg);

    if (!root["lambda"].is_array() || root["lambda"].empty())
        fail("'lambda' must be a non-empty array");
    cfg.lambda.resize(static_cast<Eigen::Index>(root["lambda"].size()));
    for (Eigen::Index i = 0; i < cfg.lambda.size(); ++i)
        cfg.lambda(i) = finite_number(root["lambda"][static_cast<size_t>(i)], "lambda");

    if (root.contains("drive")) parse_drive(root["drive"], cfg);
    if (root.contains("sim")) parse_sim(root["sim"], cfg);
    if (root.contains("protocol")) parse_protocol(root["protocol"], cfg);
    if (root.contains("lz")) parse_lz(root["lz"], cfg);
    if (root.contains("output")) parse_output(root["output"], cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot read " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

std::string content_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
    return buf;
}

std::string dump_json17(const nlohmann::json& j) {
    std::string out;
    dump17(j, out, 0);
    out += "\n";
    return out;
}

nlohmann::json complex_to_json(const Complex& z) {
    return nlohmann::json::array({z.real(), z.imag()});
}

nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
        rows.push_back(row);
    }
    return rows;
}

nlohmann::json real_vector_to_json(const RealVector& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

void write_result_file(const std::filesystem::path& path, const RunConfig& config,
                       nlohmann::json body) {
    body["schema"] = "qgtlab-result-1";
    body["config_hash"] = content_hash(config.raw_text);
    body["config_echo"] = nlohmann::json::parse(config.raw_text);

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[64];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);

    // Timestamp confined to the header line; the JSON body is reproducible.
    write_text_atomic(path, std::string("# run ") + stamp + "\n" + dump_json17(body));
}

void write_trace_file(const std::filesystem::path& path, const PopulationTrace& trace) {
    std::ostringstream out;
    out << "t\tpop_minus\tpop_plus";
    const size_t k = trace.state_pop.empty() ? 0 : trace.state_pop.front().size();
    for (size_t i = 0; i < k; ++i) {
        // Reference frames hold the N minus columns then the N plus columns.
        if (k % 2 == 0)
            out << "\tpop_state_" << (i % (k / 2) + 1) << (i < k / 2 ? 'm' : 'p');
        else
            out << "\tpop_state_" << (i + 1);
    }
    out << "\tnorm\n";
    for (size_t s = 0; s < trace.times.size(); ++s) {
        out << format_sig(trace.times[s], 12) << '\t' << format_sig(trace.pop_minus[s], 12)
            << '\t' << format_sig(trace.pop_plus[s], 12);
        for (size_t i = 0; i < k; ++i) out << '\t' << format_sig(trace.state_pop[s][i], 12);
        out << '\t' << format_sig(trace.norm[s], 12) << '\n';
    }
    write_text_atomic(path, out.str());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    fs::create_directories(dir);
    const fs::path tmp = dir / (path.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, path);
}

} // namespace qgt
