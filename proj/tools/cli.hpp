#ifndef HVS_TOOLS_CLI_HPP
#define HVS_TOOLS_CLI_HPP

// Subcommand dispatch for the `hvs` tool. Kept in a header so the test suite
// can drive it in-process.

#include <openssl/evp.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hvs/hvs.hpp"

namespace hvs::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitUsage = 2;

/// Bad combination of otherwise well-formed options.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- text I/O

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::InvalidInput, "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + p.string());
    out << content;
    if (!out.flush()) throw Error(ErrorKind::InvalidInput, "write failed for " + p.string());
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

inline std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

/// Comma-separated table with a mandatory header row. No quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::string source;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw Error(ErrorKind::InvalidInput, source + ": missing column '" + name + "'");
    }
    bool has(const std::string& name) const {
        return std::find(header.begin(), header.end(), name) != header.end();
    }
    double number(std::size_t row, std::size_t col) const {
        const std::string& s = rows[row][col];
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || ptr != s.data() + s.size()) {
            throw Error(ErrorKind::InvalidInput,
                        source + " line " + std::to_string(row + 2) + ": '" + s + "' is not a number");
        }
        return v;
    }
};

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        std::string f = line.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : f.substr(b, e - b + 1));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

inline CsvTable parse_csv(const std::string& text, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (first) {
            t.header = std::move(fields);
            first = false;
            continue;
        }
        if (fields.size() != t.header.size()) {
            throw Error(ErrorKind::InvalidInput, source + " line " + std::to_string(t.rows.size() + 2) + ": expected " +
                                                     std::to_string(t.header.size()) + " fields");
        }
        t.rows.push_back(std::move(fields));
    }
    if (first) throw Error(ErrorKind::InvalidInput, source + ": empty file");
    return t;
}

inline CsvTable read_csv(const fs::path& p) { return parse_csv(read_file(p), p.string()); }

// ---------------------------------------------------------------- inputs

/// A design together with the caller's unit labels.
struct LoadedDesign {
    std::vector<std::string> ids;
    DesignSpec design;
};

inline LoadedDesign load_design(const fs::path& path, std::optional<int> pps) {
    const CsvTable t = read_csv(path);
    const std::size_t id_col = t.column("unit_id");
    const std::size_t val_col = t.column(pps ? "x" : "pi");
    std::vector<std::string> ids;
    std::vector<double> v;
    std::map<std::string, std::size_t> seen;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        ids.push_back(t.rows[r][id_col]);
        if (!seen.emplace(ids.back(), r).second) {
            throw Error(ErrorKind::InvalidInput, path.string() + ": duplicate unit_id '" + ids.back() + "'");
        }
        v.push_back(t.number(r, val_col));
    }
    if (v.empty()) throw Error(ErrorKind::InvalidInput, path.string() + ": no units");
    return {std::move(ids), pps ? pps_probabilities(v, *pps) : validate_design(v)};
}

inline std::map<std::string, std::size_t> index_of(const std::vector<std::string>& ids) {
    std::map<std::string, std::size_t> m;
    for (std::size_t i = 0; i < ids.size(); ++i) m.emplace(ids[i], i);
    return m;
}

inline Variant parse_variant(const std::string& s) {
    if (s == "sequential") return Variant::Sequential;
    if (s == "draw-by-draw") return Variant::DrawByDraw;
    throw UsageError("unknown variant '" + s + "'");
}

/// "a:b:step" or a comma list.
inline std::vector<int> parse_grid(const std::string& s) {
    std::vector<int> out;
    auto to_int = [&](const std::string& f) {
        int v = 0;
        const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
        if (ec != std::errc() || ptr != f.data() + f.size()) throw UsageError("bad grid '" + s + "'");
        return v;
    };
    if (s.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::string cur;
        for (char c : s) {
            if (c == ':') {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        parts.push_back(cur);
        if (parts.size() != 3) throw UsageError("grid must be start:stop:step");
        const int a = to_int(parts[0]);
        const int b = to_int(parts[1]);
        const int step = to_int(parts[2]);
        if (step <= 0 || b < a) throw UsageError("bad grid '" + s + "'");
        for (int n = a; n <= b; n += step) out.push_back(n);
    } else {
        for (const auto& f : split_fields(s)) out.push_back(to_int(f));
    }
    if (out.empty()) throw UsageError("empty grid");
    return out;
}

inline PopulationConfig recipe_config(const std::string& recipe, std::size_t N, std::uint64_t seed) {
    if (recipe == "gamma") return PopulationConfig::gamma_recipe(N, seed);
    if (recipe == "lognormal") return PopulationConfig::lognormal_recipe(N, seed);
    throw UsageError("unknown recipe '" + recipe + "'");
}

inline int variable_index(const std::string& name) {
    for (std::size_t j = 0; j < kVariableNames.size(); ++j) {
        if (name == kVariableNames[j] || name == "y" + std::to_string(j + 1)) return static_cast<int>(j);
    }
    throw UsageError("unknown variable '" + name + "'");
}

inline EstimatorKind parse_estimator(const std::string& s) {
    if (s == "HT" || s == "ht") return EstimatorKind::HT;
    if (s == "CHT" || s == "cht") return EstimatorKind::CHT;
    throw UsageError("unknown estimator '" + s + "'");
}

inline std::size_t max_enumeration_size() {
    const char* env = std::getenv("HV_MAX_ENUM_N");
    if (!env || !*env) return kDefaultMaxEnumerationSize;
    std::size_t v = 0;
    const std::string s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw UsageError("HV_MAX_ENUM_N must be a positive integer");
    return v;
}

// ---------------------------------------------------------------- manifest

/// Flags whose values are written by a run; replay redirects them.
inline const std::vector<std::string>& output_flags() {
    static const std::vector<std::string> f{"--out", "--report", "--deltas", "--manifest"};
    return f;
}

/// Flags whose values are read by a run.
inline const std::vector<std::string>& input_flags() {
    static const std::vector<std::string> f{"--pi", "--sample", "--y"};
    return f;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class RunRecord {
public:
    RunRecord(std::string subcommand, std::vector<std::string> argv)
        : subcommand_(std::move(subcommand)), argv_(std::move(argv)) {}

    void input(const std::string& flag, const fs::path& p) {
        inputs_.push_back({{"flag", flag}, {"path", p.string()}, {"sha256", file_digest(p)}});
    }
    void seed(const std::string& name, std::uint64_t v) { seeds_[name] = v; }
    ordered_json& extra() { return extra_; }

    /// Writes an output file and records its digest.
    void emit(const std::string& flag, const fs::path& p, const std::string& content) {
        write_file(p, content);
        outputs_.push_back({{"flag", flag}, {"path", p.string()}, {"sha256", sha256_hex(content)}});
    }

    void write(const fs::path& p) const {
        ordered_json m;
        m["subcommand"] = subcommand_;
        m["argv"] = argv_;
        m["cwd"] = fs::current_path().string();
        m["inputs"] = inputs_.empty() ? ordered_json::array() : ordered_json(inputs_);
        m["seeds"] = seeds_.empty() ? ordered_json::object() : seeds_;
        m["version"] = kToolVersion;
        m["timestamp"] = utc_timestamp();
        m["outputs"] = outputs_;
        if (!extra_.empty()) m["details"] = extra_;
        write_file(p, m.dump(2) + "\n");
    }

private:
    std::string subcommand_;
    std::vector<std::string> argv_;
    std::vector<ordered_json> inputs_;
    ordered_json seeds_ = ordered_json::object();
    std::vector<ordered_json> outputs_;
    ordered_json extra_ = ordered_json::object();
};

inline fs::path manifest_path(const std::string& explicit_path, const fs::path& out) {
    return explicit_path.empty() ? fs::path(out.string() + ".manifest.json") : fs::path(explicit_path);
}

// ---------------------------------------------------------------- subcommands

struct DesignArgs {
    std::string pi_path;
    std::optional<int> pps;
};

inline void add_design_options(CLI::App* sub, DesignArgs& a) {
    sub->add_option("--pi", a.pi_path, "design CSV (unit_id,pi; or unit_id,x with --pps)")->required();
    sub->add_option("--pps", a.pps, "sample size; probabilities proportional to column x");
}

inline std::string sample_csv(const LoadedDesign& d, const SampleSelection& sel, bool all) {
    std::string s = "unit_id,pi,pi0,in_sample\n";
    const auto& design = d.design;
    for (std::size_t u = 0; u < d.ids.size(); ++u) {
        const std::size_t k = design.rank()[u];
        const bool in = sel.indicators[k] != 0;
        if (!in && !all) continue;
        s += d.ids[u] + "," + fmt(design.pi()[k]) + "," + fmt(sel.split.pi0[k]) + "," + (in ? "1" : "0") + "\n";
    }
    return s;
}

/// Rebuilds a selection from a sample file written by `sample`. n' is the
/// number of selected units whose pi(0) is below one.
inline SampleSelection load_selection(const fs::path& path, const LoadedDesign& d) {
    const CsvTable t = read_csv(path);
    const std::size_t id_col = t.column("unit_id");
    const std::size_t pi0_col = t.column("pi0");
    const std::optional<std::size_t> in_col = t.has("in_sample") ? std::optional(t.column("in_sample")) : std::nullopt;
    const auto index = index_of(d.ids);
    const auto& design = d.design;
    std::vector<std::uint8_t> ind(design.population_size(), 0);
    std::map<std::size_t, double> pi0_of;
    int forced = 0;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (in_col && t.rows[r][*in_col] == "0") continue;
        const auto it = index.find(t.rows[r][id_col]);
        if (it == index.end()) {
            throw Error(ErrorKind::InvalidInput, path.string() + ": unknown unit_id '" + t.rows[r][id_col] + "'");
        }
        const std::size_t k = design.rank()[it->second];
        if (ind[k]) throw Error(ErrorKind::InvalidInput, path.string() + ": unit '" + t.rows[r][id_col] + "' repeated");
        ind[k] = 1;
        pi0_of[k] = t.number(r, pi0_col);
        if (pi0_of[k] == 1.0) ++forced;
    }
    const int n = design.sample_size();
    const int selected = static_cast<int>(pi0_of.size());
    if (selected != n) {
        throw Error(ErrorKind::InvalidInput, path.string() + ": " + std::to_string(selected) +
                                                 " selected units, design has n = " + std::to_string(n));
    }
    SplitOutcome split = split_probabilities(design, n - forced);
    for (const auto& [k, v] : pi0_of) {
        if (v != split.pi0[k]) {
            throw Error(ErrorKind::InvalidInput, path.string() + ": pi0 of unit '" + d.ids[design.perm()[k]] +
                                                     "' does not match the design");
        }
        if (k >= split.n_big) ind[k] = 1;
    }
    for (std::size_t k = split.n_big; k < ind.size(); ++k) {
        if (!pi0_of.count(k)) throw Error(ErrorKind::InvalidInput, path.string() + ": a forced unit is missing");
    }
    return detail::finish_selection(design, std::move(split), std::move(ind));
}

inline std::vector<double> load_study_variable(const fs::path& path, const std::string& column,
                                               const LoadedDesign& d, const SampleSelection& sel) {
    const CsvTable t = read_csv(path);
    const std::size_t id_col = t.column("unit_id");
    const std::size_t y_col = t.column(column);
    const auto index = index_of(d.ids);
    std::vector<double> y(d.ids.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto it = index.find(t.rows[r][id_col]);
        if (it != index.end()) y[it->second] = t.number(r, y_col);
    }
    for (std::size_t u : sel.units_original) {
        if (std::isnan(y[u])) {
            throw Error(ErrorKind::InvalidInput, path.string() + ": no value for sampled unit '" + d.ids[u] + "'");
        }
    }
    return y;
}

inline std::string matrix_csv(const LoadedDesign& d, const JointMatrix& m) {
    std::string s = "row,col,value\n";
    const auto& rank = d.design.rank();
    for (std::size_t a = 0; a < d.ids.size(); ++a) {
        for (std::size_t b = 0; b < d.ids.size(); ++b) {
            s += d.ids[a] + "," + d.ids[b] + "," + fmt(m(rank[a], rank[b])) + "\n";
        }
    }
    return s;
}

inline std::string profile_header() { return "n,d1,d2,d3,min_scaled_pi,max_scaled_pi\n"; }

inline std::string profile_row(const DesignProfile& p) {
    return std::to_string(p.n) + "," + fmt(p.d1) + "," + fmt(p.d2) + "," + fmt(p.d3) + "," + fmt(p.min_scaled_pi) +
           "," + fmt(p.max_scaled_pi) + "\n";
}

inline ordered_json coefficients_json(const Population& pop) {
    ordered_json c = ordered_json::object();
    for (std::size_t j = 0; j < 4; ++j) {
        const auto& k = pop.coefficients[j];
        c[kVariableNames[j]] = {{"a0", k.a0}, {"a1", k.a1}, {"a2", k.a2}, {"a3", k.a3}, {"sigma", k.sigma}};
    }
    return c;
}

inline ordered_json config_json(const PopulationConfig& cfg) {
    return {{"size_distribution", to_string(cfg.size_distribution)},
            {"offset", cfg.offset},
            {"param1", cfg.param1},
            {"param2", cfg.param2},
            {"population_size", cfg.population_size},
            {"target_y_mean", cfg.target_y_mean},
            {"target_y_sd", cfg.target_y_sd},
            {"signal_sd", cfg.signal_sd},
            {"seed", cfg.seed}};
}

/// Summary of the enumerated law of one variant against the other and pi.
struct EnumerationReport {
    ExactDistribution dist;
    double max_marginal_error = 0.0;
    double tv_between_variants = 0.0;
};

inline EnumerationReport enumerate_with_report(const DesignSpec& design, Variant v, std::size_t max_n) {
    EnumerationReport r;
    r.dist = enumerate_distribution(design, v, max_n);
    const Variant other = v == Variant::Sequential ? Variant::DrawByDraw : Variant::Sequential;
    r.tv_between_variants = total_variation(r.dist, enumerate_distribution(design, other, max_n));
    const JointMatrix m = moments_from_distribution(r.dist);
    for (std::size_t k = 0; k < design.population_size(); ++k) {
        r.max_marginal_error = std::max(r.max_marginal_error, std::abs(m(k, k) - design.pi()[k]));
    }
    return r;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline int run_replay(const fs::path& manifest_file, const std::string& workdir, std::ostream& out, std::ostream& err) {
    const auto m = nlohmann::json::parse(read_file(manifest_file));
    const fs::path cwd = m.at("cwd").get<std::string>();
    if (m.at("version").get<std::string>() != kToolVersion) {
        err << "warning: manifest written by version " << m.at("version").get<std::string>() << "\n";
    }
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : cwd / p; };
    for (const auto& in : m.at("inputs")) {
        const fs::path p = resolve(in.at("path").get<std::string>());
        if (file_digest(p) != in.at("sha256").get<std::string>()) {
            throw Error(ErrorKind::InvalidInput, "input " + p.string() + " has changed since the recorded run");
        }
    }
    fs::path dir;
    if (workdir.empty()) {
        std::string tmpl = (fs::temp_directory_path() / "hvs-replay-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw Error(ErrorKind::InvalidInput, "cannot create a replay directory");
        dir = tmpl;
    } else {
        dir = workdir;
        fs::create_directories(dir);
    }

    std::vector<std::string> argv = m.at("argv").get<std::vector<std::string>>();
    std::map<std::string, fs::path> redirected;
    const auto& outs = output_flags();
    const auto& ins = input_flags();
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
        if (std::find(outs.begin(), outs.end(), argv[i]) != outs.end()) {
            const fs::path target = dir / (std::to_string(i) + "_" + fs::path(argv[i + 1]).filename().string());
            redirected[resolve(argv[i + 1]).string()] = target;
            argv[i + 1] = target.string();
            ++i;
        } else if (std::find(ins.begin(), ins.end(), argv[i]) != ins.end()) {
            argv[i + 1] = resolve(argv[i + 1]).string();
            ++i;
        }
    }
    // A run without an explicit --manifest wrote one next to --out.
    if (std::find(argv.begin(), argv.end(), "--manifest") == argv.end()) {
        argv.push_back("--manifest");
        argv.push_back((dir / "replayed.manifest.json").string());
    }
    std::ostringstream sub_out;
    const int code = dispatch(argv, sub_out, err);
    if (code != kExitOk) {
        err << "replay: re-run exited with code " << code << "\n";
        return kExitValidation;
    }
    bool identical = true;
    for (const auto& o : m.at("outputs")) {
        const fs::path original = resolve(o.at("path").get<std::string>());
        auto it = redirected.find(original.string());
        if (it == redirected.end()) {
            // Paths derived from --out, such as <out>.report.json.
            for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
                if (m.at("argv")[i] != "--out") continue;
                const std::string base = resolve(m.at("argv")[i + 1].get<std::string>()).string();
                if (original.string().rfind(base, 0) == 0) {
                    const fs::path derived = argv[i + 1] + original.string().substr(base.size());
                    it = redirected.emplace(original.string(), derived).first;
                }
            }
        }
        if (it == redirected.end()) {
            err << "replay: output " << original.string() << " is not named on the recorded command line\n";
            identical = false;
            continue;
        }
        const bool same = file_digest(it->second) == o.at("sha256").get<std::string>();
        out << (same ? "identical " : "DIFFERS ") << original.string() << "\n";
        identical = identical && same;
    }
    if (workdir.empty()) fs::remove_all(dir);
    return identical ? kExitOk : kExitValidation;
}

/// Parses `args` (without the program name) and runs one subcommand.
inline int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fixed-size unequal-probability sampling: draw, estimate, diagnose, simulate."};
    app.name("hvs");
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    std::string out_path;
    std::string manifest_arg;
    std::optional<std::uint64_t> seed;
    std::string variant_name = "sequential";
    auto add_out = [&](CLI::App* sub, const char* what) {
        sub->add_option("--out", out_path, what)->required();
        sub->add_option("--manifest", manifest_arg, "run manifest path (default: <out>.manifest.json)");
    };
    auto add_variant = [&](CLI::App* sub) {
        sub->add_option("--variant", variant_name, "sequential | draw-by-draw")
            ->check(CLI::IsMember({"sequential", "draw-by-draw"}));
    };

    DesignArgs design_args;

    auto* sample = app.add_subcommand("sample", "draw one sample");
    add_design_options(sample, design_args);
    sample->add_option("--seed", seed, "random seed")->required();
    add_variant(sample);
    bool all_rows = false;
    sample->add_flag("--all", all_rows, "write every unit, not just the selected ones");
    add_out(sample, "sample CSV");

    auto* probs = app.add_subcommand("probs", "first- and second-order inclusion probabilities");
    add_design_options(probs, design_args);
    std::string joint = "none";
    std::optional<int> nprime;
    double budget = 2e8;
    std::string deltas_path;
    probs->add_option("--joint", joint, "none | conditional | unconditional")
        ->check(CLI::IsMember({"none", "conditional", "unconditional"}));
    probs->add_option("--nprime", nprime, "condition on this Phase-1 outcome");
    probs->add_option("--budget", budget, "warn when n*N^2 exceeds this");
    probs->add_option("--deltas", deltas_path, "also write the Phase-1 law (i,delta)");
    add_out(probs, "CSV output");

    auto* estimate = app.add_subcommand("estimate", "HT / CHT totals from a sample file");
    add_design_options(estimate, design_args);
    std::string sample_path;
    std::string y_path;
    std::string y_column = "y";
    std::vector<std::string> estimator_names{"HT", "CHT"};
    bool with_variance = false;
    estimate->add_option("--sample", sample_path, "sample CSV written by `sample`")->required();
    estimate->add_option("--y", y_path, "CSV with unit_id and the study variable")->required();
    estimate->add_option("--column", y_column, "study-variable column in --y");
    estimate->add_option("--estimator", estimator_names, "HT and/or CHT");
    estimate->add_flag("--variance", with_variance, "attach the SYG variance to CHT");
    estimate->add_option("--seed", seed, "seed of the sample, recorded in the output");
    add_out(estimate, "JSON output");

    auto* diagnostics = app.add_subcommand("diagnostics", "D1/D2/D3 indicators for a design or a recipe grid");
    std::string diag_pi;
    std::optional<int> diag_pps;
    std::string recipe;
    std::string grid_spec = "400:4000:400";
    double fraction = 0.2;
    diagnostics->add_option("--pi", diag_pi, "design CSV");
    diagnostics->add_option("--pps", diag_pps, "sample size for a size-measure CSV");
    diagnostics->add_option("--recipe", recipe, "gamma | lognormal");
    diagnostics->add_option("--grid", grid_spec, "start:stop:step or a comma list");
    diagnostics->add_option("--fraction", fraction, "sampling fraction n/N");
    diagnostics->add_option("--seed", seed, "population seed (with --recipe)");
    add_out(diagnostics, "CSV output");

    auto* generate = app.add_subcommand("generate", "synthetic population");
    std::size_t size = 0;
    generate->add_option("--recipe", recipe, "gamma | lognormal")->required();
    generate->add_option("--size", size, "population size N")->required();
    generate->add_option("--seed", seed, "random seed")->required();
    add_out(generate, "population CSV");

    auto* simulate = app.add_subcommand("simulate", "Monte-Carlo variance study");
    int replicates = 10000;
    std::vector<std::string> variable_names{"linear", "quadratic", "exponential", "bump"};
    unsigned threads = 1;
    simulate->add_option("--recipe", recipe, "gamma | lognormal")->required();
    simulate->add_option("--grid", grid_spec, "start:stop:step or a comma list");
    simulate->add_option("--fraction", fraction, "sampling fraction n/N");
    simulate->add_option("--replicates", replicates, "B");
    simulate->add_option("--estimator", estimator_names, "HT and/or CHT");
    simulate->add_option("--variable", variable_names, "linear, quadratic, exponential, bump");
    simulate->add_option("--threads", threads, "worker threads (results do not depend on this)");
    simulate->add_option("--seed", seed, "master seed")->required();
    add_variant(simulate);
    add_out(simulate, "CSV output");

    auto* enumerate = app.add_subcommand("enumerate", "exact sample distribution of a small design");
    add_design_options(enumerate, design_args);
    add_variant(enumerate);
    std::string report_path;
    enumerate->add_option("--report", report_path, "verification report (default: <out>.report.json)");
    add_out(enumerate, "distribution CSV");

    auto* replay = app.add_subcommand("replay", "re-run a recorded command and compare outputs");
    std::string replay_manifest;
    std::string workdir;
    replay->add_option("--manifest", replay_manifest, "manifest of the recorded run")->required();
    replay->add_option("--workdir", workdir, "keep re-run outputs here");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    CLI::App* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    try {
        if (chosen == replay) return run_replay(replay_manifest, workdir, out, err);

        RunRecord rec(name, args);
        const fs::path outp = out_path;
        const Variant variant = parse_variant(variant_name);
        if (seed) rec.seed("seed", *seed);

        if (chosen == sample) {
            const auto d = load_design(design_args.pi_path, design_args.pps);
            rec.input("--pi", design_args.pi_path);
            RngStream rng(*seed, 0);
            const auto sel = hv_sample(d.design, rng, variant);
            rec.extra()["n_prime"] = sel.split.n_prime;
            rec.extra()["variant"] = to_string(variant);
            rec.emit("--out", outp, sample_csv(d, sel, all_rows));
        } else if (chosen == probs) {
            const auto d = load_design(design_args.pi_path, design_args.pps);
            rec.input("--pi", design_args.pi_path);
            const int n = d.design.sample_size();
            if (nprime && (*nprime < 1 || *nprime > n)) {
                throw Error(ErrorKind::OutOfRange, "nprime = " + std::to_string(*nprime) + " outside 1.." +
                                                       std::to_string(n));
            }
            if (!deltas_path.empty()) {
                const auto delta = phase1_deltas(d.design);
                std::string s = "i,delta\n";
                for (int i = 1; i <= n; ++i) s += std::to_string(i) + "," + fmt(delta[i - 1]) + "\n";
                rec.emit("--deltas", deltas_path, s);
            }
            if (joint == "none") {
                std::optional<SplitOutcome> split;
                if (nprime) split = split_probabilities(d.design, *nprime);
                std::string s = split ? "unit_id,pi,pi0\n" : "unit_id,pi\n";
                for (std::size_t u = 0; u < d.ids.size(); ++u) {
                    const std::size_t k = d.design.rank()[u];
                    s += d.ids[u] + "," + fmt(d.design.pi()[k]);
                    if (split) s += "," + fmt(split->pi0[k]);
                    s += "\n";
                }
                rec.emit("--out", outp, s);
            } else if (joint == "conditional") {
                if (!nprime) throw UsageError("--joint conditional needs --nprime");
                rec.emit("--out", outp, matrix_csv(d, conditional_joint(split_probabilities(d.design, *nprime))));
            } else {
                if (nprime) throw UsageError("--nprime applies to --joint conditional only");
                const double N = static_cast<double>(d.ids.size());
                if (n * N * N > budget) {
                    err << "warning: unconditional matrix needs about " << fmt(n * N * N)
                        << " operations; the conditional matrix is O(N^2)\n";
                }
                rec.emit("--out", outp, matrix_csv(d, unconditional_joint(d.design)));
            }
        } else if (chosen == estimate) {
            const auto d = load_design(design_args.pi_path, design_args.pps);
            rec.input("--pi", design_args.pi_path);
            const auto sel = load_selection(sample_path, d);
            rec.input("--sample", sample_path);
            const auto y = load_study_variable(y_path, y_column, d, sel);
            rec.input("--y", y_path);
            ordered_json records = ordered_json::array();
            for (const auto& en : estimator_names) {
                const EstimatorKind kind = parse_estimator(en);
                const auto r = kind == EstimatorKind::HT ? ht_total(sel, y, d.design)
                                                         : cht_total(sel, y, d.design, with_variance);
                ordered_json j;
                j["estimator"] = to_string(kind);
                j["total"] = r.total;
                j["mean"] = r.mean;
                j["variance_estimate"] = r.variance_estimate ? ordered_json(*r.variance_estimate) : ordered_json();
                j["n_prime"] = sel.split.n_prime;
                j["seed"] = seed ? ordered_json(*seed) : ordered_json();
                records.push_back(j);
            }
            rec.emit("--out", outp, records.dump(2) + "\n");
        } else if (chosen == diagnostics) {
            std::string s = profile_header();
            if (!diag_pi.empty()) {
                if (!recipe.empty()) throw UsageError("use either --pi or --recipe");
                const auto d = load_design(diag_pi, diag_pps);
                rec.input("--pi", diag_pi);
                s += profile_row(profile_design(d.design));
            } else {
                if (recipe.empty()) throw UsageError("diagnostics needs --pi or --recipe");
                if (!seed) throw UsageError("--recipe needs --seed");
                if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("--fraction must lie in (0,1)");
                const auto source = recipe_source(recipe_config(recipe, 0, *seed), fraction);
                for (int n : parse_grid(grid_spec)) {
                    const auto pop = source(n);
                    s += profile_row(profile_design(pps_probabilities(pop.x, n)));
                }
                rec.extra()["recipe"] = recipe;
                rec.extra()["fraction"] = fraction;
            }
            rec.emit("--out", outp, s);
        } else if (chosen == generate) {
            const auto cfg = recipe_config(recipe, size, *seed);
            const auto pop = generate_population(cfg);
            std::string s = "unit_id,x,y1,y2,y3,y4\n";
            for (std::size_t k = 0; k < pop.size(); ++k) {
                s += std::to_string(k + 1) + "," + fmt(pop.x[k]);
                for (std::size_t j = 0; j < 4; ++j) s += "," + fmt(pop.y[j][k]);
                s += "\n";
            }
            rec.extra()["config"] = config_json(cfg);
            rec.extra()["mu_x"] = pop.mu_x;
            rec.extra()["coefficients"] = coefficients_json(pop);
            rec.emit("--out", outp, s);
        } else if (chosen == simulate) {
            if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("--fraction must lie in (0,1)");
            Scenario sc;
            sc.population = recipe_source(recipe_config(recipe, 0, *seed), fraction);
            sc.n_grid = parse_grid(grid_spec);
            sc.replicates = replicates;
            sc.estimators.clear();
            for (const auto& e : estimator_names) sc.estimators.push_back(parse_estimator(e));
            sc.variables.clear();
            for (const auto& v : variable_names) sc.variables.push_back(variable_index(v));
            sc.variant = variant;
            sc.master_seed = *seed;
            sc.threads = threads;
            const auto t0 = std::chrono::steady_clock::now();
            const auto report = run_scenario(sc);
            const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::string s = "n,variable,estimator,v_mc,rv_mc\n";
            for (const auto& c : report.cells) {
                s += std::to_string(c.n) + "," + kVariableNames[c.variable] + "," + to_string(c.estimator) + "," +
                     fmt(c.v_mc) + "," + (c.rv_mc ? fmt(*c.rv_mc) : std::string()) + "\n";
            }
            rec.extra()["scenario"] = {{"recipe", recipe},
                                       {"fraction", fraction},
                                       {"n_grid", sc.n_grid},
                                       {"replicates", replicates},
                                       {"estimators", estimator_names},
                                       {"variables", variable_names},
                                       {"variant", to_string(variant)}};
            rec.extra()["wall_time_seconds"] = wall;
            rec.emit("--out", outp, s);
        } else if (chosen == enumerate) {
            const auto d = load_design(design_args.pi_path, design_args.pps);
            rec.input("--pi", design_args.pi_path);
            const auto r = enumerate_with_report(d.design, variant, max_enumeration_size());
            // Rows in caller labels; units listed in caller order.
            std::vector<std::pair<std::string, double>> rows;
            for (const auto& [set, p] : r.dist.entries) {
                std::vector<std::size_t> units;
                for (std::size_t k : set) units.push_back(d.design.perm()[k]);
                std::sort(units.begin(), units.end());
                std::string label;
                for (std::size_t u : units) label += (label.empty() ? "" : ";") + d.ids[u];
                rows.emplace_back(label, p);
            }
            std::sort(rows.begin(), rows.end());
            std::string s = "units,probability\n";
            for (const auto& [label, p] : rows) s += label + "," + fmt(p) + "\n";
            rec.emit("--out", outp, s);
            ordered_json report;
            report["population_size"] = d.ids.size();
            report["sample_size"] = d.design.sample_size();
            report["variant"] = to_string(variant);
            report["support_size"] = rows.size();
            report["max_marginal_error"] = r.max_marginal_error;
            report["tv_between_variants"] = r.tv_between_variants;
            const fs::path rp = report_path.empty() ? fs::path(outp.string() + ".report.json") : fs::path(report_path);
            rec.emit("--report", rp, report.dump(2) + "\n");
        }
        rec.write(manifest_path(manifest_arg, outp));
        return kExitOk;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n" << chosen->help();
        return kExitUsage;
    } catch (const Error& e) {
        err << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

}  // namespace hvs::cli

#endif  // HVS_TOOLS_CLI_HPP
