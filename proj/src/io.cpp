#include "lorasync/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace lorasync {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size()) {
        throw std::invalid_argument("'" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
}

int parse_int32(const std::string& key, const std::string& v) {
    const long long x = parse_int(key, v);
    if (x < INT32_MIN || x > INT32_MAX) {
        throw std::invalid_argument("'" + key + "': value out of range");
    }
    return static_cast<int>(x);
}

double parse_real(const std::string& key, const std::string& v) {
    if (v.empty()) {
        throw std::invalid_argument("'" + key + "': expected a number, got an empty value");
    }
    char* end = nullptr;
    const double out = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size()) {
        throw std::invalid_argument("'" + key + "': expected a number, got '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") {
        return true;
    }
    if (v == "0" || v == "false" || v == "no") {
        return false;
    }
    throw std::invalid_argument("'" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        out.push_back(trim(field));
    }
    return out;
}

const char* kBerHeader = "ebn0_db,snr_db,bursts,bits,bit_errors,ber";
const char* kMseHeader = "ebn0_db,symbol_index,mse_ui2,mse_db";

}  // namespace

IqMeta IqMeta::for_config(const ModemConfig& cfg) {
    IqMeta m;
    m.sf = cfg.sf;
    m.bandwidth_hz = cfg.bandwidth_hz;
    m.oversample = cfg.oversample;
    m.sample_rate_hz = cfg.bandwidth_hz * cfg.oversample;
    return m;
}

std::string sidecar_path(const std::string& path) { return path + ".meta"; }

void write_iq(const std::string& path, const IqBuffer& buf, const IqMeta& meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    std::vector<std::uint32_t> words;
    words.reserve(2 * buf.size());
    for (const cplx& v : buf.samples) {
        words.push_back(to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v.real()))));
        words.push_back(to_le(std::bit_cast<std::uint32_t>(static_cast<float>(v.imag()))));
    }
    out.write(reinterpret_cast<const char*>(words.data()),
              static_cast<std::streamsize>(words.size() * sizeof(std::uint32_t)));
    if (!out) {
        throw std::runtime_error("write failed for '" + path + "'");
    }

    const std::string side = sidecar_path(path);
    std::ofstream m(side, std::ios::trunc);
    if (!m) {
        throw std::runtime_error("cannot open '" + side + "' for writing");
    }
    m << "sample_rate_hz=" << fmt_real(meta.sample_rate_hz) << '\n'
      << "sf=" << meta.sf << '\n'
      << "bandwidth_hz=" << fmt_real(meta.bandwidth_hz) << '\n'
      << "oversample=" << meta.oversample << '\n';
    for (const auto& [k, v] : meta.extra) {
        m << k << '=' << v << '\n';
    }
    if (!m) {
        throw std::runtime_error("write failed for '" + side + "'");
    }
}

IqRecording read_iq(const std::string& path) {
    IqRecording rec;
    const std::string side = sidecar_path(path);
    KeyValues kv;
    try {
        kv = read_key_values(side);
        auto take = [&](const char* key) {
            const auto it = kv.find(key);
            if (it == kv.end()) {
                throw std::invalid_argument(std::string("missing required key '") + key + "'");
            }
            std::string v = it->second;
            kv.erase(it);
            return v;
        };
        rec.meta.sample_rate_hz = parse_real("sample_rate_hz", take("sample_rate_hz"));
        rec.meta.sf = parse_int32("sf", take("sf"));
        rec.meta.bandwidth_hz = parse_real("bandwidth_hz", take("bandwidth_hz"));
        rec.meta.oversample = parse_int32("oversample", take("oversample"));
        rec.meta.extra = std::move(kv);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error("malformed sidecar '" + side + "': " + e.what());
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() % (2 * sizeof(float)) != 0) {
        throw std::runtime_error("truncated payload in '" + path + "': " +
                                 std::to_string(bytes.size()) +
                                 " bytes is not a whole number of I/Q float pairs");
    }
    const std::size_t n = bytes.size() / (2 * sizeof(float));
    rec.buffer.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t w[2];
        std::memcpy(w, bytes.data() + i * 8, 8);
        const float re = std::bit_cast<float>(to_le(w[0]));
        const float im = std::bit_cast<float>(to_le(w[1]));
        rec.buffer.samples[i] = {re, im};
    }
    rec.buffer.rate = rec.meta.oversample > 2 ? SampleRate::oversampled_Lx
                                              : SampleRate::half_shift_2x;
    if (rec.meta.oversample == 1) {
        rec.buffer.rate = SampleRate::baseband_1x;
    }
    return rec;
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
    KeyValues kv;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw std::invalid_argument(source + ":" + std::to_string(line_no) +
                                        ": expected key=value, got '" + t + "'");
        }
        kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return kv;
}

KeyValues read_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    return parse_key_values(in, path);
}

void apply_config(const KeyValues& kv, ExperimentSpec& spec) {
    if (const auto it = kv.find("sf"); it != kv.end()) {
        const int sf = parse_int32("sf", it->second);
        const ModemConfig fresh = ModemConfig::for_sf(sf);
        ModemConfig& c = spec.cfg;
        c.sf = fresh.sf;
        c.m_count = fresh.m_count;
        c.n_cp = fresh.n_cp;
    }
    ModemConfig& c = spec.cfg;
    for (const auto& [key, v] : kv) {
        if (key == "sf") {
            continue;
        } else if (key == "bandwidth_hz") {
            c.bandwidth_hz = parse_real(key, v);
        } else if (key == "oversample") {
            c.oversample = parse_int32(key, v);
        } else if (key == "psk_order") {
            c.psk_order = parse_int32(key, v);
        } else if (key == "n_cp") {
            c.n_cp = parse_int32(key, v);
        } else if (key == "n_down") {
            c.n_down = parse_int32(key, v);
        } else if (key == "n_up") {
            c.n_up = parse_int32(key, v);
        } else if (key == "data_symbols") {
            c.data_symbols_per_burst = parse_int32(key, v);
        } else if (key == "srrc_rolloff") {
            c.srrc_rolloff = parse_real(key, v);
        } else if (key == "srrc_order") {
            c.srrc_order = parse_int32(key, v);
        } else if (key == "noncoherent_head") {
            c.noncoherent_head = parse_int32(key, v);
        } else if (key == "q_phase") {
            c.q_phase = parse_real(key, v);
        } else if (key == "q_freq") {
            c.q_freq = parse_real(key, v);
        } else if (key == "experiment") {
            spec.kind = parse_experiment_kind(v);
        } else if (key == "ebn0") {
            spec.ebn0_grid_db.clear();
            for (const std::string& f : split_csv_line(v)) {
                spec.ebn0_grid_db.push_back(parse_real(key, f));
            }
        } else if (key == "trials") {
            spec.trials = static_cast<long>(parse_int(key, v));
        } else if (key == "seed") {
            spec.master_seed = static_cast<std::uint64_t>(parse_int(key, v));
        } else if (key == "out") {
            spec.output_path = v;
        } else if (key == "error_budget") {
            spec.error_budget = static_cast<long>(parse_int(key, v));
        } else if (key == "ideal_mode") {
            if (v == "coherent") {
                spec.ideal_mode = DetectionMode::coherent;
            } else if (v == "noncoherent") {
                spec.ideal_mode = DetectionMode::noncoherent;
            } else {
                throw std::invalid_argument("'ideal_mode': expected coherent or noncoherent");
            }
        } else if (key == "noiseless") {
            spec.noiseless = parse_bool(key, v);
        } else {
            throw std::invalid_argument("unknown configuration key '" + key + "'");
        }
    }
}

ResultFormat parse_result_format(const std::string& name) {
    if (name == "csv") {
        return ResultFormat::csv;
    }
    if (name == "json") {
        return ResultFormat::json;
    }
    throw std::invalid_argument("unknown result format '" + name + "'");
}

void write_csv(const SimResult& res, std::ostream& out) {
    if (is_ber(res.kind)) {
        out << kBerHeader << '\n';
        for (const BerPoint& p : res.ber) {
            out << fmt_real(p.ebn0_db) << ',' << fmt_real(p.snr_db) << ',' << p.bursts << ','
                << p.bits << ',' << p.bit_errors << ',' << fmt_real(p.ber) << '\n';
        }
        return;
    }
    out << kMseHeader << '\n';
    for (const MsePoint& p : res.mse) {
        out << fmt_real(p.ebn0_db) << ',' << p.symbol_index << ',' << fmt_real(p.mse_ui2) << ','
            << fmt_real(p.mse_db) << '\n';
    }
}

SimResult parse_csv(std::istream& in) {
    SimResult res;
    std::string line;
    if (!std::getline(in, line)) {
        throw std::invalid_argument("parse_csv: empty input");
    }
    const std::string header = trim(line);
    const bool ber = header == kBerHeader;
    if (!ber && header != kMseHeader) {
        throw std::invalid_argument("parse_csv: unrecognized header '" + header + "'");
    }
    res.kind = ber ? ExperimentKind::ber_noncoherent : ExperimentKind::timing_mse;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        const auto f = split_csv_line(line);
        if (f.size() != (ber ? 6u : 4u)) {
            throw std::invalid_argument("parse_csv: wrong field count in '" + line + "'");
        }
        if (ber) {
            BerPoint p;
            p.ebn0_db = parse_real("ebn0_db", f[0]);
            p.snr_db = parse_real("snr_db", f[1]);
            p.bursts = static_cast<long>(parse_int("bursts", f[2]));
            p.bits = static_cast<long>(parse_int("bits", f[3]));
            p.bit_errors = static_cast<long>(parse_int("bit_errors", f[4]));
            p.ber = parse_real("ber", f[5]);
            res.ber.push_back(p);
        } else {
            MsePoint p;
            p.ebn0_db = parse_real("ebn0_db", f[0]);
            p.symbol_index = parse_int32("symbol_index", f[1]);
            p.mse_ui2 = parse_real("mse_ui2", f[2]);
            p.mse_db = parse_real("mse_db", f[3]);
            res.mse.push_back(p);
        }
    }
    return res;
}

nlohmann::json to_json(const ModemConfig& cfg) {
    return {
        {"sf", cfg.sf},
        {"m_count", cfg.m_count},
        {"bandwidth_hz", cfg.bandwidth_hz},
        {"oversample", cfg.oversample},
        {"psk_order", cfg.psk_order},
        {"n_cp", cfg.n_cp},
        {"n_down", cfg.n_down},
        {"n_up", cfg.n_up},
        {"data_symbols", cfg.data_symbols_per_burst},
        {"srrc_rolloff", cfg.srrc_rolloff},
        {"srrc_order", cfg.srrc_order},
        {"noncoherent_head", cfg.noncoherent_head},
        {"q_phase", cfg.q_phase},
        {"q_freq", cfg.q_freq},
    };
}

nlohmann::json to_json(const SimResult& res) {
    nlohmann::json j;
    j["experiment"] = to_string(res.kind);
    j["master_seed"] = res.master_seed;
    j["trials"] = res.trials;
    j["wall_seconds"] = res.wall_seconds;
    j["config"] = to_json(res.cfg);
    nlohmann::json pts = nlohmann::json::array();
    if (is_ber(res.kind)) {
        for (const BerPoint& p : res.ber) {
            pts.push_back({{"ebn0_db", p.ebn0_db},
                           {"snr_db", p.snr_db},
                           {"bursts", p.bursts},
                           {"bits", p.bits},
                           {"bit_errors", p.bit_errors},
                           {"ber", p.ber},
                           {"sync_failures", p.sync_failures}});
        }
    } else {
        for (const MsePoint& p : res.mse) {
            pts.push_back({{"ebn0_db", p.ebn0_db},
                           {"symbol_index", p.symbol_index},
                           {"mse_ui2", p.mse_ui2},
                           {"mse_db", p.mse_db}});
        }
    }
    j["points"] = std::move(pts);
    return j;
}

nlohmann::json to_json(const BurstReport& rep) {
    nlohmann::json j;
    nlohmann::json decoded = nlohmann::json::array();
    for (const CssSymbol& s : rep.decoded) {
        decoded.push_back({s.m, s.p});
    }
    nlohmann::json trace = nlohmann::json::array();
    for (const SyncTraceEntry& e : rep.trace) {
        trace.push_back({{"tau_hat", e.tau_hat},
                         {"f_hat", e.f_hat},
                         {"phi_hat", e.phi_hat},
                         {"e_tau", e.e_tau},
                         {"e_phi", e.e_phi}});
    }
    j["decoded"] = std::move(decoded);
    j["sync_trace"] = std::move(trace);
    j["coarse"] = {{"tau_coarse", rep.coarse.tau_coarse},
                   {"epsilon_coarse", rep.coarse.epsilon_coarse},
                   {"tau_down", rep.coarse.tau_down},
                   {"tau_up", rep.coarse.tau_up}};
    j["sync_failure"] = rep.sync_failure;
    j["psnr_estimate_db"] = rep.psnr_estimate_db;
    j["bit_errors"] = rep.bit_errors ? nlohmann::json(*rep.bit_errors) : nlohmann::json(nullptr);
    j["symbol_errors"] =
        rep.symbol_errors ? nlohmann::json(*rep.symbol_errors) : nlohmann::json(nullptr);
    j["bits_sent"] = rep.bits_sent;
    return j;
}

void emit_results(const SimResult& res, ResultFormat format, const std::string& path) {
    auto write = [&](std::ostream& out) {
        if (format == ResultFormat::csv) {
            write_csv(res, out);
        } else {
            out << to_json(res).dump(2) << '\n';
        }
    };
    if (path.empty() || path == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    write(out);
    if (!out) {
        throw std::runtime_error("write failed for '" + path + "'");
    }
}

}  // namespace lorasync
