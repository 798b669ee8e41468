#pragma once

// File formats: IQ recordings with a key=value sidecar, key=value run
// configuration, and CSV/JSON result emission.

#include <iosfwd>
#include <map>
#include <string>

#include "json.hpp"
#include "lorasync/config.hpp"
#include "lorasync/experiment.hpp"
#include "lorasync/txrx.hpp"

namespace lorasync {

using KeyValues = std::map<std::string, std::string>;

/// Sidecar contents. The four named fields are required on read; any other
/// keys are carried in `extra`.
struct IqMeta {
    double sample_rate_hz = 0.0;
    int sf = 0;
    double bandwidth_hz = 0.0;
    int oversample = 0;
    KeyValues extra;

    static IqMeta for_config(const ModemConfig& cfg);
};

struct IqRecording {
    IqBuffer buffer;
    IqMeta meta;
};

/// "<path>.meta"
std::string sidecar_path(const std::string& path);

/// Little-endian float32 I, Q pairs plus the sidecar. Throws std::runtime_error
/// naming the path on I/O failure.
void write_iq(const std::string& path, const IqBuffer& buf, const IqMeta& meta);
IqRecording read_iq(const std::string& path);

/// Parse `key=value` lines. Blank lines and lines starting with '#' are
/// skipped; surrounding whitespace is trimmed. `source` names the input in errors.
KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues read_key_values(const std::string& path);

/// Apply configuration keys to a spec. `sf` is applied first and resets the
/// SF-dependent defaults; unknown keys throw.
///
/// Modem keys: sf, bandwidth_hz, oversample, psk_order, n_cp, n_down, n_up,
/// data_symbols, srrc_rolloff, srrc_order, noncoherent_head, q_phase, q_freq.
/// Run keys: experiment, ebn0 (comma separated), trials, seed, out,
/// error_budget, ideal_mode (coherent|noncoherent), noiseless (0|1|true|false).
void apply_config(const KeyValues& kv, ExperimentSpec& spec);

enum class ResultFormat { csv, json };

ResultFormat parse_result_format(const std::string& name);

/// BER runs: ebn0_db,snr_db,bursts,bits,bit_errors,ber.
/// MSE runs: ebn0_db,symbol_index,mse_ui2,mse_db.
/// Reals are printed with 17 significant digits so a re-parse is exact.
void write_csv(const SimResult& res, std::ostream& out);

/// Reads back the numeric records of write_csv; the header selects BER or MSE.
SimResult parse_csv(std::istream& in);

nlohmann::json to_json(const ModemConfig& cfg);
nlohmann::json to_json(const SimResult& res);
nlohmann::json to_json(const BurstReport& rep);

/// Write to `path`, or to stdout when the path is empty or "-".
void emit_results(const SimResult& res, ResultFormat format, const std::string& path);

}  // namespace lorasync
