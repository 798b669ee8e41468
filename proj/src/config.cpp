#include "lorasync/config.hpp"

#include <stdexcept>
#include <string>

namespace lorasync {

namespace {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

}  // namespace

ModemConfig ModemConfig::for_sf(int sf) {
    ModemConfig cfg;
    cfg.sf = sf;
    cfg.m_count = 1 << sf;
    cfg.n_cp = cfg.m_count / 2;
    cfg.validate();
    return cfg;
}

void ModemConfig::validate() const {
    if (sf < 1 || sf > 16) {
        throw std::invalid_argument("spreading factor out of range: " + std::to_string(sf));
    }
    if (m_count != (1 << sf)) {
        throw std::invalid_argument("m_count must equal 2^sf");
    }
    if (bandwidth_hz <= 0.0) {
        throw std::invalid_argument("bandwidth must be positive");
    }
    if (oversample < 2 || oversample % 2 != 0) {
        throw std::invalid_argument("oversample must be an even factor >= 2");
    }
    if (!is_power_of_two(psk_order)) {
        throw std::invalid_argument("psk_order must be a power of two");
    }
    if (srrc_rolloff <= 0.0 || srrc_rolloff >= 1.0) {
        throw std::invalid_argument("srrc_rolloff must lie in (0, 1)");
    }
    if (srrc_order < 1) {
        throw std::invalid_argument("srrc_order must be positive");
    }
    // One SRRC spans srrc_order UI at the baseband rate.
    if (n_cp < srrc_order) {
        throw std::invalid_argument("n_cp shorter than the SRRC span");
    }
    if (n_cp > m_count) {
        throw std::invalid_argument("n_cp longer than one symbol");
    }
    if (n_down < 1 || n_up < 1) {
        throw std::invalid_argument("preamble needs at least one down and one up chirp");
    }
    if (data_symbols_per_burst < 0) {
        throw std::invalid_argument("negative data_symbols_per_burst");
    }
    if (noncoherent_head < 0 || noncoherent_head > data_symbols_per_burst) {
        throw std::invalid_argument("noncoherent_head outside [0, data_symbols_per_burst]");
    }
    if (q_phase < 0.0 || q_freq < 0.0) {
        throw std::invalid_argument("process noise must be non-negative");
    }
}

int ModemConfig::psk_bits() const {
    int bits = 0;
    for (int q = psk_order; q > 1; q >>= 1) {
        ++bits;
    }
    return bits;
}

void check_symbol(const ModemConfig& cfg, const CssSymbol& sym) {
    if (sym.m < 0 || sym.m >= cfg.m_count) {
        throw std::invalid_argument("symbol index m out of range: " + std::to_string(sym.m));
    }
    if (sym.p < 0 || sym.p >= cfg.psk_order) {
        throw std::invalid_argument("phase index p out of range: " + std::to_string(sym.p));
    }
}

}  // namespace lorasync
