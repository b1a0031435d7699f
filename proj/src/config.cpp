#include "cslm/config.hpp"

#include <fstream>
#include <stdexcept>

namespace cslm {

namespace {

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace

void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value) {
    try {
        if (key == "regime") config.regime = regime_from_cli_name(value);
        else if (key == "epochs") config.epochs = std::stoi(value);
        else if (key == "batch_size") config.batch_size = std::stoi(value);
        else if (key == "bptt_steps") config.bptt_steps = std::stoi(value);
        else if (key == "emb_dim") config.emb_dim = std::stoi(value);
        else if (key == "hidden_dim") config.hidden_dim = std::stoi(value);
        else if (key == "dropout") config.dropout = std::stod(value);
        else if (key == "initial_lr") config.initial_lr = std::stod(value);
        else if (key == "lr_halving") config.lr_halving = parse_bool(value, key);
        else if (key == "clip_norm") config.clip_norm = std::stod(value);
        else if (key == "lambda_mse") config.lambda_mse = std::stod(value);
        else if (key == "mse_row_alignment") {
            if (value == "frequency_rank") config.mse_row_alignment = MseAlignment::FrequencyRank;
            else if (value == "none") config.mse_row_alignment = MseAlignment::None;
            else throw std::runtime_error("config: mse_row_alignment must be frequency_rank or "
                                          "none, got '" + value + "'");
        }
        else if (key == "seed") config.seed = std::stoull(value);
        else throw std::runtime_error("config: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw std::runtime_error("config: bad value '" + value + "' for key '" + key + "'");
    } catch (const std::out_of_range&) {
        throw std::runtime_error("config: value '" + value + "' out of range for key '" + key + "'");
    }
}

void apply_config_file(TrainConfig& config, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": expected key=value, got '" + t + "'");
        apply_config_entry(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

} // namespace cslm
