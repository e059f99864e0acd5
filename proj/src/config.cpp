#include "mcigle/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "mcigle/errors.hpp"

namespace mcigle {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

template <typename T>
T parse_number(const std::string& value, const std::string& key) {
    T out{};
    if constexpr (std::is_same_v<T, double>) {
        try {
            std::size_t pos = 0;
            out = std::stod(value, &pos);
            if (pos != value.size()) {
                throw std::invalid_argument("trailing");
            }
        } catch (const std::exception&) {
            throw ConfigError("config: bad numeric value for " + key + ": " + value);
        }
    } else {
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
        if (ec != std::errc() || ptr != value.data() + value.size()) {
            throw ConfigError("config: bad integer value for " + key + ": " + value);
        }
    }
    return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: bad boolean value for " + key + ": " + value);
}

}  // namespace

ProtocolConfig parse_config_text(const std::string& text) {
    ProtocolConfig cfg;
    bool seed_given = false;

    const std::map<std::string, std::function<void(const std::string&)>> setters = {
        {"seed", [&](const std::string& v) { cfg.seed = parse_number<std::uint64_t>(v, "seed"); seed_given = true; }},
        {"num_classes", [&](const std::string& v) { cfg.num_classes = parse_number<int>(v, "num_classes"); }},
        {"classes_per_phase", [&](const std::string& v) { cfg.classes_per_phase = parse_number<int>(v, "classes_per_phase"); }},
        {"nodes_per_class", [&](const std::string& v) { cfg.nodes_per_class = parse_number<int>(v, "nodes_per_class"); }},
        {"test_nodes_per_class", [&](const std::string& v) { cfg.test_nodes_per_class = parse_number<int>(v, "test_nodes_per_class"); }},
        {"d_v", [&](const std::string& v) { cfg.d_v = parse_number<int>(v, "d_v"); }},
        {"d_t", [&](const std::string& v) { cfg.d_t = parse_number<int>(v, "d_t"); }},
        {"noise", [&](const std::string& v) { cfg.noise = parse_number<double>(v, "noise"); }},
        {"class_separation", [&](const std::string& v) { cfg.class_separation = parse_number<double>(v, "class_separation"); }},
        {"sin_amplitude", [&](const std::string& v) { cfg.sin_amplitude = parse_number<double>(v, "sin_amplitude"); }},
        {"sin_freq_min", [&](const std::string& v) { cfg.sin_freq_min = parse_number<double>(v, "sin_freq_min"); }},
        {"sin_freq_max", [&](const std::string& v) { cfg.sin_freq_max = parse_number<double>(v, "sin_freq_max"); }},
        {"p_intra", [&](const std::string& v) { cfg.p_intra = parse_number<double>(v, "p_intra"); }},
        {"p_inter", [&](const std::string& v) { cfg.p_inter = parse_number<double>(v, "p_inter"); }},
        {"gamma", [&](const std::string& v) { cfg.gamma = parse_number<double>(v, "gamma"); }},
        {"beta", [&](const std::string& v) { cfg.beta = parse_number<double>(v, "beta"); }},
        {"lambda1", [&](const std::string& v) { cfg.lambda1 = parse_number<double>(v, "lambda1"); }},
        {"lambda2", [&](const std::string& v) { cfg.lambda2 = parse_number<double>(v, "lambda2"); }},
        {"gamma_comp", [&](const std::string& v) { cfg.gamma_comp = parse_number<double>(v, "gamma_comp"); }},
        {"epsilon", [&](const std::string& v) { cfg.epsilon = parse_number<double>(v, "epsilon"); }},
        {"ot_tol", [&](const std::string& v) { cfg.ot_tol = parse_number<double>(v, "ot_tol"); }},
        {"ot_max_outer", [&](const std::string& v) { cfg.ot_max_outer = parse_number<int>(v, "ot_max_outer"); }},
        {"ot_max_sinkhorn", [&](const std::string& v) { cfg.ot_max_sinkhorn = parse_number<int>(v, "ot_max_sinkhorn"); }},
        {"gnn_layers", [&](const std::string& v) { cfg.gnn_layers = parse_number<int>(v, "gnn_layers"); }},
        {"gnn_hidden", [&](const std::string& v) { cfg.gnn_hidden = parse_number<int>(v, "gnn_hidden"); }},
        {"gnn_epochs", [&](const std::string& v) { cfg.gnn_epochs = parse_number<int>(v, "gnn_epochs"); }},
        {"gnn_lr", [&](const std::string& v) { cfg.gnn_lr = parse_number<double>(v, "gnn_lr"); }},
        {"gnn_momentum", [&](const std::string& v) { cfg.gnn_momentum = parse_number<double>(v, "gnn_momentum"); }},
        {"align_weight", [&](const std::string& v) { cfg.align_weight = parse_number<double>(v, "align_weight"); }},
        {"p_ratio", [&](const std::string& v) { cfg.p_ratio = parse_number<double>(v, "p_ratio"); }},
        {"fan_layers", [&](const std::string& v) { cfg.fan_layers = parse_number<int>(v, "fan_layers"); }},
        {"fan_width", [&](const std::string& v) { cfg.fan_width = parse_number<int>(v, "fan_width"); }},
        {"fan_epochs", [&](const std::string& v) { cfg.fan_epochs = parse_number<int>(v, "fan_epochs"); }},
        {"fan_lr", [&](const std::string& v) { cfg.fan_lr = parse_number<double>(v, "fan_lr"); }},
        {"fan_weight_decay", [&](const std::string& v) { cfg.fan_weight_decay = parse_number<double>(v, "fan_weight_decay"); }},
        {"fan_activation", [&](const std::string& v) { cfg.fan_activation = v; }},
        {"comp_enabled", [&](const std::string& v) { cfg.comp_enabled = parse_bool(v, "comp_enabled"); }},
        {"comp_dim", [&](const std::string& v) { cfg.comp_dim = parse_number<int>(v, "comp_dim"); }},
        {"comp_activation", [&](const std::string& v) { cfg.comp_activation = v; }},
        {"comp_epochs", [&](const std::string& v) { cfg.comp_epochs = parse_number<int>(v, "comp_epochs"); }},
        {"comp_lr", [&](const std::string& v) { cfg.comp_lr = parse_number<double>(v, "comp_lr"); }},
        {"naive_epochs", [&](const std::string& v) { cfg.naive_epochs = parse_number<int>(v, "naive_epochs"); }},
        {"naive_lr", [&](const std::string& v) { cfg.naive_lr = parse_number<double>(v, "naive_lr"); }},
    };

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not of the form key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw ConfigError("config: unknown key '" + key + "' on line " +
                              std::to_string(line_no));
        }
        if (value.empty()) {
            throw ConfigError("config: empty value for key '" + key + "'");
        }
        it->second(value);
    }

    if (!seed_given) {
        throw ConfigError("config: seed is required");
    }
    validate_config(cfg);
    return cfg;
}

ProtocolConfig parse_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void validate_config(const ProtocolConfig& cfg) {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (cfg.num_classes < 1 || cfg.classes_per_phase < 1) {
        fail("num_classes and classes_per_phase must be positive");
    }
    if (cfg.num_classes % cfg.classes_per_phase != 0) {
        fail("num_classes must divide into phases of classes_per_phase");
    }
    if (cfg.nodes_per_class < 1 || cfg.test_nodes_per_class < 1) {
        fail("nodes_per_class and test_nodes_per_class must be positive");
    }
    if (cfg.d_v < 1 || cfg.d_t < 2) {
        fail("d_v must be >= 1 and d_t >= 2 (coordinate 0 carries the sinusoid)");
    }
    if (cfg.noise < 0.0) fail("noise must be nonnegative");
    if (cfg.p_intra < 0.0 || cfg.p_intra > 1.0 || cfg.p_inter < 0.0 || cfg.p_inter > 1.0) {
        fail("edge probabilities must lie in [0,1]");
    }
    if (cfg.sin_freq_min <= 0.0 || cfg.sin_freq_max < cfg.sin_freq_min) {
        fail("sinusoid frequency range is invalid");
    }
    if (!(cfg.gamma > 0.0)) fail("gamma must be positive");
    if (!(cfg.beta > 0.0) || cfg.beta > 1.0) fail("beta must lie in (0,1]");
    if (cfg.lambda1 < 0.0 || cfg.lambda1 > 1.0) fail("lambda1 must lie in [0,1]");
    if (cfg.lambda2 < 0.0 || cfg.lambda2 > 1.0) fail("lambda2 must lie in [0,1]");
    if (!(cfg.epsilon > 0.0)) fail("epsilon must be positive");
    if (!(cfg.ot_tol > 0.0)) fail("ot_tol must be positive");
    if (cfg.ot_max_outer < 1 || cfg.ot_max_sinkhorn < 1) {
        fail("transport iteration budgets must be positive");
    }
    if (cfg.gnn_layers < 1 || cfg.gnn_hidden < 1) fail("graph network shape is invalid");
    if (cfg.gnn_epochs < 0 || cfg.fan_epochs < 0 || cfg.comp_epochs < 0 ||
        cfg.naive_epochs < 0) {
        fail("epoch counts must be nonnegative");
    }
    if (cfg.p_ratio < 0.0 || cfg.p_ratio >= 1.0) fail("p_ratio must lie in [0,1)");
    if (cfg.fan_layers < 1 || cfg.fan_width < 3) fail("periodic stack shape is invalid");
    if (cfg.fan_activation != "gelu" && cfg.fan_activation != "relu") {
        fail("fan_activation must be gelu or relu");
    }
    if (cfg.comp_dim < 1) fail("comp_dim must be positive");
    if (cfg.comp_activation != "tanh" && cfg.comp_activation != "mish") {
        fail("comp_activation must be tanh or mish");
    }
}

}  // namespace mcigle
