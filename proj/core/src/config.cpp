#include "summer/config.hpp"

#include "summer/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace summer {

namespace {

std::string trim(std::string_view s)
{
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b])))
        ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1])))
        --e;
    return std::string(s.substr(b, e - b));
}

std::string upper(std::string s)
{
    for (auto& c : s)
        c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

[[noreturn]] void bad_value(const std::string& key, std::string_view value, const char* what)
{
    throw ConfigError(key + ": cannot parse '" + std::string(value) + "' as " + what);
}

double parse_double(const std::string& key, std::string_view text)
{
    const auto s = trim(text);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        bad_value(key, text, "a number");
    return v;
}

std::uint64_t parse_uint(const std::string& key, std::string_view text)
{
    const auto s = trim(text);
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        bad_value(key, text, "a non-negative integer");
    return v;
}

bool parse_bool(const std::string& key, std::string_view text)
{
    const auto s = trim(text);
    if (s == "true" || s == "1" || s == "yes" || s == "on")
        return true;
    if (s == "false" || s == "0" || s == "no" || s == "off")
        return false;
    bad_value(key, text, "a boolean");
}

std::vector<std::string> parse_list(std::string_view text)
{
    std::vector<std::string> out;
    std::string item;
    std::istringstream in{std::string(text)};
    while (std::getline(in, item, ','))
        if (auto t = trim(item); !t.empty())
            out.push_back(t);
    return out;
}

struct Field {
    const char* section;
    const char* key;
    std::function<void(ModelConfig&, const std::string&, std::string_view)> set;
    std::function<std::string(const ModelConfig&)> get;
};

template <typename T>
Field size_field(const char* section, const char* key, T ModelConfig::*member)
{
    return {section, key,
            [member](ModelConfig& c, const std::string& name, std::string_view v) {
                c.*member = static_cast<T>(parse_uint(name, v));
            },
            [member](const ModelConfig& c) { return fmt::format("{}", c.*member); }};
}

Field double_field(const char* section, const char* key, double ModelConfig::*member)
{
    return {section, key,
            [member](ModelConfig& c, const std::string& name, std::string_view v) {
                c.*member = parse_double(name, v);
            },
            [member](const ModelConfig& c) { return fmt::format("{}", c.*member); }};
}

Field bool_field(const char* section, const char* key, bool ModelConfig::*member)
{
    return {section, key,
            [member](ModelConfig& c, const std::string& name, std::string_view v) {
                c.*member = parse_bool(name, v);
            },
            [member](const ModelConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Field string_field(const char* section, const char* key, std::string ModelConfig::*member)
{
    return {section, key,
            [member](ModelConfig& c, const std::string&, std::string_view v) { c.*member = trim(v); },
            [member](const ModelConfig& c) { return c.*member; }};
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(size_field("model", "d_t", &ModelConfig::d_t));
        f.push_back(size_field("model", "d_a", &ModelConfig::d_a));
        f.push_back(size_field("model", "d_v", &ModelConfig::d_v));
        f.push_back(size_field("model", "d_s", &ModelConfig::d_s));
        f.push_back(size_field("model", "heads", &ModelConfig::heads));
        f.push_back(size_field("model", "d_head", &ModelConfig::d_head));
        f.push_back(size_field("model", "fusion_layers", &ModelConfig::fusion_layers));
        f.push_back(size_field("model", "experts", &ModelConfig::experts));
        f.push_back(size_field("model", "gru_hidden", &ModelConfig::gru_hidden));
        f.push_back(size_field("model", "ffn_hidden", &ModelConfig::ffn_hidden));
        f.push_back(size_field("model", "num_classes", &ModelConfig::num_classes));
        f.push_back(size_field("model", "num_speakers", &ModelConfig::num_speakers));
        f.push_back(size_field("model", "max_positions", &ModelConfig::max_positions));
        f.push_back(size_field("model", "teacher_width", &ModelConfig::teacher_width));
        f.push_back({"model", "labels",
                     [](ModelConfig& c, const std::string&, std::string_view v) { c.labels = parse_list(v); },
                     [](const ModelConfig& c) {
                         std::string out;
                         for (std::size_t i = 0; i < c.labels.size(); ++i)
                             out += (i ? ", " : "") + c.labels[i];
                         return out;
                     }});

        f.push_back(double_field("optim", "lr", &ModelConfig::lr));
        f.push_back(size_field("optim", "batch_size", &ModelConfig::batch_size));
        f.push_back(size_field("optim", "epochs", &ModelConfig::epochs));
        f.push_back(size_field("optim", "teacher_epochs", &ModelConfig::teacher_epochs));
        f.push_back(double_field("optim", "weight_decay", &ModelConfig::weight_decay));
        f.push_back(double_field("optim", "beta1", &ModelConfig::beta1));
        f.push_back(double_field("optim", "beta2", &ModelConfig::beta2));
        f.push_back(double_field("optim", "adam_eps", &ModelConfig::adam_eps));

        f.push_back(double_field("ikd", "kappa1", &ModelConfig::kappa1));
        f.push_back(double_field("ikd", "kappa2", &ModelConfig::kappa2));
        f.push_back(double_field("ikd", "kappa3", &ModelConfig::kappa3));
        f.push_back(double_field("ikd", "epsilon", &ModelConfig::epsilon));
        f.push_back(bool_field("ikd", "literal_smoothing", &ModelConfig::literal_smoothing));

        f.push_back(double_field("sdmoe", "tau", &ModelConfig::tau));
        f.push_back(double_field("sdmoe", "alpha", &ModelConfig::alpha));
        f.push_back(bool_field("sdmoe", "one_sided", &ModelConfig::one_sided));

        f.push_back(bool_field("ablation", "sdmoe", &ModelConfig::sdmoe));
        f.push_back(bool_field("ablation", "hcmf", &ModelConfig::hcmf));
        f.push_back(bool_field("ablation", "ikd", &ModelConfig::ikd));
        f.push_back({"ablation", "branches",
                     [](ModelConfig& c, const std::string& name, std::string_view v) {
                         const auto s = trim(v);
                         if (s == "all")
                             c.branches = BranchMode::All;
                         else if (s == "text")
                             c.branches = BranchMode::Text;
                         else
                             bad_value(name, v, "'all' or 'text'");
                     },
                     [](const ModelConfig& c) {
                         return std::string(c.branches == BranchMode::All ? "all" : "text");
                     }});
        f.push_back(string_field("ablation", "modalities", &ModelConfig::modalities));

        f.push_back(size_field("data", "utterances", &ModelConfig::utterances));
        f.push_back(size_field("data", "min_dialogue", &ModelConfig::min_dialogue));
        f.push_back(size_field("data", "max_dialogue", &ModelConfig::max_dialogue));
        f.push_back(double_field("data", "separation", &ModelConfig::separation));
        f.push_back(double_field("data", "noise", &ModelConfig::noise));
        f.push_back(double_field("data", "audio_signal", &ModelConfig::audio_signal));
        f.push_back(double_field("data", "visual_signal", &ModelConfig::visual_signal));
        f.push_back(double_field("data", "imbalance", &ModelConfig::imbalance));
        f.push_back(double_field("data", "label_noise", &ModelConfig::label_noise));
        f.push_back(double_field("data", "train_fraction", &ModelConfig::train_fraction));
        f.push_back(double_field("data", "val_fraction", &ModelConfig::val_fraction));
        f.push_back(double_field("data", "test_fraction", &ModelConfig::test_fraction));

        f.push_back(size_field("run", "seed", &ModelConfig::seed));

        f.push_back(string_field("paths", "data", &ModelConfig::data_path));
        f.push_back(string_field("paths", "val_data", &ModelConfig::val_path));
        f.push_back(string_field("paths", "teacher_checkpoint", &ModelConfig::teacher_checkpoint));
        return f;
    }();
    return table;
}

const Field& find_field(std::string_view section, std::string_view key)
{
    const Field* hit = nullptr;
    for (const auto& f : fields()) {
        if (f.key != key || (!section.empty() && f.section != section))
            continue;
        if (hit)
            throw ConfigError("ambiguous key '" + std::string(key) + "'; qualify it with a section");
        hit = &f;
    }
    if (!hit) {
        const std::string name = section.empty() ? std::string(key)
                                                 : std::string(section) + "." + std::string(key);
        throw ConfigError("unknown config key '" + name + "'");
    }
    return *hit;
}

[[noreturn]] void violated(const char* key, const char* constraint)
{
    throw ConfigError(std::string(key) + " must be " + constraint);
}

} // namespace

bool ModelConfig::has_text() const { return modalities.find('t') != std::string::npos; }
bool ModelConfig::has_audio() const { return modalities.find('a') != std::string::npos; }
bool ModelConfig::has_visual() const { return modalities.find('v') != std::string::npos; }

std::size_t ModelConfig::modality_dim(char modality) const
{
    switch (modality) {
    case 't':
        return d_t;
    case 'a':
        return d_a;
    case 'v':
        return d_v;
    default:
        throw ConfigError(std::string("unknown modality '") + modality + "'");
    }
}

void ModelConfig::validate() const
{
    const std::pair<const char*, std::size_t> dims[] = {
        {"d_t", d_t},           {"d_a", d_a},
        {"d_v", d_v},           {"d_s", d_s},
        {"heads", heads},       {"d_head", d_head},
        {"fusion_layers", fusion_layers}, {"experts", experts},
        {"gru_hidden", gru_hidden}, {"ffn_hidden", ffn_hidden},
        {"num_speakers", num_speakers}, {"max_positions", max_positions},
        {"batch_size", batch_size},
    };
    for (const auto& [key, value] : dims)
        if (value == 0)
            violated(key, "> 0");
    if (num_classes < 2)
        violated("num_classes", ">= 2");
    if (!labels.empty() && labels.size() != num_classes)
        throw ConfigError("labels lists " + std::to_string(labels.size()) + " names but num_classes is " +
                          std::to_string(num_classes));
    if (!(lr > 0.0))
        violated("lr", "> 0");
    if (!(weight_decay >= 0.0))
        violated("weight_decay", ">= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0))
        violated("beta1", "in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0))
        violated("beta2", "in [0, 1)");
    if (!(adam_eps > 0.0))
        violated("adam_eps", "> 0");
    if (!(kappa1 >= 0.0))
        violated("kappa1", ">= 0");
    if (!(kappa2 >= 0.0))
        violated("kappa2", ">= 0");
    if (!(kappa3 >= 0.0))
        violated("kappa3", ">= 0");
    if (!(epsilon > 0.0 && epsilon < 1.0))
        violated("epsilon", "in (0, 1)");
    if (!(tau > 0.0))
        violated("tau", "> 0");
    if (!(alpha > 0.0))
        violated("alpha", "> 0");
    if (modalities.empty() || modalities.find_first_not_of("tav") != std::string::npos)
        violated("modalities", "a non-empty combination of t, a and v");
    if (branches == BranchMode::Text && !has_text())
        throw ConfigError("branches = text needs the text modality");
    if (utterances == 0)
        violated("utterances", "> 0");
    if (min_dialogue == 0 || max_dialogue < min_dialogue)
        violated("min_dialogue", "> 0 and <= max_dialogue");
    if (!(noise >= 0.0))
        violated("noise", ">= 0");
    if (!(imbalance >= 1.0))
        violated("imbalance", ">= 1");
    if (!(label_noise >= 0.0 && label_noise < 1.0))
        violated("label_noise", "in [0, 1)");
    for (const auto& [key, value] : {std::pair{"train_fraction", train_fraction},
                                     std::pair{"val_fraction", val_fraction},
                                     std::pair{"test_fraction", test_fraction}})
        if (!(value >= 0.0))
            violated(key, ">= 0");
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9)
        throw ConfigError("train_fraction + val_fraction + test_fraction must sum to 1");
}

void set_config_value(ModelConfig& config, std::string_view key, std::string_view value)
{
    const auto dot = key.find('.');
    const std::string_view section = dot == std::string_view::npos ? std::string_view{} : key.substr(0, dot);
    const std::string_view name = dot == std::string_view::npos ? key : key.substr(dot + 1);
    const Field& f = find_field(section, name);
    f.set(config, f.key, value);
}

ModelConfig parse_config(std::string_view text)
{
    ModelConfig config;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        const auto t = trim(line);
        if (t.empty())
            continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
            section = trim(std::string_view(t).substr(1, t.size() - 2));
            const bool known = std::any_of(fields().begin(), fields().end(),
                                           [&](const Field& f) { return f.section == section; });
            if (!known)
                throw ConfigError("unknown config section '" + section + "'");
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(std::string_view(t).substr(0, eq));
        const auto value = std::string_view(t).substr(eq + 1);
        const Field& f = find_field(section, key);
        f.set(config, f.key, value);
    }
    config.validate();
    return config;
}

ModelConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config file '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

void apply_env_overrides(ModelConfig& config, const EnvLookup& lookup)
{
    for (const auto& f : fields()) {
        const std::string var = "SUMMER_" + upper(f.section) + "_" + upper(f.key);
        if (const char* value = lookup(var.c_str()))
            f.set(config, std::string(f.section) + "." + f.key, value);
    }
    config.validate();
}

void apply_env_overrides(ModelConfig& config)
{
    apply_env_overrides(config, [](const char* name) { return std::getenv(name); });
}

std::string to_string(const ModelConfig& config)
{
    std::string out;
    std::string section;
    for (const auto& f : fields()) {
        if (section != f.section) {
            section = f.section;
            out += (out.empty() ? "[" : "\n[") + section + "]\n";
        }
        out += std::string(f.key) + " = " + f.get(config) + "\n";
    }
    return out;
}

std::vector<std::string> config_keys()
{
    std::vector<std::string> keys;
    for (const auto& f : fields())
        keys.push_back(std::string(f.section) + "." + f.key);
    return keys;
}

} // namespace summer
